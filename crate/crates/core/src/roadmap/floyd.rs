use crate::Scalar;

/// Dense `n x n` matrix of step distances; `T::infinity()` marks absent edges.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DistanceMatrix<T> {
    /// All entries infinite except a zero diagonal.
    pub fn new(n: usize) -> Self {
        let mut data = vec![T::infinity(); n * n];
        for i in 0..n {
            data[i * n + i] = T::zero();
        }
        Self { n, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "distance matrix must be square");
            data.extend_from_slice(r);
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Next-hop table for path reconstruction: `next(i, j)` is the node after `i`
/// on a shortest `i -> j` path.
#[derive(Clone, Debug, PartialEq)]
pub struct Successors {
    n: usize,
    next: Vec<u32>,
}

const NONE: u32 = u32::MAX;

impl Successors {
    pub fn next(&self, i: usize, j: usize) -> Option<usize> {
        let v = self.next[i * self.n + j];
        (v != NONE).then_some(v as usize)
    }

    /// Node sequence `i, ..., j`, or `None` when `j` is unreachable from `i`.
    pub fn path(&self, i: usize, j: usize) -> Option<Vec<usize>> {
        let mut path = vec![i];
        let mut cur = i;
        while cur != j {
            cur = self.next(cur, j)?;
            path.push(cur);
            if path.len() > self.n {
                return None;
            }
        }
        Some(path)
    }
}

/// All-pairs shortest paths over nonnegative weights. The diagonal is forced
/// to zero. Runs in `O(n^3)` time; rows with an infinite `d(i, k)` are skipped.
pub fn floyd_warshall<T: Scalar>(weights: &DistanceMatrix<T>) -> (DistanceMatrix<T>, Successors) {
    let n = weights.n;
    let mut dist = weights.clone();
    let mut next = vec![NONE; n * n];
    for i in 0..n {
        dist.data[i * n + i] = T::zero();
        for j in 0..n {
            if dist.data[i * n + j].is_finite() {
                next[i * n + j] = j as u32;
            }
        }
    }
    let mut row_k = vec![T::zero(); n];
    for k in 0..n {
        row_k.copy_from_slice(dist.row(k));
        for i in 0..n {
            if i == k {
                continue;
            }
            let dik = dist.data[i * n + k];
            if !dik.is_finite() {
                continue;
            }
            let hop = next[i * n + k];
            let di = &mut dist.data[i * n..(i + 1) * n];
            let ni = &mut next[i * n..(i + 1) * n];
            for j in 0..n {
                let cand = dik + row_k[j];
                if cand < di[j] {
                    di[j] = cand;
                    ni[j] = hop;
                }
            }
        }
    }
    (dist, Successors { n, next })
}
