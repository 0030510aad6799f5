use rustc_hash::FxHashMap;

use crate::gridworld::{Action, GridMap, State};
use crate::Scalar;

/// Sparse `(state, goal, action) -> head row` table. Rows that were never
/// written read as `init`, so memory grows only with the visited triples.
#[derive(Clone, Debug, PartialEq)]
pub struct Table<T> {
    row_len: usize,
    init: T,
    rows: FxHashMap<u64, Box<[T]>>,
}

// cell indices stay below 2^31 (map sizes are capped well under that)
pub(crate) fn join_key(s: u32, g: u32, a: u8) -> u64 {
    ((s as u64) << 33) | ((g as u64) << 2) | a as u64
}

pub(crate) fn entry_key(map: &GridMap, s: State, g: State, a: Action) -> u64 {
    join_key(map.index(s) as u32, map.index(g) as u32, a.index() as u8)
}

pub(crate) fn split_key(key: u64) -> (u32, u32, u8) {
    ((key >> 33) as u32, ((key >> 2) & 0x7fff_ffff) as u32, (key & 3) as u8)
}

impl<T: Scalar> Table<T> {
    pub fn new(row_len: usize, init: T) -> Self {
        Self { row_len, init, rows: FxHashMap::default() }
    }

    pub fn row_len(&self) -> usize {
        self.row_len
    }

    pub fn init(&self) -> T {
        self.init
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, key: u64) -> Option<&[T]> {
        self.rows.get(&key).map(|r| &r[..])
    }

    pub fn get_or_init(&mut self, key: u64) -> &mut [T] {
        let (len, init) = (self.row_len, self.init);
        self.rows.entry(key).or_insert_with(|| vec![init; len].into_boxed_slice())
    }

    pub fn insert(&mut self, key: u64, row: Vec<T>) {
        debug_assert_eq!(row.len(), self.row_len);
        self.rows.insert(key, row.into_boxed_slice());
    }

    /// Keys in ascending order, for deterministic serialization.
    pub fn sorted_keys(&self) -> Vec<u64> {
        let mut keys: Vec<u64> = self.rows.keys().copied().collect();
        keys.sort_unstable();
        keys
    }

    /// `self <- (1 - tau) * self + tau * source` over every row of `source`.
    pub fn soft_update_from(&mut self, source: &Table<T>, tau: T) {
        for (&key, row) in &source.rows {
            let dst = self.get_or_init(key);
            for (d, &s) in dst.iter_mut().zip(row.iter()) {
                *d = (T::one() - tau) * *d + tau * s;
            }
        }
    }
}

/// Tabular backend bound to one map's dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Tabular<T> {
    pub(crate) width: usize,
    pub(crate) height: usize,
    pub(crate) online: Table<T>,
    /// `None` while the target tracks the online table exactly (`tau = 1`, period 1).
    pub(crate) target: Option<Table<T>>,
}

impl<T: Scalar> Tabular<T> {
    pub fn new(map: &GridMap, head_width: usize, init: T, separate_target: bool) -> Self {
        let online = Table::new(head_width, init);
        let target = separate_target.then(|| online.clone());
        Self { width: map.width(), height: map.height(), online, target }
    }

    pub fn online(&self) -> &Table<T> {
        &self.online
    }

    pub fn target(&self) -> &Table<T> {
        self.target.as_ref().unwrap_or(&self.online)
    }

    pub fn table(&self, use_target: bool) -> &Table<T> {
        if use_target {
            self.target()
        } else {
            &self.online
        }
    }

    pub fn fits(&self, map: &GridMap) -> bool {
        map.width() == self.width && map.height() == self.height
    }
}
