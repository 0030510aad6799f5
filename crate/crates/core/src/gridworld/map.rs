//! Occupancy grids: built-in layouts, the procedural maze generator and the
//! plain-text map format.
//!
//! Text format: a header line `width height`, then `height` rows of `width`
//! characters where `#` is a wall and `.` is free.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::State;
use crate::error::{Error, Result};

/// An immutable occupancy grid. Border cells are always walls.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    name: String,
    free: Vec<State>,
}

impl GridMap {
    /// Builds a map from a row-major wall mask.
    pub fn new(name: impl Into<String>, width: usize, height: usize, walls: Vec<bool>) -> Result<Self> {
        let name = name.into();
        if width < 3 || height < 3 {
            return Err(Error::InvalidMap(format!("{name}: {width}x{height} is too small")));
        }
        if walls.len() != width * height {
            return Err(Error::InvalidMap(format!(
                "{name}: expected {} cells, got {}",
                width * height,
                walls.len()
            )));
        }
        for x in 0..width {
            for y in 0..height {
                let border = x == 0 || y == 0 || x == width - 1 || y == height - 1;
                if border && !walls[y * width + x] {
                    return Err(Error::InvalidMap(format!("{name}: border cell ({x}, {y}) is free")));
                }
            }
        }
        let free: Vec<State> = (0..height)
            .flat_map(|y| (0..width).map(move |x| State::new(x, y)))
            .filter(|s| !walls[s.y * width + s.x])
            .collect();
        if free.len() < 2 {
            return Err(Error::InvalidMap(format!("{name}: fewer than two free cells")));
        }
        Ok(Self { width, height, walls, name, free })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    /// Free cells in row-major order.
    pub fn free_cells(&self) -> &[State] {
        &self.free
    }

    /// Row-major cell index.
    pub fn index(&self, s: State) -> usize {
        s.y * self.width + s.x
    }

    pub fn state_at(&self, index: usize) -> State {
        State::new(index % self.width, index / self.width)
    }

    /// Walls and out-of-bounds coordinates are both blocked.
    pub fn is_wall(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return true;
        }
        self.walls[y as usize * self.width + x as usize]
    }

    pub fn is_free(&self, s: State) -> bool {
        !self.is_wall(s.x as i64, s.y as i64)
    }

    pub fn check_state(&self, s: State) -> Result<()> {
        if self.is_free(s) {
            Ok(())
        } else {
            Err(Error::InvalidState { x: s.x, y: s.y, map: self.name.clone() })
        }
    }

    pub fn walls(&self) -> &[bool] {
        &self.walls
    }

    /// Parses the text format. `name` labels the resulting map.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self> {
        let name = name.into();
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidMap(format!("{name}: empty map file")))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidMap(format!("{name}: bad header `{header}`: {e}")))?;
        let [width, height] = dims[..] else {
            return Err(Error::InvalidMap(format!("{name}: header must be `width height`")));
        };
        let mut walls = Vec::with_capacity(width * height);
        let mut rows = 0;
        for line in lines {
            let line = line.trim_end();
            if line.chars().count() != width {
                return Err(Error::InvalidMap(format!(
                    "{name}: row {rows} has {} characters, expected {width}",
                    line.chars().count()
                )));
            }
            for c in line.chars() {
                match c {
                    '#' => walls.push(true),
                    '.' => walls.push(false),
                    other => {
                        return Err(Error::InvalidMap(format!("{name}: unexpected character `{other}`")))
                    }
                }
            }
            rows += 1;
        }
        if rows != height {
            return Err(Error::InvalidMap(format!("{name}: {rows} rows, expected {height}")));
        }
        Self::new(name, width, height, walls)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".to_string());
        Self::parse(name, &text)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(if self.walls[y * self.width + x] { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Names accepted by [`builtin_map`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapName {
    UMaze,
    FourRooms,
    LargeFourRooms,
    RandomMaze { seed: u64, size: usize },
}

impl FromStr for MapName {
    type Err = Error;

    /// `u_maze`, `four_rooms`, `large_four_rooms` or `random_maze:SEED:SIZE`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u_maze" => Ok(MapName::UMaze),
            "four_rooms" => Ok(MapName::FourRooms),
            "large_four_rooms" => Ok(MapName::LargeFourRooms),
            other => {
                let parts: Vec<&str> = other.split(':').collect();
                match parts[..] {
                    ["random_maze", seed, size] => {
                        let seed = seed.parse().map_err(|_| Error::UnknownMap(other.to_string()))?;
                        let size = size.parse().map_err(|_| Error::UnknownMap(other.to_string()))?;
                        Ok(MapName::RandomMaze { seed, size })
                    }
                    _ => Err(Error::UnknownMap(other.to_string())),
                }
            }
        }
    }
}

impl fmt::Display for MapName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapName::UMaze => f.write_str("u_maze"),
            MapName::FourRooms => f.write_str("four_rooms"),
            MapName::LargeFourRooms => f.write_str("large_four_rooms"),
            MapName::RandomMaze { seed, size } => write!(f, "random_maze:{seed}:{size}"),
        }
    }
}

/// Builds one of the named layouts.
pub fn builtin_map(name: &str) -> Result<GridMap> {
    match name.parse::<MapName>()? {
        MapName::UMaze => Ok(u_maze()),
        MapName::FourRooms => Ok(four_rooms(21, &[5, 15])),
        MapName::LargeFourRooms => Ok(four_rooms(55, &[13, 41])),
        MapName::RandomMaze { seed, size } => random_maze(seed, size),
    }
}

fn bordered(size: usize) -> Vec<bool> {
    let mut walls = vec![false; size * size];
    for i in 0..size {
        walls[i] = true;
        walls[(size - 1) * size + i] = true;
        walls[i * size] = true;
        walls[i * size + size - 1] = true;
    }
    walls
}

/// 15x15 U-shaped corridor: two three-cell-wide arms joined along the top.
/// The arm tips are 10 cells apart in a straight line but 30 steps apart by path.
fn u_maze() -> GridMap {
    let size = 15;
    let mut walls = bordered(size);
    for y in 4..size - 1 {
        for x in 4..=10 {
            walls[y * size + x] = true;
        }
    }
    GridMap::new("u_maze", size, size, walls).expect("u_maze layout is valid")
}

/// Square four-room layout with a cross of walls through the middle and one
/// doorway per wall segment at the given offsets.
fn four_rooms(size: usize, doors: &[usize; 2]) -> GridMap {
    let mut walls = bordered(size);
    let mid = size / 2;
    for i in 0..size {
        walls[i * size + mid] = true;
        walls[mid * size + i] = true;
    }
    for &d in doors {
        // vertical wall doorways
        walls[d * size + mid] = false;
        // horizontal wall doorways
        walls[mid * size + d] = false;
    }
    let name = if size == 21 { "four_rooms" } else { "large_four_rooms" };
    GridMap::new(name, size, size, walls).expect("four-room layout is valid")
}

/// Procedural maze: depth-first carving on the odd-coordinate lattice, then a
/// few extra walls knocked out to create loops. Free space is always connected,
/// and the output depends only on `(seed, size)`.
pub fn random_maze(seed: u64, size: usize) -> Result<GridMap> {
    if size < 5 || size % 2 == 0 {
        return Err(Error::InvalidMap(format!("random_maze size must be odd and >= 5, got {size}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut walls = vec![true; size * size];
    let cells = (size - 1) / 2;
    let cell_xy = |cx: usize, cy: usize| (2 * cx + 1, 2 * cy + 1);
    let mut visited = vec![false; cells * cells];
    let mut stack = vec![(0usize, 0usize)];
    visited[0] = true;
    walls[size + 1] = false;
    while let Some(&(cx, cy)) = stack.last() {
        let mut next: Vec<(usize, usize)> = Vec::with_capacity(4);
        if cx > 0 && !visited[cy * cells + cx - 1] {
            next.push((cx - 1, cy));
        }
        if cx + 1 < cells && !visited[cy * cells + cx + 1] {
            next.push((cx + 1, cy));
        }
        if cy > 0 && !visited[(cy - 1) * cells + cx] {
            next.push((cx, cy - 1));
        }
        if cy + 1 < cells && !visited[(cy + 1) * cells + cx] {
            next.push((cx, cy + 1));
        }
        match next.choose(&mut rng) {
            Some(&(nx, ny)) => {
                visited[ny * cells + nx] = true;
                let (ax, ay) = cell_xy(cx, cy);
                let (bx, by) = cell_xy(nx, ny);
                walls[by * size + bx] = false;
                walls[((ay + by) / 2) * size + (ax + bx) / 2] = false;
                stack.push((nx, ny));
            }
            None => {
                stack.pop();
            }
        }
    }
    // Interior walls that separate two carved cells, i.e. candidates for loops.
    let mut separators: Vec<(usize, usize)> = Vec::new();
    for y in 1..size - 1 {
        for x in 1..size - 1 {
            if !walls[y * size + x] {
                continue;
            }
            let horizontal = x % 2 == 0 && y % 2 == 1;
            let vertical = x % 2 == 1 && y % 2 == 0;
            if horizontal || vertical {
                separators.push((x, y));
            }
        }
    }
    let loops = cells * cells / 8;
    for _ in 0..loops.min(separators.len()) {
        let i = rng.gen_range(0..separators.len());
        let (x, y) = separators.swap_remove(i);
        walls[y * size + x] = false;
    }
    GridMap::new(format!("random_maze:{seed}:{size}"), size, size, walls)
}
