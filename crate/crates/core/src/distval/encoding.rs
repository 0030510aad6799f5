use serde::{Deserialize, Serialize};

use crate::gridworld::{GridMap, State};
use crate::Scalar;

/// Feature encoding of a `(state, goal)` pair for the MLP backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoder {
    /// `(sx, sy, gx, gy)` each scaled to `[0, 1]` by the map extent.
    Coordinates,
    /// One-hot cell of the state followed by one-hot cell of the goal.
    OneHot,
    /// Scaled state coordinates, goal offset, and wall patches of side
    /// `2 * radius + 1` centred on the state and on the goal. Lets one network
    /// serve many layouts.
    LocalView { radius: u32 },
}

impl Default for Encoder {
    fn default() -> Self {
        Encoder::Coordinates
    }
}

impl Encoder {
    pub fn tag(self) -> (u8, u32) {
        match self {
            Encoder::Coordinates => (1, 0),
            Encoder::OneHot => (2, 0),
            Encoder::LocalView { radius } => (3, radius),
        }
    }

    pub fn from_tag(tag: u8, param: u32) -> Option<Self> {
        match tag {
            1 => Some(Encoder::Coordinates),
            2 => Some(Encoder::OneHot),
            3 => Some(Encoder::LocalView { radius: param }),
            _ => None,
        }
    }

    pub fn input_dim(self, width: usize, height: usize) -> usize {
        match self {
            Encoder::Coordinates => 4,
            Encoder::OneHot => 2 * width * height,
            Encoder::LocalView { radius } => {
                let side = 2 * radius as usize + 1;
                4 + 2 * side * side
            }
        }
    }

    /// Fills `out` (length [`Encoder::input_dim`]) with the features of `(s, g)`.
    pub fn encode<T: Scalar>(self, map: &GridMap, s: State, g: State, out: &mut [T]) {
        let sx = T::of_usize(map.width() - 1);
        let sy = T::of_usize(map.height() - 1);
        match self {
            Encoder::Coordinates => {
                out[0] = T::of_usize(s.x) / sx;
                out[1] = T::of_usize(s.y) / sy;
                out[2] = T::of_usize(g.x) / sx;
                out[3] = T::of_usize(g.y) / sy;
            }
            Encoder::OneHot => {
                out.fill(T::zero());
                out[map.index(s)] = T::one();
                out[map.num_cells() + map.index(g)] = T::one();
            }
            Encoder::LocalView { radius } => {
                out[0] = T::of_usize(s.x) / sx;
                out[1] = T::of_usize(s.y) / sy;
                out[2] = (T::of_usize(g.x) - T::of_usize(s.x)) / sx;
                out[3] = (T::of_usize(g.y) - T::of_usize(s.y)) / sy;
                let r = radius as i64;
                let side = (2 * r + 1) as usize;
                let (patch_s, patch_g) = out[4..].split_at_mut(side * side);
                for (center, patch) in [(s, patch_s), (g, patch_g)] {
                    let mut k = 0;
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let wall = map.is_wall(center.x as i64 + dx, center.y as i64 + dy);
                            patch[k] = if wall { T::one() } else { T::zero() };
                            k += 1;
                        }
                    }
                }
            }
        }
    }
}
