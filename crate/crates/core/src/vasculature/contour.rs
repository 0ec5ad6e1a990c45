//! Border following (Suzuki–Abe) over 8-connected foreground.
//!
//! Every outer border and every hole border is traced as a closed chain of
//! boundary pixels. Axial steps count 1, diagonal steps √2.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::imaging::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BorderKind {
    Outer,
    Hole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Border {
    pub kind: BorderKind,
    /// Boundary pixels in tracing order; the closing step back to the first is implied.
    pub points: Vec<(usize, usize)>,
    pub length: f64,
}

/// Clockwise on screen (y down), starting west.
const DIRS: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn dir_index(dx: i64, dy: i64) -> usize {
    DIRS.iter()
        .position(|&d| d == (dx, dy))
        .expect("unit offset")
}

struct Padded {
    w: i64,
    values: Vec<i32>,
}

impl Padded {
    fn get(&self, x: i64, y: i64) -> i32 {
        self.values[(y * self.w + x) as usize]
    }

    fn set(&mut self, x: i64, y: i64, v: i32) {
        self.values[(y * self.w + x) as usize] = v;
    }
}

/// Traces all borders of the mask.
pub fn find_borders(mask: &BinaryMask) -> Vec<Border> {
    let (w, h) = (mask.width() as i64 + 2, mask.height() as i64 + 2);
    let mut f = Padded {
        w,
        values: vec![0; (w * h) as usize],
    };
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                f.set(x as i64 + 1, y as i64 + 1, 1);
            }
        }
    }

    let mut borders = Vec::new();
    let mut nbd = 1i32;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let v = f.get(x, y);
            if v == 0 {
                continue;
            }
            let (kind, from) = if v == 1 && f.get(x - 1, y) == 0 {
                (BorderKind::Outer, (x - 1, y))
            } else if v >= 1 && f.get(x + 1, y) == 0 {
                (BorderKind::Hole, (x + 1, y))
            } else {
                continue;
            };
            nbd += 1;
            let (points, length) = follow(&mut f, (x, y), from, nbd);
            borders.push(Border {
                kind,
                points: points
                    .into_iter()
                    .map(|(px, py)| ((px - 1) as usize, (py - 1) as usize))
                    .collect(),
                length,
            });
        }
    }
    borders
}

fn follow(f: &mut Padded, start: (i64, i64), from: (i64, i64), nbd: i32) -> (Vec<(i64, i64)>, f64) {
    let start_dir = dir_index(from.0 - start.0, from.1 - start.1);
    let first = (0..8)
        .map(|k| DIRS[(start_dir + k) % 8])
        .map(|(dx, dy)| (start.0 + dx, start.1 + dy))
        .find(|&(px, py)| f.get(px, py) != 0);
    let Some(first) = first else {
        // Isolated pixel: one-pixel contour, length 1 by convention.
        f.set(start.0, start.1, -nbd);
        return (vec![start], 1.0);
    };

    let mut points = Vec::new();
    let mut length = 0.0;
    let mut prev = first;
    let mut cur = start;
    loop {
        points.push(cur);
        let back = dir_index(prev.0 - cur.0, prev.1 - cur.1);
        let mut east_examined_empty = false;
        let mut next = None;
        for k in 1..=8 {
            let d = (back + 8 - k) % 8;
            let (dx, dy) = DIRS[d];
            let q = (cur.0 + dx, cur.1 + dy);
            if f.get(q.0, q.1) != 0 {
                next = Some(q);
                break;
            }
            if (dx, dy) == (1, 0) {
                east_examined_empty = true;
            }
        }
        let next = next.expect("traced pixel has a neighbour");
        if east_examined_empty {
            f.set(cur.0, cur.1, -nbd);
        } else if f.get(cur.0, cur.1) == 1 {
            f.set(cur.0, cur.1, nbd);
        }
        length += if next.0 != cur.0 && next.1 != cur.1 {
            SQRT_2
        } else {
            1.0
        };
        if next == start && cur == first {
            break;
        }
        prev = cur;
        cur = next;
    }
    (points, length)
}

/// Total chain-code length of all outer and hole borders.
pub fn contour_length(mask: &BinaryMask) -> f64 {
    find_borders(mask).iter().map(|b| b.length).sum()
}
