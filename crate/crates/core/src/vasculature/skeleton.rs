use crate::imaging::BinaryMask;

/// One-pixel-wide centerline produced by [`skeletonize`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton(BinaryMask);

impl Skeleton {
    /// Wraps an already-thin mask (e.g. a hand-drawn centerline) without thinning it.
    pub fn from_thin_mask(mask: BinaryMask) -> Self {
        Skeleton(mask)
    }

    pub fn as_mask(&self) -> &BinaryMask {
        &self.0
    }

    pub fn into_mask(self) -> BinaryMask {
        self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn pixel_count(&self) -> usize {
        self.0.count()
    }

    /// True when no 2×2 block is fully set.
    pub fn is_thin(&self) -> bool {
        let m = &self.0;
        for y in 0..m.height().saturating_sub(1) {
            for x in 0..m.width().saturating_sub(1) {
                if m.get(x, y) && m.get(x + 1, y) && m.get(x, y + 1) && m.get(x + 1, y + 1) {
                    return false;
                }
            }
        }
        true
    }
}

/// Ring offsets P2..P9: N, NE, E, SE, S, SW, W, NW.
pub(crate) const RING: [(i64, i64); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

fn ring(mask: &BinaryMask, x: usize, y: usize) -> [bool; 8] {
    let (x, y) = (x as i64, y as i64);
    RING.map(|(dx, dy)| mask.get_signed(x + dx, y + dy))
}

fn is_candidate(p: &[bool; 8], first_pass: bool) -> bool {
    let neighbours = p.iter().filter(|b| **b).count();
    if !(2..=6).contains(&neighbours) {
        return false;
    }
    let transitions = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
    if transitions != 1 {
        return false;
    }
    // indices: 0=P2 (N), 2=P4 (E), 4=P6 (S), 6=P8 (W)
    let (n, e, s, w) = (p[0], p[2], p[4], p[6]);
    if first_pass {
        !(n && e && s) && !(e && s && w)
    } else {
        !(n && e && w) && !(n && s && w)
    }
}

/// Zhang–Suen thinning (8-connectivity) iterated to a fixpoint.
///
/// Each sub-iteration deletes its candidates in parallel, except that a
/// component whose every pixel is a candidate keeps its first pixel in raster
/// order. Without that rule 2×2 blocks and two-pixel-thick diagonals vanish
/// and the component count changes. Sequential passes then break leftover
/// 2×2 blocks and strip staircase corners, so diagonals come out 8-connected
/// rather than 4-connected.
///
/// A 2×2 block can survive when each of its pixels anchors a separate arm
/// (a four-way crossing); removing any of them would disconnect the
/// skeleton.
pub fn skeletonize(mask: &BinaryMask) -> Skeleton {
    let mut current = mask.clone();
    let (w, h) = (mask.width(), mask.height());
    loop {
        let mut changed = false;
        for first_pass in [true, false] {
            let mut candidates = Vec::new();
            for y in 0..h {
                for x in 0..w {
                    if current.get(x, y) && is_candidate(&ring(&current, x, y), first_pass) {
                        candidates.push(y * w + x);
                    }
                }
            }
            if candidates.is_empty() {
                continue;
            }
            let (labels, n) = current.label_components();
            let mut survivors = vec![0usize; n + 1];
            for &l in labels.iter().filter(|l| **l != 0) {
                survivors[l as usize] += 1;
            }
            for &idx in &candidates {
                survivors[labels[idx] as usize] -= 1;
            }
            let mut kept = vec![false; n + 1];
            for &idx in &candidates {
                let l = labels[idx] as usize;
                if survivors[l] == 0 && !kept[l] {
                    kept[l] = true;
                    continue;
                }
                current.set(idx % w, idx / w, false);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    reduce_to_minimal(&mut current, mask);
    Skeleton(current)
}

/// Yokoi connectivity number for 8-connected foreground. A pixel whose
/// value is 1 can be removed without changing the local topology.
fn connectivity_number(p: &[bool; 8]) -> usize {
    // Yokoi indexing: x1 = E, x2 = NE, x3 = N, ... counter-clockwise.
    let ring = [p[2], p[1], p[0], p[7], p[6], p[5], p[4], p[3]];
    let bg = |i: usize| usize::from(!ring[i % 8]);
    [0, 2, 4, 6]
        .iter()
        .map(|&k| bg(k) - bg(k) * bg(k + 1) * bg(k + 2))
        .sum()
}

fn in_full_block(mask: &BinaryMask, x: usize, y: usize) -> bool {
    let (x, y) = (x as i64, y as i64);
    [(-1, -1), (0, -1), (-1, 0), (0, 0)]
        .iter()
        .any(|&(ox, oy)| {
            let (bx, by) = (x + ox, y + oy);
            mask.get_signed(bx, by)
                && mask.get_signed(bx + 1, by)
                && mask.get_signed(bx, by + 1)
                && mask.get_signed(bx + 1, by + 1)
        })
}

/// All four axial neighbours set.
fn interior(mask: &BinaryMask, x: usize, y: usize) -> bool {
    let (x, y) = (x as i64, y as i64);
    [(0, -1), (1, 0), (0, 1), (-1, 0)]
        .iter()
        .all(|&(dx, dy)| mask.get_signed(x + dx, y + dy))
}

/// Sequentially removes simple pixels with at least two neighbours that
/// satisfy `eligible`, until none is left. Curve ends and pixels holding
/// branches together are never simple.
fn strip_simple(mask: &mut BinaryMask, eligible: impl Fn(&BinaryMask, usize, usize) -> bool) {
    loop {
        let mut changed = false;
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                if !mask.get(x, y) || !eligible(mask, x, y) {
                    continue;
                }
                let p = ring(mask, x, y);
                if p.iter().filter(|b| **b).count() >= 2 && connectivity_number(&p) == 1 {
                    mask.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// Post-pass over Zhang–Suen output: first breaks leftover 2×2 blocks, then
/// removes the staircase corners of 4-connected diagonals. Corners are only
/// touched where the input was thicker than one pixel, so right-angle turns
/// of an already thin input survive.
fn reduce_to_minimal(mask: &mut BinaryMask, original: &BinaryMask) {
    strip_simple(mask, in_full_block);
    strip_simple(mask, |m, x, y| {
        in_full_block(m, x, y) || interior(original, x, y)
    });
}
