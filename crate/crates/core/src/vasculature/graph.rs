//! Branch graph over a skeleton.
//!
//! Adjacency is the mixed ("m-") adjacency: 4-neighbours always connect,
//! a diagonal neighbour connects only when neither shared 4-neighbour is set.
//! This removes the redundant diagonal link at every staircase corner, so an
//! L-shaped centerline is one branch instead of two branches and a fake
//! junction. Components are the same as under 8-connectivity.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::skeleton::{Skeleton, RING};
use crate::imaging::BinaryMask;

pub type Pixel = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Endpoint,
    Junction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Representative pixel: for junction clusters, the member nearest the centroid.
    pub position: Pixel,
    pub kind: NodeKind,
    /// Every skeleton pixel merged into this node.
    pub pixels: Vec<Pixel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Pixel path from `endpoint_a` to `endpoint_b`, both inclusive. For a
    /// node-free loop the first pixel is repeated at the end.
    pub path: Vec<Pixel>,
    pub geodesic_length: f64,
    pub endpoint_a: Pixel,
    pub endpoint_b: Pixel,
    pub node_a: Option<usize>,
    pub node_b: Option<usize>,
    /// Both ends attach to the same node (or to no node at all).
    pub cyclic: bool,
}

impl Branch {
    pub fn euclidean_length(&self) -> f64 {
        distance(self.endpoint_a, self.endpoint_b)
    }

    fn interior_pixel_count(&self) -> usize {
        if self.node_a.is_none() {
            self.path.len() - 1
        } else {
            self.path.len() - 2
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// Branches shorter than this (geodesic, pixels) are dropped; terminal
    /// ones are pruned from the skeleton first so their junction can dissolve.
    pub min_branch_length: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            min_branch_length: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselGraph {
    pub width: usize,
    pub height: usize,
    pub nodes: Vec<Node>,
    /// Retained branches; their count is `n` in the tortuosity mean.
    pub branches: Vec<Branch>,
    /// Traced branches shorter than the minimum length.
    pub discarded: Vec<Branch>,
    /// Skeleton pixels with no neighbour.
    pub isolated: Vec<Pixel>,
    /// Skeleton pixels removed as terminal spurs before the final trace.
    pub pruned_pixels: usize,
}

impl VesselGraph {
    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn cyclic_count(&self) -> usize {
        self.branches.iter().filter(|b| b.cyclic).count()
    }

    /// Σ geodesic length over retained branches, loops included.
    pub fn total_length(&self) -> f64 {
        self.branches.iter().map(|b| b.geodesic_length).sum()
    }

    pub fn endpoint_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Endpoint)
            .count()
    }

    pub fn junction_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Junction)
            .count()
    }

    /// Pixels accounted for by the graph: branch interiors, node pixels,
    /// isolated pixels and pruned spurs. Equals the skeleton pixel count.
    pub fn accounted_pixels(&self) -> usize {
        let interior: usize = self
            .branches
            .iter()
            .chain(&self.discarded)
            .map(Branch::interior_pixel_count)
            .sum();
        let nodes: usize = self.nodes.iter().map(|n| n.pixels.len()).sum();
        interior + nodes + self.isolated.len() + self.pruned_pixels
    }
}

pub fn distance(a: Pixel, b: Pixel) -> f64 {
    let dx = a.0 as f64 - b.0 as f64;
    let dy = a.1 as f64 - b.1 as f64;
    (dx * dx + dy * dy).sqrt()
}

fn step_length(a: Pixel, b: Pixel) -> f64 {
    if a.0 != b.0 && a.1 != b.1 {
        std::f64::consts::SQRT_2
    } else {
        1.0
    }
}

pub fn path_length(path: &[Pixel]) -> f64 {
    path.windows(2).map(|w| step_length(w[0], w[1])).sum()
}

/// m-adjacent neighbours of `(x, y)`, in ring order starting north.
pub fn m_neighbours(mask: &BinaryMask, x: usize, y: usize) -> Vec<Pixel> {
    let (xi, yi) = (x as i64, y as i64);
    RING.iter()
        .filter(|&&(dx, dy)| {
            let (nx, ny) = (xi + dx, yi + dy);
            if !mask.get_signed(nx, ny) {
                return false;
            }
            dx == 0 || dy == 0 || (!mask.get_signed(nx, yi) && !mask.get_signed(xi, ny))
        })
        .map(|&(dx, dy)| ((xi + dx) as usize, (yi + dy) as usize))
        .collect()
}

struct Trace {
    nodes: Vec<Node>,
    branches: Vec<Branch>,
    isolated: Vec<Pixel>,
}

fn trace(mask: &BinaryMask) -> Trace {
    let (w, h) = (mask.width(), mask.height());
    let idx = |p: Pixel| p.1 * w + p.0;

    let mut neighbours: Vec<Vec<Pixel>> = vec![Vec::new(); w * h];
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                neighbours[y * w + x] = m_neighbours(mask, x, y);
            }
        }
    }
    let degree = |p: Pixel| neighbours[idx(p)].len();

    // Node discovery: endpoints are singletons, junction pixels merge by 8-adjacency.
    let mut node_of: Vec<Option<usize>> = vec![None; w * h];
    let mut nodes = Vec::new();
    let mut isolated = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || node_of[y * w + x].is_some() {
                continue;
            }
            match degree((x, y)) {
                0 => isolated.push((x, y)),
                1 => {
                    node_of[y * w + x] = Some(nodes.len());
                    nodes.push(Node {
                        position: (x, y),
                        kind: NodeKind::Endpoint,
                        pixels: vec![(x, y)],
                    });
                }
                2 => {}
                _ => {
                    let id = nodes.len();
                    let mut pixels = Vec::new();
                    let mut queue = VecDeque::from([(x, y)]);
                    node_of[y * w + x] = Some(id);
                    while let Some(p) = queue.pop_front() {
                        pixels.push(p);
                        for &(dx, dy) in &RING {
                            let (nx, ny) = (p.0 as i64 + dx, p.1 as i64 + dy);
                            if !mask.get_signed(nx, ny) {
                                continue;
                            }
                            let q = (nx as usize, ny as usize);
                            if node_of[idx(q)].is_none() && degree(q) >= 3 {
                                node_of[idx(q)] = Some(id);
                                queue.push_back(q);
                            }
                        }
                    }
                    pixels.sort_by_key(|p| (p.1, p.0));
                    let n = pixels.len() as f64;
                    let cx = pixels.iter().map(|p| p.0 as f64).sum::<f64>() / n;
                    let cy = pixels.iter().map(|p| p.1 as f64).sum::<f64>() / n;
                    let position = *pixels
                        .iter()
                        .min_by(|a, b| {
                            let da = (a.0 as f64 - cx).powi(2) + (a.1 as f64 - cy).powi(2);
                            let db = (b.0 as f64 - cx).powi(2) + (b.1 as f64 - cy).powi(2);
                            da.total_cmp(&db)
                        })
                        .expect("non-empty cluster");
                    nodes.push(Node {
                        position,
                        kind: NodeKind::Junction,
                        pixels,
                    });
                }
            }
        }
    }

    let mut visited = vec![false; w * h];
    let mut direct_links = BTreeSet::new();
    let mut branches = Vec::new();

    for (id, node) in nodes.iter().enumerate() {
        for &start in &node.pixels {
            for &first in &neighbours[idx(start)] {
                match node_of[idx(first)] {
                    Some(other) if other == id => continue,
                    Some(other) => {
                        let key = if start < first {
                            (start, first)
                        } else {
                            (first, start)
                        };
                        if direct_links.insert(key) {
                            branches.push(make_branch(vec![start, first], Some(id), Some(other)));
                        }
                    }
                    None => {
                        if visited[idx(first)] {
                            continue;
                        }
                        let mut path = vec![start, first];
                        visited[idx(first)] = true;
                        let (mut prev, mut cur) = (start, first);
                        let end_node = loop {
                            let next = neighbours[idx(cur)]
                                .iter()
                                .copied()
                                .find(|&q| q != prev)
                                .expect("path pixel has two neighbours");
                            path.push(next);
                            if let Some(n) = node_of[idx(next)] {
                                break n;
                            }
                            visited[idx(next)] = true;
                            prev = cur;
                            cur = next;
                        };
                        branches.push(make_branch(path, Some(id), Some(end_node)));
                    }
                }
            }
        }
    }

    // Whatever degree-2 pixels remain form node-free closed loops.
    for y in 0..h {
        for x in 0..w {
            let p = (x, y);
            if !mask.get(x, y) || visited[idx(p)] || node_of[idx(p)].is_some() || degree(p) != 2 {
                continue;
            }
            visited[idx(p)] = true;
            let mut path = vec![p];
            let (mut prev, mut cur) = (p, neighbours[idx(p)][0]);
            while cur != p {
                visited[idx(cur)] = true;
                path.push(cur);
                let next = neighbours[idx(cur)]
                    .iter()
                    .copied()
                    .find(|&q| q != prev)
                    .expect("loop pixel has two neighbours");
                prev = cur;
                cur = next;
            }
            path.push(p);
            branches.push(make_branch(path, None, None));
        }
    }

    Trace {
        nodes,
        branches,
        isolated,
    }
}

fn make_branch(path: Vec<Pixel>, node_a: Option<usize>, node_b: Option<usize>) -> Branch {
    let endpoint_a = path[0];
    let endpoint_b = *path.last().expect("non-empty path");
    Branch {
        geodesic_length: path_length(&path),
        endpoint_a,
        endpoint_b,
        cyclic: node_a == node_b,
        node_a,
        node_b,
        path,
    }
}

/// Decomposes a skeleton into endpoint/junction nodes and branches.
pub fn extract_graph(skel: &Skeleton, cfg: &GraphConfig) -> VesselGraph {
    let mut working = skel.as_mask().clone();
    let mut pruned = 0usize;
    let traced = loop {
        let traced = trace(&working);
        let spurs: Vec<&Branch> = traced
            .branches
            .iter()
            .filter(|b| b.geodesic_length < cfg.min_branch_length && !b.cyclic)
            .filter(|b| {
                let kind = |n: Option<usize>| n.map(|i| traced.nodes[i].kind);
                matches!(
                    (kind(b.node_a), kind(b.node_b)),
                    (Some(NodeKind::Endpoint), Some(NodeKind::Junction))
                        | (Some(NodeKind::Junction), Some(NodeKind::Endpoint))
                )
            })
            .collect();
        if spurs.is_empty() {
            break traced;
        }
        for spur in spurs {
            let junction_end = if traced.nodes[spur.node_a.unwrap()].kind == NodeKind::Junction {
                spur.endpoint_a
            } else {
                spur.endpoint_b
            };
            for &p in &spur.path {
                if p != junction_end && working.get(p.0, p.1) {
                    working.set(p.0, p.1, false);
                    pruned += 1;
                }
            }
        }
    };

    let (branches, discarded) = traced
        .branches
        .into_iter()
        .partition(|b| b.geodesic_length >= cfg.min_branch_length);
    VesselGraph {
        width: skel.width(),
        height: skel.height(),
        nodes: traced.nodes,
        branches,
        discarded,
        isolated: traced.isolated,
        pruned_pixels: pruned,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skel_from(w: usize, h: usize, pixels: &[Pixel]) -> Skeleton {
        let mut m = BinaryMask::empty(w, h);
        for &(x, y) in pixels {
            m.set(x, y, true);
        }
        Skeleton::from_thin_mask(m)
    }

    #[test]
    fn straight_line_is_one_branch() {
        let px: Vec<Pixel> = (2..12).map(|x| (x, 3)).collect();
        let g = extract_graph(&skel_from(14, 7, &px), &GraphConfig::default());
        assert_eq!(g.endpoint_count(), 2);
        assert_eq!(g.junction_count(), 0);
        assert_eq!(g.branch_count(), 1);
        assert_eq!(g.branches[0].geodesic_length, 9.0);
        assert_eq!(g.accounted_pixels(), 10);
    }

    #[test]
    fn t_shape_has_three_branches() {
        let mut px: Vec<Pixel> = (0..11).map(|x| (x, 0)).collect();
        px.extend((1..8).map(|y| (5, y)));
        let g = extract_graph(&skel_from(11, 8, &px), &GraphConfig::default());
        assert_eq!(g.endpoint_count(), 3);
        assert_eq!(g.junction_count(), 1);
        assert_eq!(g.branch_count(), 3);
        assert_eq!(g.accounted_pixels(), px.len());
    }

    #[test]
    fn l_corner_is_not_a_junction() {
        let mut px: Vec<Pixel> = (0..=10).map(|x| (x, 0)).collect();
        px.extend((1..=10).map(|y| (10, y)));
        let g = extract_graph(&skel_from(11, 11, &px), &GraphConfig::default());
        assert_eq!(g.junction_count(), 0);
        assert_eq!(g.branch_count(), 1);
        let b = &g.branches[0];
        assert_eq!(b.geodesic_length, 20.0);
        assert!((b.euclidean_length() - 200f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn short_spur_is_pruned_and_junction_dissolves() {
        let mut px: Vec<Pixel> = (0..20).map(|x| (x, 5)).collect();
        px.push((10, 4));
        let g = extract_graph(&skel_from(20, 10, &px), &GraphConfig::default());
        assert_eq!(g.branch_count(), 1);
        assert_eq!(g.junction_count(), 0);
        assert_eq!(g.pruned_pixels, 1);
        assert_eq!(g.branches[0].geodesic_length, 19.0);
        assert_eq!(g.accounted_pixels(), px.len());
    }

    #[test]
    fn square_loop_is_one_cyclic_branch() {
        let mut px = Vec::new();
        for i in 0..6 {
            px.extend([(i + 1, 1), (i + 1, 6), (1, i + 1), (6, i + 1)]);
        }
        px.sort();
        px.dedup();
        let g = extract_graph(&skel_from(8, 8, &px), &GraphConfig::default());
        assert!(g.nodes.is_empty());
        assert_eq!(g.branch_count(), 1);
        assert!(g.branches[0].cyclic);
        assert_eq!(g.branches[0].geodesic_length, 20.0);
        assert_eq!(g.accounted_pixels(), px.len());
    }

    #[test]
    fn isolated_pixel_is_recorded() {
        let g = extract_graph(&skel_from(3, 3, &[(1, 1)]), &GraphConfig::default());
        assert_eq!(g.isolated, vec![(1, 1)]);
        assert_eq!(g.branch_count(), 0);
        assert_eq!(g.total_length(), 0.0);
    }
}
