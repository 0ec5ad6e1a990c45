//! Skeletons, branch graphs and vessel contours.

mod contour;
mod graph;
mod skeleton;

pub use contour::{contour_length, find_borders, Border, BorderKind};
pub use graph::{
    distance, extract_graph, m_neighbours, path_length, Branch, GraphConfig, Node, NodeKind, Pixel,
    VesselGraph,
};
pub use skeleton::{skeletonize, Skeleton};

use std::path::Path;

use serde::Serialize;

use crate::imaging::BinaryMask;

#[derive(Serialize)]
struct GraphListing {
    width: usize,
    height: usize,
    nodes: Vec<NodeEntry>,
    branches: Vec<BranchEntry>,
    discarded_branches: usize,
    pruned_pixels: usize,
}

#[derive(Serialize)]
struct NodeEntry {
    x: usize,
    y: usize,
    kind: NodeKind,
}

#[derive(Serialize)]
struct BranchEntry {
    a: [usize; 2],
    b: [usize; 2],
    node_a: Option<usize>,
    node_b: Option<usize>,
    geodesic_length: f64,
    cyclic: bool,
}

/// JSON adjacency listing: node coordinates, branch endpoint pairs and lengths.
pub fn graph_to_json(graph: &VesselGraph) -> String {
    let listing = GraphListing {
        width: graph.width,
        height: graph.height,
        nodes: graph
            .nodes
            .iter()
            .map(|n| NodeEntry {
                x: n.position.0,
                y: n.position.1,
                kind: n.kind,
            })
            .collect(),
        branches: graph
            .branches
            .iter()
            .map(|b| BranchEntry {
                a: [b.endpoint_a.0, b.endpoint_a.1],
                b: [b.endpoint_b.0, b.endpoint_b.1],
                node_a: b.node_a,
                node_b: b.node_b,
                geodesic_length: b.geodesic_length,
                cyclic: b.cyclic,
            })
            .collect(),
        discarded_branches: graph.discarded.len(),
        pruned_pixels: graph.pruned_pixels,
    };
    serde_json::to_string_pretty(&listing).expect("graph listing serializes")
}

/// Writes an RGB overlay: mask in grey, skeleton white, endpoints green,
/// junctions red.
pub fn write_overlay_png(
    mask: &BinaryMask,
    skel: &Skeleton,
    graph: &VesselGraph,
    path: impl AsRef<Path>,
) -> Result<(), image::ImageError> {
    let (w, h) = (mask.width() as u32, mask.height() as u32);
    let mut img = image::RgbImage::new(w, h);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            let colour = if skel.as_mask().get(x, y) {
                [255, 255, 255]
            } else if mask.get(x, y) {
                [90, 90, 90]
            } else {
                [0, 0, 0]
            };
            img.put_pixel(x as u32, y as u32, image::Rgb(colour));
        }
    }
    for node in &graph.nodes {
        let colour = match node.kind {
            NodeKind::Endpoint => [0, 220, 0],
            NodeKind::Junction => [230, 0, 0],
        };
        for &(x, y) in &node.pixels {
            img.put_pixel(x as u32, y as u32, image::Rgb(colour));
        }
    }
    img.save_with_format(path, image::ImageFormat::Png)
}
