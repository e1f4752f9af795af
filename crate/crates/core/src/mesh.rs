//! Structured triangulation of a rectangle.
//!
//! Nodes are numbered row-major, `node = j * (nx + 1) + i`. Each square cell
//! `(i, j)` is split along its main diagonal into a lower triangle
//! `[n00, n10, n11]` and an upper triangle `[n00, n11, n01]`, both
//! counter-clockwise. Element `2 * (j * nx + i)` is the lower one.

use crate::error::{config, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Bounds {
    pub const UNIT: Bounds = Bounds { xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0 };

    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Bounds { xmin, xmax, ymin, ymax }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.width() + self.height())
    }

    pub fn contains(&self, other: &Bounds) -> bool {
        self.xmin <= other.xmin && self.xmax >= other.xmax && self.ymin <= other.ymin && self.ymax >= other.ymax
    }
}

/// A triangle edge lying on the outer boundary. Local edge `k` joins local
/// vertices `k` and `(k + 1) % 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub elem: usize,
    pub local_edge: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub bounds: Bounds,
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Grid coordinates `(i, j)` of a node.
    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        (node % (self.nx + 1), node / (self.nx + 1))
    }

    /// Cell `(i, j)` containing an element.
    pub fn element_cell(&self, elem: usize) -> (usize, usize) {
        let cell = elem / 2;
        (cell % self.nx, cell / self.nx)
    }

    pub fn element_coords(&self, elem: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.elements[elem];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Signed area; positive for counter-clockwise triangles.
    pub fn element_area(&self, elem: usize) -> f64 {
        let [p, q, r] = self.element_coords(elem);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    pub fn barycenter(&self, elem: usize) -> [f64; 2] {
        let [p, q, r] = self.element_coords(elem);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    pub fn edge_nodes(&self, edge: BoundaryEdge) -> [usize; 2] {
        let e = self.elements[edge.elem];
        [e[edge.local_edge], e[(edge.local_edge + 1) % 3]]
    }

    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.nodes[a], self.nodes[b]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    /// Outward unit normal of a boundary edge (rotate the CCW tangent by -90°).
    pub fn outward_normal(&self, edge: BoundaryEdge) -> [f64; 2] {
        let [a, b] = self.edge_nodes(edge);
        let (p, q) = (self.nodes[a], self.nodes[b]);
        let len = self.edge_length(a, b);
        [(q[1] - p[1]) / len, -(q[0] - p[0]) / len]
    }

    /// Whether both endpoints lie on the same side of the rectangle.
    pub fn is_outer_edge(&self, a: usize, b: usize) -> bool {
        let (ia, ja) = self.node_ij(a);
        let (ib, jb) = self.node_ij(b);
        (ia == ib && (ia == 0 || ia == self.nx)) || (ja == jb && (ja == 0 || ja == self.ny))
    }

    /// Elements sharing at least one node with `node`.
    pub fn node_elements(&self, node: usize) -> Vec<usize> {
        let (i, j) = self.node_ij(node);
        let mut out = Vec::with_capacity(6);
        for cj in j.saturating_sub(1)..=j.min(self.ny - 1) {
            for ci in i.saturating_sub(1)..=i.min(self.nx - 1) {
                let base = 2 * (cj * self.nx + ci);
                for e in [base, base + 1] {
                    if self.elements[e].contains(&node) {
                        out.push(e);
                    }
                }
            }
        }
        out
    }
}

/// Builds the structured triangulation of `bounds` with `nx * ny` cells.
pub fn build_grid(nx: usize, ny: usize, bounds: Bounds) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return config(format!("element counts must be positive, got {nx}x{ny}"));
    }
    let ordered = bounds.xmax > bounds.xmin && bounds.ymax > bounds.ymin;
    if !ordered || !bounds.area().is_finite() {
        return config(format!("degenerate bounds {bounds:?}"));
    }

    let hx = bounds.width() / nx as f64;
    let hy = bounds.height() / ny as f64;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny { bounds.ymax } else { bounds.ymin + j as f64 * hy };
        for i in 0..=nx {
            let x = if i == nx { bounds.xmax } else { bounds.xmin + i as f64 * hx };
            nodes.push([x, y]);
        }
    }

    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(2 * nx * ny);
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for j in 0..ny {
        for i in 0..nx {
            let (n00, n10, n01, n11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            let lower = elements.len();
            elements.push([n00, n10, n11]);
            elements.push([n00, n11, n01]);
            if j == 0 {
                boundary_edges.push(BoundaryEdge { elem: lower, local_edge: 0 });
            }
            if i == nx - 1 {
                boundary_edges.push(BoundaryEdge { elem: lower, local_edge: 1 });
            }
            if j == ny - 1 {
                boundary_edges.push(BoundaryEdge { elem: lower + 1, local_edge: 1 });
            }
            if i == 0 {
                boundary_edges.push(BoundaryEdge { elem: lower + 1, local_edge: 2 });
            }
        }
    }

    Ok(Mesh { nx, ny, bounds, nodes, elements, boundary_edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn smallest_grids_have_forced_counts() {
        let m = build_grid(1, 1, Bounds::UNIT).unwrap();
        assert_eq!((m.num_nodes(), m.num_elements(), m.boundary_edges.len()), (4, 2, 4));
        let m = build_grid(2, 2, Bounds::UNIT).unwrap();
        assert_eq!((m.num_nodes(), m.num_elements(), m.boundary_edges.len()), (9, 8, 8));
    }

    #[test]
    fn areas_sum_to_domain_area() {
        let m = build_grid(3, 2, Bounds::new(0.0, 3.0, 0.0, 1.0)).unwrap();
        let areas: Vec<f64> = (0..m.num_elements()).map(|e| m.element_area(e)).collect();
        assert_eq!(areas.len(), 12);
        for a in &areas {
            assert!((a - 0.25).abs() < 1e-15);
        }
        assert!((areas.iter().sum::<f64>() - 3.0).abs() < 1e-12 * 3.0);
    }

    #[test]
    fn boundary_edges_belong_to_one_triangle_and_point_outward() {
        let m = build_grid(5, 3, Bounds::new(-1.0, 2.0, 0.5, 1.75)).unwrap();
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for el in &m.elements {
            for k in 0..3 {
                let (a, b) = (el[k], el[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let singles = count.values().filter(|&&c| c == 1).count();
        assert_eq!(singles, m.boundary_edges.len());
        assert_eq!(m.boundary_edges.len(), 2 * (5 + 3));
        for &be in &m.boundary_edges {
            let [a, b] = m.edge_nodes(be);
            assert_eq!(count[&(a.min(b), a.max(b))], 1);
            assert!(m.is_outer_edge(a, b));
            let n = m.outward_normal(be);
            let c = m.barycenter(be.elem);
            let mid = [(m.nodes[a][0] + m.nodes[b][0]) / 2.0, (m.nodes[a][1] + m.nodes[b][1]) / 2.0];
            assert!(n[0] * (mid[0] - c[0]) + n[1] * (mid[1] - c[1]) > 0.0);
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(build_grid(0, 2, Bounds::UNIT).is_err());
        assert!(build_grid(2, 0, Bounds::UNIT).is_err());
        assert!(build_grid(2, 2, Bounds::new(1.0, 1.0, 0.0, 1.0)).is_err());
        assert!(build_grid(2, 2, Bounds::new(0.0, 1.0, 2.0, 1.0)).is_err());
    }

    #[test]
    fn node_elements_is_the_vertex_star() {
        let m = build_grid(4, 3, Bounds::UNIT).unwrap();
        for node in 0..m.num_nodes() {
            let mut expected: Vec<usize> =
                (0..m.num_elements()).filter(|&e| m.elements[e].contains(&node)).collect();
            let mut got = m.node_elements(node);
            expected.sort();
            got.sort();
            assert_eq!(got, expected);
        }
    }
}
