//! Structured triangulations of the unit square and the Taylor–Hood (P2 vector /
//! P1 scalar) degree-of-freedom map.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Structured mesh of `[0, 1]²` with `n` cells per side, each cell split along its
/// `(+1, +1)` diagonal.
///
/// Vertices are numbered lexicographically by `(y, x)`: vertex `(i, j)` at
/// `(i/n, j/n)` has index `j (n + 1) + i`. Triangles are counter-clockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh<T> {
    n: usize,
    vertices: Vec<[T; 2]>,
    triangles: Vec<[usize; 3]>,
    /// Sorted, unique `(a, b)` pairs with `a < b`.
    edges: Vec<[usize; 2]>,
    /// For triangle `t`, indices into `edges` of its edges `(v0,v1)`, `(v1,v2)`, `(v2,v0)`.
    triangle_edges: Vec<[usize; 3]>,
}

pub fn build_structured_mesh<T: Scalar>(n: usize) -> Result<Mesh<T>> {
    Mesh::structured(n)
}

impl<T: Scalar> Mesh<T> {
    pub fn structured(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "mesh needs at least one subdivision per side".into(),
            ));
        }
        let nv = n + 1;
        let h = T::one() / T::from_usize_lossy(n);
        let coord = |k: usize| if k == n { T::one() } else { T::from_usize_lossy(k) * h };
        let vertices: Vec<[T; 2]> = (0..nv)
            .flat_map(|j| (0..nv).map(move |i| (i, j)))
            .map(|(i, j)| [coord(i), coord(j)])
            .collect();

        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * nv + i;
                let v10 = v00 + 1;
                let v01 = v00 + nv;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }

        let mut edges: Vec<[usize; 2]> = triangles
            .iter()
            .flat_map(|t| [0, 1, 2].map(|k| sorted_pair(t[k], t[(k + 1) % 3])))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let index: HashMap<[usize; 2], usize> =
            edges.iter().enumerate().map(|(k, &e)| (e, k)).collect();
        let triangle_edges = triangles
            .iter()
            .map(|t| [0, 1, 2].map(|k| index[&sorted_pair(t[k], t[(k + 1) % 3])]))
            .collect();

        Ok(Self {
            n,
            vertices,
            triangles,
            edges,
            triangle_edges,
        })
    }

    /// Subdivisions per side; the mesh size is `h = 1/n`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> T {
        T::one() / T::from_usize_lossy(self.n)
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    /// Lattice position `(i, j)` of a vertex.
    pub fn vertex_lattice(&self, v: usize) -> (usize, usize) {
        (v % (self.n + 1), v / (self.n + 1))
    }

    pub fn signed_area(&self, t: usize) -> T {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])) * T::lit(0.5)
    }

    /// Plain-text dump: one `v x y` line per vertex, one `t i j k` line per triangle.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            writeln!(s, "v {} {}", v[0], v[1]).unwrap();
        }
        for t in &self.triangles {
            writeln!(s, "t {} {} {}", t[0], t[1], t[2]).unwrap();
        }
        s
    }
}

fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Classification of a degree of freedom by the boundary condition acting on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Interior,
    /// Homogeneous Dirichlet condition of the momentum balance.
    DirichletMomentum,
    /// Traction-free top side `y = 1` (corners excluded).
    NeumannTop,
    /// Homogeneous Dirichlet condition of the flow equation.
    DirichletFlow,
}

/// Taylor–Hood P2–P1 numbering.
///
/// P2 nodes are the mesh vertices (same indices) followed by the edge midpoints in
/// edge order. Displacement dof `2 * node + component`; pressure dof = vertex index.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    n: usize,
    num_vertices: usize,
    /// Node positions on the half-step lattice: `(2i, 2j)` for vertices, sums for
    /// midpoints. Exact, so boundary predicates have no round-off.
    node_lattice: Vec<(usize, usize)>,
    /// Per triangle: `[v0, v1, v2, m01, m12, m20]` as P2 node indices.
    element_nodes: Vec<[usize; 6]>,
    displacement_tags: Vec<BoundaryTag>,
    pressure_tags: Vec<BoundaryTag>,
}

pub fn build_taylor_hood_dofs<T: Scalar>(mesh: &Mesh<T>) -> DofMap {
    DofMap::taylor_hood(mesh)
}

impl DofMap {
    pub fn taylor_hood<T: Scalar>(mesh: &Mesh<T>) -> Self {
        let n = mesh.n();
        let nv = mesh.vertices().len();
        let mut node_lattice: Vec<(usize, usize)> = (0..nv)
            .map(|v| {
                let (i, j) = mesh.vertex_lattice(v);
                (2 * i, 2 * j)
            })
            .collect();
        for &[a, b] in mesh.edges() {
            let (pa, pb) = (node_lattice[a], node_lattice[b]);
            node_lattice.push(((pa.0 + pb.0) / 2, (pa.1 + pb.1) / 2));
        }

        let element_nodes = mesh
            .triangles()
            .iter()
            .zip(mesh.triangle_edges())
            .map(|(t, e)| [t[0], t[1], t[2], nv + e[0], nv + e[1], nv + e[2]])
            .collect();

        let top = 2 * n;
        let displacement_tags = node_lattice
            .iter()
            .flat_map(|&(x, y)| {
                let tag = if x == 0 || x == top || y == 0 {
                    BoundaryTag::DirichletMomentum
                } else if y == top {
                    BoundaryTag::NeumannTop
                } else {
                    BoundaryTag::Interior
                };
                [tag, tag]
            })
            .collect();
        let pressure_tags = node_lattice[..nv]
            .iter()
            .map(|&(x, y)| {
                if x == 0 || x == top || y == 0 || y == top {
                    BoundaryTag::DirichletFlow
                } else {
                    BoundaryTag::Interior
                }
            })
            .collect();

        Self {
            n,
            num_vertices: nv,
            node_lattice,
            element_nodes,
            displacement_tags,
            pressure_tags,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_p2_nodes(&self) -> usize {
        self.node_lattice.len()
    }

    pub fn num_displacement_dofs(&self) -> usize {
        2 * self.node_lattice.len()
    }

    pub fn num_pressure_dofs(&self) -> usize {
        self.num_vertices
    }

    pub fn element_nodes(&self) -> &[[usize; 6]] {
        &self.element_nodes
    }

    /// Displacement dofs of an element in local order `(node 0 x, node 0 y, node 1 x, …)`.
    pub fn element_displacement_dofs(&self, t: usize) -> [usize; 12] {
        let nodes = self.element_nodes[t];
        std::array::from_fn(|k| 2 * nodes[k / 2] + k % 2)
    }

    pub fn element_pressure_dofs(&self, t: usize) -> [usize; 3] {
        let nodes = self.element_nodes[t];
        [nodes[0], nodes[1], nodes[2]]
    }

    /// Node coordinates in the unit square.
    pub fn node_coordinates<T: Scalar>(&self, node: usize) -> [T; 2] {
        let (x, y) = self.node_lattice[node];
        let d = T::from_usize_lossy(2 * self.n);
        [T::from_usize_lossy(x) / d, T::from_usize_lossy(y) / d]
    }

    pub fn node_lattice(&self, node: usize) -> (usize, usize) {
        self.node_lattice[node]
    }

    pub fn displacement_tags(&self) -> &[BoundaryTag] {
        &self.displacement_tags
    }

    pub fn pressure_tags(&self) -> &[BoundaryTag] {
        &self.pressure_tags
    }

    /// Displacement dofs without a Dirichlet constraint (interior and traction-free).
    pub fn free_displacement_dofs(&self) -> Vec<usize> {
        (0..self.displacement_tags.len())
            .filter(|&d| self.displacement_tags[d] != BoundaryTag::DirichletMomentum)
            .collect()
    }

    pub fn interior_pressure_dofs(&self) -> Vec<usize> {
        (0..self.pressure_tags.len())
            .filter(|&d| self.pressure_tags[d] == BoundaryTag::Interior)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_meshes() {
        let m = Mesh::<f64>::structured(1).unwrap();
        assert_eq!((m.triangles().len(), m.vertices().len(), m.edges().len()), (2, 4, 5));
        let m = Mesh::<f64>::structured(2).unwrap();
        assert_eq!((m.triangles().len(), m.vertices().len(), m.edges().len()), (8, 9, 16));
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert!(matches!(
            Mesh::<f64>::structured(0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn euler_characteristic() {
        for n in 1..12 {
            let m = Mesh::<f64>::structured(n).unwrap();
            let (v, e, f) = (m.vertices().len(), m.edges().len(), m.triangles().len() + 1);
            assert_eq!(v + f, e + 2);
        }
    }

    #[test]
    fn n16_counts_by_enumeration() {
        // independent count: walk the cells and tally what each contributes
        let n = 16;
        let (mut tris, mut verts) = (0usize, 0usize);
        for _cell in 0..n * n {
            tris += 2;
        }
        for _row in 0..=n {
            for _col in 0..=n {
                verts += 1;
            }
        }
        let m = Mesh::<f64>::structured(n).unwrap();
        assert_eq!(m.triangles().len(), tris);
        assert_eq!(m.vertices().len(), verts);
        assert_eq!((tris, verts), (512, 289));
    }

    #[test]
    fn geometry_invariants() {
        for n in [1, 3, 8] {
            let m = Mesh::<f64>::structured(n).unwrap();
            let mut total = 0.0;
            for t in 0..m.triangles().len() {
                let a = m.signed_area(t);
                assert!(a > 0.0);
                total += a;
            }
            assert!((total - 1.0).abs() <= 1e-14);
            assert!(m
                .vertices()
                .iter()
                .all(|v| (0.0..=1.0).contains(&v[0]) && (0.0..=1.0).contains(&v[1])));

            let mut share = vec![0usize; m.edges().len()];
            for te in m.triangle_edges() {
                for &e in te {
                    share[e] += 1;
                }
            }
            for (k, &[a, b]) in m.edges().iter().enumerate() {
                let (pa, pb) = (m.vertices()[a], m.vertices()[b]);
                let on_boundary = [0, 1].iter().any(|&c| {
                    (pa[c] == 0.0 && pb[c] == 0.0) || (pa[c] == 1.0 && pb[c] == 1.0)
                });
                assert_eq!(share[k], if on_boundary { 1 } else { 2 });
            }
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let a = Mesh::<f64>::structured(7).unwrap();
        let b = Mesh::<f64>::structured(7).unwrap();
        assert_eq!(a, b);
        assert_eq!(DofMap::taylor_hood(&a), DofMap::taylor_hood(&b));
    }

    #[test]
    fn dof_counts() {
        let d = DofMap::taylor_hood(&Mesh::<f64>::structured(1).unwrap());
        assert_eq!((d.num_displacement_dofs(), d.num_pressure_dofs()), (18, 4));
        let d = DofMap::taylor_hood(&Mesh::<f64>::structured(2).unwrap());
        assert_eq!((d.num_displacement_dofs(), d.num_pressure_dofs()), (50, 9));
        assert_eq!(d.interior_pressure_dofs(), vec![4]);
        for n in 1..10 {
            let m = Mesh::<f64>::structured(n).unwrap();
            let d = DofMap::taylor_hood(&m);
            assert_eq!(
                d.num_displacement_dofs(),
                2 * ((n + 1) * (n + 1) + m.edges().len())
            );
        }
    }

    #[test]
    fn neumann_top_tags_match_geometric_scan() {
        let m = Mesh::<f64>::structured(4).unwrap();
        let d = DofMap::taylor_hood(&m);
        for node in 0..d.num_p2_nodes() {
            let [x, y]: [f64; 2] = d.node_coordinates(node);
            let on_top = y == 1.0 && x > 0.0 && x < 1.0;
            for c in 0..2 {
                let tag = d.displacement_tags()[2 * node + c];
                assert_eq!(tag == BoundaryTag::NeumannTop, on_top, "node {node} at ({x}, {y})");
            }
            if y == 1.0 && (x == 0.0 || x == 1.0) {
                assert_eq!(d.displacement_tags()[2 * node], BoundaryTag::DirichletMomentum);
            }
        }
        // top midpoints exist and are tagged
        let midpoints_on_top = (m.vertices().len()..d.num_p2_nodes())
            .filter(|&k| d.node_coordinates::<f64>(k)[1] == 1.0)
            .count();
        assert_eq!(midpoints_on_top, 4);
    }

    #[test]
    fn tag_partition_is_exhaustive() {
        let d = DofMap::taylor_hood(&Mesh::<f64>::structured(5).unwrap());
        for node in 0..d.num_p2_nodes() {
            let [x, y]: [f64; 2] = d.node_coordinates(node);
            let boundary = x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0;
            let tag = d.displacement_tags()[2 * node];
            assert_eq!(tag == BoundaryTag::Interior, !boundary);
            assert_ne!(tag, BoundaryTag::DirichletFlow);
        }
        for (v, &tag) in d.pressure_tags().iter().enumerate() {
            let [x, y]: [f64; 2] = d.node_coordinates(v);
            let boundary = x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0;
            assert_eq!(tag, if boundary { BoundaryTag::DirichletFlow } else { BoundaryTag::Interior });
        }
    }

    #[test]
    fn text_dump_format() {
        let m = Mesh::<f64>::structured(1).unwrap();
        let text = m.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], "v 0 0");
        assert_eq!(lines[3], "v 1 1");
        assert_eq!(lines[4], "t 0 1 3");
        assert_eq!(lines[5], "t 0 3 2");
    }
}
