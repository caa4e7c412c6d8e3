//! Finite element operators of the P2–P1 discretization.
//!
//! Local P2 nodes are ordered `v0, v1, v2, m01, m12, m20`; local displacement dofs
//! interleave components, `(node 0, x), (node 0, y), (node 1, x), …`.

use crate::error::{check_len, Error, Result};
use crate::mesh::{DofMap, Mesh};
use crate::params::MaterialParams;
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

/// Symmetric 6-point rule on the reference triangle, exact for degree 4.
/// Barycentric points; weights sum to one (multiply by the element area).
const QUAD6: [([f64; 3], f64); 6] = {
    const A: f64 = 0.445_948_490_915_965;
    const WA: f64 = 0.223_381_589_678_011_5;
    const B: f64 = 0.091_576_213_509_770_74;
    const WB: f64 = 0.109_951_743_655_321_87;
    [
        ([A, A, 1.0 - 2.0 * A], WA),
        ([A, 1.0 - 2.0 * A, A], WA),
        ([1.0 - 2.0 * A, A, A], WA),
        ([B, B, 1.0 - 2.0 * B], WB),
        ([B, 1.0 - 2.0 * B, B], WB),
        ([1.0 - 2.0 * B, B, B], WB),
    ]
};

/// Affine element geometry: area and physical gradients of the barycentric coordinates.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry<T> {
    pub vertices: [[T; 2]; 3],
    pub area: T,
    pub grad_bary: [[T; 2]; 3],
}

impl<T: Scalar> ElementGeometry<T> {
    pub fn new(vertices: [[T; 2]; 3]) -> Result<Self> {
        let [a, b, c] = vertices;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let area = det * T::lit(0.5);
        if !(area > T::zero()) {
            return Err(Error::DegenerateElement {
                index: 0,
                area: area.to_f64_lossy(),
            });
        }
        // ∇λ_i = rot(opposite edge) / (2 area)
        let grad_bary = [
            [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
            [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
            [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
        ];
        Ok(Self {
            vertices,
            area,
            grad_bary,
        })
    }

    pub fn point(&self, bary: [T; 3]) -> [T; 2] {
        let [a, b, c] = self.vertices;
        [
            bary[0] * a[0] + bary[1] * b[0] + bary[2] * c[0],
            bary[0] * a[1] + bary[1] * b[1] + bary[2] * c[1],
        ]
    }

    /// Quadrature points (physical), barycentric coordinates and weights (area included).
    fn quadrature(&self) -> impl Iterator<Item = ([T; 3], T)> + '_ {
        QUAD6
            .iter()
            .map(move |&(b, w)| (b.map(T::lit), T::lit(w) * self.area))
    }
}

const EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// P2 shape function values at a barycentric point.
pub fn p2_values<T: Scalar>(l: [T; 3]) -> [T; 6] {
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    [
        l[0] * (two * l[0] - T::one()),
        l[1] * (two * l[1] - T::one()),
        l[2] * (two * l[2] - T::one()),
        four * l[0] * l[1],
        four * l[1] * l[2],
        four * l[2] * l[0],
    ]
}

/// Physical gradients of the P2 shape functions.
pub fn p2_gradients<T: Scalar>(geo: &ElementGeometry<T>, l: [T; 3]) -> [[T; 2]; 6] {
    let g = geo.grad_bary;
    let four = T::lit(4.0);
    let mut out = [[T::zero(); 2]; 6];
    for i in 0..3 {
        let s = four * l[i] - T::one();
        out[i] = [s * g[i][0], s * g[i][1]];
    }
    for (k, &(i, j)) in EDGES.iter().enumerate() {
        out[3 + k] = [
            four * (l[j] * g[i][0] + l[i] * g[j][0]),
            four * (l[j] * g[i][1] + l[i] * g[j][1]),
        ];
    }
    out
}

/// Element stiffness of `2μ ε(u):ε(v) + λ div u div v`.
pub fn local_elasticity<T: Scalar>(geo: &ElementGeometry<T>, mu: T, lambda: T) -> [[T; 12]; 12] {
    let mut k = [[T::zero(); 12]; 12];
    for (l, w) in geo.quadrature() {
        let grads = p2_gradients(geo, l);
        for a in 0..6 {
            for b in 0..6 {
                let ga = grads[a];
                let gb = grads[b];
                let dot = ga[0] * gb[0] + ga[1] * gb[1];
                for c in 0..2 {
                    for d in 0..2 {
                        let mut v = mu * ga[d] * gb[c] + lambda * ga[c] * gb[d];
                        if c == d {
                            v += mu * dot;
                        }
                        k[2 * a + c][2 * b + d] += w * v;
                    }
                }
            }
        }
    }
    k
}

/// Element matrix of `div u div v`.
pub fn local_divdiv<T: Scalar>(geo: &ElementGeometry<T>) -> [[T; 12]; 12] {
    let mut k = [[T::zero(); 12]; 12];
    for (l, w) in geo.quadrature() {
        let grads = p2_gradients(geo, l);
        for i in 0..12 {
            for j in 0..12 {
                k[i][j] += w * grads[i / 2][i % 2] * grads[j / 2][j % 2];
            }
        }
    }
    k
}

/// Element coupling `α ∫ div(φ_v) ψ_q`; rows are the three P1 pressure functions.
pub fn local_coupling<T: Scalar>(geo: &ElementGeometry<T>, alpha: T) -> [[T; 12]; 3] {
    let mut k = [[T::zero(); 12]; 3];
    for (l, w) in geo.quadrature() {
        let grads = p2_gradients(geo, l);
        for q in 0..3 {
            for j in 0..12 {
                k[q][j] += w * alpha * l[q] * grads[j / 2][j % 2];
            }
        }
    }
    k
}

/// Consistent P1 mass matrix.
pub fn local_pressure_mass<T: Scalar>(geo: &ElementGeometry<T>) -> [[T; 3]; 3] {
    let mut k = [[T::zero(); 3]; 3];
    for (l, w) in geo.quadrature() {
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] += w * l[i] * l[j];
            }
        }
    }
    k
}

fn element_geometry<T: Scalar>(mesh: &Mesh<T>, t: usize) -> Result<ElementGeometry<T>> {
    let verts = mesh.triangles()[t].map(|v| mesh.vertices()[v]);
    ElementGeometry::new(verts).map_err(|e| match e {
        Error::DegenerateElement { area, .. } => Error::DegenerateElement { index: t, area },
        other => other,
    })
}

fn check_mesh<T: Scalar>(mesh: &Mesh<T>, dofs: &DofMap) -> Result<()> {
    check_len("dof map elements", mesh.triangles().len(), dofs.element_nodes().len())
}

/// Elasticity matrix over all displacement dofs (no boundary conditions applied).
pub fn assemble_elasticity<T: Scalar>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
    params: &MaterialParams<T>,
) -> Result<SparseMatrix<T>> {
    check_mesh(mesh, dofs)?;
    let n = dofs.num_displacement_dofs();
    let mut triplets = Vec::with_capacity(mesh.triangles().len() * 144);
    for t in 0..mesh.triangles().len() {
        let geo = element_geometry(mesh, t)?;
        let k = local_elasticity(&geo, params.mu, params.lambda);
        let idx = dofs.element_displacement_dofs(t);
        for i in 0..12 {
            for j in 0..12 {
                triplets.push((idx[i], idx[j], k[i][j]));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, triplets)
}

pub fn assemble_divdiv<T: Scalar>(mesh: &Mesh<T>, dofs: &DofMap) -> Result<SparseMatrix<T>> {
    check_mesh(mesh, dofs)?;
    let n = dofs.num_displacement_dofs();
    let mut triplets = Vec::with_capacity(mesh.triangles().len() * 144);
    for t in 0..mesh.triangles().len() {
        let geo = element_geometry(mesh, t)?;
        let k = local_divdiv(&geo);
        let idx = dofs.element_displacement_dofs(t);
        for i in 0..12 {
            for j in 0..12 {
                triplets.push((idx[i], idx[j], k[i][j]));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, triplets)
}

/// `B[q, v] = α ∫ div(φ_v) ψ_q`, rows indexed by pressure dofs.
pub fn assemble_coupling<T: Scalar>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
    alpha: T,
) -> Result<SparseMatrix<T>> {
    check_mesh(mesh, dofs)?;
    let mut triplets = Vec::with_capacity(mesh.triangles().len() * 36);
    for t in 0..mesh.triangles().len() {
        let geo = element_geometry(mesh, t)?;
        let k = local_coupling(&geo, alpha);
        let rows = dofs.element_pressure_dofs(t);
        let cols = dofs.element_displacement_dofs(t);
        for q in 0..3 {
            for j in 0..12 {
                triplets.push((rows[q], cols[j], k[q][j]));
            }
        }
    }
    SparseMatrix::from_triplets(dofs.num_pressure_dofs(), dofs.num_displacement_dofs(), triplets)
}

pub fn assemble_pressure_mass<T: Scalar>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
) -> Result<SparseMatrix<T>> {
    check_mesh(mesh, dofs)?;
    let n = dofs.num_pressure_dofs();
    let mut triplets = Vec::with_capacity(mesh.triangles().len() * 9);
    for t in 0..mesh.triangles().len() {
        let geo = element_geometry(mesh, t)?;
        let k = local_pressure_mass(&geo);
        let idx = dofs.element_pressure_dofs(t);
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((idx[i], idx[j], k[i][j]));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, triplets)
}

/// `∫ f · φ_v` over all displacement dofs.
pub fn assemble_momentum_load<T: Scalar>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
    f: impl Fn(T, T) -> [T; 2],
) -> Result<Vec<T>> {
    check_mesh(mesh, dofs)?;
    let mut out = vec![T::zero(); dofs.num_displacement_dofs()];
    for t in 0..mesh.triangles().len() {
        let geo = element_geometry(mesh, t)?;
        let idx = dofs.element_displacement_dofs(t);
        for (l, w) in geo.quadrature() {
            let [x, y] = geo.point(l);
            let fv = f(x, y);
            let phi = p2_values(l);
            for k in 0..12 {
                out[idx[k]] += w * fv[k % 2] * phi[k / 2];
            }
        }
    }
    Ok(out)
}

/// `∫ s ψ_q` over all pressure dofs.
pub fn assemble_pressure_load<T: Scalar>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
    s: impl Fn(T, T) -> T,
) -> Result<Vec<T>> {
    check_mesh(mesh, dofs)?;
    let mut out = vec![T::zero(); dofs.num_pressure_dofs()];
    for t in 0..mesh.triangles().len() {
        let geo = element_geometry(mesh, t)?;
        let idx = dofs.element_pressure_dofs(t);
        for (l, w) in geo.quadrature() {
            let [x, y] = geo.point(l);
            let sv = s(x, y);
            for q in 0..3 {
                out[idx[q]] += w * sv * l[q];
            }
        }
    }
    Ok(out)
}

/// Interpolates a vector field at the P2 nodes.
pub fn interpolate_displacement<T: Scalar>(dofs: &DofMap, u: impl Fn(T, T) -> [T; 2]) -> Vec<T> {
    (0..dofs.num_p2_nodes())
        .flat_map(|node| {
            let [x, y] = dofs.node_coordinates::<T>(node);
            u(x, y)
        })
        .collect()
}

/// Interpolates a scalar field at the P1 nodes.
pub fn interpolate_pressure<T: Scalar>(dofs: &DofMap, p: impl Fn(T, T) -> T) -> Vec<T> {
    (0..dofs.num_pressure_dofs())
        .map(|v| {
            let [x, y] = dofs.node_coordinates::<T>(v);
            p(x, y)
        })
        .collect()
}

/// Parabolic manufactured source terms: `S_f = t x(1−x) y(1−y)` and
/// `f = scale · (S_f, S_f)` with `scale = 1e9` by default.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedSources<T> {
    pub momentum_scale: T,
    /// Multiplies both sources; zero gives the source-free problem.
    pub amplitude: T,
}

impl<T: Scalar> Default for ManufacturedSources<T> {
    fn default() -> Self {
        Self {
            momentum_scale: T::lit(1e9),
            amplitude: T::one(),
        }
    }
}

impl<T: Scalar> ManufacturedSources<T> {
    pub fn zero() -> Self {
        Self {
            amplitude: T::zero(),
            ..Self::default()
        }
    }

    fn bubble(x: T, y: T) -> T {
        x * (T::one() - x) * y * (T::one() - y)
    }

    pub fn flow(&self, x: T, y: T, t: T) -> T {
        self.amplitude * t * Self::bubble(x, y)
    }

    pub fn momentum(&self, x: T, y: T, t: T) -> [T; 2] {
        let v = self.momentum_scale * self.flow(x, y, t);
        [v, v]
    }
}

/// Source terms for the given material. The expressions do not depend on the
/// material; the parameter keeps the call site explicit about which problem is set up.
pub fn manufactured_sources<T: Scalar>(_params: &MaterialParams<T>) -> ManufacturedSources<T> {
    ManufacturedSources::default()
}
