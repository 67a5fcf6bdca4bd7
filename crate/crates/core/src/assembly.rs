//! Assembly of the Crouzeix-Raviart Galerkin stiffness matrix, the
//! Petrov-Galerkin finite volume matrix tested on control volumes, and the
//! corresponding load vectors.
//!
//! Triangle integrals use the three-point edge-midpoint rule (exact for
//! quadratics), control-volume boundary integrals use the segment-midpoint
//! rule. Both matrices are assembled over all edge unknowns first; Dirichlet
//! elimination is a submatrix extraction on the interior edges.

use crate::coefficient::CoefficientField;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, Csr};
use crate::mesh::{DofMap, DualMesh, Partition, Point, TriMesh};
use rand::SeedableRng;
use rand_distr::Distribution;

/// Symmetric 2x2 diffusion tensor.
pub type Tensor = [[f64; 2]; 2];

/// Pointwise coefficient lookup during assembly. The triangle index carries
/// the subdomain context, so fields that jump across subdomain boundaries
/// stay single-valued on each triangle.
pub trait Coefficient {
    fn tensor_at(&self, triangle: usize, p: Point) -> Tensor;
}

impl<F> Coefficient for F
where
    F: Fn(usize, Point) -> Tensor,
{
    fn tensor_at(&self, triangle: usize, p: Point) -> Tensor {
        self(triangle, p)
    }
}

/// Constant scalar coefficient.
pub struct UniformCoefficient(pub f64);

impl Coefficient for UniformCoefficient {
    fn tensor_at(&self, _t: usize, _p: Point) -> Tensor {
        [[self.0, 0.0], [0.0, self.0]]
    }
}

/// A subdomain-wise coefficient field bound to a partition.
pub struct PartitionedCoefficient<'a> {
    pub field: &'a CoefficientField,
    pub partition: &'a Partition,
}

impl Coefficient for PartitionedCoefficient<'_> {
    fn tensor_at(&self, t: usize, p: Point) -> Tensor {
        self.field.tensor(self.partition.subdomain_of_triangle[t], p)
    }
}

/// Gradients of the three CR basis functions `phi_i = 1 - 2 lambda_i` on one
/// triangle, plus its area. Gradients are constant per triangle.
pub fn cr_gradients(coords: &[Point; 3]) -> Result<([[f64; 2]; 3], f64)> {
    let [p0, p1, p2] = *coords;
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let area = 0.5 * det;
    if area.abs() <= f64::EPSILON {
        return Err(Error::SingularGeometry(
            "triangle with vanishing area".into(),
        ));
    }
    let mut grads = [[0.0; 2]; 3];
    for i in 0..3 {
        let pj = coords[(i + 1) % 3];
        let pk = coords[(i + 2) % 3];
        // grad lambda_i = perp(p_k - p_j) / det; phi_i = 1 - 2 lambda_i.
        grads[i] = [
            -2.0 * (pj[1] - pk[1]) / det,
            -2.0 * (pk[0] - pj[0]) / det,
        ];
    }
    Ok((grads, area))
}

fn apply_tensor(a: Tensor, v: [f64; 2]) -> [f64; 2] {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

/// Element stiffness matrix on one triangle via the edge-midpoint rule.
/// `tensors[q]` is the (symmetric) coefficient at the midpoint of the edge
/// opposite vertex `q`. The upper triangle is computed and mirrored, so the
/// result is symmetric to the last bit.
pub fn local_cr_stiffness(coords: &[Point; 3], tensors: &[Tensor; 3]) -> Result<[[f64; 3]; 3]> {
    let (grads, area) = cr_gradients(coords)?;
    if area <= 0.0 {
        return Err(Error::SingularGeometry(
            "triangle must be counterclockwise".into(),
        ));
    }
    let w = area / 3.0;
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let mut s = 0.0;
            for t in tensors {
                let av = apply_tensor(*t, grads[j]);
                s += av[0] * grads[i][0] + av[1] * grads[i][1];
            }
            k[i][j] = w * s;
            k[j][i] = k[i][j];
        }
    }
    Ok(k)
}

/// Galerkin stiffness matrix over all edge unknowns, Dirichlet rows included.
pub fn assemble_fe_full(mesh: &TriMesh, coeff: &impl Coefficient) -> Result<Csr> {
    let ne = mesh.edges.len();
    let mut triplets = Vec::with_capacity(9 * mesh.triangles.len());
    for t in 0..mesh.triangles.len() {
        let coords = mesh.tri_coords(t);
        let te = mesh.triangle_edges[t];
        let tensors = [
            coeff.tensor_at(t, mesh.edges[te[0]].midpoint),
            coeff.tensor_at(t, mesh.edges[te[1]].midpoint),
            coeff.tensor_at(t, mesh.edges[te[2]].midpoint),
        ];
        let k = local_cr_stiffness(&coords, &tensors)?;
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((te[i], te[j], k[i][j]));
            }
        }
    }
    Csr::from_triplets(ne, ne, triplets)
}

/// Finite volume matrix over all edge unknowns: row `e` holds the boundary
/// fluxes of the basis functions over the control volume of edge `e`. Rows of
/// domain-boundary edges are left empty; only interior edges are tested.
pub fn assemble_fv_full(mesh: &TriMesh, dual: &DualMesh, coeff: &impl Coefficient) -> Result<Csr> {
    let ne = mesh.edges.len();
    let mut tri_grads = Vec::with_capacity(mesh.triangles.len());
    for t in 0..mesh.triangles.len() {
        tri_grads.push(cr_gradients(&mesh.tri_coords(t))?.0);
    }
    let mut triplets = Vec::new();
    for (e, edge) in mesh.edges.iter().enumerate() {
        if edge.boundary {
            continue;
        }
        for seg in &dual.volumes[e].segments {
            let t = seg.triangle;
            let a = coeff.tensor_at(t, seg.mid);
            let te = mesh.triangle_edges[t];
            for q in 0..3 {
                let flux = apply_tensor(a, tri_grads[t][q]);
                let v = -(flux[0] * seg.normal[0] + flux[1] * seg.normal[1]) * seg.length;
                triplets.push((e, te[q], v));
            }
        }
    }
    Csr::from_triplets(ne, ne, triplets)
}

/// Load vector tested on control volumes: `f` integrated over each volume by
/// the one-point rule at the edge midpoint.
pub fn assemble_rhs_fv_full<F: Fn(Point) -> f64>(
    mesh: &TriMesh,
    dual: &DualMesh,
    f: F,
) -> Vec<f64> {
    mesh.edges
        .iter()
        .zip(&dual.volumes)
        .map(|(e, v)| f(e.midpoint) * v.area)
        .collect()
}

/// Galerkin load vector by the edge-midpoint rule, where the CR basis is a
/// nodal basis.
pub fn assemble_rhs_fe_full<F: Fn(Point) -> f64>(mesh: &TriMesh, f: F) -> Vec<f64> {
    let mut b = vec![0.0; mesh.edges.len()];
    for t in 0..mesh.triangles.len() {
        let w = mesh.tri_area(t) / 3.0;
        for &e in &mesh.triangle_edges[t] {
            b[e] += w * f(mesh.edges[e].midpoint);
        }
    }
    b
}

/// The assembled discrete problem, both in full (all edges) and reduced
/// (interior edges only) form.
pub struct AssembledSystem {
    /// Galerkin stiffness matrix over all edges.
    pub a_fe_full: Csr,
    /// Finite volume matrix over all edges (boundary rows empty).
    pub b_fv_full: Csr,
    /// Galerkin matrix on interior edges; symmetric positive definite.
    pub a_fe: Csr,
    /// Finite volume matrix on interior edges; nonsymmetric in general.
    pub b_fv: Csr,
    /// Control-volume load on interior edges.
    pub rhs_fv: Vec<f64>,
    /// Galerkin load on interior edges.
    pub rhs_fe: Vec<f64>,
}

/// Assembles stiffness matrices and loads for a partitioned coefficient
/// field and right-hand side `f`.
pub fn assemble_system<F: Fn(Point) -> f64>(
    mesh: &TriMesh,
    dofs: &DofMap,
    dual: &DualMesh,
    partition: &Partition,
    field: &CoefficientField,
    f: F,
) -> Result<AssembledSystem> {
    if field.multipliers.len() != partition.subdomains {
        return Err(Error::InvalidParameter(format!(
            "coefficient defines {} subdomain multipliers, partition has {}",
            field.multipliers.len(),
            partition.subdomains
        )));
    }
    let coeff = PartitionedCoefficient { field, partition };
    let a_fe_full = assemble_fe_full(mesh, &coeff)?;
    let b_fv_full = assemble_fv_full(mesh, dual, &coeff)?;
    let free = &dofs.free_dofs;
    let a_fe = a_fe_full.submatrix(free, free);
    let b_fv = b_fv_full.submatrix(free, free);
    let rhs_fv_all = assemble_rhs_fv_full(mesh, dual, &f);
    let rhs_fe_all = assemble_rhs_fe_full(mesh, &f);
    let rhs_fv = free.iter().map(|&e| rhs_fv_all[e]).collect();
    let rhs_fe = free.iter().map(|&e| rhs_fe_all[e]).collect();
    Ok(AssembledSystem {
        a_fe_full,
        b_fv_full,
        a_fe,
        b_fv,
        rhs_fv,
        rhs_fe,
    })
}

/// Energy norm `sqrt(u^T A u)` for an SPD matrix `A`. Small negative values
/// from roundoff are clamped; anything beyond roundoff is an error.
pub fn energy_norm(a: &Csr, u: &[f64]) -> Result<f64> {
    let au = a.matvec(u);
    let s = dot(u, &au);
    let scale = a.max_abs() * dot(u, u);
    if s < -1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidParameter(format!(
            "matrix is not positive semidefinite: u^T A u = {s}"
        )));
    }
    Ok(s.max(0.0).sqrt())
}

/// Broken H1 seminorm of an edge-midpoint vector over the triangles selected
/// by `keep`: elementwise gradients, no continuity assumed.
pub fn broken_h1_seminorm_where<K: Fn(usize) -> bool>(
    mesh: &TriMesh,
    u_all: &[f64],
    keep: K,
) -> Result<f64> {
    assert_eq!(u_all.len(), mesh.edges.len());
    let mut s = 0.0;
    for t in 0..mesh.triangles.len() {
        if !keep(t) {
            continue;
        }
        let (grads, area) = cr_gradients(&mesh.tri_coords(t))?;
        let te = mesh.triangle_edges[t];
        let mut g = [0.0; 2];
        for q in 0..3 {
            g[0] += u_all[te[q]] * grads[q][0];
            g[1] += u_all[te[q]] * grads[q][1];
        }
        s += (g[0] * g[0] + g[1] * g[1]) * area;
    }
    Ok(s.sqrt())
}

/// Broken H1 seminorm over the whole mesh.
pub fn broken_h1_seminorm(mesh: &TriMesh, u_all: &[f64]) -> Result<f64> {
    broken_h1_seminorm_where(mesh, u_all, |_| true)
}

/// Sharp normalized mismatch between the Galerkin and finite volume forms,
/// `max |v^T (A - B) u| / (|u|_A |v|_A)` over all probe pairs. This is the
/// largest singular value of `A - B` in the energy geometry; smooth probe
/// pairs underestimate it because their elementwise mismatch contributions
/// cancel, so it is computed by power iteration on the generalized problem
/// `(A - B)^T A^{-1} (A - B) z = sigma^2 A z` from `starts` seeded random
/// vectors, `iters` steps each.
pub fn form_discrepancy(
    a_fe: &Csr,
    b_fv: &Csr,
    starts: usize,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    if starts == 0 || iters == 0 {
        return Err(Error::InsufficientData(
            "form discrepancy needs at least one power-iteration start".into(),
        ));
    }
    let nf = a_fe.nrows;
    let all: Vec<usize> = (0..nf).collect();
    let factor = crate::linalg::factorize(a_fe, &all, crate::linalg::FactorKind::Spd, "stiffness")?;
    let bt = b_fv.transpose();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::Normal::new(0.0, 1.0).expect("unit normal");
    let mut worst = 0.0f64;
    for _ in 0..starts {
        let mut z: Vec<f64> = (0..nf).map(|_| normal.sample(&mut rng)).collect();
        let mut sigma2 = 0.0f64;
        for _ in 0..iters {
            let az = a_fe.matvec(&z);
            let zaz = dot(&z, &az);
            if zaz <= 0.0 {
                break;
            }
            // w = (A - B) z, s = A^{-1} w, so z^T (A-B)^T A^{-1} (A-B) z = w.s
            let w: Vec<f64> = az.iter().zip(b_fv.matvec(&z)).map(|(a, b)| a - b).collect();
            let s = factor.solve(&w);
            let next = dot(&w, &s) / zaz;
            let stalled = next == 0.0 || (next - sigma2).abs() <= 1e-10 * next.abs();
            sigma2 = next;
            if stalled {
                break;
            }
            // z <- A^{-1} (A - B)^T s, normalized; A is symmetric.
            let t: Vec<f64> = a_fe.matvec(&s).iter().zip(bt.matvec(&s)).map(|(a, b)| a - b).collect();
            z = factor.solve(&t);
            let scale = norm2(&z);
            if scale == 0.0 {
                break;
            }
            for v in &mut z {
                *v /= scale;
            }
        }
        worst = worst.max(sigma2);
    }
    Ok(worst.max(0.0).sqrt())
}
