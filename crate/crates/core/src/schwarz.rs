//! Edge-based additive Schwarz preconditioning for the finite volume system.
//!
//! The free unknowns split into subdomain interiors, interface segments and a
//! coarse space spanned by one function per interface: the discrete harmonic
//! extension (in the Galerkin form) of the indicator of that interface's
//! nodes into the two neighboring subdomain interiors. Each subspace `V_i`
//! carries a projection-like operator `T_i` realized as
//! `Phi_i (Phi_i^T M Phi_i)^{-1} Phi_i^T B`, where `B` is the finite volume
//! matrix and `M` is the Galerkin matrix for the symmetric variant or `B`
//! itself for the nonsymmetric one. The preconditioned operator is the sum
//! over the coarse space, all interfaces and all interiors, applied in that
//! fixed order so results are bit-reproducible.

use crate::assembly::AssembledSystem;
use crate::error::{Error, Result};
use crate::linalg::{
    factorize, factorize_block, gmres, Csr, EnergyInner, FactorKind, Factorization, KrylovTrace,
};
use crate::mesh::{DofMap, Partition};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Which local forms define the subspace solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Subspace problems use the symmetric Galerkin form.
    #[serde(rename = "sym")]
    Sym,
    /// Subspace problems use the finite volume form itself.
    #[serde(rename = "nsym")]
    Nsym,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sym" => Ok(Variant::Sym),
            "nsym" => Ok(Variant::Nsym),
            other => Err(Error::InvalidParameter(format!(
                "unknown variant '{other}' (expected 'sym' or 'nsym')"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Sym => "sym",
            Variant::Nsym => "nsym",
        })
    }
}

/// Sparse column over the free unknowns.
#[derive(Clone, Debug)]
pub struct SparseVec {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseVec {
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.idx
            .iter()
            .zip(&self.val)
            .map(|(&i, v)| v * w[i])
            .sum()
    }

    pub fn axpy_into(&self, acc: &mut [f64], s: f64) {
        for (&i, v) in self.idx.iter().zip(&self.val) {
            acc[i] += s * v;
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (&i, v) in self.idx.iter().zip(&self.val) {
            out[i] = *v;
        }
        out
    }
}

/// Coarse basis: one column per interface, over free unknowns.
#[derive(Clone, Debug)]
pub struct EdgeBasis {
    /// Free-space dimension the columns live in.
    pub nrows: usize,
    /// Columns in interface order.
    pub columns: Vec<SparseVec>,
}

/// One interface subspace: its nodes, the union of the two neighboring
/// interiors, and the discrete harmonic extension of nodal values into them.
pub struct InterfaceCoupling {
    pub k: usize,
    pub l: usize,
    /// Free indices of the interface nodes, in along-segment order.
    pub nodes: Vec<usize>,
    /// Free indices of the subspace support: interior of `k`, interior of
    /// `l`, then the nodes themselves.
    pub support: Vec<usize>,
    /// Dense extension operator, `support.len() x nodes.len()`: nodal values
    /// on the interface to values on the whole support.
    extension: DMatrix<f64>,
    factor: Option<Factorization>,
}

impl InterfaceCoupling {
    pub fn extension(&self) -> &DMatrix<f64> {
        &self.extension
    }
}

fn free_list(dofs: &DofMap, edges: &[usize], what: &str) -> Result<Vec<usize>> {
    edges
        .iter()
        .map(|&e| {
            dofs.free_index[e].ok_or_else(|| {
                Error::InvalidParameter(format!("{what}: edge {e} is a Dirichlet unknown"))
            })
        })
        .collect()
}

/// Builds the interface extensions from the Galerkin matrix on free
/// unknowns. Also returns the interior factorizations of that matrix, keyed
/// by subdomain, for reuse.
pub fn build_interface_couplings(
    a_fe: &Csr,
    dofs: &DofMap,
    partition: &Partition,
) -> Result<(Vec<InterfaceCoupling>, Vec<Option<Factorization>>)> {
    let mut a_factors: Vec<Option<Factorization>> = Vec::new();
    a_factors.resize_with(partition.subdomains, || None);
    let mut interiors_free: Vec<Vec<usize>> = Vec::with_capacity(partition.subdomains);
    for k in 0..partition.subdomains {
        interiors_free.push(free_list(dofs, &partition.interior_dofs[k], "interior")?);
    }

    let mut couplings = Vec::with_capacity(partition.interfaces.len());
    for ifc in &partition.interfaces {
        let nodes = free_list(dofs, &ifc.nodes, "interface")?;
        let g = nodes.len();
        let mut support = Vec::new();
        let mut extension = DMatrix::zeros(
            interiors_free[ifc.k].len() + interiors_free[ifc.l].len() + g,
            g,
        );
        let mut row0 = 0;
        for &side in &[ifc.k, ifc.l] {
            let interior = &interiors_free[side];
            if a_factors[side].is_none() && !interior.is_empty() {
                a_factors[side] = Some(factorize(
                    a_fe,
                    interior,
                    FactorKind::Spd,
                    &format!("interior stiffness block of subdomain {side}"),
                )?);
            }
            if let Some(factor) = &a_factors[side] {
                // One solve per interface node: extension column c is the
                // discrete harmonic lifting of a unit value at node c.
                let coupling_block = a_fe.submatrix(interior, &nodes).to_dense();
                for c in 0..g {
                    let rhs: Vec<f64> = (0..interior.len())
                        .map(|r| -coupling_block[(r, c)])
                        .collect();
                    let x = factor.solve(&rhs);
                    for (r, v) in x.iter().enumerate() {
                        extension[(row0 + r, c)] = *v;
                    }
                }
            }
            support.extend_from_slice(interior);
            row0 += interior.len();
        }
        for c in 0..nodes.len() {
            extension[(row0 + c, c)] = 1.0;
        }
        support.extend_from_slice(&nodes);
        couplings.push(InterfaceCoupling {
            k: ifc.k,
            l: ifc.l,
            nodes,
            support,
            extension,
            factor: None,
        });
    }
    Ok((couplings, a_factors))
}

/// Builds the coarse basis: column `i` is the extension of all-ones nodal
/// data on interface `i`, supported on the interface and the two adjacent
/// interiors.
pub fn build_edge_basis(a_fe: &Csr, dofs: &DofMap, partition: &Partition) -> Result<EdgeBasis> {
    let (couplings, _) = build_interface_couplings(a_fe, dofs, partition)?;
    Ok(edge_basis_from_couplings(a_fe.nrows, &couplings))
}

fn edge_basis_from_couplings(nrows: usize, couplings: &[InterfaceCoupling]) -> EdgeBasis {
    let columns = couplings
        .iter()
        .map(|cpl| {
            let g = cpl.nodes.len();
            let val: Vec<f64> = (0..cpl.support.len())
                .map(|r| (0..g).map(|c| cpl.extension[(r, c)]).sum())
                .collect();
            SparseVec {
                idx: cpl.support.clone(),
                val,
            }
        })
        .collect();
    EdgeBasis { nrows, columns }
}

/// Discrete harmonic extension on the full edge set: given values on the
/// boundary unknowns of subdomain `k` (aligned with
/// `partition.subdomain_boundary_dofs[k]`), solves the interior rows of
/// `a_full` and returns a full-length vector supported on the subdomain's
/// closure. Reference implementation; the preconditioner setup caches the
/// interior factorizations instead.
pub fn harmonic_extension(
    a_full: &Csr,
    partition: &Partition,
    k: usize,
    boundary_values: &[f64],
) -> Result<Vec<f64>> {
    if k >= partition.subdomains {
        return Err(Error::InvalidParameter(format!(
            "subdomain {k} out of range ({} subdomains)",
            partition.subdomains
        )));
    }
    let boundary = &partition.subdomain_boundary_dofs[k];
    if boundary_values.len() != boundary.len() {
        return Err(Error::InvalidParameter(format!(
            "expected {} boundary values, got {}",
            boundary.len(),
            boundary_values.len()
        )));
    }
    let interior = &partition.interior_dofs[k];
    let mut out = vec![0.0; a_full.nrows];
    for (&e, &v) in boundary.iter().zip(boundary_values) {
        out[e] = v;
    }
    if !interior.is_empty() {
        let coupling = a_full.submatrix(interior, boundary);
        let rhs: Vec<f64> = coupling
            .matvec(boundary_values)
            .iter()
            .map(|v| -v)
            .collect();
        let factor = factorize(
            a_full,
            interior,
            FactorKind::Spd,
            &format!("interior stiffness block of subdomain {k}"),
        )?;
        let x = factor.solve(&rhs);
        for (&e, v) in interior.iter().zip(&x) {
            out[e] = *v;
        }
    }
    Ok(out)
}

/// The assembled additive Schwarz operator.
pub struct SchwarzPreconditioner {
    pub variant: Variant,
    nfree: usize,
    /// Free indices of each subdomain interior.
    interiors: Vec<Vec<usize>>,
    interior_factors: Vec<Option<Factorization>>,
    interfaces: Vec<InterfaceCoupling>,
    edge_basis: EdgeBasis,
    coarse_factor: Option<Factorization>,
    b_fv: Csr,
}

impl SchwarzPreconditioner {
    /// Assembles every subspace solver from the reduced system. Components
    /// are ordered coarse space, then interfaces sorted by `(k, l)`, then
    /// subdomain interiors sorted by subdomain index.
    pub fn setup(
        variant: Variant,
        sys: &AssembledSystem,
        dofs: &DofMap,
        partition: &Partition,
    ) -> Result<Self> {
        let nfree = sys.a_fe.nrows;
        let m = match variant {
            Variant::Sym => &sys.a_fe,
            Variant::Nsym => &sys.b_fv,
        };

        let (mut interfaces, a_factors) =
            build_interface_couplings(&sys.a_fe, dofs, partition)?;
        let edge_basis = edge_basis_from_couplings(nfree, &interfaces);

        // Subspace matrices S = E^T M E per interface.
        for cpl in interfaces.iter_mut() {
            let msub = m.submatrix(&cpl.support, &cpl.support);
            let g = cpl.nodes.len();
            let mut y = DMatrix::zeros(cpl.support.len(), g);
            for c in 0..g {
                let col: Vec<f64> = (0..cpl.support.len()).map(|r| cpl.extension[(r, c)]).collect();
                let mcol = msub.matvec(&col);
                for (r, v) in mcol.iter().enumerate() {
                    y[(r, c)] = *v;
                }
            }
            let s = cpl.extension.tr_mul(&y);
            let mut triplets = Vec::with_capacity(g * g);
            for r in 0..g {
                for c in 0..g {
                    triplets.push((r, c, s[(r, c)]));
                }
            }
            let s_csr = Csr::from_triplets(g, g, triplets)?;
            let kind = match variant {
                Variant::Sym => FactorKind::Spd,
                Variant::Nsym => FactorKind::General,
            };
            cpl.factor = Some(factorize_block(
                s_csr,
                (0..g).collect(),
                kind,
                &format!("interface block ({}, {})", cpl.k, cpl.l),
            )?);
        }

        // Coarse matrix over the edge basis. Nonzero couplings only occur
        // between interfaces sharing a subdomain, since every triangle lies
        // in exactly one subdomain.
        let n0 = interfaces.len();
        let coarse_factor = if n0 > 0 {
            let mut by_subdomain: Vec<Vec<usize>> = vec![Vec::new(); partition.subdomains];
            for (i, cpl) in interfaces.iter().enumerate() {
                by_subdomain[cpl.k].push(i);
                by_subdomain[cpl.l].push(i);
            }
            let mt = m.transpose();
            let mut triplets = Vec::new();
            let mut work = vec![0.0; nfree];
            let mut touched = Vec::new();
            for (a, _) in interfaces.iter().enumerate() {
                let theta_a = &edge_basis.columns[a];
                for (&i, v) in theta_a.idx.iter().zip(&theta_a.val) {
                    let (cols, vals) = mt.row(i);
                    for (&r, mv) in cols.iter().zip(vals) {
                        if work[r] == 0.0 {
                            touched.push(r);
                        }
                        work[r] += mv * v;
                    }
                }
                let mut neighbors: Vec<usize> = by_subdomain[interfaces[a].k]
                    .iter()
                    .chain(&by_subdomain[interfaces[a].l])
                    .copied()
                    .collect();
                neighbors.sort_unstable();
                neighbors.dedup();
                for b in neighbors {
                    // work = M theta_a, so this entry is theta_b^T M theta_a,
                    // which is row b, column a of the coarse matrix.
                    let vab = edge_basis.columns[b].dot(&work);
                    triplets.push((b, a, vab));
                }
                for &r in &touched {
                    work[r] = 0.0;
                }
                touched.clear();
            }
            let a0 = Csr::from_triplets(n0, n0, triplets)?;
            let kind = match variant {
                Variant::Sym => FactorKind::Spd,
                Variant::Nsym => FactorKind::General,
            };
            Some(factorize_block(
                a0,
                (0..n0).collect(),
                kind,
                "coarse interface matrix",
            )?)
        } else {
            None
        };

        // Interior solvers in the variant's form.
        let mut interiors = Vec::with_capacity(partition.subdomains);
        for k in 0..partition.subdomains {
            interiors.push(free_list(dofs, &partition.interior_dofs[k], "interior")?);
        }
        let interior_factors = match variant {
            Variant::Sym => {
                let mut factors = a_factors;
                // Subdomains untouched by any interface (m = 1) still need
                // their solver.
                for (k, slot) in factors.iter_mut().enumerate() {
                    if slot.is_none() && !interiors[k].is_empty() {
                        *slot = Some(factorize(
                            &sys.a_fe,
                            &interiors[k],
                            FactorKind::Spd,
                            &format!("interior stiffness block of subdomain {k}"),
                        )?);
                    }
                }
                factors
            }
            Variant::Nsym => {
                let mut factors: Vec<Option<Factorization>> = Vec::new();
                factors.resize_with(partition.subdomains, || None);
                for (k, slot) in factors.iter_mut().enumerate() {
                    if !interiors[k].is_empty() {
                        *slot = Some(factorize(
                            &sys.b_fv,
                            &interiors[k],
                            FactorKind::General,
                            &format!("interior volume block of subdomain {k}"),
                        )?);
                    }
                }
                factors
            }
        };

        Ok(SchwarzPreconditioner {
            variant,
            nfree,
            interiors,
            interior_factors,
            interfaces,
            edge_basis,
            coarse_factor,
            b_fv: sys.b_fv.clone(),
        })
    }

    pub fn n_free(&self) -> usize {
        self.nfree
    }

    pub fn edge_basis(&self) -> &EdgeBasis {
        &self.edge_basis
    }

    pub fn interfaces(&self) -> &[InterfaceCoupling] {
        &self.interfaces
    }

    /// Number of additive components: coarse + interfaces + interiors.
    pub fn component_count(&self) -> usize {
        1 + self.interfaces.len() + self.interiors.len()
    }

    /// The preconditioned operator `T u`: subspace corrections of the finite
    /// volume residual image `B u`, summed in component order.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.apply_from_residual(&self.b_fv.matvec(u))
    }

    /// Right-hand side `g = T B^{-1} b`, computable without `B^{-1}` because
    /// every component projects `B u` and `B u = b` for the exact solution.
    pub fn right_hand_side(&self, b: &[f64]) -> Vec<f64> {
        self.apply_from_residual(b)
    }

    /// Sum of all subspace corrections of a residual-space vector `w`.
    pub fn apply_from_residual(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.nfree);
        let mut acc = vec![0.0; self.nfree];
        for i in 0..self.component_count() {
            self.accumulate_component(i, w, &mut acc);
        }
        acc
    }

    /// One component of the sum, applied to `u` through `B u`. Component 0
    /// is the coarse space, then interfaces, then interiors.
    pub fn apply_component(&self, component: usize, u: &[f64]) -> Vec<f64> {
        let w = self.b_fv.matvec(u);
        let mut acc = vec![0.0; self.nfree];
        self.accumulate_component(component, &w, &mut acc);
        acc
    }

    fn accumulate_component(&self, component: usize, w: &[f64], acc: &mut [f64]) {
        if component == 0 {
            if let Some(cf) = &self.coarse_factor {
                let rhs: Vec<f64> = self
                    .edge_basis
                    .columns
                    .iter()
                    .map(|col| col.dot(w))
                    .collect();
                let t = cf.solve(&rhs);
                for (col, ti) in self.edge_basis.columns.iter().zip(&t) {
                    col.axpy_into(acc, *ti);
                }
            }
            return;
        }
        let component = component - 1;
        if component < self.interfaces.len() {
            let cpl = &self.interfaces[component];
            let ws = DVector::from_iterator(
                cpl.support.len(),
                cpl.support.iter().map(|&i| w[i]),
            );
            let rhs = cpl.extension.tr_mul(&ws);
            let t = cpl
                .factor
                .as_ref()
                .expect("factor installed during setup")
                .solve(rhs.as_slice());
            let corr = &cpl.extension * DVector::from_column_slice(&t);
            for (&i, v) in cpl.support.iter().zip(corr.iter()) {
                acc[i] += v;
            }
            return;
        }
        let k = component - self.interfaces.len();
        if let Some(factor) = &self.interior_factors[k] {
            let rhs: Vec<f64> = self.interiors[k].iter().map(|&i| w[i]).collect();
            let t = factor.solve(&rhs);
            for (&i, v) in self.interiors[k].iter().zip(&t) {
                acc[i] += v;
            }
        }
    }

    /// Solves `B u = b` by GMRES on the preconditioned system `T u = g` in
    /// the energy inner product of the Galerkin matrix, from a zero initial
    /// guess.
    pub fn solve(
        &self,
        a_fe: &Csr,
        b: &[f64],
        tol: f64,
        maxit: usize,
    ) -> Result<(Vec<f64>, KrylovTrace)> {
        let g = self.right_hand_side(b);
        let inner = EnergyInner { matrix: a_fe };
        gmres(|u| self.apply(u), &g, &inner, tol, maxit)
    }

    /// Like [`solve`](Self::solve) but starting from `x0`. The residual
    /// histories are relative to `g - T x0`; a generic initial guess keeps
    /// iteration counts from profiting when a smooth right-hand side leaves
    /// most of the spectrum unexcited.
    pub fn solve_from(
        &self,
        x0: &[f64],
        a_fe: &Csr,
        b: &[f64],
        tol: f64,
        maxit: usize,
    ) -> Result<(Vec<f64>, KrylovTrace)> {
        if x0.len() != self.nfree {
            return Err(Error::InvalidParameter(format!(
                "initial guess has {} entries, expected {}",
                x0.len(),
                self.nfree
            )));
        }
        let g = self.right_hand_side(b);
        let tx0 = self.apply(x0);
        let r0: Vec<f64> = g.iter().zip(&tx0).map(|(gi, ti)| gi - ti).collect();
        let inner = EnergyInner { matrix: a_fe };
        let (e, trace) = gmres(|u| self.apply(u), &r0, &inner, tol, maxit)?;
        let u: Vec<f64> = x0.iter().zip(&e).map(|(a, b)| a + b).collect();
        Ok((u, trace))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_system, energy_norm};
    use crate::coefficient::{make_test_coefficient, CoefficientField};
    use crate::linalg::{dot, norm2};
    use crate::mesh::{
        build_control_volumes, build_partition, build_structured_mesh, enumerate_cr_dofs,
        DiagonalOrientation, DofClass, DofMap, Partition, TriMesh,
    };
    use rand::{Rng, SeedableRng};

    struct Setup {
        mesh: TriMesh,
        dofs: DofMap,
        partition: Partition,
        sys: crate::assembly::AssembledSystem,
    }

    fn build(n: usize, m: usize, field: CoefficientField) -> Setup {
        let mesh = build_structured_mesh(n, DiagonalOrientation::BottomLeftTopRight).unwrap();
        let dofs = enumerate_cr_dofs(&mesh);
        let dual = build_control_volumes(&mesh).unwrap();
        let partition = build_partition(&mesh, m).unwrap();
        let sys = assemble_system(&mesh, &dofs, &dual, &partition, &field, |_| 1.0).unwrap();
        Setup {
            mesh,
            dofs,
            partition,
            sys,
        }
    }

    fn oscillatory(n: usize, m: usize, freq: f64, alpha1: f64, marked: &[usize]) -> Setup {
        let field = make_test_coefficient(freq, alpha1, marked, m * m).unwrap();
        build(n, m, field)
    }

    #[test]
    fn edge_basis_matches_reference_extension() {
        let s = oscillatory(8, 2, 4.0, 100.0, &[1]);
        let basis = build_edge_basis(&s.sys.a_fe, &s.dofs, &s.partition).unwrap();
        assert_eq!(basis.columns.len(), s.partition.interfaces.len());
        for (i, ifc) in s.partition.interfaces.iter().enumerate() {
            // Reference: extend indicator data from both subdomain
            // boundaries on the full matrix, then merge.
            let mut full = vec![0.0; s.mesh.edges.len()];
            for &e in &ifc.nodes {
                full[e] = 1.0;
            }
            for &side in &[ifc.k, ifc.l] {
                let boundary = &s.partition.subdomain_boundary_dofs[side];
                let values: Vec<f64> = boundary
                    .iter()
                    .map(|e| if ifc.nodes.contains(e) { 1.0 } else { 0.0 })
                    .collect();
                let ext =
                    harmonic_extension(&s.sys.a_fe_full, &s.partition, side, &values).unwrap();
                for &e in &s.partition.interior_dofs[side] {
                    full[e] = ext[e];
                }
            }
            let col = basis.columns[i].to_dense(s.dofs.free_dofs.len());
            for (pos, &e) in s.dofs.free_dofs.iter().enumerate() {
                assert!(
                    (col[pos] - full[e]).abs() < 1e-10,
                    "interface {i}, edge {e}: basis {} vs reference {}",
                    col[pos],
                    full[e]
                );
            }
        }
    }

    #[test]
    fn edge_basis_support_and_interface_values() {
        let s = oscillatory(8, 4, 3.0, 10.0, &[5]);
        let basis = build_edge_basis(&s.sys.a_fe, &s.dofs, &s.partition).unwrap();
        for (i, ifc) in s.partition.interfaces.iter().enumerate() {
            let col = basis.columns[i].to_dense(s.dofs.free_dofs.len());
            let mut allowed = vec![false; s.dofs.free_dofs.len()];
            for &e in s.partition.interior_dofs[ifc.k]
                .iter()
                .chain(&s.partition.interior_dofs[ifc.l])
                .chain(&ifc.nodes)
            {
                allowed[s.dofs.free_index[e].unwrap()] = true;
            }
            for (pos, v) in col.iter().enumerate() {
                if !allowed[pos] {
                    assert_eq!(*v, 0.0, "column {i} leaks outside its support");
                }
            }
            for &e in &ifc.nodes {
                assert_eq!(col[s.dofs.free_index[e].unwrap()], 1.0);
            }
        }
    }

    #[test]
    fn harmonic_extension_validates_input() {
        let s = oscillatory(4, 2, 2.0, 1.0, &[]);
        assert!(harmonic_extension(&s.sys.a_fe_full, &s.partition, 9, &[]).is_err());
        assert!(harmonic_extension(&s.sys.a_fe_full, &s.partition, 0, &[1.0]).is_err());
    }

    #[test]
    fn harmonic_extension_minimizes_energy() {
        // Among all fillings of the interior with the same boundary data,
        // the discrete harmonic one has minimal energy.
        let s = oscillatory(8, 2, 5.0, 1000.0, &[2]);
        let k = 1;
        let boundary = &s.partition.subdomain_boundary_dofs[k];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = boundary.iter().map(|_| rng.random::<f64>()).collect();
        let ext = harmonic_extension(&s.sys.a_fe_full, &s.partition, k, &values).unwrap();
        let base = energy_norm(&s.sys.a_fe_full, &ext).unwrap();
        for _ in 0..10 {
            let mut competitor = ext.clone();
            for &e in &s.partition.interior_dofs[k] {
                competitor[e] += rng.random::<f64>() - 0.5;
            }
            let en = energy_norm(&s.sys.a_fe_full, &competitor).unwrap();
            assert!(en >= base - 1e-12);
        }
    }

    #[test]
    fn interface_blocks_are_symmetric_for_sym_variant() {
        let s = oscillatory(8, 2, 4.0, 1e4, &[0]);
        let pre =
            SchwarzPreconditioner::setup(Variant::Sym, &s.sys, &s.dofs, &s.partition).unwrap();
        for cpl in pre.interfaces() {
            let msub = s.sys.a_fe.submatrix(&cpl.support, &cpl.support);
            let e = cpl.extension();
            let y = msub.to_dense() * e;
            let st = e.tr_mul(&y);
            let asym = (&st - st.transpose()).abs().max();
            assert!(
                asym <= 1e-12 * st.abs().max(),
                "interface block asymmetry {asym}"
            );
        }
    }

    #[test]
    fn components_sum_to_apply() {
        let s = oscillatory(8, 2, 4.0, 100.0, &[3]);
        for variant in [Variant::Sym, Variant::Nsym] {
            let pre =
                SchwarzPreconditioner::setup(variant, &s.sys, &s.dofs, &s.partition).unwrap();
            let nf = s.dofs.free_dofs.len();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
            let u: Vec<f64> = (0..nf).map(|_| rng.random::<f64>() - 0.5).collect();
            let total = pre.apply(&u);
            let mut acc = vec![0.0; nf];
            for c in 0..pre.component_count() {
                let part = pre.apply_component(c, &u);
                for (a, p) in acc.iter_mut().zip(&part) {
                    *a += p;
                }
            }
            let diff: f64 = total
                .iter()
                .zip(&acc)
                .map(|(t, a)| (t - a).abs())
                .fold(0.0, f64::max);
            assert!(diff <= 1e-12 * norm2(&total).max(1.0));
        }
    }

    #[test]
    fn projections_are_idempotent_and_self_adjoint_for_unit_coefficient() {
        // With a unit coefficient the finite volume matrix coincides with
        // the Galerkin matrix, so every symmetric-variant component is an
        // a-orthogonal projection.
        let s = build(8, 2, CoefficientField::constant(1.0, 4));
        let pre =
            SchwarzPreconditioner::setup(Variant::Sym, &s.sys, &s.dofs, &s.partition).unwrap();
        let nf = s.dofs.free_dofs.len();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let a = &s.sys.a_fe;
        for _ in 0..4 {
            let u: Vec<f64> = (0..nf).map(|_| rng.random::<f64>() - 0.5).collect();
            let v: Vec<f64> = (0..nf).map(|_| rng.random::<f64>() - 0.5).collect();
            let scale_u = energy_norm(a, &u).unwrap();
            let scale_v = energy_norm(a, &v).unwrap();
            for c in 0..pre.component_count() {
                let tu = pre.apply_component(c, &u);
                let ttu = pre.apply_component(c, &tu);
                let idempotency: f64 = tu
                    .iter()
                    .zip(&ttu)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                assert!(
                    idempotency <= 1e-10 * scale_u.max(1.0),
                    "component {c} not idempotent: {idempotency}"
                );
                let tv = pre.apply_component(c, &v);
                let a_tu = a.matvec(&tu);
                let a_tv = a.matvec(&tv);
                let lhs = dot(&v, &a_tu);
                let rhs = dot(&u, &a_tv);
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * (scale_u * scale_v).max(1.0),
                    "component {c} not a-self-adjoint: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn right_hand_side_matches_operator_at_solution() {
        // g = T u* must hold for the exact solution u* of B u = b.
        let s = oscillatory(8, 2, 4.0, 1e3, &[1]);
        for variant in [Variant::Sym, Variant::Nsym] {
            let pre =
                SchwarzPreconditioner::setup(variant, &s.sys, &s.dofs, &s.partition).unwrap();
            let nf = s.dofs.free_dofs.len();
            let direct = factorize(
                &s.sys.b_fv,
                &(0..nf).collect::<Vec<_>>(),
                FactorKind::General,
                "direct",
            )
            .unwrap();
            let u_star = direct.solve(&s.sys.rhs_fv);
            let g = pre.right_hand_side(&s.sys.rhs_fv);
            let tu = pre.apply(&u_star);
            let scale = norm2(&g).max(1.0);
            for (a, b) in g.iter().zip(&tu) {
                assert!((a - b).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn solve_agrees_with_direct_solve() {
        let s = oscillatory(8, 2, 10.0, 1e4, &[1]);
        let nf = s.dofs.free_dofs.len();
        let direct = factorize(
            &s.sys.b_fv,
            &(0..nf).collect::<Vec<_>>(),
            FactorKind::General,
            "direct",
        )
        .unwrap();
        let u_star = direct.solve(&s.sys.rhs_fv);
        for variant in [Variant::Sym, Variant::Nsym] {
            let pre =
                SchwarzPreconditioner::setup(variant, &s.sys, &s.dofs, &s.partition).unwrap();
            let (u, trace) = pre.solve(&s.sys.a_fe, &s.sys.rhs_fv, 1e-9, 200).unwrap();
            assert!(trace.converged, "{variant} variant failed to converge");
            let diff: Vec<f64> = u.iter().zip(&u_star).map(|(a, b)| a - b).collect();
            let rel = energy_norm(&s.sys.a_fe, &diff).unwrap()
                / energy_norm(&s.sys.a_fe, &u_star).unwrap();
            assert!(rel < 1e-6, "{variant} variant error {rel}");
        }
    }

    #[test]
    fn solve_from_initial_guess_reaches_the_same_solution() {
        use rand::{Rng, SeedableRng};
        let s = oscillatory(8, 2, 10.0, 1e3, &[2]);
        let nf = s.dofs.free_dofs.len();
        let pre = SchwarzPreconditioner::setup(Variant::Sym, &s.sys, &s.dofs, &s.partition).unwrap();
        let (u_zero, _) = pre.solve(&s.sys.a_fe, &s.sys.rhs_fv, 1e-10, 200).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let x0: Vec<f64> = (0..nf).map(|_| rng.random::<f64>() - 0.5).collect();
        let (u, trace) = pre
            .solve_from(&x0, &s.sys.a_fe, &s.sys.rhs_fv, 1e-10, 200)
            .unwrap();
        assert!(trace.converged);
        assert_eq!(trace.res_l2[0], 1.0);
        let diff: Vec<f64> = u.iter().zip(&u_zero).map(|(a, b)| a - b).collect();
        let rel =
            energy_norm(&s.sys.a_fe, &diff).unwrap() / energy_norm(&s.sys.a_fe, &u_zero).unwrap();
        assert!(rel < 1e-7, "initial guess changed the solution by {rel}");
        // Wrong length is rejected.
        assert!(pre
            .solve_from(&x0[..nf - 1], &s.sys.a_fe, &s.sys.rhs_fv, 1e-10, 200)
            .is_err());
    }

    #[test]
    fn single_subdomain_is_an_exact_solver() {
        // m = 1: no interfaces, one interior covering every free unknown,
        // so T is B applied after a direct solve and GMRES finishes in one
        // step.
        let s = oscillatory(6, 1, 3.0, 1.0, &[]);
        let pre =
            SchwarzPreconditioner::setup(Variant::Nsym, &s.sys, &s.dofs, &s.partition).unwrap();
        assert_eq!(pre.component_count(), 2);
        let (u, trace) = pre.solve(&s.sys.a_fe, &s.sys.rhs_fv, 1e-8, 10).unwrap();
        assert!(trace.converged);
        assert!(trace.iterations <= 2);
        let resid: Vec<f64> = s
            .sys
            .b_fv
            .matvec(&u)
            .iter()
            .zip(&s.sys.rhs_fv)
            .map(|(a, b)| a - b)
            .collect();
        assert!(norm2(&resid) <= 1e-7 * norm2(&s.sys.rhs_fv));
    }

    #[test]
    fn setup_is_deterministic() {
        let s = oscillatory(8, 4, 7.0, 1e5, &[5, 10]);
        let p1 =
            SchwarzPreconditioner::setup(Variant::Sym, &s.sys, &s.dofs, &s.partition).unwrap();
        let p2 =
            SchwarzPreconditioner::setup(Variant::Sym, &s.sys, &s.dofs, &s.partition).unwrap();
        let nf = s.dofs.free_dofs.len();
        let u: Vec<f64> = (0..nf).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let a1 = p1.apply(&u);
        let a2 = p2.apply(&u);
        assert_eq!(a1, a2, "apply must be bit-reproducible");
    }

    #[test]
    fn interface_count_and_order() {
        let s = oscillatory(8, 4, 2.0, 1.0, &[]);
        let pre =
            SchwarzPreconditioner::setup(Variant::Sym, &s.sys, &s.dofs, &s.partition).unwrap();
        assert_eq!(pre.interfaces().len(), 2 * 4 * 3);
        let pairs: Vec<(usize, usize)> =
            pre.interfaces().iter().map(|c| (c.k, c.l)).collect();
        let mut sorted = pairs.clone();
        sorted.sort_unstable();
        assert_eq!(pairs, sorted);
        // Every free dof is covered by at least one component support.
        let mut covered = vec![false; s.dofs.free_dofs.len()];
        for cpl in pre.interfaces() {
            for &i in &cpl.support {
                covered[i] = true;
            }
        }
        for list in &s.partition.interior_dofs {
            for &e in list {
                covered[s.dofs.free_index[e].unwrap()] = true;
            }
        }
        assert!(covered.iter().all(|&c| c));
        // Interface nodes are exactly the Interface-classified dofs.
        for cpl in pre.interfaces() {
            for &i in &cpl.nodes {
                let e = s.dofs.free_dofs[i];
                assert!(matches!(
                    s.partition.dof_class[e],
                    DofClass::Interface { .. }
                ));
            }
        }
    }
}
