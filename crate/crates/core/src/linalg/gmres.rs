//! Full GMRES (no restarts) over a user-chosen inner product, with modified
//! Gram-Schmidt, one reorthogonalization pass, Givens-rotation least squares,
//! and a retained Hessenberg matrix for convergence-bound estimates.

use crate::error::{Error, Result};
use crate::linalg::sparse::Csr;
use crate::linalg::{axpy, dot, norm2};
use nalgebra::DMatrix;

/// New-direction norms below this are treated as Arnoldi breakdown, meaning
/// the Krylov space is exhausted and the iterate is exact.
pub const BREAKDOWN_TOL: f64 = 1e-14;

/// Inner product supplied through its Gram operator: `<u, v> = u^T gram(v)`.
pub trait InnerProduct {
    fn gram(&self, x: &[f64]) -> Vec<f64>;
}

/// Standard Euclidean inner product.
pub struct EuclideanInner;

impl InnerProduct for EuclideanInner {
    fn gram(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

/// Inner product induced by an SPD matrix; used to run the iteration in the
/// energy norm of a stiffness matrix.
pub struct EnergyInner<'a> {
    pub matrix: &'a Csr,
}

impl InnerProduct for EnergyInner<'_> {
    fn gram(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.matvec(x)
    }
}

/// Convergence record of one GMRES run.
#[derive(Clone, Debug)]
pub struct KrylovTrace {
    /// Arnoldi steps taken.
    pub iterations: usize,
    /// True when the Euclidean residual tolerance was met (or the space was
    /// exhausted, which gives the exact solution).
    pub converged: bool,
    /// True when the basis could not be extended further.
    pub breakdown: bool,
    /// Relative residual history in the iteration's inner-product norm,
    /// `iterations + 1` entries starting at 1.
    pub res_inner: Vec<f64>,
    /// Relative Euclidean residual history, assembled from the basis rather
    /// than updated recursively.
    pub res_l2: Vec<f64>,
    /// The `(m+1) x m` Arnoldi Hessenberg matrix.
    pub hessenberg: DMatrix<f64>,
    /// Smallest eigenvalue of the symmetric part of `H_m`: a lower estimate
    /// of the operator's field of values in the iteration inner product.
    pub coercivity_est: Option<f64>,
    /// Largest singular value of the full Hessenberg: an operator-norm
    /// estimate in the same inner product.
    pub boundedness_est: Option<f64>,
}

/// Solves `op(x) = rhs` by full GMRES with zero initial guess, orthogonalizing
/// in `inner` and stopping when the Euclidean residual drops below
/// `tol * |rhs|`.
pub fn gmres<F, Ip>(
    op: F,
    rhs: &[f64],
    inner: &Ip,
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, KrylovTrace)>
where
    F: Fn(&[f64]) -> Vec<f64>,
    Ip: InnerProduct + ?Sized,
{
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gmres tolerance must lie in (0, 1), got {tol}"
        )));
    }
    if maxit == 0 {
        return Err(Error::InvalidParameter(
            "gmres needs at least one iteration".into(),
        ));
    }
    let n = rhs.len();
    if n == 0 {
        return Err(Error::InvalidParameter("gmres on an empty system".into()));
    }

    let l2_0 = norm2(rhs);
    if l2_0 == 0.0 {
        // Zero right-hand side: the zero vector is exact.
        return Ok((
            vec![0.0; n],
            KrylovTrace {
                iterations: 0,
                converged: true,
                breakdown: false,
                res_inner: vec![0.0],
                res_l2: vec![0.0],
                hessenberg: DMatrix::zeros(1, 0),
                coercivity_est: None,
                boundedness_est: None,
            },
        ));
    }

    let gram0 = inner.gram(rhs);
    let beta2 = dot(rhs, &gram0);
    if !(beta2 > 0.0) || !beta2.is_finite() {
        return Err(Error::InvalidParameter(
            "inner product is not positive on the right-hand side".into(),
        ));
    }
    let beta = beta2.sqrt();

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(maxit + 1);
    let mut grams: Vec<Vec<f64>> = Vec::with_capacity(maxit + 1);
    basis.push(rhs.iter().map(|v| v / beta).collect());
    grams.push(gram0.iter().map(|v| v / beta).collect());

    // Original Hessenberg columns (column j has j+2 entries), the rotated
    // triangular columns, and the Givens rotations that relate them.
    let mut hcols: Vec<Vec<f64>> = Vec::new();
    let mut rcols: Vec<Vec<f64>> = Vec::new();
    let mut rotations: Vec<(f64, f64)> = Vec::new();
    let mut g = vec![beta];

    let mut res_inner = vec![1.0];
    let mut res_l2 = vec![1.0];
    let mut y_final: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut breakdown = false;
    let mut m = 0;

    for j in 0..maxit {
        let mut w = op(&basis[j]);
        assert_eq!(w.len(), n, "operator changed dimension");

        let mut h = vec![0.0; j + 2];
        for i in 0..=j {
            let hij = dot(&w, &grams[i]);
            axpy(&mut w, -hij, &basis[i]);
            h[i] = hij;
        }
        // One full reorthogonalization pass keeps the basis orthonormal to
        // machine precision without iterative refinement logic.
        for i in 0..=j {
            let d = dot(&w, &grams[i]);
            axpy(&mut w, -d, &basis[i]);
            h[i] += d;
        }
        let gram_w = inner.gram(&w);
        let hnext = dot(&w, &gram_w).max(0.0).sqrt();
        h[j + 1] = hnext;
        hcols.push(h.clone());

        let exhausted = hnext < BREAKDOWN_TOL;
        if !exhausted {
            basis.push(w.iter().map(|v| v / hnext).collect());
            grams.push(gram_w.iter().map(|v| v / hnext).collect());
        }

        // Rotate the new column into triangular form.
        let mut r = h;
        for (i, &(c, s)) in rotations.iter().enumerate() {
            let t = c * r[i] + s * r[i + 1];
            r[i + 1] = -s * r[i] + c * r[i + 1];
            r[i] = t;
        }
        let (c, s) = {
            let a = r[j];
            let b = r[j + 1];
            let rr = (a * a + b * b).sqrt();
            if rr == 0.0 {
                (1.0, 0.0)
            } else {
                (a / rr, b / rr)
            }
        };
        rotations.push((c, s));
        r[j] = c * r[j] + s * r[j + 1];
        r.truncate(j + 1);
        if r[j] == 0.0 {
            return Err(Error::FactorizationFailure(
                "gmres projected system became singular".into(),
            ));
        }
        rcols.push(r);
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s * gj);

        m = j + 1;

        // Least-squares solution for the current subspace.
        let mut y = vec![0.0; m];
        for i in (0..m).rev() {
            let mut sum = g[i];
            for (k, yk) in y.iter().enumerate().take(m).skip(i + 1) {
                sum -= rcols[k][i] * yk;
            }
            y[i] = sum / rcols[i][i];
        }

        // Residual assembled in coordinates: r = V_{m+1} (beta e1 - Hbar y).
        let mut t = vec![0.0; m + 1];
        t[0] = beta;
        for (col, yk) in hcols.iter().zip(&y) {
            for (ti, ci) in t.iter_mut().zip(col) {
                *ti -= ci * yk;
            }
        }
        let mut rvec = vec![0.0; n];
        for (ti, vi) in t.iter().zip(&basis) {
            axpy(&mut rvec, *ti, vi);
        }
        let rl2 = norm2(&rvec);

        res_inner.push(g[m].abs() / beta);
        res_l2.push(rl2 / l2_0);
        y_final = y;

        if rl2 <= tol * l2_0 {
            converged = true;
            break;
        }
        if exhausted {
            // The Krylov space is invariant; in exact arithmetic the current
            // iterate solves the system.
            breakdown = true;
            converged = true;
            break;
        }
    }

    let mut x = vec![0.0; n];
    for (yk, vk) in y_final.iter().zip(&basis) {
        axpy(&mut x, *yk, vk);
    }

    let mut hessenberg = DMatrix::zeros(m + 1, m);
    for (j, col) in hcols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            hessenberg[(i, j)] = *v;
        }
    }

    let mut trace = KrylovTrace {
        iterations: m,
        converged,
        breakdown,
        res_inner,
        res_l2,
        hessenberg,
        coercivity_est: None,
        boundedness_est: None,
    };
    if let Ok((lo, hi)) = estimate_convergence_bounds(&trace, None) {
        trace.coercivity_est = Some(lo);
        trace.boundedness_est = Some(hi);
    }
    Ok((x, trace))
}

/// Estimates the field-of-values bounds of the iterated operator from the
/// Arnoldi Hessenberg matrix: the smallest eigenvalue of the symmetric part
/// of `H_k` and the largest singular value of the `(k+1) x k` block. `steps`
/// selects a leading block; `None` uses the full trace.
pub fn estimate_convergence_bounds(
    trace: &KrylovTrace,
    steps: Option<usize>,
) -> Result<(f64, f64)> {
    let m_full = trace.hessenberg.ncols();
    let m = steps.unwrap_or(m_full);
    if m == 0 {
        return Err(Error::InsufficientData(
            "convergence-bound estimate needs at least one Arnoldi step".into(),
        ));
    }
    if m > m_full {
        return Err(Error::InvalidParameter(format!(
            "requested {m} steps, trace holds {m_full}"
        )));
    }
    let h = trace.hessenberg.view((0, 0), (m, m)).clone_owned();
    let sym = (&h + h.transpose()) * 0.5;
    let eigs = nalgebra::SymmetricEigen::new(sym).eigenvalues;
    let lo = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    let hbar = trace.hessenberg.view((0, 0), (m + 1, m)).clone_owned();
    let svals = hbar.svd(false, false).singular_values;
    let hi = svals.iter().copied().fold(0.0, f64::max);
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn spd_csr(n: usize, seed: u64) -> Csr {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut triplets = Vec::new();
        for i in 0..n {
            triplets.push((i, i, 4.0 + rng.random::<f64>()));
            if i + 1 < n {
                let v = rng.random::<f64>() - 0.5;
                triplets.push((i, i + 1, v));
                triplets.push((i + 1, i, v));
            }
        }
        Csr::from_triplets(n, n, triplets).unwrap()
    }

    #[test]
    fn identity_converges_in_one_step() {
        let rhs = vec![3.0, -1.0, 2.5];
        let (x, trace) = gmres(|v| v.to_vec(), &rhs, &EuclideanInner, 1e-10, 10).unwrap();
        assert_eq!(trace.iterations, 1);
        assert!(trace.converged);
        for (a, b) in x.iter().zip(&rhs) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        assert_relative_eq!(trace.coercivity_est.unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(trace.boundedness_est.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn scaled_identity_estimates_scale() {
        let rhs = vec![1.0, 2.0, 3.0, 4.0];
        let (x, trace) = gmres(
            |v| v.iter().map(|a| 2.0 * a).collect(),
            &rhs,
            &EuclideanInner,
            1e-10,
            10,
        )
        .unwrap();
        assert_eq!(trace.iterations, 1);
        for (a, b) in x.iter().zip(&rhs) {
            assert_relative_eq!(*a, b / 2.0, epsilon = 1e-12);
        }
        assert_relative_eq!(trace.coercivity_est.unwrap(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(trace.boundedness_est.unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn solves_spd_system_in_euclidean_norm() {
        let a = spd_csr(25, 3);
        let x_true: Vec<f64> = (0..25).map(|i| (i as f64 * 0.3).cos()).collect();
        let b = a.matvec(&x_true);
        let (x, trace) = gmres(|v| a.matvec(v), &b, &EuclideanInner, 1e-10, 100).unwrap();
        assert!(trace.converged);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-8);
        }
        assert_eq!(trace.res_inner[0], 1.0);
        assert_eq!(trace.res_l2[0], 1.0);
        assert_eq!(trace.res_inner.len(), trace.iterations + 1);
        // GMRES minimizes the iteration norm, so that history is monotone.
        for w in trace.res_inner.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn energy_inner_product_runs_and_matches_direct_solve() {
        let a = spd_csr(30, 7);
        let x_true: Vec<f64> = (0..30).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let b = a.matvec(&x_true);
        let inner = EnergyInner { matrix: &a };
        let (x, trace) = gmres(|v| a.matvec(v), &b, &inner, 1e-12, 100).unwrap();
        assert!(trace.converged);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-9);
        }
        // For an SPD operator the field-of-values estimates bracket the
        // spectrum seen through the energy inner product.
        let lo = trace.coercivity_est.unwrap();
        let hi = trace.boundedness_est.unwrap();
        assert!(lo > 0.0);
        assert!(hi >= lo);
    }

    #[test]
    fn reported_residual_matches_recomputed_residual() {
        let a = spd_csr(40, 11);
        let b: Vec<f64> = (0..40).map(|i| ((i * i) % 7) as f64 - 3.0).collect();
        let inner = EnergyInner { matrix: &a };
        let (x, trace) = gmres(|v| a.matvec(v), &b, &inner, 1e-8, 200).unwrap();
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        // Inner-norm check against the recursive value.
        let gr = inner.gram(&r);
        let rnorm = dot(&r, &gr).sqrt();
        let gb = inner.gram(&b);
        let bnorm = dot(&b, &gb).sqrt();
        let reported = trace.res_inner.last().unwrap() * bnorm;
        assert!(
            (rnorm - reported).abs() <= 1e-8 * bnorm,
            "true {rnorm} vs reported {reported}"
        );
        // Euclidean check against the assembled value.
        let reported_l2 = trace.res_l2.last().unwrap() * norm2(&b);
        assert!((norm2(&r) - reported_l2).abs() <= 1e-8 * norm2(&b));
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let a = spd_csr(50, 5);
        let b = vec![1.0; 50];
        let (_, trace) = gmres(|v| a.matvec(v), &b, &EuclideanInner, 1e-14, 3).unwrap();
        assert!(!trace.converged);
        assert_eq!(trace.iterations, 3);
        assert_eq!(trace.res_l2.len(), 4);
    }

    #[test]
    fn zero_rhs_short_circuits() {
        let (x, trace) = gmres(|v| v.to_vec(), &[0.0, 0.0], &EuclideanInner, 1e-8, 5).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert!(trace.converged);
        assert_eq!(trace.iterations, 0);
        assert!(estimate_convergence_bounds(&trace, None).is_err());
    }

    #[test]
    fn parameter_validation() {
        let id = |v: &[f64]| v.to_vec();
        assert!(gmres(id, &[1.0], &EuclideanInner, 0.0, 5).is_err());
        assert!(gmres(id, &[1.0], &EuclideanInner, 1.0, 5).is_err());
        assert!(gmres(id, &[1.0], &EuclideanInner, 1e-6, 0).is_err());
        assert!(gmres(id, &[], &EuclideanInner, 1e-6, 5).is_err());
    }

    #[test]
    fn bound_estimates_are_monotone_in_steps() {
        let a = spd_csr(35, 13);
        let b: Vec<f64> = (0..35).map(|i| (i as f64).sin()).collect();
        let (_, trace) = gmres(|v| a.matvec(v), &b, &EuclideanInner, 1e-12, 100).unwrap();
        let mut prev_lo = f64::INFINITY;
        let mut prev_hi = 0.0f64;
        for k in 1..=trace.iterations {
            let (lo, hi) = estimate_convergence_bounds(&trace, Some(k)).unwrap();
            assert!(lo <= prev_lo + 1e-12, "coercivity estimate must shrink");
            assert!(hi >= prev_hi - 1e-12, "norm estimate must grow");
            prev_lo = lo;
            prev_hi = hi;
        }
        assert!(estimate_convergence_bounds(&trace, Some(trace.iterations + 1)).is_err());
    }

    #[test]
    fn estimates_bracket_diagonal_spectrum() {
        let n = 20;
        let triplets: Vec<(usize, usize, f64)> =
            (0..n).map(|i| (i, i, 1.0 + i as f64)).collect();
        let a = Csr::from_triplets(n, n, triplets).unwrap();
        let b = vec![1.0; n];
        let (_, trace) = gmres(|v| a.matvec(v), &b, &EuclideanInner, 1e-13, 50).unwrap();
        let lo = trace.coercivity_est.unwrap();
        let hi = trace.boundedness_est.unwrap();
        assert!(lo >= 1.0 - 1e-9);
        assert!(hi <= n as f64 + 1e-9);
        assert!(hi > lo);
    }

    proptest! {
        #[test]
        fn gmres_matches_dense_solve(n in 2usize..20, seed in 0u64..200) {
            let a = spd_csr(n, seed);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(99));
            let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let (x, trace) = gmres(|v| a.matvec(v), &b, &EuclideanInner, 1e-11, 200).unwrap();
            prop_assert!(trace.converged);
            let dense = a.to_dense();
            let xd = dense
                .cholesky()
                .unwrap()
                .solve(&nalgebra::DVector::from_column_slice(&b));
            for i in 0..n {
                prop_assert!((x[i] - xd[i]).abs() < 1e-7);
            }
        }
    }
}
