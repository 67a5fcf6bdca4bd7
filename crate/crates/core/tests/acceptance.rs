//! Acceptance gate: ten end-to-end criteria covering jump robustness of the
//! preconditioner, mesh-ratio scaling of iteration counts and eigenvalue
//! estimates, the finite volume / Galerkin identity, solver correctness
//! against direct factorization, and the theoretical residual and energy
//! bounds. Each criterion is one test so the suite prints one pass/fail
//! line per criterion.

use crfve::assembly::{
    assemble_fe_full, assemble_fv_full, assemble_rhs_fe_full, assemble_rhs_fv_full,
    broken_h1_seminorm_where, energy_norm, AssembledSystem,
};
use crfve::driver::{
    direct_agreement_error, form_mismatch_ratio, random_initial_guess, residual_bound_report,
};
use crfve::linalg::dot;
use crfve::schwarz::build_edge_basis;
use crfve::{
    build_control_volumes, build_partition, build_structured_mesh, enumerate_cr_dofs, run,
    DiagonalOrientation, ExperimentConfig, Report, SchwarzPreconditioner, Variant,
};
use rand::{Rng, SeedableRng};

const BLTR: DiagonalOrientation = DiagonalOrientation::BottomLeftTopRight;
const BRTL: DiagonalOrientation = DiagonalOrientation::BottomRightTopLeft;

fn config(n: usize, m: usize, freq: f64, alpha1: f64, marked: &[usize]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.n = n;
    cfg.m = m;
    cfg.freq = freq;
    cfg.alpha1 = alpha1;
    cfg.marked = marked.to_vec();
    cfg
}

fn solved(cfg: &ExperimentConfig) -> Report {
    let report = run(cfg).expect("run failed");
    assert!(
        report.converged,
        "n={} m={} alpha1={} did not converge in {} iterations",
        cfg.n, cfg.m, cfg.alpha1, report.iterations
    );
    report
}

/// Iterations stay bounded as the coefficient jump grows by six orders of
/// magnitude.
#[test]
fn criterion_01_jump_robustness() {
    let base = config(32, 4, 100.0, 1.0, &[5]);
    let mut jumped = base.clone();
    jumped.alpha1 = 1e6;
    let r1 = solved(&base);
    let r2 = solved(&jumped);
    for (label, it) in [("alpha1=1", r1.iterations), ("alpha1=1e6", r2.iterations)] {
        assert!(
            (12..=40).contains(&it),
            "{label}: {it} iterations outside [12, 40]"
        );
    }
    let growth = r2.iterations as f64 / r1.iterations as f64;
    assert!(
        growth <= 1.6,
        "iteration growth {growth:.3} across the jump exceeds 1.6 ({} -> {})",
        r1.iterations,
        r2.iterations
    );
}

/// With H/h fixed at 2 the iteration counts and eigenvalue estimates are
/// flat in the problem size.
#[test]
fn criterion_02_constant_mesh_ratio_row() {
    let cases = [(8usize, 4usize), (16, 8), (32, 16), (64, 32)];
    let expected_iters = [13usize, 17, 17, 17];
    let expected_cp = [5.31e-1, 4.86e-1, 4.85e-1, 4.85e-1];
    for (((n, m), want_it), want_cp) in cases.iter().zip(expected_iters).zip(expected_cp) {
        let r = solved(&config(*n, *m, 10.0, 1.0, &[]));
        let diff = r.iterations.abs_diff(want_it);
        assert!(
            diff <= 4,
            "(n={n}, m={m}): {} iterations, expected {want_it} +- 4",
            r.iterations
        );
        let cp = r.cp_est.expect("estimate available");
        let ratio = cp / want_cp;
        assert!(
            (1.0 / 1.5..=1.5).contains(&ratio),
            "(n={n}, m={m}): cp estimate {cp:.3e} not within 1.5x of {want_cp:.3e}"
        );
    }
}

/// Fixing the subdomain grid and refining the mesh grows iterations only
/// polylogarithmically.
#[test]
fn criterion_03_polylog_growth_column() {
    let ns = [8usize, 16, 32, 64, 128];
    let expected = [13usize, 16, 17, 19, 21];
    let mut iters = Vec::new();
    for (&n, &want) in ns.iter().zip(&expected) {
        let r = solved(&config(n, 4, 10.0, 1.0, &[]));
        let diff = r.iterations.abs_diff(want);
        assert!(
            diff <= 5,
            "(n={n}, m=4): {} iterations, expected {want} +- 5",
            r.iterations
        );
        iters.push(r.iterations);
    }
    for w in iters.windows(2) {
        assert!(w[1] >= w[0], "iterations decreased along refinement: {iters:?}");
    }
    let growth = *iters.last().unwrap() as f64 / iters[0] as f64;
    assert!(
        growth <= 2.2,
        "growth {growth:.3} from n=8 to n=128 exceeds 2.2: {iters:?}"
    );
}

/// Spot checks with the fast-oscillating coefficient.
#[test]
fn criterion_04_oscillatory_spot_checks() {
    let cases = [
        (32usize, 16usize, 18usize, 4usize, 4.73e-1),
        (128, 64, 20, 5, 4.65e-1),
    ];
    for (n, m, want_it, slack, want_cp) in cases {
        let r = solved(&config(n, m, 100.0, 1.0, &[]));
        let diff = r.iterations.abs_diff(want_it);
        assert!(
            diff <= slack,
            "(n={n}, m={m}): {} iterations, expected {want_it} +- {slack}",
            r.iterations
        );
        let cp = r.cp_est.expect("estimate available");
        let ratio = cp / want_cp;
        assert!(
            (1.0 / 1.5..=1.5).contains(&ratio),
            "(n={n}, m={m}): cp estimate {cp:.3e} not within 1.5x of {want_cp:.3e}"
        );
    }
}

/// For elementwise-constant coefficients the finite volume and Galerkin
/// matrices agree entrywise on the free unknowns.
#[test]
fn criterion_05_discretization_identity() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let mut worst = 0.0f64;
    for diag in [BLTR, BRTL] {
        for n in [2usize, 4, 8] {
            let mesh = build_structured_mesh(n, diag).unwrap();
            let dual = build_control_volumes(&mesh).unwrap();
            let dofs = enumerate_cr_dofs(&mesh);
            let values: Vec<f64> = (0..mesh.triangles.len())
                .map(|_| 10f64.powf(rng.random::<f64>() * 6.0 - 3.0))
                .collect();
            let coeff = |t: usize, _p: [f64; 2]| [[values[t], 0.0], [0.0, values[t]]];
            let a = assemble_fe_full(&mesh, &coeff).unwrap();
            let b = assemble_fv_full(&mesh, &dual, &coeff).unwrap();
            let af = a.submatrix(&dofs.free_dofs, &dofs.free_dofs);
            let bf = b.submatrix(&dofs.free_dofs, &dofs.free_dofs);
            worst = worst.max(af.max_abs_diff(&bf) / af.max_abs());
        }
    }
    assert!(
        worst <= 1e-12,
        "largest relative entry difference {worst:.3e} exceeds 1e-12"
    );
}

/// The mismatch between the two bilinear forms decays at first order in the
/// mesh size.
#[test]
fn criterion_06_form_mismatch_first_order() {
    for n in [16usize, 32] {
        let ratio = form_mismatch_ratio(n, 10.0, 0).unwrap();
        assert!(
            (1.6..=2.5).contains(&ratio),
            "mismatch ratio n={n} -> {}: {ratio:.4} outside [1.6, 2.5]",
            2 * n
        );
    }
}

/// Every tabulated configuration small enough for a direct factorization
/// agrees with it in energy norm.
#[test]
fn criterion_07_direct_solve_agreement() {
    let configs = [
        config(32, 4, 100.0, 1.0, &[5]),
        config(32, 4, 100.0, 1e6, &[5]),
        config(8, 4, 10.0, 1.0, &[]),
        config(16, 8, 10.0, 1.0, &[]),
        config(32, 16, 10.0, 1.0, &[]),
        config(16, 4, 10.0, 1.0, &[]),
        config(32, 4, 10.0, 1.0, &[]),
        config(32, 16, 100.0, 1.0, &[]),
    ];
    for mut cfg in configs {
        cfg.tol = 1e-8;
        cfg.maxit = 400;
        let err = direct_agreement_error(&cfg).unwrap();
        assert!(
            err <= 1e-5,
            "n={} m={} freq={} alpha1={}: energy-relative gap {err:.3e} exceeds 1e-5",
            cfg.n,
            cfg.m,
            cfg.freq,
            cfg.alpha1
        );
    }
}

/// On a problem small enough to densify, the GMRES energy residuals obey the
/// decay bound induced by the measured field-of-values constants.
#[test]
fn criterion_08_residual_decay_bound() {
    let cfg = config(8, 2, 10.0, 1e3, &[1]);
    let data = residual_bound_report(&cfg).unwrap();
    assert!(
        data.cp > 0.0,
        "field-of-values lower bound {} is not positive",
        data.cp
    );
    assert!(data.cp_upper >= data.cp);
    assert!(
        data.max_ratio <= 1.0 + 1e-8,
        "residual history violates the decay bound by factor {:.3e} (cp {:.3e}, Cp {:.3e})",
        data.max_ratio,
        data.cp,
        data.cp_upper
    );
}

/// With an elementwise-constant coefficient the symmetric-variant component
/// operators are exact energy-orthogonal projections.
#[test]
fn criterion_09_projection_properties() {
    let n = 16;
    let m = 4;
    let mesh = build_structured_mesh(n, BLTR).unwrap();
    let dofs = enumerate_cr_dofs(&mesh);
    let dual = build_control_volumes(&mesh).unwrap();
    let partition = build_partition(&mesh, m).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let values: Vec<f64> = (0..mesh.triangles.len())
        .map(|_| 10f64.powf(rng.random::<f64>() * 2.0 - 1.0))
        .collect();
    let coeff = |t: usize, _p: [f64; 2]| [[values[t], 0.0], [0.0, values[t]]];
    let a_fe_full = assemble_fe_full(&mesh, &coeff).unwrap();
    let b_fv_full = assemble_fv_full(&mesh, &dual, &coeff).unwrap();
    let a_fe = a_fe_full.submatrix(&dofs.free_dofs, &dofs.free_dofs);
    let b_fv = b_fv_full.submatrix(&dofs.free_dofs, &dofs.free_dofs);
    let rhs_fv_full = assemble_rhs_fv_full(&mesh, &dual, |_| 1.0);
    let rhs_fe_full = assemble_rhs_fe_full(&mesh, |_| 1.0);
    let gather = |v: &[f64]| dofs.free_dofs.iter().map(|&e| v[e]).collect::<Vec<f64>>();
    let sys = AssembledSystem {
        a_fe_full,
        b_fv_full,
        a_fe,
        b_fv,
        rhs_fv: gather(&rhs_fv_full),
        rhs_fe: gather(&rhs_fe_full),
    };
    let pre = SchwarzPreconditioner::setup(Variant::Sym, &sys, &dofs, &partition).unwrap();

    let nf = dofs.free_dofs.len();
    let a = &sys.a_fe;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let u: Vec<f64> = (0..nf).map(|_| rng.random::<f64>() - 0.5).collect();
        let v: Vec<f64> = (0..nf).map(|_| rng.random::<f64>() - 0.5).collect();
        let su = energy_norm(a, &u).unwrap().max(1.0);
        let sv = energy_norm(a, &v).unwrap().max(1.0);
        for c in 0..pre.component_count() {
            let tu = pre.apply_component(c, &u);
            let ttu = pre.apply_component(c, &tu);
            let idem = tu
                .iter()
                .zip(&ttu)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max)
                / su;
            let tv = pre.apply_component(c, &v);
            let adj = (dot(&v, &a.matvec(&tu)) - dot(&u, &a.matvec(&tv))).abs() / (su * sv);
            worst = worst.max(idem).max(adj);
        }
    }
    assert!(
        worst <= 1e-10,
        "largest projection identity violation {worst:.3e} exceeds 1e-10"
    );
}

/// The squared subdomain energy of an interface basis function grows like
/// an affine function of log(H/h).
#[test]
fn criterion_10_interface_energy_log_fit() {
    let m = 4usize;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in [16usize, 32, 64, 128] {
        let mesh = build_structured_mesh(n, BLTR).unwrap();
        let dofs = enumerate_cr_dofs(&mesh);
        let partition = build_partition(&mesh, m).unwrap();
        let field = crfve::make_test_coefficient(0.0, 1.0, &[], partition.subdomains).unwrap();
        let coeff = |t: usize, p: [f64; 2]| field.tensor(partition.subdomain_of_triangle[t], p);
        let a_full = assemble_fe_full(&mesh, &coeff).unwrap();
        let a_fe = a_full.submatrix(&dofs.free_dofs, &dofs.free_dofs);
        let basis = build_edge_basis(&a_fe, &dofs, &partition).unwrap();
        let ifc = &partition.interfaces[0];
        let mut theta = vec![0.0; mesh.edges.len()];
        let col = basis.columns[0].to_dense(basis.nrows);
        for (f, &e) in dofs.free_dofs.iter().enumerate() {
            theta[e] = col[f];
        }
        let s = broken_h1_seminorm_where(&mesh, &theta, |t| {
            partition.subdomain_of_triangle[t] == ifc.k
        })
        .unwrap();
        xs.push(((n / m) as f64).ln());
        ys.push(s * s);
    }
    // Least squares fit y = c0 + c1 x via the 2x2 normal equations.
    let k = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sy: f64 = ys.iter().sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let det = k * sxx - sx * sx;
    let c0 = (sxx * sy - sx * sxy) / det;
    let c1 = (k * sxy - sx * sy) / det;
    let res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - c0 - c1 * x).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = ys.iter().map(|y| y * y).sum::<f64>().sqrt();
    let rel = res / scale;
    assert!(
        rel < 0.10,
        "log fit residual {rel:.3e} >= 10% (c0 = {c0:.3}, c1 = {c1:.3}, energies {ys:?})"
    );
    assert!(c1 > 0.0, "energy should grow with H/h, got slope {c1:.3e}");
}

/// The initial guess convention behind the iteration counts: seeded and
/// reproducible.
#[test]
fn initial_guess_is_deterministic() {
    let a = random_initial_guess(100, 0);
    let b = random_initial_guess(100, 0);
    let c = random_initial_guess(100, 1);
    assert_eq!(a, b);
    assert_ne!(a, c);
}
