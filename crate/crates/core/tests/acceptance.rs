//! End-to-end acceptance checks: golden eigenvalue tables on the square,
//! convergence orders per mesh family, stabilization sensitivity, spurious
//! modes under mixed boundary conditions, the L-shape extrapolation, the
//! structural property suite, and the one-cell hand oracle. Each check
//! prints a single summary line when it passes.

mod common;

use std::f64::consts::PI;
use std::sync::Mutex;
use std::time::Instant;

use common::*;
use faer::linalg::solvers::Solve;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vemlap::analysis::{
    convergence_study, detect_spurious, exact_spectrum, mesh_size, stabilization_sweep,
    StudyConfig,
};
use vemlap::assembly::{assemble, solve_source};
use vemlap::eigensolver::{solve_eigen, Backend, SolveOptions};
use vemlap::mesh::{cell_geometry, BcSpec, Domain, MeshFamily};
use vemlap::quad::integrate_polygon;
use vemlap::vem_local::{interpolate, projector, StabWeight};

/// Serializes the checks so wall-clock assertions are not distorted by
/// concurrent test threads.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn dirichlet_study(family: MeshFamily, seed: u64) -> vemlap::analysis::ConvergenceStudy {
    convergence_study(&StudyConfig {
        domain: Domain::UnitSquare,
        family,
        bc: BcSpec::AllDirichlet,
        n_list: vec![8, 16, 32, 64],
        w: StabWeight::default(),
        modes: 6,
        seed,
        backend: None,
        tol: 1e-10,
    })
    .unwrap()
}

const T2_DIRICHLET_SIX_MODES: [[f64; 6]; 4] = [
    [18.7724, 42.0875, 42.0875, 65.4027, 69.7660, 69.7660],
    [19.4886, 47.2890, 47.2890, 75.0894, 89.3259, 89.3259],
    [19.6760, 48.8153, 48.8153, 77.9546, 96.1656, 96.1656],
    [19.7234, 49.2137, 49.2137, 78.7039, 98.0505, 98.0505],
];

#[test]
fn t2_dirichlet_golden_values_order_and_runtime() {
    let _guard = serial();
    let n_list = [8usize, 16, 32, 64];
    let mut h = Vec::new();
    let mut lam1 = Vec::new();
    let mut max_dev: f64 = 0.0;
    let mut n64_seconds = 0.0;
    for (level, &n) in n_list.iter().enumerate() {
        let start = Instant::now();
        let mesh = dirichlet_mesh(Domain::UnitSquare, MeshFamily::T2Squares, n, 0);
        let (pencil, _) = assemble(&mesh, StabWeight::default()).unwrap();
        let result = solve_eigen(
            &pencil,
            &SolveOptions {
                m: 6,
                tol: 1e-10,
                backend: Backend::Dense,
            },
        )
        .unwrap();
        if n == 64 {
            n64_seconds = start.elapsed().as_secs_f64();
        }
        h.push(mesh_size(&mesh).unwrap());
        for mode in 0..6 {
            let expect = T2_DIRICHLET_SIX_MODES[level][mode];
            let dev = (result.lambdas[mode] - expect).abs();
            max_dev = max_dev.max(dev);
            assert!(
                dev <= 5e-3,
                "N={n} mode {}: {} vs reference {expect}",
                mode + 1,
                result.lambdas[mode]
            );
        }
        lam1.push(result.lambdas[0]);
    }
    let order = vemlap::analysis::fit_order(&h, &lam1, 2.0 * PI * PI);
    assert!((order - 1.978).abs() <= 0.03, "first-mode order {order}");
    assert!(
        n64_seconds <= 60.0,
        "N=64 dense level took {n64_seconds:.1}s"
    );
    println!(
        "PASS t2 dirichlet golden values: max deviation {max_dev:.1e}, \
         first-mode order {order:.4}, N=64 dense level {n64_seconds:.1}s"
    );
}

const T4_COARSE_ROW: [f64; 6] = [18.6654, 41.8949, 42.2913, 64.0705, 70.1566, 71.6883];
const T4_ORDERS: [f64; 6] = [1.9746, 1.9256, 1.9295, 1.9094, 1.8478, 1.8567];

#[test]
fn t4_trapezoid_coarse_row_and_orders() {
    let _guard = serial();
    let study = dirichlet_study(MeshFamily::T4Trapezoids, 0);
    let mut max_dev: f64 = 0.0;
    for mode in 0..6 {
        let dev = (study.lambda_series[mode][0] - T4_COARSE_ROW[mode]).abs();
        max_dev = max_dev.max(dev);
        assert!(
            dev <= 2e-2,
            "N=8 mode {}: {} vs reference {}",
            mode + 1,
            study.lambda_series[mode][0],
            T4_COARSE_ROW[mode]
        );
        let order_dev = (study.orders[mode] - T4_ORDERS[mode]).abs();
        assert!(
            order_dev <= 0.05,
            "mode {} order {} vs reference {}",
            mode + 1,
            study.orders[mode],
            T4_ORDERS[mode]
        );
    }
    println!(
        "PASS t4 trapezoids: coarse-row max deviation {max_dev:.1e}, \
         orders {:?}",
        study.orders.iter().map(|o| (o * 1e4).round() / 1e4).collect::<Vec<_>>()
    );
}

#[test]
fn t1_and_t3_orders_are_second_order() {
    let _guard = serial();
    let mut summary = Vec::new();
    for (family, seed) in [
        (MeshFamily::T1Triangles, 0u64),
        (MeshFamily::T3PerturbedSquares, 0u64),
    ] {
        let study = dirichlet_study(family, seed);
        for mode in 0..6 {
            assert!(
                (1.70..=2.10).contains(&study.orders[mode]),
                "{family:?} mode {} order {}",
                mode + 1,
                study.orders[mode]
            );
        }
        summary.push(format!(
            "{family:?} orders {:?}",
            study.orders.iter().map(|o| (o * 1e3).round() / 1e3).collect::<Vec<_>>()
        ));
    }
    println!("PASS t1/t3 second-order window: {}", summary.join("; "));
}

#[test]
fn stabilization_sweep_controls_first_mode_order() {
    let _guard = serial();
    let w_list = [4096.0, 256.0, 16.0, 1.0, 4.0f64.powi(-6)];
    let table = stabilization_sweep(
        Domain::UnitSquare,
        MeshFamily::T2Squares,
        &[8, 16, 32, 64, 128, 256],
        &w_list,
        BcSpec::AllDirichlet,
        1,
        0,
    )
    .unwrap();
    let tiny_w_row = &table.rows[4];
    let lam_fine = tiny_w_row.lambdas[5][0];
    assert!(
        (lam_fine - 19.7397).abs() <= 1e-3,
        "w=4^-6 N=256 first mode {lam_fine}"
    );
    assert!(
        (table.rows[0].order_mode1 - 0.375).abs() <= 0.05,
        "w=4^6 order {}",
        table.rows[0].order_mode1
    );
    assert!(
        (table.rows[3].order_mode1 - 1.99).abs() <= 0.03,
        "w=1 order {}",
        table.rows[3].order_mode1
    );
    for i in 0..3 {
        assert!(
            table.rows[i].order_mode1 <= table.rows[i + 1].order_mode1,
            "order not monotone from w={} to w={}",
            table.rows[i].w,
            table.rows[i + 1].w
        );
    }
    println!(
        "PASS stabilization sweep: w=4^-6 N=256 gives {lam_fine:.4}, \
         orders by decreasing w {:?}",
        table.rows.iter().map(|r| (r.order_mode1 * 1e4).round() / 1e4).collect::<Vec<_>>()
    );
}

const MIXED_T2_ORDERS: [f64; 6] = [1.94, 1.94, 1.79, 1.80, 1.80, 1.79];

#[test]
fn mixed_conditions_first_mode_and_orders() {
    let _guard = serial();
    let exact1 = exact_spectrum(Domain::SymSquare, BcSpec::MixedTopBottomDirichlet, 1)
        .unwrap()
        .values[0];
    assert!((exact1 - PI * PI / 4.0).abs() <= 1e-12);
    assert!((exact1 - 2.467401).abs() <= 1e-6);

    let study = convergence_study(&StudyConfig {
        domain: Domain::SymSquare,
        family: MeshFamily::T2Squares,
        bc: BcSpec::MixedTopBottomDirichlet,
        n_list: vec![8, 16, 32, 64],
        w: StabWeight::default(),
        modes: 6,
        seed: 0,
        backend: None,
        tol: 1e-10,
    })
    .unwrap();
    let lam1_fine = study.lambda_series[0][3];
    assert!(
        (lam1_fine - 2.4654).abs() <= 5e-3,
        "N=64 first mode {lam1_fine}"
    );
    for mode in 0..6 {
        let dev = (study.orders[mode] - MIXED_T2_ORDERS[mode]).abs();
        assert!(
            dev <= 0.06,
            "mode {} order {} vs reference {}",
            mode + 1,
            study.orders[mode],
            MIXED_T2_ORDERS[mode]
        );
    }
    println!(
        "PASS mixed conditions: N=64 first mode {lam1_fine:.4} \
         (exact {exact1:.6}), orders {:?}",
        study.orders.iter().map(|o| (o * 1e3).round() / 1e3).collect::<Vec<_>>()
    );
}

fn mixed_spectrum_at(n: usize, w: f64, modes: usize) -> Vec<f64> {
    let mesh = mixed_mesh(Domain::SymSquare, MeshFamily::T2Squares, n, 0);
    let (pencil, _) = assemble(&mesh, StabWeight::new(w).unwrap()).unwrap();
    solve_eigen(
        &pencil,
        &SolveOptions {
            m: modes,
            tol: 1e-10,
            backend: Backend::Dense,
        },
    )
    .unwrap()
    .lambdas
}

#[test]
fn large_weight_coarse_mesh_spawns_spurious_modes() {
    let _guard = serial();
    let exact = exact_spectrum(Domain::SymSquare, BcSpec::MixedTopBottomDirichlet, 16).unwrap();

    let coarse = mixed_spectrum_at(10, 10.0, 10);
    assert!(
        coarse.iter().all(|&l| l < 5.0),
        "coarse spectrum reaches {:?}",
        coarse.last()
    );
    let coarse_report = detect_spurious(&coarse, &exact, 0.35);
    assert!(
        coarse_report.flagged.len() >= 6,
        "only {} flagged on the coarse mesh",
        coarse_report.flagged.len()
    );

    let fine = mixed_spectrum_at(40, 10.0, 10);
    for mode in 0..6 {
        let rel = (fine[mode] - exact.values[mode]).abs() / exact.values[mode];
        assert!(
            rel <= 0.12,
            "N=40 mode {}: {} vs {} (rel {rel:.3})",
            mode + 1,
            fine[mode],
            exact.values[mode]
        );
    }
    let fine_report = detect_spurious(&fine, &exact, 0.35);
    assert!(
        fine_report.flagged.len() <= 1,
        "{} flagged on the fine mesh: {:?}",
        fine_report.flagged.len(),
        fine_report.flagged
    );
    println!(
        "PASS spurious modes: N=10 w=10 flags {} of 10 (all below 5.0), \
         N=40 flags {} with first six within 12%",
        coarse_report.flagged.len(),
        fine_report.flagged.len()
    );
}

#[test]
fn lshape_first_mode_extrapolation() {
    let _guard = serial();
    let study = convergence_study(&StudyConfig {
        domain: Domain::LShape,
        family: MeshFamily::T7LshapeSquares,
        bc: BcSpec::AllDirichlet,
        n_list: vec![20, 40, 60, 80, 100],
        w: StabWeight::default(),
        modes: 1,
        seed: 0,
        backend: None,
        tol: 1e-10,
    })
    .unwrap();
    let lam_inf = study.extrapolated[0];
    let alpha = study.orders[0];
    assert!(
        (lam_inf - 38.55).abs() <= 0.4,
        "extrapolated first mode {lam_inf}"
    );
    assert!((alpha - 1.66).abs() <= 0.15, "fitted exponent {alpha}");
    println!(
        "PASS lshape extrapolation: first mode limit {lam_inf:.4}, \
         exponent {alpha:.3}"
    );
}

#[test]
fn structural_properties_hold() {
    let _guard = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    let mut max_projector_dev: f64 = 0.0;
    for case in 0..1000 {
        let (domain, family) = FAMILY_CASES[case % FAMILY_CASES.len()];
        let mut n = rng.gen_range(2usize..=5);
        if domain == Domain::LShape {
            n += n % 2;
        }
        let mesh = untagged_mesh(domain, family, n, rng.gen());
        let cell = rng.gen_range(0..mesh.cells.len());
        let geom = cell_geometry(&mesh, cell).unwrap();
        let cx = rng.gen_range(-10.0..10.0);
        let cy = rng.gen_range(-10.0..10.0);
        let fluxes: Vec<f64> = (0..geom.edge_count())
            .map(|e| {
                (cx * geom.edge_normals[e][0] + cy * geom.edge_normals[e][1])
                    * geom.edge_lengths[e]
            })
            .collect();
        let p = projector(&geom).apply(&fluxes);
        let dev = (p[0] - cx).abs().max((p[1] - cy).abs()) / (1.0 + cx.abs().max(cy.abs()));
        max_projector_dev = max_projector_dev.max(dev);
        assert!(dev <= 1e-12, "projector case {case}: deviation {dev:.2e}");
    }

    let mut max_commute_dev: f64 = 0.0;
    for case in 0..200 {
        let (domain, family) = FAMILY_CASES[case % FAMILY_CASES.len()];
        let mut n = rng.gen_range(2usize..=5);
        if domain == Domain::LShape {
            n += n % 2;
        }
        let mesh = untagged_mesh(domain, family, n, rng.gen());
        let cell = rng.gen_range(0..mesh.cells.len());
        let geom = cell_geometry(&mesh, cell).unwrap();
        let a = rng.gen_range(-3.0..3.0);
        let c = rng.gen_range(-3.0..3.0);
        let dofs = interpolate(&geom, |x, y| [a * y.sin(), c * x.exp() * y.cos()], 12);
        let lhs = dofs.fluxes.iter().sum::<f64>() / geom.area;
        let rhs = integrate_polygon(&geom.vertex_coords, 12, |x, y| -c * x.exp() * y.sin())
            / geom.area;
        let dev = (lhs - rhs).abs() / 1.0f64.max(lhs.abs()).max(rhs.abs());
        max_commute_dev = max_commute_dev.max(dev);
        assert!(dev <= 1e-8, "commuting diagram case {case}: {lhs} vs {rhs}");
    }

    let mut max_asym_a: f64 = 0.0;
    let mut max_rayleigh_dev: f64 = 0.0;
    let mut max_schur_asym: f64 = 0.0;
    for (domain, family) in FAMILY_CASES {
        let n = if domain == Domain::LShape { 4 } else { 3 };
        let mesh = dirichlet_mesh(domain, family, n, 5);
        let (pencil, _) = assemble(&mesh, StabWeight::default()).unwrap();

        let a = pencil.a.to_dense();
        let asym = max_asymmetry(&a) / max_abs(&a);
        max_asym_a = max_asym_a.max(asym);
        assert!(asym <= 1e-12, "{family:?}: flux form asymmetry {asym:.2e}");
        let evd = a.self_adjoint_eigen(faer::Side::Lower).unwrap();
        assert!(evd.S()[0] > 0.0, "{family:?}: flux form not positive definite");

        let chol = pencil.a.sp_cholesky(faer::Side::Lower).unwrap();
        let x = chol.solve(pencil.bt.to_dense());
        let s = spmm_dense(&pencil.b, &x);
        let schur_asym = max_asymmetry(&s) / max_abs(&s);
        max_schur_asym = max_schur_asym.max(schur_asym);
        assert!(
            schur_asym <= 1e-10,
            "{family:?}: Schur asymmetry {schur_asym:.2e}"
        );

        let m = 4.min(pencil.n_u());
        let result = solve_eigen(
            &pencil,
            &SolveOptions {
                m,
                tol: 1e-10,
                backend: Backend::Dense,
            },
        )
        .unwrap();
        for j in 0..m {
            let lam = result.lambdas[j];
            assert!(lam > 0.0, "{family:?}: nonpositive eigenvalue {lam}");
            let sigma_j: Vec<f64> =
                (0..pencil.n_sigma()).map(|i| result.sigma_modes[(i, j)]).collect();
            let a_sigma = spmv(&pencil.a, &sigma_j);
            let rayleigh: f64 = sigma_j.iter().zip(&a_sigma).map(|(s, t)| s * t).sum();
            let dev = (rayleigh - lam).abs() / lam.max(1.0);
            max_rayleigh_dev = max_rayleigh_dev.max(dev);
            assert!(
                dev <= 1e-8,
                "{family:?} mode {}: flux energy {rayleigh} vs {lam}",
                j + 1
            );
        }
    }

    let rerun = |seed: u64| {
        let mesh = dirichlet_mesh(Domain::UnitSquare, MeshFamily::T3PerturbedSquares, 6, seed);
        let (pencil, _) = assemble(&mesh, StabWeight::default()).unwrap();
        let bits: Vec<u64> = mesh
            .vertices
            .iter()
            .flat_map(|v| [v.x.to_bits(), v.y.to_bits()])
            .collect();
        let lambdas = solve_eigen(
            &pencil,
            &SolveOptions {
                m: 4,
                tol: 1e-10,
                backend: Backend::Dense,
            },
        )
        .unwrap()
        .lambdas;
        (bits, lambdas.iter().map(|l| l.to_bits()).collect::<Vec<u64>>())
    };
    let (bits_a, lam_a) = rerun(7);
    let (bits_b, lam_b) = rerun(7);
    assert_eq!(bits_a, bits_b, "mesh rerun differs");
    assert_eq!(lam_a, lam_b, "eigenvalue rerun differs");

    println!(
        "PASS structural properties: projector {max_projector_dev:.1e} over 1000 cells, \
         commuting diagram {max_commute_dev:.1e}, flux-form asymmetry {max_asym_a:.1e}, \
         Schur asymmetry {max_schur_asym:.1e}, flux energy {max_rayleigh_dev:.1e}, \
         reruns bit-identical"
    );
}

#[test]
fn one_cell_hand_oracle() {
    let _guard = serial();
    let mesh = dirichlet_mesh(Domain::UnitSquare, MeshFamily::T2Squares, 1, 0);
    let (pencil, dofs) = assemble(&mesh, StabWeight::default()).unwrap();
    assert_eq!((pencil.n_sigma(), pencil.n_u()), (4, 1));

    let mut signs = vec![0.0; 4];
    let mut loop_of_dof = vec![0usize; 4];
    for (local, &(edge, sign)) in mesh.cells[0].edge_refs.iter().enumerate() {
        let dof = dofs.edge_to_dof[edge].unwrap();
        signs[dof] = f64::from(sign);
        loop_of_dof[dof] = local;
    }
    let hand = |i: usize, j: usize| -> f64 {
        let (li, lj) = (loop_of_dof[i], loop_of_dof[j]);
        let base = if li == lj {
            0.75
        } else if (li + 2) % 4 == lj {
            0.25
        } else {
            0.0
        };
        signs[i] * signs[j] * base
    };
    let a = pencil.a.to_dense();
    let mut max_dev: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            max_dev = max_dev.max((a[(i, j)] - hand(i, j)).abs());
        }
    }
    let b = pencil.b.to_dense();
    for j in 0..4 {
        max_dev = max_dev.max((b[(0, j)] - signs[j]).abs());
    }
    max_dev = max_dev.max((pencil.m_diag[0] - 1.0).abs());
    assert!(max_dev <= 1e-12, "hand assembly deviation {max_dev:.2e}");

    for backend in [Backend::Dense, Backend::ShiftInvert] {
        let result = solve_eigen(
            &pencil,
            &SolveOptions {
                m: 1,
                tol: 1e-12,
                backend,
            },
        )
        .unwrap();
        assert!(
            (result.lambdas[0] - 4.0).abs() <= 1e-12,
            "{backend}: eigenvalue {}",
            result.lambdas[0]
        );
    }
    let source = solve_source(&pencil, &[1.0]).unwrap();
    assert!(
        (source.u[0] - 0.25).abs() <= 1e-12,
        "unit source gives u = {}",
        source.u[0]
    );
    for d in 0..4 {
        assert!((source.sigma[d] + 0.25 * signs[d]).abs() <= 1e-12);
    }
    println!(
        "PASS one-cell oracle: assembly deviation {max_dev:.1e}, \
         eigenvalue 4 and unit-source u = 1/4 on both backends"
    );
}
