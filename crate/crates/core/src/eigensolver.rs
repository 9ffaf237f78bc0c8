//! Eigenpairs of the discrete mixed problem.
//!
//! The spectrum is computed on the scalar variable: eliminating the flux
//! from the saddle system leaves `S u = λ M u` with `S = B A⁻¹ Bᵀ`
//! symmetric, and `σ = -A⁻¹ Bᵀ u` recovers the flux mode. Two backends
//! share this contract. `Dense` forms `M^{-1/2} S M^{-1/2}` column block
//! by column block through a sparse Cholesky factorization of `A` and
//! takes a full symmetric eigendecomposition, which is the reference path
//! up to a few thousand cells. `ShiftInvert` never factors `A` alone: it
//! runs subspace iteration on `S⁻¹ M` where each application is one solve
//! with the sparse LU of the indefinite block matrix `[A Bᵀ; B 0]`, so it
//! also works when zero stabilization makes `A` singular on part of the
//! flux space.

use crate::assembly::{saddle_matrix, spmm, spmv, GlobalPencil};
use crate::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Eigensolver strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Full symmetric eigendecomposition of the scalar Schur complement.
    Dense,
    /// Subspace iteration through factorized saddle solves, targeting the
    /// smallest eigenvalues.
    ShiftInvert,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Dense => write!(f, "dense"),
            Backend::ShiftInvert => write!(f, "shift-invert"),
        }
    }
}

/// Options for one eigensolve.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Number of smallest eigenpairs to return.
    pub m: usize,
    /// Relative residual tolerance per returned pair.
    pub tol: f64,
    pub backend: Backend,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            m: 6,
            tol: 1e-10,
            backend: Backend::Dense,
        }
    }
}

/// Converged eigenpairs, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambdas: Vec<f64>,
    /// n_u × m, M-orthonormal columns.
    pub u_modes: Mat<f64>,
    /// n_σ × m flux modes.
    pub sigma_modes: Mat<f64>,
    /// Relative residual of each returned pair.
    pub residuals: Vec<f64>,
}

const MAX_SUBSPACE_ITERATIONS: usize = 500;
const SUBSPACE_SEED: u64 = 0x5EED;

/// Compute the `opts.m` smallest eigenpairs of the pencil.
pub fn solve_eigen(pencil: &GlobalPencil, opts: &SolveOptions) -> Result<EigenResult> {
    crate::run_sequential();
    let n_u = pencil.n_u();
    if opts.m == 0 || opts.m > n_u {
        return Err(Error::InvalidConfig(format!(
            "requested {} modes from a problem with {} scalar unknowns",
            opts.m, n_u
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "residual tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let mut result = match opts.backend {
        Backend::Dense => solve_dense(pencil, opts)?,
        Backend::ShiftInvert => solve_shift_invert(pencil, opts)?,
    };
    for (i, &l) in result.lambdas.iter().enumerate() {
        if l <= 0.0 {
            return Err(Error::NonPositiveEigenvalue { index: i, value: l });
        }
    }
    fix_signs(&mut result);
    order_ties(&mut result);
    result.residuals = (0..opts.m)
        .map(|j| {
            let sigma: Vec<f64> = (0..pencil.n_sigma())
                .map(|i| result.sigma_modes[(i, j)])
                .collect();
            let u: Vec<f64> = (0..n_u).map(|i| result.u_modes[(i, j)]).collect();
            eigenpair_residual(pencil, result.lambdas[j], &sigma, &u)
        })
        .collect();
    Ok(result)
}

fn solve_dense(pencil: &GlobalPencil, opts: &SolveOptions) -> Result<EigenResult> {
    if pencil.w <= 0.0 {
        return Err(Error::InvalidConfig(
            "the dense backend requires positive stabilization; use shift-invert".into(),
        ));
    }
    let n_u = pencil.n_u();
    let n_sigma = pencil.n_sigma();
    let chol = pencil
        .a
        .sp_cholesky(faer::Side::Lower)
        .map_err(|e| Error::SingularSystem(format!("flux form factorization: {e:?}")))?;

    let bt_sym = pencil.bt.symbolic();
    let (bt_cp, bt_ri, bt_v) = (bt_sym.col_ptr(), bt_sym.row_idx(), pencil.bt.val());
    let mut s = Mat::<f64>::zeros(n_u, n_u);
    let block = 512;
    let mut col = 0;
    while col < n_u {
        let width = block.min(n_u - col);
        let mut rhs = Mat::<f64>::zeros(n_sigma, width);
        for j in 0..width {
            for k in bt_cp[col + j]..bt_cp[col + j + 1] {
                rhs[(bt_ri[k], j)] = bt_v[k];
            }
        }
        let ainv = chol.solve(&rhs);
        let s_block = spmm(&pencil.b, &ainv);
        for j in 0..width {
            for i in 0..n_u {
                s[(i, col + j)] = s_block[(i, j)];
            }
        }
        col += width;
    }
    for i in 0..n_u {
        for j in 0..i {
            let sym = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = sym;
            s[(j, i)] = sym;
        }
    }
    let m_isqrt: Vec<f64> = pencil.m_diag.iter().map(|&v| 1.0 / v.sqrt()).collect();
    let mut w = Mat::<f64>::zeros(n_u, n_u);
    for i in 0..n_u {
        for j in 0..n_u {
            w[(i, j)] = s[(i, j)] * m_isqrt[i] * m_isqrt[j];
        }
    }
    let eig = w
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::SingularSystem(format!("dense eigendecomposition: {e:?}")))?;
    let vals = eig.S();
    let vecs = eig.U();
    let m = opts.m;
    let lambdas: Vec<f64> = (0..m).map(|i| vals[i]).collect();
    let mut u_modes = Mat::<f64>::zeros(n_u, m);
    for j in 0..m {
        for i in 0..n_u {
            u_modes[(i, j)] = vecs[(i, j)] * m_isqrt[i];
        }
    }
    let mut rhs = Mat::<f64>::zeros(n_sigma, m);
    for j in 0..m {
        for jj in 0..n_u {
            let x = u_modes[(jj, j)];
            if x != 0.0 {
                for k in bt_cp[jj]..bt_cp[jj + 1] {
                    rhs[(bt_ri[k], j)] += bt_v[k] * x;
                }
            }
        }
    }
    let mut sigma_modes = chol.solve(&rhs);
    for j in 0..m {
        for i in 0..n_sigma {
            sigma_modes[(i, j)] = -sigma_modes[(i, j)];
        }
    }
    Ok(EigenResult {
        lambdas,
        u_modes,
        sigma_modes,
        residuals: Vec::new(),
    })
}

fn solve_shift_invert(pencil: &GlobalPencil, opts: &SolveOptions) -> Result<EigenResult> {
    let n_u = pencil.n_u();
    let n_sigma = pencil.n_sigma();
    let m = opts.m;
    let p = (m + 4).min(n_u);
    let z = saddle_matrix(pencil)?;
    let lu = z
        .sp_lu()
        .map_err(|e| Error::SingularSystem(format!("saddle factorization: {e:?}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(SUBSPACE_SEED);
    let mut y = Mat::<f64>::zeros(n_u, p);
    for j in 0..p {
        for i in 0..n_u {
            y[(i, j)] = rng.gen::<f64>() * 2.0 - 1.0;
        }
    }
    m_orthonormalize(&mut y, None, &pencil.m_diag)?;

    let mut u_modes = Mat::<f64>::zeros(n_u, m);
    let mut sigma_modes = Mat::<f64>::zeros(n_sigma, m);
    let mut lambdas = vec![0.0; m];
    let mut worst = f64::INFINITY;
    for _iteration in 0..MAX_SUBSPACE_ITERATIONS {
        let mut rhs = Mat::<f64>::zeros(n_sigma + n_u, p);
        for j in 0..p {
            for i in 0..n_u {
                rhs[(n_sigma + i, j)] = -pencil.m_diag[i] * y[(i, j)];
            }
        }
        let sol = lu.solve(&rhs);
        let mut v = Mat::<f64>::zeros(n_u, p);
        let mut x = Mat::<f64>::zeros(n_sigma, p);
        for j in 0..p {
            for i in 0..n_sigma {
                x[(i, j)] = sol[(i, j)];
            }
            for i in 0..n_u {
                v[(i, j)] = sol[(n_sigma + i, j)];
            }
        }
        let mut h = Mat::<f64>::zeros(p, p);
        for a in 0..p {
            for b in 0..p {
                let mut acc = 0.0;
                for i in 0..n_u {
                    acc += y[(i, a)] * pencil.m_diag[i] * v[(i, b)];
                }
                h[(a, b)] = acc;
            }
        }
        for a in 0..p {
            for b in 0..a {
                let sym = 0.5 * (h[(a, b)] + h[(b, a)]);
                h[(a, b)] = sym;
                h[(b, a)] = sym;
            }
        }
        let eig = h
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::SingularSystem(format!("projected eigensolve: {e:?}")))?;
        let theta = eig.S();
        let wmat = eig.U();
        let mut vw = Mat::<f64>::zeros(n_u, p);
        let mut xw = Mat::<f64>::zeros(n_sigma, p);
        for (jr, j) in (0..p).rev().enumerate() {
            for a in 0..p {
                let c = wmat[(a, j)];
                if c != 0.0 {
                    for i in 0..n_u {
                        vw[(i, jr)] += v[(i, a)] * c;
                    }
                    for i in 0..n_sigma {
                        xw[(i, jr)] += x[(i, a)] * c;
                    }
                }
            }
        }
        let mut pairs_ok = true;
        worst = 0.0;
        for j in 0..m {
            let th = theta[p - 1 - j];
            if th <= 0.0 {
                pairs_ok = false;
                worst = f64::INFINITY;
                break;
            }
            let lambda = 1.0 / th;
            let mut uj = vec![0.0; n_u];
            let mut norm2 = 0.0;
            for i in 0..n_u {
                norm2 += vw[(i, j)] * pencil.m_diag[i] * vw[(i, j)];
            }
            let scale = norm2.sqrt();
            if scale == 0.0 {
                pairs_ok = false;
                worst = f64::INFINITY;
                break;
            }
            for i in 0..n_u {
                uj[i] = vw[(i, j)] / scale;
            }
            let sj: Vec<f64> = (0..n_sigma).map(|i| xw[(i, j)] / scale).collect();
            let r = eigenpair_residual(pencil, lambda, &sj, &uj);
            worst = worst.max(r);
            if r > opts.tol {
                pairs_ok = false;
            }
            lambdas[j] = lambda;
            for i in 0..n_u {
                u_modes[(i, j)] = uj[i];
            }
            for i in 0..n_sigma {
                sigma_modes[(i, j)] = sj[i];
            }
        }
        if pairs_ok {
            m_orthonormalize(&mut u_modes, Some(&mut sigma_modes), &pencil.m_diag)?;
            return Ok(EigenResult {
                lambdas,
                u_modes,
                sigma_modes,
                residuals: Vec::new(),
            });
        }
        y = vw;
        m_orthonormalize(&mut y, None, &pencil.m_diag)?;
    }
    Err(Error::NoConvergence {
        iterations: MAX_SUBSPACE_ITERATIONS,
        residual: worst,
    })
}

/// Modified Gram-Schmidt in the M-inner product, two passes; column
/// operations are mirrored onto `coupled` when given so flux modes stay
/// consistent with their scalar modes.
fn m_orthonormalize(
    y: &mut Mat<f64>,
    mut coupled: Option<&mut Mat<f64>>,
    m_diag: &[f64],
) -> Result<()> {
    let n = y.nrows();
    let p = y.ncols();
    for _pass in 0..2 {
        for j in 0..p {
            for k in 0..j {
                let mut r = 0.0;
                for i in 0..n {
                    r += y[(i, k)] * m_diag[i] * y[(i, j)];
                }
                for i in 0..n {
                    let v = y[(i, k)];
                    y[(i, j)] -= r * v;
                }
                if let Some(c) = coupled.as_deref_mut() {
                    for i in 0..c.nrows() {
                        let v = c[(i, k)];
                        c[(i, j)] -= r * v;
                    }
                }
            }
            let mut norm2 = 0.0;
            for i in 0..n {
                norm2 += y[(i, j)] * m_diag[i] * y[(i, j)];
            }
            let norm = norm2.sqrt();
            if norm < 1e-250 {
                return Err(Error::SingularSystem(
                    "iteration subspace collapsed during orthonormalization".into(),
                ));
            }
            for i in 0..n {
                y[(i, j)] /= norm;
            }
            if let Some(c) = coupled.as_deref_mut() {
                for i in 0..c.nrows() {
                    c[(i, j)] /= norm;
                }
            }
        }
    }
    Ok(())
}

fn fix_signs(result: &mut EigenResult) {
    let n_u = result.u_modes.nrows();
    let n_s = result.sigma_modes.nrows();
    for j in 0..result.lambdas.len() {
        let mut colmax: f64 = 0.0;
        for i in 0..n_u {
            colmax = colmax.max(result.u_modes[(i, j)].abs());
        }
        let mut flip = false;
        for i in 0..n_u {
            let v = result.u_modes[(i, j)];
            if v.abs() > 1e-10 * colmax {
                flip = v < 0.0;
                break;
            }
        }
        if flip {
            for i in 0..n_u {
                result.u_modes[(i, j)] = -result.u_modes[(i, j)];
            }
            for i in 0..n_s {
                result.sigma_modes[(i, j)] = -result.sigma_modes[(i, j)];
            }
        }
    }
}

/// Stable presentation order inside numerically degenerate clusters:
/// ascending eigenvalue, ties broken lexicographically on the sign-fixed
/// scalar mode.
fn order_ties(result: &mut EigenResult) {
    let m = result.lambdas.len();
    let n_u = result.u_modes.nrows();
    let n_s = result.sigma_modes.nrows();
    let mut swapped = true;
    while swapped {
        swapped = false;
        for j in 0..m.saturating_sub(1) {
            let li = result.lambdas[j];
            let lj = result.lambdas[j + 1];
            let tied = (lj - li).abs() <= 1e-9 * li.abs().max(1.0);
            let should_swap = if tied {
                let mut order = std::cmp::Ordering::Equal;
                for i in 0..n_u {
                    let a = result.u_modes[(i, j)];
                    let b = result.u_modes[(i, j + 1)];
                    if (a - b).abs() > 1e-9 {
                        order = a.partial_cmp(&b).unwrap();
                        break;
                    }
                }
                order == std::cmp::Ordering::Greater
            } else {
                lj < li
            };
            if should_swap {
                result.lambdas.swap(j, j + 1);
                for i in 0..n_u {
                    let t = result.u_modes[(i, j)];
                    result.u_modes[(i, j)] = result.u_modes[(i, j + 1)];
                    result.u_modes[(i, j + 1)] = t;
                }
                for i in 0..n_s {
                    let t = result.sigma_modes[(i, j)];
                    result.sigma_modes[(i, j)] = result.sigma_modes[(i, j + 1)];
                    result.sigma_modes[(i, j + 1)] = t;
                }
                swapped = true;
            }
        }
    }
}

/// Max of the relative residuals of the two block equations,
/// `‖Aσ + Bᵀu‖ / max(‖Aσ‖, ‖Bᵀu‖)` and
/// `‖Bσ + λMu‖ / max(‖Bσ‖, ‖λMu‖)`.
pub fn eigenpair_residual(pencil: &GlobalPencil, lambda: f64, sigma: &[f64], u: &[f64]) -> f64 {
    let n_sigma = pencil.n_sigma();
    let n_u = pencil.n_u();
    let mut a_sigma = vec![0.0; n_sigma];
    spmv(&pencil.a, sigma, &mut a_sigma);
    let mut bt_u = vec![0.0; n_sigma];
    spmv(&pencil.bt, u, &mut bt_u);
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r1_num: f64 = a_sigma
        .iter()
        .zip(&bt_u)
        .map(|(a, b)| (a + b) * (a + b))
        .sum::<f64>()
        .sqrt();
    let r1_den = norm(&a_sigma).max(norm(&bt_u)).max(1e-300);
    let mut b_sigma = vec![0.0; n_u];
    spmv(&pencil.b, sigma, &mut b_sigma);
    let lmu: Vec<f64> = (0..n_u)
        .map(|i| lambda * pencil.m_diag[i] * u[i])
        .collect();
    let r2_num: f64 = b_sigma
        .iter()
        .zip(&lmu)
        .map(|(a, b)| (a + b) * (a + b))
        .sum::<f64>()
        .sqrt();
    let r2_den = norm(&b_sigma).max(norm(&lmu)).max(1e-300);
    (r1_num / r1_den).max(r2_num / r2_den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::mesh::{generate, tag_boundary, BcSpec, Domain, MeshFamily};
    use crate::vem_local::StabWeight;

    fn pencil(family: MeshFamily, n: usize, w: f64) -> GlobalPencil {
        let mesh = generate(Domain::UnitSquare, family, n, 0).unwrap();
        let mesh = tag_boundary(mesh, BcSpec::AllDirichlet).unwrap();
        assemble(&mesh, StabWeight::new(w).unwrap()).unwrap().0
    }

    #[test]
    fn single_cell_eigenvalue_is_schur_quotient() {
        let p = pencil(MeshFamily::T2Squares, 1, 1.0);
        for backend in [Backend::Dense, Backend::ShiftInvert] {
            let opts = SolveOptions {
                m: 1,
                tol: 1e-12,
                backend,
            };
            let r = solve_eigen(&p, &opts).unwrap();
            assert!((r.lambdas[0] - 4.0).abs() < 1e-10, "{:?}", r.lambdas);
        }
    }

    #[test]
    fn backends_agree_on_a_small_grid() {
        let p = pencil(MeshFamily::T2Squares, 8, 1.0);
        let dense = solve_eigen(
            &p,
            &SolveOptions {
                m: 6,
                tol: 1e-10,
                backend: Backend::Dense,
            },
        )
        .unwrap();
        let si = solve_eigen(
            &p,
            &SolveOptions {
                m: 6,
                tol: 1e-10,
                backend: Backend::ShiftInvert,
            },
        )
        .unwrap();
        for j in 0..6 {
            assert!(
                (dense.lambdas[j] - si.lambdas[j]).abs() < 1e-7 * dense.lambdas[j],
                "mode {j}: {} vs {}",
                dense.lambdas[j],
                si.lambdas[j]
            );
        }
    }

    #[test]
    fn modes_are_m_orthonormal_and_satisfy_rayleigh() {
        let p = pencil(MeshFamily::T3PerturbedSquares, 6, 1.0);
        let r = solve_eigen(
            &p,
            &SolveOptions {
                m: 4,
                tol: 1e-10,
                backend: Backend::Dense,
            },
        )
        .unwrap();
        let n_u = p.n_u();
        for a in 0..4 {
            for b in 0..4 {
                let mut dot = 0.0;
                for i in 0..n_u {
                    dot += r.u_modes[(i, a)] * p.m_diag[i] * r.u_modes[(i, b)];
                }
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10, "({a},{b}) -> {dot}");
            }
        }
        let n_s = p.n_sigma();
        for j in 0..4 {
            let sigma: Vec<f64> = (0..n_s).map(|i| r.sigma_modes[(i, j)]).collect();
            let mut a_sigma = vec![0.0; n_s];
            spmv(&p.a, &sigma, &mut a_sigma);
            let energy: f64 = sigma.iter().zip(&a_sigma).map(|(x, y)| x * y).sum();
            assert!(
                (energy - r.lambdas[j]).abs() < 1e-8 * r.lambdas[j],
                "mode {j}: energy {energy} vs lambda {}",
                r.lambdas[j]
            );
        }
    }

    #[test]
    fn symmetric_grid_has_a_degenerate_pair() {
        let p = pencil(MeshFamily::T2Squares, 8, 1.0);
        let r = solve_eigen(&p, &SolveOptions::default()).unwrap();
        assert!((r.lambdas[1] - r.lambdas[2]).abs() < 1e-9 * r.lambdas[1]);
    }

    #[test]
    fn converged_pairs_meet_tolerance() {
        let p = pencil(MeshFamily::T2Squares, 6, 1.0);
        let r = solve_eigen(&p, &SolveOptions::default()).unwrap();
        for (j, res) in r.residuals.iter().enumerate() {
            assert!(*res <= 1e-9, "mode {j} residual {res}");
        }
    }

    #[test]
    fn mismatched_pair_has_unit_residual() {
        let p = pencil(MeshFamily::T2Squares, 3, 1.0);
        let sigma = vec![0.0; p.n_sigma()];
        let mut u = vec![0.0; p.n_u()];
        u[0] = 1.0;
        let r = eigenpair_residual(&p, 1.0, &sigma, &u);
        assert!((r - 1.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn perturbed_eigenvalue_shows_first_order_residual() {
        let p = pencil(MeshFamily::T2Squares, 6, 1.0);
        let r = solve_eigen(&p, &SolveOptions::default()).unwrap();
        let sigma: Vec<f64> = (0..p.n_sigma()).map(|i| r.sigma_modes[(i, 0)]).collect();
        let u: Vec<f64> = (0..p.n_u()).map(|i| r.u_modes[(i, 0)]).collect();
        let res = eigenpair_residual(&p, r.lambdas[0] * (1.0 + 1e-3), &sigma, &u);
        assert!(res > 2e-4 && res < 5e-3, "{res}");
    }

    #[test]
    fn invalid_mode_counts_are_rejected() {
        let p = pencil(MeshFamily::T2Squares, 2, 1.0);
        let opts = SolveOptions {
            m: 5,
            ..SolveOptions::default()
        };
        assert!(matches!(
            solve_eigen(&p, &opts),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn dense_backend_rejects_zero_weight() {
        let p = pencil(MeshFamily::T2Squares, 3, 0.0);
        let err = solve_eigen(&p, &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn zero_weight_works_through_shift_invert() {
        let p = pencil(MeshFamily::T2Squares, 8, 0.0);
        let r = solve_eigen(
            &p,
            &SolveOptions {
                m: 1,
                tol: 1e-10,
                backend: Backend::ShiftInvert,
            },
        )
        .unwrap();
        assert!((r.lambdas[0] - 20.2578585070).abs() < 1e-6, "{:?}", r.lambdas);
    }
}
