//! Global assembly of the mixed saddle-point pencil and the source solve.
//!
//! Every interior or Dirichlet-boundary edge carries one global flux
//! unknown, oriented along the canonical edge direction (lower vertex index
//! to higher). Cells scatter their outward-oriented local matrices through
//! per-edge orientation signs. Neumann edges carry no unknown at all: the
//! zero-flux condition is essential in the mixed form and is imposed by
//! leaving those DOFs out, which also keeps the flux form positive
//! definite. Dirichlet data never appears; it is natural here.

use crate::mesh::{BoundaryTag, PolygonalMesh};
use crate::vem_local::{local_forms, StabWeight};
use crate::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

/// Placement of flux unknowns: `edge_to_dof[e]` is `None` exactly when
/// edge `e` is a Neumann boundary edge.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub edge_to_dof: Vec<Option<usize>>,
    pub dof_to_edge: Vec<usize>,
}

impl DofMap {
    pub fn n_sigma(&self) -> usize {
        self.dof_to_edge.len()
    }

    /// Sign relating cell-outward flux on a local edge to the canonical
    /// global orientation of that edge.
    pub fn orientation(mesh: &PolygonalMesh, cell: usize, local_edge: usize) -> f64 {
        f64::from(mesh.cells[cell].edge_refs[local_edge].1)
    }
}

/// The assembled matrices of the discrete problem: flux form `A`
/// (n_σ×n_σ, SPD for positive weight), divergence coupling `B` (n_u×n_σ),
/// and the diagonal scalar mass `M` of cell areas.
#[derive(Debug)]
pub struct GlobalPencil {
    pub a: SparseColMat<usize, f64>,
    pub b: SparseColMat<usize, f64>,
    /// Cached transpose of `b`.
    pub bt: SparseColMat<usize, f64>,
    pub m_diag: Vec<f64>,
    pub w: f64,
}

impl GlobalPencil {
    pub fn n_sigma(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_u(&self) -> usize {
        self.m_diag.len()
    }
}

/// Solution of the discrete source problem.
#[derive(Debug, Clone)]
pub struct SourceSolution {
    pub sigma: Vec<f64>,
    pub u: Vec<f64>,
}

/// Sparse matrix-vector product `y = M x`.
pub(crate) fn spmv(m: &SparseColMat<usize, f64>, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), m.ncols());
    assert_eq!(y.len(), m.nrows());
    y.fill(0.0);
    let sym = m.symbolic();
    let col_ptr = sym.col_ptr();
    let row_idx = sym.row_idx();
    let val = m.val();
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        for k in col_ptr[j]..col_ptr[j + 1] {
            y[row_idx[k]] += val[k] * xj;
        }
    }
}

/// Sparse times dense, `M X` column by column.
pub(crate) fn spmm(m: &SparseColMat<usize, f64>, x: &Mat<f64>) -> Mat<f64> {
    assert_eq!(x.nrows(), m.ncols());
    let mut out = Mat::zeros(m.nrows(), x.ncols());
    let sym = m.symbolic();
    let col_ptr = sym.col_ptr();
    let row_idx = sym.row_idx();
    let val = m.val();
    for c in 0..x.ncols() {
        for j in 0..m.ncols() {
            let xj = x[(j, c)];
            if xj == 0.0 {
                continue;
            }
            for k in col_ptr[j]..col_ptr[j + 1] {
                out[(row_idx[k], c)] += val[k] * xj;
            }
        }
    }
    out
}

/// Assemble the global pencil on a boundary-tagged mesh.
pub fn assemble(mesh: &PolygonalMesh, w: StabWeight) -> Result<(GlobalPencil, DofMap)> {
    let boundary = mesh.boundary_edge_flags();
    let mut edge_to_dof = vec![None; mesh.edges.len()];
    let mut dof_to_edge = Vec::new();
    for (e, edge) in mesh.edges.iter().enumerate() {
        if boundary[e] {
            match edge.tag {
                BoundaryTag::Neumann => continue,
                BoundaryTag::Dirichlet => {}
                BoundaryTag::Interior => return Err(Error::UntaggedBoundaryEdge { edge: e }),
            }
        }
        edge_to_dof[e] = Some(dof_to_edge.len());
        dof_to_edge.push(e);
    }
    let n_sigma = dof_to_edge.len();
    let n_u = mesh.cells.len();

    let mut a_trip: Vec<Triplet<usize, usize, f64>> = Vec::new();
    let mut b_trip: Vec<Triplet<usize, usize, f64>> = Vec::new();
    let mut m_diag = Vec::with_capacity(n_u);
    for (c, cell) in mesh.cells.iter().enumerate() {
        let geom = crate::mesh::cell_geometry(mesh, c)?;
        let lm = local_forms(&geom, w);
        m_diag.push(lm.m_k);
        let nk = cell.edge_refs.len();
        for i in 0..nk {
            let (ei, si) = cell.edge_refs[i];
            let Some(gi) = edge_to_dof[ei] else { continue };
            let si = f64::from(si);
            b_trip.push(Triplet::new(c, gi, si * lm.b_k[i]));
            for j in 0..nk {
                let (ej, sj) = cell.edge_refs[j];
                let Some(gj) = edge_to_dof[ej] else { continue };
                let sj = f64::from(sj);
                a_trip.push(Triplet::new(gi, gj, si * sj * lm.a_k[(i, j)]));
            }
        }
    }
    let a = SparseColMat::try_new_from_triplets(n_sigma, n_sigma, &a_trip)
        .map_err(|e| Error::SingularSystem(format!("building flux form: {e:?}")))?;
    let b = SparseColMat::try_new_from_triplets(n_u, n_sigma, &b_trip)
        .map_err(|e| Error::SingularSystem(format!("building divergence coupling: {e:?}")))?;
    let bt_trip: Vec<Triplet<usize, usize, f64>> = b_trip
        .iter()
        .map(|t| Triplet::new(t.col, t.row, t.val))
        .collect();
    let bt = SparseColMat::try_new_from_triplets(n_sigma, n_u, &bt_trip)
        .map_err(|e| Error::SingularSystem(format!("building coupling transpose: {e:?}")))?;
    Ok((
        GlobalPencil {
            a,
            b,
            bt,
            m_diag,
            w: w.value(),
        },
        DofMap {
            edge_to_dof,
            dof_to_edge,
        },
    ))
}

/// Assemble the saddle block matrix `[A Bᵀ; B 0]` as one sparse matrix.
pub(crate) fn saddle_matrix(pencil: &GlobalPencil) -> Result<SparseColMat<usize, f64>> {
    let n_sigma = pencil.n_sigma();
    let n_u = pencil.n_u();
    let n = n_sigma + n_u;
    let mut trip: Vec<Triplet<usize, usize, f64>> = Vec::new();
    {
        let sym = pencil.a.symbolic();
        let (cp, ri, v) = (sym.col_ptr(), sym.row_idx(), pencil.a.val());
        for j in 0..n_sigma {
            for k in cp[j]..cp[j + 1] {
                trip.push(Triplet::new(ri[k], j, v[k]));
            }
        }
    }
    {
        let sym = pencil.b.symbolic();
        let (cp, ri, v) = (sym.col_ptr(), sym.row_idx(), pencil.b.val());
        for j in 0..n_sigma {
            for k in cp[j]..cp[j + 1] {
                trip.push(Triplet::new(n_sigma + ri[k], j, v[k]));
                trip.push(Triplet::new(j, n_sigma + ri[k], v[k]));
            }
        }
    }
    SparseColMat::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::SingularSystem(format!("building saddle matrix: {e:?}")))
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solve the discrete source problem `Aσ + Bᵀu = 0`, `-Bσ = Mf`.
///
/// For positive stabilization the Schur complement `B A⁻¹ Bᵀ` is SPD and
/// the scalar unknown is found by conjugate gradients, applying the Schur
/// operator through a cached sparse Cholesky factorization of `A`. With
/// zero stabilization `A` is singular on part of the flux space and the
/// full saddle system is solved by sparse LU instead.
pub fn solve_source(pencil: &GlobalPencil, f: &[f64]) -> Result<SourceSolution> {
    crate::run_sequential();
    assert_eq!(f.len(), pencil.n_u());
    let n_u = pencil.n_u();
    let n_sigma = pencil.n_sigma();
    let mf: Vec<f64> = f
        .iter()
        .zip(&pencil.m_diag)
        .map(|(fi, mi)| fi * mi)
        .collect();

    let (sigma, u) = if pencil.w > 0.0 {
        let chol = pencil
            .a
            .sp_cholesky(faer::Side::Lower)
            .map_err(|e| Error::SingularSystem(format!("flux form factorization: {e:?}")))?;
        let apply_schur = |x: &[f64]| -> Vec<f64> {
            let mut btx = vec![0.0; n_sigma];
            spmv(&pencil.bt, x, &mut btx);
            let mut rhs = Mat::zeros(n_sigma, 1);
            for i in 0..n_sigma {
                rhs[(i, 0)] = btx[i];
            }
            let sol = chol.solve(&rhs);
            let ainv_btx: Vec<f64> = (0..n_sigma).map(|i| sol[(i, 0)]).collect();
            let mut out = vec![0.0; n_u];
            spmv(&pencil.b, &ainv_btx, &mut out);
            out
        };
        let u = conjugate_gradient(apply_schur, &mf, 1e-13, 10 * n_u + 100)?;
        let mut btu = vec![0.0; n_sigma];
        spmv(&pencil.bt, &u, &mut btu);
        let mut rhs = Mat::zeros(n_sigma, 1);
        for i in 0..n_sigma {
            rhs[(i, 0)] = btu[i];
        }
        let sol = chol.solve(&rhs);
        let sigma: Vec<f64> = (0..n_sigma).map(|i| -sol[(i, 0)]).collect();
        (sigma, u)
    } else {
        let z = saddle_matrix(pencil)?;
        let lu = z
            .sp_lu()
            .map_err(|e| Error::SingularSystem(format!("saddle factorization: {e:?}")))?;
        let mut rhs = Mat::zeros(n_sigma + n_u, 1);
        for i in 0..n_u {
            rhs[(n_sigma + i, 0)] = -mf[i];
        }
        let sol = lu.solve(&rhs);
        let sigma: Vec<f64> = (0..n_sigma).map(|i| sol[(i, 0)]).collect();
        let u: Vec<f64> = (0..n_u).map(|i| sol[(n_sigma + i, 0)]).collect();
        (sigma, u)
    };

    let mut a_sigma = vec![0.0; n_sigma];
    spmv(&pencil.a, &sigma, &mut a_sigma);
    let mut bt_u = vec![0.0; n_sigma];
    spmv(&pencil.bt, &u, &mut bt_u);
    let r1: Vec<f64> = a_sigma.iter().zip(&bt_u).map(|(a, b)| a + b).collect();
    let scale1 = norm(&a_sigma).max(norm(&bt_u)).max(1e-300);
    let mut b_sigma = vec![0.0; n_u];
    spmv(&pencil.b, &sigma, &mut b_sigma);
    let r2: Vec<f64> = b_sigma.iter().zip(&mf).map(|(a, b)| a + b).collect();
    let scale2 = norm(&b_sigma).max(norm(&mf)).max(1e-300);
    let rel = (norm(&r1) / scale1).max(norm(&r2) / scale2);
    if norm(&mf) > 0.0 && rel > 1e-10 {
        return Err(Error::SingularSystem(format!(
            "source solve residual {rel:.3e} exceeds 1e-10"
        )));
    }
    Ok(SourceSolution { sigma, u })
}

fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = rhs.len();
    let rhs_norm = norm(rhs);
    if rhs_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    for _ in 0..max_iter {
        if rr.sqrt() <= rel_tol * rhs_norm {
            return Ok(x);
        }
        let ap = apply(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::SingularSystem(
                "conjugate gradient hit a nonpositive curvature direction".into(),
            ));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rr.sqrt() <= rel_tol * rhs_norm * 100.0 {
        return Ok(x);
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: rr.sqrt() / rhs_norm,
    })
}
