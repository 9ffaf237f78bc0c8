//! Shared helpers for the integration test suites.

#![allow(dead_code)]

use vemlap::mesh::{generate, tag_boundary, BcSpec, Domain, MeshFamily, PolygonalMesh};

/// Every mesh family with a domain it is defined on.
pub const FAMILY_CASES: [(Domain, MeshFamily); 7] = [
    (Domain::UnitSquare, MeshFamily::T1Triangles),
    (Domain::UnitSquare, MeshFamily::T2Squares),
    (Domain::UnitSquare, MeshFamily::T3PerturbedSquares),
    (Domain::UnitSquare, MeshFamily::T4Trapezoids),
    (Domain::LShape, MeshFamily::T5Hexagons),
    (Domain::LShape, MeshFamily::T6LshapeTriangles),
    (Domain::LShape, MeshFamily::T7LshapeSquares),
];

/// The square-domain subset, where mixed boundary conditions apply.
pub const SQUARE_CASES: [(Domain, MeshFamily); 4] = [
    (Domain::UnitSquare, MeshFamily::T1Triangles),
    (Domain::SymSquare, MeshFamily::T2Squares),
    (Domain::UnitSquare, MeshFamily::T3PerturbedSquares),
    (Domain::SymSquare, MeshFamily::T4Trapezoids),
];

pub fn untagged_mesh(domain: Domain, family: MeshFamily, n: usize, seed: u64) -> PolygonalMesh {
    generate(domain, family, n, seed).unwrap()
}

pub fn dirichlet_mesh(domain: Domain, family: MeshFamily, n: usize, seed: u64) -> PolygonalMesh {
    tag_boundary(untagged_mesh(domain, family, n, seed), BcSpec::AllDirichlet).unwrap()
}

pub fn mixed_mesh(domain: Domain, family: MeshFamily, n: usize, seed: u64) -> PolygonalMesh {
    tag_boundary(
        untagged_mesh(domain, family, n, seed),
        BcSpec::MixedTopBottomDirichlet,
    )
    .unwrap()
}

/// Sparse matrix-vector product through the public accessors.
pub fn spmv(m: &faer::sparse::SparseColMat<usize, f64>, x: &[f64]) -> Vec<f64> {
    let sym = m.symbolic();
    let col_ptr = sym.col_ptr();
    let row_idx = sym.row_idx();
    let val = m.val();
    let mut y = vec![0.0; m.nrows()];
    for j in 0..m.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for k in col_ptr[j]..col_ptr[j + 1] {
            y[row_idx[k]] += val[k] * xj;
        }
    }
    y
}

/// Sparse times dense product, one column at a time.
pub fn spmm_dense(m: &faer::sparse::SparseColMat<usize, f64>, x: &faer::Mat<f64>) -> faer::Mat<f64> {
    let mut out = faer::Mat::zeros(m.nrows(), x.ncols());
    let mut col = vec![0.0; x.nrows()];
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            col[i] = x[(i, j)];
        }
        for (i, v) in spmv(m, &col).into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}

/// Largest absolute entry of a dense matrix.
pub fn max_abs(m: &faer::Mat<f64>) -> f64 {
    let mut v: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            v = v.max(m[(i, j)].abs());
        }
    }
    v
}

/// Largest absolute asymmetry |m_ij - m_ji| of a square dense matrix.
pub fn max_asymmetry(m: &faer::Mat<f64>) -> f64 {
    let mut v: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..j {
            v = v.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    v
}
