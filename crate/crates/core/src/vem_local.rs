//! Per-cell building blocks of the lowest-order mixed method.
//!
//! A field on a cell is known only through one flux degree of freedom per
//! edge, taken with this cell's outward normal. That data determines the
//! divergence (a constant) exactly, and an elementwise projection onto
//! constant vector fields. The local flux form combines the projected part,
//! integrated exactly, with a scaled Euclidean penalty on the flux residual
//! of the projection, so the form stays definite on the kernel of the
//! projector.
//!
//! Everything here is closed-form except `interpolate` and
//! `project_scalar_p0`, which sample analytic fields with Gauss rules.

use crate::mesh::CellGeometry;
use crate::{Error, Result};
use faer::Mat;

/// Gauss-Legendre points per edge used when a caller does not choose.
pub const DEFAULT_EDGE_QUADRATURE: usize = 8;

/// Dimensionless stabilization weight, nominally of order one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabWeight(f64);

impl StabWeight {
    /// Accepts any finite nonnegative weight. Zero disables stabilization,
    /// which leaves the local form rank-deficient; the solver layer decides
    /// whether that is usable.
    pub fn new(w: f64) -> Result<Self> {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "stabilization weight must be finite and nonnegative, got {w}"
            )));
        }
        Ok(StabWeight(w))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for StabWeight {
    fn default() -> Self {
        StabWeight(1.0)
    }
}

/// Edge fluxes of a field through one cell's edges, outward-oriented.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDofs {
    pub fluxes: Vec<f64>,
}

/// Projection from edge fluxes onto constant vector fields.
///
/// Column `e` is `(m_e - c_K) / |K|` where `m_e` is the edge midpoint and
/// `c_K` the centroid, which evaluates, for each component `q` in `{x, y}`,
/// the integration-by-parts identity
/// `∫_K τ·∇q = Σ_e flux_e q(m_e) - (div τ) ∫_K q` divided by the area.
#[derive(Debug, Clone)]
pub struct ProjectorK {
    /// 2×N_K matrix applied to a flux vector.
    pub p: Mat<f64>,
}

impl ProjectorK {
    pub fn apply(&self, fluxes: &[f64]) -> [f64; 2] {
        let mut out = [0.0, 0.0];
        for (e, f) in fluxes.iter().enumerate() {
            out[0] += self.p[(0, e)] * f;
            out[1] += self.p[(1, e)] * f;
        }
        out
    }
}

/// The cell's contribution to the global forms.
#[derive(Debug, Clone)]
pub struct LocalMatrices {
    /// Stabilized flux form, N_K×N_K, symmetric positive definite for
    /// positive weight.
    pub a_k: Mat<f64>,
    /// Divergence coupling against the cell's constant scalar basis; all
    /// ones in the cell's own outward orientation.
    pub b_k: Vec<f64>,
    /// Mass of the constant scalar basis, the cell area.
    pub m_k: f64,
    /// Divergence functional, `b_k / m_k`.
    pub div_k: Vec<f64>,
}

/// Build the flux-to-constant projector for one cell.
pub fn projector(geom: &CellGeometry) -> ProjectorK {
    let nk = geom.edge_count();
    let mut p = Mat::zeros(2, nk);
    for e in 0..nk {
        p[(0, e)] = (geom.edge_midpoints[e][0] - geom.centroid[0]) / geom.area;
        p[(1, e)] = (geom.edge_midpoints[e][1] - geom.centroid[1]) / geom.area;
    }
    ProjectorK { p }
}

/// Assemble the local matrices for one cell.
///
/// `A_K = |K| PᵀP + w DᵀD` with `D = I - F P`, where row `e` of `F` is
/// `|e| n_eᵀ`, the fluxes of a constant field. `D` maps a flux vector to
/// the flux residual of its projection, so constants are reproduced
/// exactly and everything orthogonal to them is controlled by the weight.
pub fn local_forms(geom: &CellGeometry, w: StabWeight) -> LocalMatrices {
    let nk = geom.edge_count();
    let proj = projector(geom).p;
    let mut d = Mat::<f64>::zeros(nk, nk);
    for e in 0..nk {
        let fe = [
            geom.edge_lengths[e] * geom.edge_normals[e][0],
            geom.edge_lengths[e] * geom.edge_normals[e][1],
        ];
        for f in 0..nk {
            let fp = fe[0] * proj[(0, f)] + fe[1] * proj[(1, f)];
            d[(e, f)] = if e == f { 1.0 - fp } else { -fp };
        }
    }
    let mut a_k = Mat::<f64>::zeros(nk, nk);
    for i in 0..nk {
        for j in 0..nk {
            let consistency = geom.area
                * (proj[(0, i)] * proj[(0, j)] + proj[(1, i)] * proj[(1, j)]);
            let mut stab = 0.0;
            for e in 0..nk {
                stab += d[(e, i)] * d[(e, j)];
            }
            a_k[(i, j)] = consistency + w.value() * stab;
        }
    }
    for i in 0..nk {
        for j in 0..i {
            let sym = 0.5 * (a_k[(i, j)] + a_k[(j, i)]);
            a_k[(i, j)] = sym;
            a_k[(j, i)] = sym;
        }
    }
    LocalMatrices {
        a_k,
        b_k: vec![1.0; nk],
        m_k: geom.area,
        div_k: vec![1.0 / geom.area; nk],
    }
}

/// Edge fluxes of an analytic field, by Gauss-Legendre quadrature per edge.
pub fn interpolate(
    geom: &CellGeometry,
    field: impl Fn(f64, f64) -> [f64; 2],
    edge_quadrature_order: usize,
) -> LocalDofs {
    assert!(
        edge_quadrature_order >= 4,
        "edge quadrature order must be at least 4"
    );
    let nk = geom.edge_count();
    let mut fluxes = Vec::with_capacity(nk);
    for e in 0..nk {
        let a = geom.vertex_coords[e];
        let b = geom.vertex_coords[(e + 1) % nk];
        let n = geom.edge_normals[e];
        let flux = crate::quad::integrate_segment(a, b, edge_quadrature_order, |x, y| {
            let v = field(x, y);
            v[0] * n[0] + v[1] * n[1]
        });
        fluxes.push(flux);
    }
    LocalDofs { fluxes }
}

/// Cell mean of a scalar field.
pub fn project_scalar_p0(
    geom: &CellGeometry,
    f: impl Fn(f64, f64) -> f64,
    quadrature_order: usize,
) -> f64 {
    crate::quad::integrate_polygon(&geom.vertex_coords, quadrature_order, f) / geom.area
}
