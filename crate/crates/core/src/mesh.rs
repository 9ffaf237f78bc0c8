//! Polygonal meshes: generation of the structured and Voronoi families,
//! boundary tagging, per-cell geometry and mesh quality reporting.
//!
//! A mesh stores a flat vertex list, canonically oriented edges (lower
//! vertex index first) and cells as counterclockwise vertex loops. Each
//! cell also carries, per edge, the sign relating the canonical edge
//! direction to the cell-outward normal, which is what global assembly
//! needs to reconcile flux degrees of freedom shared by two cells.

mod families;
mod voronoi;

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Boundary classification of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryTag {
    Interior,
    Dirichlet,
    Neumann,
}

/// An edge in canonical orientation: `v0 < v1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub v0: usize,
    pub v1: usize,
    pub tag: BoundaryTag,
}

/// A polygonal cell: a counterclockwise vertex loop plus, for each loop
/// edge, the index of the canonical edge and the orientation sign (+1 when
/// the loop traverses the edge from `v0` to `v1`, which makes the canonical
/// normal point outward).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub vertex_loop: Vec<usize>,
    pub edge_refs: Vec<(usize, i8)>,
}

/// The supported computational domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// (0,1)^2
    UnitSquare,
    /// (-1,1)^2
    SymSquare,
    /// (0,1)^2 with the quadrant [1/2,1)x[1/2,1) removed
    LShape,
}

impl Domain {
    pub fn area(&self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::SymSquare => 4.0,
            Domain::LShape => 0.75,
        }
    }

    /// Boundary polyline segments, counterclockwise, with their side kind.
    pub fn boundary_segments(&self) -> Vec<(Point2, Point2, SideKind)> {
        match self {
            Domain::UnitSquare => vec![
                (Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), SideKind::Bottom),
                (Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), SideKind::Right),
                (Point2::new(1.0, 1.0), Point2::new(0.0, 1.0), SideKind::Top),
                (Point2::new(0.0, 1.0), Point2::new(0.0, 0.0), SideKind::Left),
            ],
            Domain::SymSquare => vec![
                (Point2::new(-1.0, -1.0), Point2::new(1.0, -1.0), SideKind::Bottom),
                (Point2::new(1.0, -1.0), Point2::new(1.0, 1.0), SideKind::Right),
                (Point2::new(1.0, 1.0), Point2::new(-1.0, 1.0), SideKind::Top),
                (Point2::new(-1.0, 1.0), Point2::new(-1.0, -1.0), SideKind::Left),
            ],
            Domain::LShape => vec![
                (Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), SideKind::Bottom),
                (Point2::new(1.0, 0.0), Point2::new(1.0, 0.5), SideKind::Right),
                (Point2::new(1.0, 0.5), Point2::new(0.5, 0.5), SideKind::NotchHorizontal),
                (Point2::new(0.5, 0.5), Point2::new(0.5, 1.0), SideKind::NotchVertical),
                (Point2::new(0.5, 1.0), Point2::new(0.0, 1.0), SideKind::Top),
                (Point2::new(0.0, 1.0), Point2::new(0.0, 0.0), SideKind::Left),
            ],
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Domain::UnitSquare => "unit-square",
            Domain::SymSquare => "sym-square",
            Domain::LShape => "lshape",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit-square" => Ok(Domain::UnitSquare),
            "sym-square" => Ok(Domain::SymSquare),
            "lshape" => Ok(Domain::LShape),
            other => Err(Error::InvalidConfig(format!(
                "unknown domain {other:?} (expected unit-square, sym-square or lshape)"
            ))),
        }
    }
}

/// Which side of the domain boundary a segment belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideKind {
    Bottom,
    Right,
    Top,
    Left,
    NotchHorizontal,
    NotchVertical,
}

/// Mesh families. T1-T4 live on the squares, T5-T7 on the L-shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeshFamily {
    /// N x N squares each split by the lower-left to upper-right diagonal.
    T1Triangles,
    /// N x N congruent squares.
    T2Squares,
    /// T2 with interior nodes randomly displaced by up to 0.2 h.
    T3PerturbedSquares,
    /// Trapezoid tiling from zigzagged horizontal grid lines.
    T4Trapezoids,
    /// Lloyd-relaxed Voronoi cells, hexagon dominant, on the L-shape.
    T5Hexagons,
    /// L-shape squares split into triangles.
    T6LshapeTriangles,
    /// L-shape squares.
    T7LshapeSquares,
}

impl MeshFamily {
    pub fn admissible_on(&self, domain: Domain) -> bool {
        match self {
            MeshFamily::T1Triangles
            | MeshFamily::T2Squares
            | MeshFamily::T3PerturbedSquares
            | MeshFamily::T4Trapezoids => {
                matches!(domain, Domain::UnitSquare | Domain::SymSquare)
            }
            MeshFamily::T5Hexagons
            | MeshFamily::T6LshapeTriangles
            | MeshFamily::T7LshapeSquares => matches!(domain, Domain::LShape),
        }
    }
}

impl std::fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MeshFamily::T1Triangles => "t1",
            MeshFamily::T2Squares => "t2",
            MeshFamily::T3PerturbedSquares => "t3",
            MeshFamily::T4Trapezoids => "t4",
            MeshFamily::T5Hexagons => "t5",
            MeshFamily::T6LshapeTriangles => "t6",
            MeshFamily::T7LshapeSquares => "t7",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for MeshFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t1" => Ok(MeshFamily::T1Triangles),
            "t2" => Ok(MeshFamily::T2Squares),
            "t3" => Ok(MeshFamily::T3PerturbedSquares),
            "t4" => Ok(MeshFamily::T4Trapezoids),
            "t5" => Ok(MeshFamily::T5Hexagons),
            "t6" => Ok(MeshFamily::T6LshapeTriangles),
            "t7" => Ok(MeshFamily::T7LshapeSquares),
            other => Err(Error::InvalidConfig(format!(
                "unknown mesh family {other:?} (expected t1..t7)"
            ))),
        }
    }
}

/// Boundary condition layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BcSpec {
    /// Homogeneous Dirichlet on the whole boundary.
    AllDirichlet,
    /// Dirichlet on the top and bottom sides, zero normal flux on the left
    /// and right sides. Defined on the squares only.
    MixedTopBottomDirichlet,
}

impl std::fmt::Display for BcSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BcSpec::AllDirichlet => "dirichlet",
            BcSpec::MixedTopBottomDirichlet => "mixed",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for BcSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(BcSpec::AllDirichlet),
            "mixed" => Ok(BcSpec::MixedTopBottomDirichlet),
            other => Err(Error::InvalidConfig(format!(
                "unknown boundary condition {other:?} (expected dirichlet or mixed)"
            ))),
        }
    }
}

/// Tolerance for classifying a point as lying on a boundary segment.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Cells with shoelace area at or below this are rejected as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-14;

/// A conforming polygonal mesh.
#[derive(Debug, Clone)]
pub struct PolygonalMesh {
    pub vertices: Vec<Point2>,
    pub edges: Vec<Edge>,
    pub cells: Vec<Cell>,
    pub domain: Option<Domain>,
    pub family: Option<MeshFamily>,
    pub refinement: Option<usize>,
}

/// Per-cell geometric quantities. Edge-indexed vectors follow the cell's
/// vertex loop order, matching `Cell::edge_refs`.
#[derive(Debug, Clone)]
pub struct CellGeometry {
    pub area: f64,
    pub centroid: [f64; 2],
    pub diameter: f64,
    /// Integrals of x and y over the cell.
    pub first_moments: [f64; 2],
    pub vertex_coords: Vec<[f64; 2]>,
    pub edge_lengths: Vec<f64>,
    /// Outward unit normals.
    pub edge_normals: Vec<[f64; 2]>,
    pub edge_midpoints: Vec<[f64; 2]>,
}

impl CellGeometry {
    pub fn edge_count(&self) -> usize {
        self.edge_lengths.len()
    }
}

/// Worst-case shape measures over all cells.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QualityReport {
    /// min over cells of (shortest edge length / cell diameter).
    pub min_edge_to_diameter: f64,
    /// min over cells of (radius of the centroid-centered inscribed ball /
    /// cell diameter).
    pub min_inradius_to_diameter: f64,
    pub all_convex: bool,
}

/// Generate a mesh of the given family.
///
/// Generation is deterministic: equal arguments (including `seed`) produce
/// bit-identical meshes. The seed only matters for the randomized families
/// (T3 node perturbation, T5 Voronoi seeding).
pub fn generate(domain: Domain, family: MeshFamily, n: usize, seed: u64) -> Result<PolygonalMesh> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "refinement level n must be at least 1".into(),
        ));
    }
    if !family.admissible_on(domain) {
        return Err(Error::IncompatibleFamily { family, domain });
    }
    let mesh = match family {
        MeshFamily::T1Triangles => families::t1_triangles(domain, n),
        MeshFamily::T2Squares => families::t2_squares(domain, n),
        MeshFamily::T3PerturbedSquares => families::t3_perturbed(domain, n, seed),
        MeshFamily::T4Trapezoids => families::t4_trapezoids(domain, n),
        MeshFamily::T5Hexagons => voronoi::t5_hexagons(n, seed)?,
        MeshFamily::T6LshapeTriangles => families::t6_lshape_triangles(n)?,
        MeshFamily::T7LshapeSquares => families::t7_lshape_squares(n)?,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Tag every boundary edge according to the boundary condition layout.
///
/// Interior edges keep their tag. Errors if a boundary edge does not lie on
/// any boundary segment of the mesh's domain (within 1e-10), or if the
/// mixed layout is requested on the L-shape, where no side assignment is
/// defined.
pub fn tag_boundary(mut mesh: PolygonalMesh, bc: BcSpec) -> Result<PolygonalMesh> {
    let domain = mesh.domain.ok_or_else(|| {
        Error::InvalidConfig("mesh has no domain; cannot classify boundary edges".into())
    })?;
    if bc == BcSpec::MixedTopBottomDirichlet && domain == Domain::LShape {
        return Err(Error::InvalidConfig(
            "mixed boundary conditions are defined on the squares, not the L-shape".into(),
        ));
    }
    let segments = domain.boundary_segments();
    let boundary = mesh.boundary_edge_flags();
    for (ei, edge) in mesh.edges.iter_mut().enumerate() {
        if !boundary[ei] {
            edge.tag = BoundaryTag::Interior;
            continue;
        }
        let a = mesh.vertices[edge.v0];
        let b = mesh.vertices[edge.v1];
        let mid = Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y));
        let mut side = None;
        for (p, q, kind) in &segments {
            if on_segment(a, *p, *q) && on_segment(b, *p, *q) && on_segment(mid, *p, *q) {
                side = Some(*kind);
                break;
            }
        }
        let side = side.ok_or(Error::UnclassifiableBoundaryEdge { edge: ei })?;
        edge.tag = match bc {
            BcSpec::AllDirichlet => BoundaryTag::Dirichlet,
            BcSpec::MixedTopBottomDirichlet => match side {
                SideKind::Top | SideKind::Bottom => BoundaryTag::Dirichlet,
                SideKind::Left | SideKind::Right => BoundaryTag::Neumann,
                SideKind::NotchHorizontal | SideKind::NotchVertical => {
                    return Err(Error::UnclassifiableBoundaryEdge { edge: ei })
                }
            },
        };
    }
    Ok(mesh)
}

fn on_segment(p: Point2, a: Point2, b: Point2) -> bool {
    let ab = [b.x - a.x, b.y - a.y];
    let ap = [p.x - a.x, p.y - a.y];
    let len = (ab[0] * ab[0] + ab[1] * ab[1]).sqrt();
    let cross = (ab[0] * ap[1] - ab[1] * ap[0]) / len;
    if cross.abs() > BOUNDARY_TOL {
        return false;
    }
    let t = (ab[0] * ap[0] + ab[1] * ap[1]) / (len * len);
    (-BOUNDARY_TOL / len..=1.0 + BOUNDARY_TOL / len).contains(&t)
}

/// Compute the geometry of one cell.
pub fn cell_geometry(mesh: &PolygonalMesh, cell: usize) -> Result<CellGeometry> {
    let loop_ = &mesh.cells[cell].vertex_loop;
    let k = loop_.len();
    let coords: Vec<[f64; 2]> = loop_.iter().map(|&v| mesh.vertices[v].as_array()).collect();
    let mut twice_area = 0.0;
    let mut cx6 = 0.0;
    let mut cy6 = 0.0;
    for i in 0..k {
        let [x0, y0] = coords[i];
        let [x1, y1] = coords[(i + 1) % k];
        let cross = x0 * y1 - x1 * y0;
        twice_area += cross;
        cx6 += (x0 + x1) * cross;
        cy6 += (y0 + y1) * cross;
    }
    let area = 0.5 * twice_area;
    if area <= DEGENERATE_AREA {
        return Err(Error::DegenerateCell { cell, area });
    }
    let centroid = [cx6 / (6.0 * area), cy6 / (6.0 * area)];
    let first_moments = [centroid[0] * area, centroid[1] * area];
    let mut diameter: f64 = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            let dx = coords[i][0] - coords[j][0];
            let dy = coords[i][1] - coords[j][1];
            diameter = diameter.max((dx * dx + dy * dy).sqrt());
        }
    }
    let mut edge_lengths = Vec::with_capacity(k);
    let mut edge_normals = Vec::with_capacity(k);
    let mut edge_midpoints = Vec::with_capacity(k);
    for i in 0..k {
        let a = coords[i];
        let b = coords[(i + 1) % k];
        let t = [b[0] - a[0], b[1] - a[1]];
        let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
        edge_lengths.push(len);
        edge_normals.push([t[1] / len, -t[0] / len]);
        edge_midpoints.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
    }
    Ok(CellGeometry {
        area,
        centroid,
        diameter,
        first_moments,
        vertex_coords: coords,
        edge_lengths,
        edge_normals,
        edge_midpoints,
    })
}

/// Worst-case shape measures of the whole mesh.
pub fn quality(mesh: &PolygonalMesh) -> QualityReport {
    let mut min_edge_ratio = f64::INFINITY;
    let mut min_inradius_ratio = f64::INFINITY;
    let mut all_convex = true;
    for c in 0..mesh.cells.len() {
        let geom = match cell_geometry(mesh, c) {
            Ok(g) => g,
            Err(_) => {
                return QualityReport {
                    min_edge_to_diameter: 0.0,
                    min_inradius_to_diameter: 0.0,
                    all_convex: false,
                }
            }
        };
        let shortest = geom.edge_lengths.iter().cloned().fold(f64::INFINITY, f64::min);
        min_edge_ratio = min_edge_ratio.min(shortest / geom.diameter);
        let mut inradius = f64::INFINITY;
        let k = geom.vertex_coords.len();
        for i in 0..k {
            let a = geom.vertex_coords[i];
            let b = geom.vertex_coords[(i + 1) % k];
            inradius = inradius.min(point_segment_distance(geom.centroid, a, b));
        }
        min_inradius_ratio = min_inradius_ratio.min(inradius / geom.diameter);
        if !polygon_is_convex(&geom.vertex_coords, 1e-12 * geom.diameter * geom.diameter) {
            all_convex = false;
        }
    }
    QualityReport {
        min_edge_to_diameter: min_edge_ratio,
        min_inradius_to_diameter: min_inradius_ratio,
        all_convex,
    }
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    let dx = ap[0] - t * ab[0];
    let dy = ap[1] - t * ab[1];
    (dx * dx + dy * dy).sqrt()
}

fn polygon_is_convex(coords: &[[f64; 2]], tol: f64) -> bool {
    let k = coords.len();
    for i in 0..k {
        let a = coords[i];
        let b = coords[(i + 1) % k];
        let c = coords[(i + 2) % k];
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        if cross < -tol {
            return false;
        }
    }
    true
}

impl PolygonalMesh {
    /// Build a mesh from shared vertices and counterclockwise cell loops,
    /// deriving the canonical edge list and per-cell orientation signs.
    pub fn from_cell_loops(
        vertices: Vec<Point2>,
        loops: Vec<Vec<usize>>,
        domain: Option<Domain>,
        family: Option<MeshFamily>,
        refinement: Option<usize>,
    ) -> Result<Self> {
        let mut edge_index: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        let mut edges = Vec::new();
        let mut cells = Vec::with_capacity(loops.len());
        for (ci, loop_) in loops.iter().enumerate() {
            if loop_.len() < 3 {
                return Err(Error::DegenerateCell { cell: ci, area: 0.0 });
            }
            let k = loop_.len();
            let mut edge_refs = Vec::with_capacity(k);
            for i in 0..k {
                let a = loop_[i];
                let b = loop_[(i + 1) % k];
                if a == b || a >= vertices.len() || b >= vertices.len() {
                    return Err(Error::Parse(format!(
                        "cell {ci} references invalid vertex pair ({a}, {b})"
                    )));
                }
                let key = (a.min(b), a.max(b));
                let ei = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        v0: key.0,
                        v1: key.1,
                        tag: BoundaryTag::Interior,
                    });
                    edges.len() - 1
                });
                let sign = if a < b { 1 } else { -1 };
                edge_refs.push((ei, sign));
            }
            cells.push(Cell {
                vertex_loop: loop_.clone(),
                edge_refs,
            });
        }
        Ok(PolygonalMesh {
            vertices,
            edges,
            cells,
            domain,
            family,
            refinement,
        })
    }

    /// True per edge when the edge belongs to exactly one cell.
    pub fn boundary_edge_flags(&self) -> Vec<bool> {
        let mut count = vec![0usize; self.edges.len()];
        for cell in &self.cells {
            for &(e, _) in &cell.edge_refs {
                count[e] += 1;
            }
        }
        count.iter().map(|&c| c == 1).collect()
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.boundary_edge_flags().iter().filter(|&&b| b).count()
    }

    /// Check the structural mesh invariants: positive cell areas that sum
    /// to the domain area (when the domain is known), the closed-polygon
    /// normal identity per cell, interior edges shared by exactly two
    /// cells with opposite orientation signs, every edge referenced, and
    /// the Euler relation V - E + F = 1 for these simply connected
    /// domains.
    pub fn validate(&self) -> Result<()> {
        let mut area_sum = 0.0;
        for c in 0..self.cells.len() {
            let geom = cell_geometry(self, c)?;
            area_sum += geom.area;
            let mut nx = 0.0;
            let mut ny = 0.0;
            for (len, n) in geom.edge_lengths.iter().zip(&geom.edge_normals) {
                nx += len * n[0];
                ny += len * n[1];
            }
            let scale = geom.diameter.max(1.0);
            if nx.abs() > 1e-12 * scale || ny.abs() > 1e-12 * scale {
                return Err(Error::Parse(format!(
                    "cell {c} normals do not close up ({nx:.3e}, {ny:.3e})"
                )));
            }
        }
        if let Some(domain) = self.domain {
            let rel = (area_sum - domain.area()).abs() / domain.area();
            if rel > 1e-12 {
                return Err(Error::Parse(format!(
                    "cell areas sum to {area_sum:.15} instead of {} (relative error {rel:.3e})",
                    domain.area()
                )));
            }
        }
        let mut refs: Vec<Vec<i8>> = vec![Vec::new(); self.edges.len()];
        for cell in &self.cells {
            for &(e, s) in &cell.edge_refs {
                refs[e].push(s);
            }
        }
        for (e, r) in refs.iter().enumerate() {
            match r.len() {
                1 => {}
                2 => {
                    if r[0] == r[1] {
                        return Err(Error::Parse(format!(
                            "interior edge {e} has two references with equal signs"
                        )));
                    }
                }
                n => {
                    return Err(Error::Parse(format!(
                        "edge {e} is referenced by {n} cells"
                    )))
                }
            }
        }
        let v = self.vertices.len() as i64;
        let e = self.edges.len() as i64;
        let f = self.cells.len() as i64;
        if v - e + f != 1 {
            return Err(Error::Parse(format!(
                "Euler relation violated: V - E + F = {}",
                v - e + f
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t2_n2_counts_and_areas() {
        let mesh = generate(Domain::UnitSquare, MeshFamily::T2Squares, 2, 0).unwrap();
        assert_eq!(mesh.cells.len(), 4);
        assert_eq!(mesh.vertices.len(), 9);
        assert_eq!(mesh.edges.len(), 12);
        for c in 0..4 {
            let g = cell_geometry(&mesh, c).unwrap();
            assert!((g.area - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_square_cell_geometry_closed_forms() {
        let mesh = generate(Domain::UnitSquare, MeshFamily::T2Squares, 1, 0).unwrap();
        let g = cell_geometry(&mesh, 0).unwrap();
        assert!((g.area - 1.0).abs() < 1e-15);
        assert!((g.centroid[0] - 0.5).abs() < 1e-15);
        assert!((g.centroid[1] - 0.5).abs() < 1e-15);
        assert!((g.diameter - 2f64.sqrt()).abs() < 1e-15);
        assert!((g.first_moments[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn triangle_geometry_closed_forms() {
        let verts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let mesh =
            PolygonalMesh::from_cell_loops(verts, vec![vec![0, 1, 2]], None, None, None).unwrap();
        let g = cell_geometry(&mesh, 0).unwrap();
        assert!((g.area - 0.5).abs() < 1e-15);
        assert!((g.diameter - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn reference_trapezoid_area() {
        let verts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(0.5, 2.0 / 3.0),
            Point2::new(0.0, 2.0 / 3.0),
        ];
        let mesh =
            PolygonalMesh::from_cell_loops(verts, vec![vec![0, 1, 2, 3]], None, None, None)
                .unwrap();
        let g = cell_geometry(&mesh, 0).unwrap();
        assert!((g.area - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_cell_is_rejected() {
        let verts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
        ];
        let mesh =
            PolygonalMesh::from_cell_loops(verts, vec![vec![0, 1, 2]], None, None, None).unwrap();
        assert!(matches!(
            cell_geometry(&mesh, 0),
            Err(Error::DegenerateCell { .. })
        ));
    }

    #[test]
    fn tagging_unit_square_all_dirichlet() {
        let mesh = generate(Domain::UnitSquare, MeshFamily::T2Squares, 2, 0).unwrap();
        let mesh = tag_boundary(mesh, BcSpec::AllDirichlet).unwrap();
        let d = mesh
            .edges
            .iter()
            .filter(|e| e.tag == BoundaryTag::Dirichlet)
            .count();
        let n = mesh
            .edges
            .iter()
            .filter(|e| e.tag == BoundaryTag::Neumann)
            .count();
        assert_eq!((d, n), (8, 0));
    }

    #[test]
    fn tagging_sym_square_mixed() {
        let mesh = generate(Domain::SymSquare, MeshFamily::T2Squares, 2, 0).unwrap();
        let mesh = tag_boundary(mesh, BcSpec::MixedTopBottomDirichlet).unwrap();
        let d = mesh
            .edges
            .iter()
            .filter(|e| e.tag == BoundaryTag::Dirichlet)
            .count();
        let n = mesh
            .edges
            .iter()
            .filter(|e| e.tag == BoundaryTag::Neumann)
            .count();
        assert_eq!((d, n), (4, 4));
    }

    #[test]
    fn tagging_sym_square_mixed_t1_neumann_count() {
        let mesh = generate(Domain::SymSquare, MeshFamily::T1Triangles, 10, 0).unwrap();
        let mesh = tag_boundary(mesh, BcSpec::MixedTopBottomDirichlet).unwrap();
        let n = mesh
            .edges
            .iter()
            .filter(|e| e.tag == BoundaryTag::Neumann)
            .count();
        assert_eq!(n, 20);
    }

    #[test]
    fn t3_total_area_and_quality() {
        let mesh = generate(Domain::UnitSquare, MeshFamily::T3PerturbedSquares, 4, 7).unwrap();
        let total: f64 = (0..mesh.cells.len())
            .map(|c| cell_geometry(&mesh, c).unwrap().area)
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        let q = quality(&mesh);
        assert!(q.min_edge_to_diameter > 0.1);
    }

    #[test]
    fn t2_quality_is_square_geometry() {
        let mesh = generate(Domain::UnitSquare, MeshFamily::T2Squares, 5, 0).unwrap();
        let q = quality(&mesh);
        assert!((q.min_edge_to_diameter - 1.0 / 2f64.sqrt()).abs() < 1e-14);
        assert!(q.all_convex);
    }

    #[test]
    fn t4_edge_ratio_constant_across_refinement() {
        let q8 = quality(&generate(Domain::UnitSquare, MeshFamily::T4Trapezoids, 8, 0).unwrap());
        let q16 = quality(&generate(Domain::UnitSquare, MeshFamily::T4Trapezoids, 16, 0).unwrap());
        assert!((q8.min_edge_to_diameter - q16.min_edge_to_diameter).abs() < 1e-12);
    }

    #[test]
    fn family_domain_admissibility() {
        assert!(matches!(
            generate(Domain::UnitSquare, MeshFamily::T5Hexagons, 4, 0),
            Err(Error::IncompatibleFamily { .. })
        ));
        assert!(matches!(
            generate(Domain::LShape, MeshFamily::T2Squares, 4, 0),
            Err(Error::IncompatibleFamily { .. })
        ));
        assert!(matches!(
            generate(Domain::UnitSquare, MeshFamily::T2Squares, 0, 0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn t7_cell_count_is_three_quarters() {
        let mesh = generate(Domain::LShape, MeshFamily::T7LshapeSquares, 20, 0).unwrap();
        assert_eq!(mesh.cells.len(), 300);
    }

    #[test]
    fn generation_is_deterministic() {
        for (family, seed) in [
            (MeshFamily::T2Squares, 0),
            (MeshFamily::T1Triangles, 0),
            (MeshFamily::T4Trapezoids, 0),
            (MeshFamily::T3PerturbedSquares, 42),
        ] {
            let a = generate(Domain::UnitSquare, family, 6, seed).unwrap();
            let b = generate(Domain::UnitSquare, family, 6, seed).unwrap();
            assert_eq!(a.cells, b.cells);
            assert_eq!(a.edges.len(), b.edges.len());
            for (p, q) in a.vertices.iter().zip(&b.vertices) {
                assert_eq!(p.x.to_bits(), q.x.to_bits());
                assert_eq!(p.y.to_bits(), q.y.to_bits());
            }
        }
    }

    #[test]
    fn t5_mesh_is_valid_and_hexagon_dominant() {
        let mesh = generate(Domain::LShape, MeshFamily::T5Hexagons, 12, 1).unwrap();
        let hexes = mesh
            .cells
            .iter()
            .filter(|c| c.vertex_loop.len() == 6)
            .count();
        assert!(
            hexes * 2 > mesh.cells.len(),
            "{} hexagons of {}",
            hexes,
            mesh.cells.len()
        );
        let q = quality(&mesh);
        assert!(q.all_convex);
    }
}
