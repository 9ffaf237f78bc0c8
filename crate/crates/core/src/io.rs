//! File formats: plain-text mesh exchange, legacy-VTK field export,
//! coordinate-format matrix dumps, CSV tables, and run manifests.
//!
//! Every writer is deterministic: floating-point values are printed with
//! the shortest round-trip representation (mesh files, JSON) or rounded to
//! a fixed number of significant digits (CSV tables), so identical inputs
//! produce byte-identical files.

use crate::assembly::{DofMap, GlobalPencil};
use crate::eigensolver::EigenResult;
use crate::mesh::{cell_geometry, BoundaryTag, Edge, Point2, PolygonalMesh};
use crate::vem_local::projector;
use crate::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

const POLY_MESH_HEADER: &str = "poly-mesh v1";

fn tag_name(tag: BoundaryTag) -> &'static str {
    match tag {
        BoundaryTag::Interior => "interior",
        BoundaryTag::Dirichlet => "dirichlet",
        BoundaryTag::Neumann => "neumann",
    }
}

fn tag_from_name(name: &str) -> Result<BoundaryTag> {
    match name {
        "interior" => Ok(BoundaryTag::Interior),
        "dirichlet" => Ok(BoundaryTag::Dirichlet),
        "neumann" => Ok(BoundaryTag::Neumann),
        other => Err(Error::Parse(format!("unknown boundary tag {other:?}"))),
    }
}

/// Serialize a mesh to the `poly-mesh v1` text format: a header line,
/// vertex count and `x y` lines, edge count and `v0 v1 tag` lines, cell
/// count and one vertex-index loop per line.
pub fn write_poly_mesh(mesh: &PolygonalMesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{POLY_MESH_HEADER}").unwrap();
    writeln!(out, "{}", mesh.vertices.len()).unwrap();
    for v in &mesh.vertices {
        writeln!(out, "{} {}", v.x, v.y).unwrap();
    }
    writeln!(out, "{}", mesh.edges.len()).unwrap();
    for e in &mesh.edges {
        writeln!(out, "{} {} {}", e.v0, e.v1, tag_name(e.tag)).unwrap();
    }
    writeln!(out, "{}", mesh.cells.len()).unwrap();
    for c in &mesh.cells {
        let loop_str: Vec<String> = c.vertex_loop.iter().map(usize::to_string).collect();
        writeln!(out, "{}", loop_str.join(" ")).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse a `poly-mesh v1` file back into a mesh. The edge list must match
/// the edges induced by the cell loops exactly; boundary tags are carried
/// over from the file.
pub fn read_poly_mesh(path: &Path) -> Result<PolygonalMesh> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let mut next = || {
        lines
            .next()
            .ok_or_else(|| Error::Parse("unexpected end of mesh file".into()))
    };
    let header = next()?;
    if header.trim() != POLY_MESH_HEADER {
        return Err(Error::Parse(format!(
            "expected header {POLY_MESH_HEADER:?}, found {header:?}"
        )));
    }
    let parse_count = |line: &str| -> Result<usize> {
        line.trim()
            .parse()
            .map_err(|_| Error::Parse(format!("expected a count, found {line:?}")))
    };
    let nv = parse_count(next()?)?;
    if nv == 0 {
        return Err(Error::Parse("mesh has no vertices".into()));
    }
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let line = next()?;
        let mut parts = line.split_whitespace();
        let x: f64 = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad vertex line {line:?}")))?;
        let y: f64 = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad vertex line {line:?}")))?;
        vertices.push(Point2::new(x, y));
    }
    let ne = parse_count(next()?)?;
    let mut tagged_edges = Vec::with_capacity(ne);
    for _ in 0..ne {
        let line = next()?;
        let mut parts = line.split_whitespace();
        let v0: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad edge line {line:?}")))?;
        let v1: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad edge line {line:?}")))?;
        let tag = tag_from_name(
            parts
                .next()
                .ok_or_else(|| Error::Parse(format!("bad edge line {line:?}")))?,
        )?;
        tagged_edges.push(Edge { v0, v1, tag });
    }
    let nc = parse_count(next()?)?;
    if nc == 0 {
        return Err(Error::Parse("mesh has no cells".into()));
    }
    let mut loops = Vec::with_capacity(nc);
    for _ in 0..nc {
        let line = next()?;
        let cell: Vec<usize> = line
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse(format!("bad cell line {line:?}")))
            })
            .collect::<Result<_>>()?;
        if cell.len() < 3 {
            return Err(Error::Parse(format!("cell with fewer than 3 vertices: {line:?}")));
        }
        loops.push(cell);
    }
    let mut mesh = PolygonalMesh::from_cell_loops(vertices, loops, None, None, None)?;
    if mesh.edges.len() != tagged_edges.len() {
        return Err(Error::Parse(format!(
            "edge list has {} entries but the cells induce {}",
            tagged_edges.len(),
            mesh.edges.len()
        )));
    }
    let mut by_pair: BTreeMap<(usize, usize), BoundaryTag> = BTreeMap::new();
    for e in &tagged_edges {
        let key = (e.v0.min(e.v1), e.v0.max(e.v1));
        if by_pair.insert(key, e.tag).is_some() {
            return Err(Error::Parse(format!("duplicate edge {key:?} in mesh file")));
        }
    }
    for e in &mut mesh.edges {
        match by_pair.get(&(e.v0, e.v1)) {
            Some(&tag) => e.tag = tag,
            None => {
                return Err(Error::Parse(format!(
                    "cells induce edge ({}, {}) which the edge list lacks",
                    e.v0, e.v1
                )))
            }
        }
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Write eigenmodes as a legacy-VTK unstructured grid: one polygon per
/// cell, with per-mode cell data holding the piecewise-constant `u` field
/// and the projected flux vector.
pub fn write_vtk_modes(
    mesh: &PolygonalMesh,
    dofs: &DofMap,
    result: &EigenResult,
    path: &Path,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("mixed virtual element eigenmodes\n");
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(out, "POINTS {} double", mesh.vertices.len()).unwrap();
    for v in &mesh.vertices {
        writeln!(out, "{} {} 0", v.x, v.y).unwrap();
    }
    let ncells = mesh.cells.len();
    let list_len: usize = mesh.cells.iter().map(|c| c.vertex_loop.len() + 1).sum();
    writeln!(out, "CELLS {ncells} {list_len}").unwrap();
    for c in &mesh.cells {
        write!(out, "{}", c.vertex_loop.len()).unwrap();
        for &v in &c.vertex_loop {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    writeln!(out, "CELL_TYPES {ncells}").unwrap();
    for _ in 0..ncells {
        out.push_str("7\n");
    }
    writeln!(out, "CELL_DATA {ncells}").unwrap();
    let m = result.lambdas.len();
    for mode in 0..m {
        writeln!(out, "SCALARS u_mode_{} double 1", mode + 1).unwrap();
        out.push_str("LOOKUP_TABLE default\n");
        for c in 0..ncells {
            writeln!(out, "{}", result.u_modes[(c, mode)]).unwrap();
        }
    }
    for mode in 0..m {
        writeln!(out, "VECTORS sigma_mode_{} double", mode + 1).unwrap();
        for c in 0..ncells {
            let geom = cell_geometry(mesh, c)?;
            let proj = projector(&geom);
            let cell = &mesh.cells[c];
            let mut fluxes = vec![0.0; cell.edge_refs.len()];
            for (i, &(edge, sign)) in cell.edge_refs.iter().enumerate() {
                if let Some(dof) = dofs.edge_to_dof[edge] {
                    fluxes[i] = f64::from(sign) * result.sigma_modes[(dof, mode)];
                }
            }
            let v = proj.apply(&fluxes);
            writeln!(out, "{} {} 0", v[0], v[1]).unwrap();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_coordinate_matrix(m: &faer::sparse::SparseColMat<usize, f64>, path: &Path) -> Result<()> {
    let sym = m.symbolic();
    let col_ptr = sym.col_ptr();
    let row_idx = sym.row_idx();
    let val = m.val();
    let mut out = String::new();
    writeln!(out, "{} {} {}", m.nrows(), m.ncols(), val.len()).unwrap();
    for j in 0..m.ncols() {
        for k in col_ptr[j]..col_ptr[j + 1] {
            writeln!(out, "{} {} {}", row_idx[k], j, val[k]).unwrap();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Dump the assembled matrices as coordinate-format text (`row col value`
/// lines under an `nrows ncols nnz` header): `A.txt`, `B.txt`, and the
/// diagonal of the mass matrix as `M.txt`.
pub fn dump_matrices(pencil: &GlobalPencil, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let a_path = dir.join("A.txt");
    let b_path = dir.join("B.txt");
    let m_path = dir.join("M.txt");
    write_coordinate_matrix(&pencil.a, &a_path)?;
    write_coordinate_matrix(&pencil.b, &b_path)?;
    let mut out = String::new();
    let n = pencil.m_diag.len();
    writeln!(out, "{} {} {}", n, n, n).unwrap();
    for (i, v) in pencil.m_diag.iter().enumerate() {
        writeln!(out, "{i} {i} {v}").unwrap();
    }
    std::fs::write(&m_path, out)?;
    Ok(vec![a_path, b_path, m_path])
}

/// Format a value with a fixed number of significant digits, in plain
/// decimal notation.
pub fn fmt_sig(x: f64, sig: u32) -> String {
    assert!(sig >= 1);
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return format!("{:.*}", sig as usize - 1, 0.0);
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - mag).max(0);
    let rounded: f64 = format!("{:.*}", decimals as usize, x).parse().unwrap();
    let mag_after = if rounded == 0.0 {
        mag
    } else {
        rounded.abs().log10().floor() as i32
    };
    let decimals = (sig as i32 - 1 - mag_after).max(0);
    format!("{:.*}", decimals as usize, rounded)
}

/// Write comma-separated rows. Fields are used verbatim; numeric fields
/// should already be formatted with [`fmt_sig`].
pub fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Serialize a value as pretty JSON and write it.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Wall-clock bookkeeping for manifest stages.
pub struct StageClock {
    start: Instant,
    stages: Vec<Stage>,
}

/// One timed stage of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

impl StageClock {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
            stages: Vec::new(),
        }
    }

    /// Close the current stage under `name`; the next stage starts now.
    pub fn mark(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push(Stage {
            name: name.to_string(),
            seconds: now.duration_since(self.start).as_secs_f64(),
        });
        self.start = now;
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }
}

impl Default for StageClock {
    fn default() -> Self {
        Self::new()
    }
}

/// Record of one CLI run: the resolved configuration, the artifact
/// version, per-stage wall-clock times, the files produced, and the final
/// status.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub version: String,
    pub stages: Vec<Stage>,
    pub files: Vec<String>,
    pub status: String,
}

impl RunManifest {
    pub fn new(command: &str, config: BTreeMap<String, String>) -> Self {
        Self {
            command: command.to_string(),
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            stages: Vec::new(),
            files: Vec::new(),
            status: "ok".to_string(),
        }
    }

    /// Write atomically: serialize to a sibling temporary file, then
    /// rename over the destination.
    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let tmp = path.with_extension("json.tmp");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}
