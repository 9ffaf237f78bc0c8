//! Structured mesh generators: square, triangle and trapezoid tilings on
//! the squares, plus the square/triangle restrictions to the L-shape.

use super::{Domain, MeshFamily, Point2, PolygonalMesh};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bbox(domain: Domain) -> (f64, f64) {
    match domain {
        Domain::UnitSquare | Domain::LShape => (0.0, 1.0),
        Domain::SymSquare => (-1.0, 1.0),
    }
}

fn grid_vertices(domain: Domain, n: usize) -> Vec<Point2> {
    let (lo, hi) = bbox(domain);
    let h = (hi - lo) / n as f64;
    let mut verts = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            verts.push(Point2::new(lo + i as f64 * h, lo + j as f64 * h));
        }
    }
    verts
}

fn grid_id(n: usize, i: usize, j: usize) -> usize {
    j * (n + 1) + i
}

pub fn t2_squares(domain: Domain, n: usize) -> PolygonalMesh {
    let verts = grid_vertices(domain, n);
    let mut loops = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            loops.push(vec![
                grid_id(n, i, j),
                grid_id(n, i + 1, j),
                grid_id(n, i + 1, j + 1),
                grid_id(n, i, j + 1),
            ]);
        }
    }
    PolygonalMesh::from_cell_loops(
        verts,
        loops,
        Some(domain),
        Some(MeshFamily::T2Squares),
        Some(n),
    )
    .expect("structured grid construction cannot fail")
}

pub fn t1_triangles(domain: Domain, n: usize) -> PolygonalMesh {
    let verts = grid_vertices(domain, n);
    let mut loops = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = grid_id(n, i, j);
            let v10 = grid_id(n, i + 1, j);
            let v11 = grid_id(n, i + 1, j + 1);
            let v01 = grid_id(n, i, j + 1);
            loops.push(vec![v00, v10, v11]);
            loops.push(vec![v00, v11, v01]);
        }
    }
    PolygonalMesh::from_cell_loops(
        verts,
        loops,
        Some(domain),
        Some(MeshFamily::T1Triangles),
        Some(n),
    )
    .expect("structured grid construction cannot fail")
}

/// T2 with every interior node displaced uniformly in [-0.2 h, 0.2 h] per
/// coordinate. Boundary nodes stay fixed, and so does the central node of
/// the domain when the grid has one.
pub fn t3_perturbed(domain: Domain, n: usize, seed: u64) -> PolygonalMesh {
    let mut mesh = t2_squares(domain, n);
    mesh.family = Some(MeshFamily::T3PerturbedSquares);
    let (lo, hi) = bbox(domain);
    let h = (hi - lo) / n as f64;
    let center = 0.5 * (lo + hi);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in mesh.vertices.iter_mut() {
        let on_boundary = (v.x - lo).abs() < 1e-12
            || (v.x - hi).abs() < 1e-12
            || (v.y - lo).abs() < 1e-12
            || (v.y - hi).abs() < 1e-12;
        if on_boundary {
            continue;
        }
        if (v.x - center).abs() < 1e-12 && (v.y - center).abs() < 1e-12 {
            continue;
        }
        let dx = (rng.gen::<f64>() * 2.0 - 1.0) * 0.2 * h;
        let dy = (rng.gen::<f64>() * 2.0 - 1.0) * 0.2 * h;
        v.x += dx;
        v.y += dy;
    }
    mesh
}

/// Trapezoid tiling: vertical grid lines stay straight while every interior
/// horizontal line with odd index zigzags up and down by 3/8 of the cell
/// height, producing rows of congruent mirrored trapezoids.
pub fn t4_trapezoids(domain: Domain, n: usize) -> PolygonalMesh {
    let (lo, hi) = bbox(domain);
    let h = (hi - lo) / n as f64;
    let amplitude = 3.0 / 8.0 * h;
    let mut verts = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let mut y = lo + j as f64 * h;
            if j % 2 == 1 && j > 0 && j < n {
                y += if i % 2 == 1 { amplitude } else { -amplitude };
            }
            verts.push(Point2::new(x, y));
        }
    }
    let mut loops = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            loops.push(vec![
                grid_id(n, i, j),
                grid_id(n, i + 1, j),
                grid_id(n, i + 1, j + 1),
                grid_id(n, i, j + 1),
            ]);
        }
    }
    PolygonalMesh::from_cell_loops(
        verts,
        loops,
        Some(domain),
        Some(MeshFamily::T4Trapezoids),
        Some(n),
    )
    .expect("structured grid construction cannot fail")
}

fn lshape_keep(cx: f64, cy: f64) -> bool {
    !(cx > 0.5 && cy > 0.5)
}

fn lshape_grid(n: usize) -> Result<(Vec<Point2>, Vec<Vec<usize>>)> {
    if n % 2 != 0 {
        return Err(Error::InvalidConfig(format!(
            "L-shape grids need an even refinement level so the notch falls on grid lines (got {n})"
        )));
    }
    let h = 1.0 / n as f64;
    let full = grid_vertices(Domain::UnitSquare, n);
    let mut keep_cells = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let cx = (i as f64 + 0.5) * h;
            let cy = (j as f64 + 0.5) * h;
            if lshape_keep(cx, cy) {
                keep_cells.push((i, j));
            }
        }
    }
    let mut vmap = vec![usize::MAX; full.len()];
    let mut verts = Vec::new();
    let map = |vmap: &mut Vec<usize>, verts: &mut Vec<Point2>, id: usize| {
        if vmap[id] == usize::MAX {
            vmap[id] = verts.len();
            verts.push(full[id]);
        }
        vmap[id]
    };
    let mut loops = Vec::with_capacity(keep_cells.len());
    for (i, j) in keep_cells {
        let ids = [
            grid_id(n, i, j),
            grid_id(n, i + 1, j),
            grid_id(n, i + 1, j + 1),
            grid_id(n, i, j + 1),
        ];
        loops.push(
            ids.iter()
                .map(|&id| map(&mut vmap, &mut verts, id))
                .collect(),
        );
    }
    Ok((verts, loops))
}

pub fn t7_lshape_squares(n: usize) -> Result<PolygonalMesh> {
    let (verts, loops) = lshape_grid(n)?;
    PolygonalMesh::from_cell_loops(
        verts,
        loops,
        Some(Domain::LShape),
        Some(MeshFamily::T7LshapeSquares),
        Some(n),
    )
}

pub fn t6_lshape_triangles(n: usize) -> Result<PolygonalMesh> {
    let (verts, quads) = lshape_grid(n)?;
    let mut loops = Vec::with_capacity(2 * quads.len());
    for q in quads {
        loops.push(vec![q[0], q[1], q[2]]);
        loops.push(vec![q[0], q[2], q[3]]);
    }
    PolygonalMesh::from_cell_loops(
        verts,
        loops,
        Some(Domain::LShape),
        Some(MeshFamily::T6LshapeTriangles),
        Some(n),
    )
}
