//! Hexagon-dominant Voronoi meshing of the L-shape.
//!
//! Seeds start on a jittered hexagonal lattice and are relaxed by Lloyd
//! iteration; each Voronoi cell is clipped exactly to the L-shape, and any
//! cell crossing the removed quadrant is split into two convex pieces at
//! the re-entrant corner. Relaxation moves every seed to the centroid of
//! its largest piece, which keeps seeds away from the notch walls and
//! starves corner slivers. The final polygon soup is welded into a
//! conforming mesh: coincident vertices are merged and any vertex lying on
//! the interior of another cell's edge is inserted into that edge, so the
//! near-degenerate corners real Voronoi diagrams produce cannot leave
//! hanging nodes.

use super::{Domain, MeshFamily, Point2, PolygonalMesh};
use crate::Result;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

const SNAP_TOL: f64 = 1e-9;
const MERGE_TOL: f64 = 1e-7;
const ONSEG_TOL: f64 = 5e-7;
const LLOYD_ITERATIONS: usize = 200;

type Poly = Vec<[f64; 2]>;

fn inside_l(p: [f64; 2]) -> bool {
    let [x, y] = p;
    (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) && !(x > 0.5 && y > 0.5)
}

/// Keep the part of `poly` with (q - p) . n <= 0.
fn clip_halfplane(poly: &Poly, p: [f64; 2], n: [f64; 2]) -> Poly {
    let k = poly.len();
    let mut out = Vec::with_capacity(k + 1);
    if k == 0 {
        return out;
    }
    for i in 0..k {
        let a = poly[i];
        let b = poly[(i + 1) % k];
        let da = (a[0] - p[0]) * n[0] + (a[1] - p[1]) * n[1];
        let db = (b[0] - p[0]) * n[0] + (b[1] - p[1]) * n[1];
        if da <= 0.0 {
            out.push(a);
        }
        if (da < 0.0 && db > 0.0) || (db < 0.0 && da > 0.0) {
            let t = da / (da - db);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    if out.len() >= 3 {
        out
    } else {
        Vec::new()
    }
}

fn area_centroid(poly: &Poly) -> (f64, [f64; 2]) {
    if poly.len() < 3 {
        return (0.0, [0.0, 0.0]);
    }
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    let k = poly.len();
    for i in 0..k {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % k];
        let cr = x0 * y1 - x1 * y0;
        a2 += cr;
        cx += (x0 + x1) * cr;
        cy += (y0 + y1) * cr;
    }
    let area = 0.5 * a2;
    if area.abs() < 1e-300 {
        return (0.0, [0.0, 0.0]);
    }
    (area, [cx / (6.0 * area), cy / (6.0 * area)])
}

/// Snap vertices onto the domain walls and drop consecutive duplicates.
fn snap_dedupe(poly: Poly) -> Poly {
    let mut snapped = Vec::with_capacity(poly.len());
    for [mut x, mut y] in poly {
        if (x - 0.5).abs() < SNAP_TOL && y > 0.5 - SNAP_TOL {
            x = 0.5;
        }
        if (y - 0.5).abs() < SNAP_TOL && x > 0.5 - SNAP_TOL {
            y = 0.5;
        }
        if x.abs() < SNAP_TOL {
            x = 0.0;
        } else if (x - 1.0).abs() < SNAP_TOL {
            x = 1.0;
        }
        if y.abs() < SNAP_TOL {
            y = 0.0;
        } else if (y - 1.0).abs() < SNAP_TOL {
            y = 1.0;
        }
        snapped.push([x, y]);
    }
    let mut out: Poly = Vec::with_capacity(snapped.len());
    for v in snapped {
        let dup = out
            .last()
            .map(|u| (v[0] - u[0]).abs() <= SNAP_TOL && (v[1] - u[1]).abs() <= SNAP_TOL)
            .unwrap_or(false);
        if !dup {
            out.push(v);
        }
    }
    while out.len() > 1 {
        let first = out[0];
        let last = out[out.len() - 1];
        if (first[0] - last[0]).abs() <= SNAP_TOL && (first[1] - last[1]).abs() <= SNAP_TOL {
            out.pop();
        } else {
            break;
        }
    }
    if out.len() >= 3 {
        out
    } else {
        Vec::new()
    }
}

/// Clip a convex polygon to the L-shape, splitting cells that cross the
/// removed quadrant into at most two convex pieces.
fn clip_to_l(poly: Poly) -> Vec<Poly> {
    let mut p = clip_halfplane(&poly, [0.0, 0.0], [-1.0, 0.0]);
    p = clip_halfplane(&p, [1.0, 0.0], [1.0, 0.0]);
    p = clip_halfplane(&p, [0.0, 0.0], [0.0, -1.0]);
    p = clip_halfplane(&p, [0.0, 1.0], [0.0, 1.0]);
    let p = snap_dedupe(p);
    if p.is_empty() {
        return Vec::new();
    }
    let in_notch = clip_halfplane(
        &clip_halfplane(&p, [0.5, 0.0], [-1.0, 0.0]),
        [0.0, 0.5],
        [0.0, -1.0],
    );
    let crosses = area_centroid(&in_notch).0 > SNAP_TOL * SNAP_TOL;
    if !crosses {
        let (area, _) = area_centroid(&p);
        return if area > SNAP_TOL * SNAP_TOL {
            vec![p]
        } else {
            Vec::new()
        };
    }
    let left = snap_dedupe(clip_halfplane(&p, [0.5, 0.5], [1.0, 0.0]));
    let lower = snap_dedupe(clip_halfplane(
        &clip_halfplane(&p, [0.5, 0.5], [-1.0, 0.0]),
        [0.5, 0.5],
        [0.0, 1.0],
    ));
    [left, lower]
        .into_iter()
        .filter(|piece| !piece.is_empty() && area_centroid(piece).0 > SNAP_TOL * SNAP_TOL)
        .collect()
}

/// Uniform bucket grid over the unit square for nearest-seed queries.
struct SeedGrid {
    cell: f64,
    dim: usize,
    buckets: Vec<Vec<usize>>,
}

impl SeedGrid {
    fn build(seeds: &[[f64; 2]], spacing: f64) -> Self {
        let cell = spacing.max(1e-3);
        let dim = (1.0 / cell).ceil() as usize + 1;
        let mut buckets = vec![Vec::new(); dim * dim];
        for (i, s) in seeds.iter().enumerate() {
            let bx = ((s[0] / cell) as isize).clamp(0, dim as isize - 1) as usize;
            let by = ((s[1] / cell) as isize).clamp(0, dim as isize - 1) as usize;
            buckets[by * dim + bx].push(i);
        }
        SeedGrid { cell, dim, buckets }
    }

    /// Indices of seeds in the square ring of bucket-radius `r` around the
    /// bucket containing `p`, in deterministic order.
    fn ring(&self, p: [f64; 2], r: usize, out: &mut Vec<usize>) {
        out.clear();
        let bx = ((p[0] / self.cell) as isize).clamp(0, self.dim as isize - 1);
        let by = ((p[1] / self.cell) as isize).clamp(0, self.dim as isize - 1);
        let r = r as isize;
        for dy in -r..=r {
            for dx in -r..=r {
                if dx.abs() != r && dy.abs() != r {
                    continue;
                }
                let x = bx + dx;
                let y = by + dy;
                if x < 0 || y < 0 || x >= self.dim as isize || y >= self.dim as isize {
                    continue;
                }
                out.extend_from_slice(&self.buckets[y as usize * self.dim + x as usize]);
            }
        }
    }
}

/// Voronoi cell of seed `i` inside a bounding box, by half-plane clipping
/// against neighbors in ascending distance with an early exit once no seed
/// can cut the current polygon.
fn voronoi_cell(seeds: &[[f64; 2]], grid: &SeedGrid, i: usize) -> Poly {
    let si = seeds[i];
    let mut poly: Poly = vec![[-0.5, -0.5], [1.5, -0.5], [1.5, 1.5], [-0.5, 1.5]];
    let max_radius = |poly: &Poly| -> f64 {
        poly.iter()
            .map(|v| ((v[0] - si[0]).powi(2) + (v[1] - si[1]).powi(2)).sqrt())
            .fold(0.0, f64::max)
    };
    let mut ring = Vec::new();
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    let max_ring = 2 * grid.dim;
    for r in 0..=max_ring {
        grid.ring(si, r, &mut ring);
        candidates.clear();
        for &j in &ring {
            if j != i {
                let d2 = (seeds[j][0] - si[0]).powi(2) + (seeds[j][1] - si[1]).powi(2);
                candidates.push((d2, j));
            }
        }
        candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut radius = max_radius(&poly);
        for &(d2, j) in &candidates {
            if d2.sqrt() >= 2.0 * radius {
                break;
            }
            let sj = seeds[j];
            let mid = [0.5 * (si[0] + sj[0]), 0.5 * (si[1] + sj[1])];
            let n = [sj[0] - si[0], sj[1] - si[1]];
            poly = clip_halfplane(&poly, mid, n);
            if poly.is_empty() {
                return poly;
            }
            radius = max_radius(&poly);
        }
        let ring_clearance = (r as f64) * grid.cell;
        if r > 0 && ring_clearance >= 2.0 * max_radius(&poly) {
            break;
        }
    }
    poly
}

fn initial_seeds(nseeds: usize, seed: u64) -> Vec<[f64; 2]> {
    let a = (0.75 / nseeds as f64).sqrt();
    let dy = a * 3f64.sqrt() / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::new();
    let mut row = 0usize;
    let mut y = dy / 2.0;
    while y < 1.0 {
        let mut x = if row % 2 == 1 { a / 2.0 } else { a };
        while x < 1.0 {
            if inside_l([x, y]) {
                let jx = (rng.gen::<f64>() * 2.0 - 1.0) * 0.1 * a;
                let jy = (rng.gen::<f64>() * 2.0 - 1.0) * 0.1 * a;
                pts.push([x + jx, y + jy]);
            }
            x += a;
        }
        y += dy;
        row += 1;
    }
    pts
}

fn lloyd(nseeds: usize, seed: u64) -> Vec<Poly> {
    let mut seeds = initial_seeds(nseeds, seed);
    let spacing = (0.75 / nseeds as f64).sqrt();
    for _ in 0..LLOYD_ITERATIONS {
        let grid = SeedGrid::build(&seeds, 2.0 * spacing);
        let mut next = Vec::with_capacity(seeds.len());
        let mut move_max: f64 = 0.0;
        for i in 0..seeds.len() {
            let pieces = clip_to_l(voronoi_cell(&seeds, &grid, i));
            let mut best = seeds[i];
            let mut best_area = -1.0;
            for piece in &pieces {
                let (area, c) = area_centroid(piece);
                if area > best_area {
                    best_area = area;
                    best = c;
                }
            }
            move_max = move_max
                .max((best[0] - seeds[i][0]).abs())
                .max((best[1] - seeds[i][1]).abs());
            next.push(best);
        }
        seeds = next;
        if move_max < 1e-13 {
            break;
        }
    }
    let grid = SeedGrid::build(&seeds, 2.0 * spacing);
    let mut cells = Vec::new();
    for i in 0..seeds.len() {
        cells.extend(clip_to_l(voronoi_cell(&seeds, &grid, i)));
    }
    cells
}

/// Merge coincident vertices across the polygon soup and insert every
/// vertex that lies on the interior of another cell's edge into that edge.
fn weld(cells: Vec<Poly>) -> (Vec<Point2>, Vec<Vec<usize>>) {
    let quantum = MERGE_TOL;
    let mut verts: Vec<[f64; 2]> = Vec::new();
    let mut lookup: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut vid = |p: [f64; 2], verts: &mut Vec<[f64; 2]>| -> usize {
        let kx = (p[0] / quantum).round() as i64;
        let ky = (p[1] / quantum).round() as i64;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = lookup.get(&(kx + dx, ky + dy)) {
                    for &id in ids {
                        let q = verts[id];
                        if (q[0] - p[0]).abs() < 2.0 * quantum
                            && (q[1] - p[1]).abs() < 2.0 * quantum
                        {
                            return id;
                        }
                    }
                }
            }
        }
        verts.push(p);
        lookup.entry((kx, ky)).or_default().push(verts.len() - 1);
        verts.len() - 1
    };
    let mut loops: Vec<Vec<usize>> = Vec::with_capacity(cells.len());
    for poly in &cells {
        let mut loop_: Vec<usize> = poly.iter().map(|&p| vid(p, &mut verts)).collect();
        loop_.dedup();
        while loop_.len() > 1 && loop_.first() == loop_.last() {
            loop_.pop();
        }
        loops.push(loop_);
    }
    let conformed = loops
        .into_iter()
        .map(|loop_| insert_edge_interior_vertices(&verts, loop_))
        .collect();
    (
        verts.into_iter().map(|p| Point2::new(p[0], p[1])).collect(),
        conformed,
    )
}

fn insert_edge_interior_vertices(verts: &[[f64; 2]], loop_: Vec<usize>) -> Vec<usize> {
    let k = loop_.len();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let a = loop_[i];
        let b = loop_[(i + 1) % k];
        let pa = verts[a];
        let pb = verts[b];
        let d = [pb[0] - pa[0], pb[1] - pa[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let mut inserted: Vec<(f64, usize)> = Vec::new();
        for (v, pv) in verts.iter().enumerate() {
            if v == a || v == b {
                continue;
            }
            let t = ((pv[0] - pa[0]) * d[0] + (pv[1] - pa[1]) * d[1]) / len2;
            if !(1e-9..=1.0 - 1e-9).contains(&t) {
                continue;
            }
            let px = pa[0] + t * d[0] - pv[0];
            let py = pa[1] + t * d[1] - pv[1];
            if (px * px + py * py).sqrt() < ONSEG_TOL {
                inserted.push((t, v));
            }
        }
        inserted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        out.push(a);
        out.extend(inserted.into_iter().map(|(_, v)| v));
    }
    out
}

/// Generate the hexagon-dominant Voronoi mesh of the L-shape at refinement
/// level `n`; the target seed count is 3/4 n^2 so cell counts track the
/// square L-shape family at equal `n`.
pub fn t5_hexagons(n: usize, seed: u64) -> Result<PolygonalMesh> {
    let nseeds = (3 * n * n).div_ceil(4).max(1);
    let cells = lloyd(nseeds, seed);
    let (verts, loops) = weld(cells);
    PolygonalMesh::from_cell_loops(
        verts,
        loops,
        Some(Domain::LShape),
        Some(MeshFamily::T5Hexagons),
        Some(n),
    )
}
