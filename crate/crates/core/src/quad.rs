//! Quadrature rules: Gauss-Legendre on segments and centroid-fan rules on
//! convex or star-shaped polygons.

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Nodes are computed by Newton iteration on the Legendre polynomial with
/// the Chebyshev-like initial guess; accurate to machine precision for the
/// orders used here (n <= 32). The rule integrates polynomials of degree
/// 2n - 1 exactly.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be at least 1");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrate a scalar function along the segment from `a` to `b` with an
/// `order`-point Gauss-Legendre rule.
pub fn integrate_segment(
    a: [f64; 2],
    b: [f64; 2],
    order: usize,
    mut f: impl FnMut(f64, f64) -> f64,
) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let half = [(b[0] - a[0]) / 2.0, (b[1] - a[1]) / 2.0];
    let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    let jac = (half[0] * half[0] + half[1] * half[1]).sqrt();
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        acc += w * f(mid[0] + x * half[0], mid[1] + x * half[1]);
    }
    acc * jac
}

/// Integrate a scalar function over a polygon given by its vertex loop.
///
/// The polygon is fanned into triangles around the vertex-average point and
/// each triangle carries a collapsed tensor Gauss rule of `order` points per
/// direction (exact for polynomials up to roughly degree `order`). The fan
/// point must see every triangle with positive orientation, which holds for
/// the convex and mildly perturbed cells produced by the mesh generators.
pub fn integrate_polygon(
    vertices: &[[f64; 2]],
    order: usize,
    mut f: impl FnMut(f64, f64) -> f64,
) -> f64 {
    let k = vertices.len();
    assert!(k >= 3, "polygon needs at least 3 vertices");
    let mut cx = 0.0;
    let mut cy = 0.0;
    for v in vertices {
        cx += v[0];
        cy += v[1];
    }
    let apex = [cx / k as f64, cy / k as f64];
    let (nodes, weights) = gauss_legendre(order);
    let mut acc = 0.0;
    for i in 0..k {
        let a = vertices[i];
        let b = vertices[(i + 1) % k];
        let signed2 = (a[0] - apex[0]) * (b[1] - apex[1]) - (b[0] - apex[0]) * (a[1] - apex[1]);
        for (s_ref, ws) in nodes.iter().zip(&weights) {
            let s = 0.5 * (s_ref + 1.0);
            for (t_ref, wt) in nodes.iter().zip(&weights) {
                let t = 0.5 * (t_ref + 1.0);
                let x = apex[0] + s * (a[0] - apex[0]) + s * t * (b[0] - a[0]);
                let y = apex[1] + s * (a[1] - apex[1]) + s * t * (b[1] - a[1]);
                acc += 0.25 * ws * wt * signed2 * s * f(x, y);
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_symmetric_and_weights_sum_to_two() {
        for n in 1..=16 {
            let (x, w) = gauss_legendre(n);
            let sum: f64 = w.iter().sum();
            assert!((sum - 2.0).abs() < 1e-14, "n={n}: weight sum {sum}");
            for i in 0..n {
                assert!((x[i] + x[n - 1 - i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn integrates_high_degree_monomials_exactly() {
        let (x, w) = gauss_legendre(8);
        for d in 0..=15 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d)).sum();
            let exact = if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
            assert!((got - exact).abs() < 1e-13, "degree {d}: {got} vs {exact}");
        }
    }

    #[test]
    fn segment_rule_matches_closed_forms() {
        let got = integrate_segment([0.0, 0.0], [1.0, 0.0], 8, |x, _| x * x);
        assert!((got - 1.0 / 3.0).abs() < 1e-14);
        let diag = integrate_segment([0.0, 0.0], [1.0, 1.0], 8, |x, y| x + y);
        assert!((diag - std::f64::consts::SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn polygon_rule_matches_closed_forms_on_unit_square() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let area = integrate_polygon(&sq, 4, |_, _| 1.0);
        assert!((area - 1.0).abs() < 1e-14);
        let mx = integrate_polygon(&sq, 4, |x, _| x);
        assert!((mx - 0.5).abs() < 1e-14);
        let pi = std::f64::consts::PI;
        let sines = integrate_polygon(&sq, 16, |x, y| (pi * x).sin() * (pi * y).sin());
        assert!((sines - 4.0 / (pi * pi)).abs() < 1e-12, "{sines}");
    }

    #[test]
    fn polygon_rule_handles_triangles_and_hexagons() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let area = integrate_polygon(&tri, 4, |_, _| 1.0);
        assert!((area - 0.5).abs() < 1e-14);
        let hex: Vec<[f64; 2]> = (0..6)
            .map(|i| {
                let a = std::f64::consts::PI / 3.0 * i as f64;
                [a.cos(), a.sin()]
            })
            .collect();
        let area = integrate_polygon(&hex, 4, |_, _| 1.0);
        let exact = 1.5 * 3.0f64.sqrt();
        assert!((area - exact).abs() < 1e-13);
    }
}
