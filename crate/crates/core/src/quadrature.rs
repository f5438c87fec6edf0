//! Quadrature rules on the reference triangle and on [0, 1].

use std::f64::consts::PI;

/// Barycentric point (λ0, λ1, λ2) with weight; weights sum to 1 (multiply by the area).
pub type TriPoint = ([f64; 3], f64);

/// The 7-point rule exact for polynomials of degree 5.
pub fn triangle_deg5() -> Vec<TriPoint> {
    let s15 = 15f64.sqrt();
    let a = (6.0 - s15) / 21.0;
    let b = (6.0 + s15) / 21.0;
    let wa = (155.0 - s15) / 1200.0;
    let wb = (155.0 + s15) / 1200.0;
    let third = 1.0 / 3.0;
    vec![
        ([third, third, third], 9.0 / 40.0),
        ([a, a, 1.0 - 2.0 * a], wa),
        ([a, 1.0 - 2.0 * a, a], wa),
        ([1.0 - 2.0 * a, a, a], wa),
        ([b, b, 1.0 - 2.0 * b], wb),
        ([b, 1.0 - 2.0 * b, b], wb),
        ([1.0 - 2.0 * b, b, b], wb),
    ]
}

/// Collapsed (Duffy) tensor Gauss rule with n² points, exact for degree 2n − 2
/// (the Jacobian costs one degree in the collapsed direction).
pub fn triangle_collapsed(n: usize) -> Vec<TriPoint> {
    let g = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            // (u, v) ∈ [0,1]² ↦ (ξ, η) = (u, v(1 − u)), Jacobian (1 − u); reference area 1/2.
            let xi = u;
            let eta = v * (1.0 - u);
            out.push(([1.0 - xi - eta, xi, eta], 2.0 * wu * wv * (1.0 - u)));
        }
    }
    out
}

/// Gauss–Legendre nodes and weights on [0, 1] (weights sum to 1).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(rule: &[TriPoint], f: impl Fn(f64, f64) -> f64) -> f64 {
        // Reference triangle (0,0), (1,0), (0,1): area 1/2.
        rule.iter().map(|(l, w)| w * f(l[1], l[2])).sum::<f64>() * 0.5
    }

    /// ∫ x^a y^b over the reference triangle = a! b! / (a + b + 2)!
    fn monomial(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn degree_five_rule_is_exact() {
        let r = triangle_deg5();
        assert!((r.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-15);
        for a in 0..=5 {
            for b in 0..=(5 - a) {
                let q = integrate(&r, |x, y| x.powi(a as i32) * y.powi(b as i32));
                assert!((q - monomial(a, b)).abs() < 1e-15, "x^{a} y^{b}");
            }
        }
        let q = integrate(&r, |x, _| x.powi(6));
        assert!((q - monomial(6, 0)).abs() > 1e-8);
    }

    #[test]
    fn collapsed_rule_degree() {
        for n in 1..=6 {
            let r = triangle_collapsed(n);
            let deg = 2 * n - 2;
            for a in 0..=deg {
                for b in 0..=(deg - a) {
                    let q = integrate(&r, |x, y| x.powi(a as i32) * y.powi(b as i32));
                    assert!(
                        (q - monomial(a as u32, b as u32)).abs() < 1e-14,
                        "n={n} x^{a} y^{b}"
                    );
                }
            }
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=8 {
            let g = gauss_legendre(n);
            for k in 0..2 * n {
                let q: f64 = g.iter().map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }
}
