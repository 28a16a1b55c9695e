//! Tail probabilities checked against quadrature and bisection computed
//! here from scratch.

use pmdep::dist::{chi2_1_sf, normal_quantile, normal_sf};

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1], by Newton
/// iteration on the Legendre recurrence.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre(20);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let (lo, hi) = (a + k as f64 * h, a + (k + 1) as f64 * h);
        let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
        total += half * rule.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>();
    }
    total
}

fn phi(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// P(N(0,1) > z) integrated numerically; the tail past z + 15 is below 1e-50.
fn normal_tail_oracle(z: f64) -> f64 {
    if z >= 0.0 {
        integrate(phi, z, z + 15.0, 400)
    } else {
        0.5 + integrate(phi, z, 0.0, 400)
    }
}

/// P(chi2_1 > v) = 2 P(N(0,1) > sqrt v).
fn chi2_tail_oracle(v: f64) -> f64 {
    2.0 * normal_tail_oracle(v.sqrt())
}

/// P(chi2_1 <= v) from the density of |N(0,1)|.
fn chi2_central_oracle(v: f64) -> f64 {
    2.0 * integrate(phi, 0.0, v.sqrt(), 400)
}

fn bisect_quantile(alpha: f64) -> f64 {
    let (mut lo, mut hi) = (-12.0, 12.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_tail_oracle(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

const CHI2_PROBES: [f64; 20] = [
    0.0, 1e-6, 0.001, 0.05, 0.2, 0.455, 0.7, 1.0, 1.5, 2.0, 2.706, 3.0, 3.841, 5.0, 6.635, 8.0, 10.828, 15.0, 25.0,
    40.0,
];

const ALPHA_PROBES: [f64; 20] = [
    1e-8, 1e-6, 1e-4, 0.001, 0.005, 0.01, 0.025, 0.05, 0.1, 0.2, 0.3, 0.4, 0.45, 0.5, 0.6, 0.75, 0.9, 0.95, 0.99, 0.999,
];

#[test]
fn chi2_tail_matches_quadrature() {
    for v in CHI2_PROBES {
        let got = chi2_1_sf(v).unwrap();
        let want = chi2_tail_oracle(v);
        assert!((got - want).abs() < 1e-10, "v = {v}: {got} vs {want}");
    }
}

#[test]
fn chi2_tail_and_central_mass_sum_to_one() {
    for v in [0.5, 1.0, 2.0, 5.0, 10.0] {
        let total = chi2_1_sf(v).unwrap() + chi2_central_oracle(v);
        assert!((total - 1.0).abs() < 1e-10, "v = {v}: {total}");
    }
}

#[test]
fn chi2_tail_is_strictly_decreasing() {
    let mut last = 1.0 + 1e-12;
    for k in 0..400 {
        let p = chi2_1_sf(k as f64 * 0.1).unwrap();
        assert!(p < last);
        last = p;
    }
}

#[test]
fn normal_quantile_matches_bisection() {
    for a in ALPHA_PROBES {
        let got = normal_quantile(a).unwrap();
        let want = bisect_quantile(a);
        assert!((got - want).abs() < 1e-10, "alpha = {a}: {got} vs {want}");
        assert!((normal_sf(got) - a).abs() <= 1e-12 * a.max(1e-3));
    }
}

#[test]
fn quadrature_rule_is_exact_on_polynomials() {
    let got = integrate(|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0, 1);
    let want = (256.0 - 1.0) / 8.0 - (8.0 + 1.0);
    assert!((got - want).abs() < 1e-12);
}
