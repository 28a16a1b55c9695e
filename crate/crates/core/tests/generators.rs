//! Moment checks for the scenario generators and Monte Carlo confirmation of
//! the closed-form population r2 values.

use pmdep::dist::{ks_one_sample, normal_sf};
use pmdep::rng;
use pmdep::sim::{
    ar_quadratic_form, gen_a1, gen_a2, gen_ar_normal, gen_b1, gen_b2, population_r2, Family, Regime, ScenarioSpec,
};
use rand_distr::{Distribution, StandardNormal};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let sa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let sb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (sa * sb).sqrt()
}

const MC_DRAWS: usize = 10_000_000;

#[test]
fn ar_block_has_geometric_correlation() {
    let m = gen_ar_normal(100_000, 3, 0.3, 17).unwrap();
    let r13 = corr(&m.column(0), &m.column(2));
    assert!((r13 - 0.09).abs() < 0.01, "corr(col1, col3) = {r13}");
    for j in 0..3 {
        assert!((var(&m.column(j)) - 1.0).abs() < 0.02);
    }
    let ind = gen_ar_normal(10_000, 2, 0.0, 18).unwrap();
    assert!(corr(&ind.column(0), &ind.column(1)).abs() < 0.05);
}

#[test]
fn ar_moments_within_three_standard_errors() {
    let n = 100_000;
    let rho = 0.5;
    let m = gen_ar_normal(n, 4, rho, 99).unwrap();
    for i in 0..4 {
        for j in i + 1..4 {
            let target = rho.powi((j - i) as i32);
            // Var of the sample covariance of a bivariate normal is (1 + r^2) / n.
            let se = ((1.0 + target * target) / n as f64).sqrt();
            let (a, b) = (m.column(i), m.column(j));
            let cov = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / n as f64;
            assert!((cov - target).abs() < 3.0 * se, "({i},{j}): {cov} vs {target}");
        }
    }
}

#[test]
fn a1_sparse_signal_variance_matches_quadratic_form() {
    let spec = ScenarioSpec::new(Family::A1, Regime::Sparse, 100_000, 5);
    let data = gen_a1(&spec).unwrap();
    let theta = spec.theta();
    let p1 = spec.p1;
    let signal: Vec<f64> =
        (0..data.n()).map(|i| theta.iter().enumerate().map(|(j, t)| t * data.x().get(i, p1 + j)).sum()).collect();
    let want = ar_quadratic_form(&theta, spec.rho);
    let got = var(&signal);
    assert!((got / want - 1.0).abs() < 0.02, "{got} vs {want}");
}

#[test]
fn null_residual_variance_is_noise_variance() {
    let spec = ScenarioSpec::new(Family::A1, Regime::Null, 10_000, 6);
    let data = gen_a1(&spec).unwrap();
    let r: Vec<f64> = (0..data.n()).map(|i| data.y()[i] - data.x().get(i, 0) - data.x().get(i, 1)).collect();
    assert!((var(&r) - 0.25).abs() < 0.02);

    let a2 = ScenarioSpec { family: Family::A2, ..spec.clone() };
    assert_eq!(gen_a2(&a2).unwrap(), data);
}

#[test]
fn b2_noise_is_standard_normal() {
    let spec = ScenarioSpec::new(Family::B2, Regime::Null, 10_000, 7);
    let data = gen_b2(&spec).unwrap();
    let p1 = data.p1();
    let eps: Vec<f64> = (0..data.n())
        .map(|i| {
            let x = data.x().row(i);
            data.y()[i] - x[0] - 2.0 * (x[p1] / 2.0).sin()
        })
        .collect();
    let ks = ks_one_sample(&eps, |t| 1.0 - normal_sf(t)).unwrap();
    assert!(ks.statistic < 0.02, "KS D = {}", ks.statistic);
}

#[test]
fn b2_population_r2_by_monte_carlo() {
    let mut r = rng::seeded(2024);
    let (mut cos_sum, mut sin2_sum) = (0.0, 0.0);
    for _ in 0..MC_DRAWS {
        let w: f64 = StandardNormal.sample(&mut r);
        cos_sum += w.cos();
        sin2_sum += (w / 2.0).sin().powi(2);
    }
    let e_cos = cos_sum / MC_DRAWS as f64;
    let e_sin2 = sin2_sum / MC_DRAWS as f64;
    assert!((e_cos - (-0.5f64).exp()).abs() < 1e-3, "E cos W = {e_cos}");
    // E[(m - h)^2] = 4 E sin^2(W/2); E[(Y - h)^2] adds unit noise variance.
    let num = 4.0 * e_sin2;
    let mc = num / (num + 1.0);
    let closed = population_r2(&ScenarioSpec::new(Family::B2, Regime::Null, 100, 1)).unwrap();
    assert!((mc - closed).abs() < 1e-3, "{mc} vs {closed}");
    assert!((closed - 0.4404).abs() < 1e-4);
}

#[test]
fn b1_population_r2_by_monte_carlo() {
    let chunk = 1_000_000;
    let (mut num, mut den) = (0.0, 0.0);
    let mut spec = ScenarioSpec::new(Family::B1, Regime::Null, chunk, 0).with_p(6);
    let theta = spec.theta();
    for k in 0..MC_DRAWS / chunk {
        spec = spec.with_seed(1000 + k as u64);
        let data = gen_b1(&spec).unwrap();
        let beta = spec.beta();
        for i in 0..chunk {
            let x = data.x().row(i);
            let h: f64 = beta.iter().zip(x).map(|(b, z)| b * z).sum();
            let m: f64 = h + theta.iter().zip(&x[spec.p1..]).map(|(t, w)| t * w).sum::<f64>();
            num += (m - h).powi(2);
            den += (data.y()[i] - h).powi(2);
        }
    }
    let mc = num / den;
    let closed = population_r2(&spec).unwrap();
    assert!((mc - closed).abs() < 2e-3, "{mc} vs {closed}");
    assert!((closed - 5.5 / 8.5).abs() < 1e-12);
}

#[test]
fn a_family_population_r2_by_monte_carlo() {
    // The oracle for E(Y | Z) absorbs what Z_p1 predicts of theta'W.
    for (family, regime) in [(Family::A1, Regime::Sparse), (Family::A2, Regime::Dense)] {
        let spec = ScenarioSpec::new(family, regime, 400_000, 31);
        let data = pmdep::sim::generate(&spec).unwrap();
        let m = pmdep::sim::oracle_m(&spec);
        let h = pmdep::sim::oracle_h(&spec);
        let rows: Vec<usize> = (0..data.n()).collect();
        let mf = pmdep::fit(&m, &data.x_rows(&rows), data.y()).unwrap();
        let hf = pmdep::fit(&h, &data.z_rows(&rows), data.y()).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..data.n() {
            let hv = hf.predict(data.z_rows(&[i]).row(0));
            let mv = mf.predict(data.x().row(i));
            num += (mv - hv).powi(2);
            den += (data.y()[i] - hv).powi(2);
        }
        let mc = num / den;
        let closed = population_r2(&spec).unwrap();
        assert!((mc - closed).abs() < 0.01, "{family:?}: {mc} vs {closed}");
    }
}

#[test]
fn generators_are_seed_deterministic() {
    for family in [Family::A1, Family::A2, Family::B1, Family::B2, Family::Interaction] {
        let spec = ScenarioSpec::new(family, Regime::Sparse, 50, 77);
        let a = pmdep::sim::generate(&spec).unwrap();
        assert_eq!(a, pmdep::sim::generate(&spec).unwrap());
        assert_ne!(a, pmdep::sim::generate(&spec.clone().with_seed(78)).unwrap());
    }
}
