mod common;

use common::oracles::{quad, Heston};
use hhw::analytic::{b_integral, bond_price, call_price, probability};
use hhw::harness::mc_oracle;
use hhw::model::{case_params, CaseId, OptionSpec};
use hhw::{Error, HhwParams};

fn heston_block(p: &HhwParams, rate: f64) -> Heston {
    Heston { kappa: p.kappa, eta: p.eta, sigma: p.sigma1, rho: p.rho12, rate }
}

#[test]
fn constant_rate_limit_matches_independent_heston() {
    for case in CaseId::ALL {
        let (p, o) = case_params(case);
        let rate = p.c1;
        let q = p.constant_rate_limit(rate);
        let oracle = heston_block(&p, rate);
        for s in [70.0, 90.0, 100.0, 115.0, 140.0] {
            for v in [0.01, 0.04, 0.1, 0.2, 0.5] {
                let got = call_price(s, v, rate, 0.0, &q, &o).unwrap();
                let want = oracle.call(s, v, o.strike, o.maturity);
                assert!((got - want).abs() <= 1e-6, "{case} s={s} v={v}: {got} vs {want}");
            }
        }
    }
}

/// `ln P = -r Bf(T) - int a b(l) Bf(T - l) dl + sigma^2 / 2 int Bf(T - l)^2 dl`
/// with `Bf(x) = (1 - exp(-a x)) / a`.
fn bond_by_quadrature(r: f64, tau: f64, p: &HhwParams, t: f64) -> f64 {
    let bf = |x: f64| (1.0 - (-p.a * x).exp()) / p.a;
    let drift = quad(|l| p.a * p.mean_reversion(l) * bf(t - l), tau, t, 1e-15);
    let var = quad(|l| bf(t - l).powi(2), tau, t, 1e-15);
    (-r * bf(t - tau) - drift + 0.5 * p.sigma2 * p.sigma2 * var).exp()
}

#[test]
fn bond_matches_quadrature() {
    let (p, _) = case_params(CaseId::A);
    let got = bond_price(0.02, 0.0, &p, 1.0).unwrap();
    assert!((got - bond_by_quadrature(0.02, 0.0, &p, 1.0)).abs() <= 1e-10);
    for case in CaseId::ALL {
        let (p, o) = case_params(case);
        for (r, tau) in [(-0.05, 0.0), (0.03, 0.3 * o.maturity), (0.2, 0.9 * o.maturity)] {
            let got = bond_price(r, tau, &p, o.maturity).unwrap();
            let want = bond_by_quadrature(r, tau, &p, o.maturity);
            assert!((got - want).abs() <= 1e-11 * want, "{case}: {got} vs {want}");
        }
    }
}

#[test]
fn bond_constant_rate_reduction() {
    for case in CaseId::ALL {
        let (p, o) = case_params(case);
        let q = p.constant_rate_limit(0.04);
        for tau in [0.0, 0.5 * o.maturity] {
            let got = bond_price(0.04, tau, &q, o.maturity).unwrap();
            let want = (-0.04 * (o.maturity - tau)).exp();
            assert!((got - want).abs() <= 1e-12, "{case}: {got} vs {want}");
        }
    }
}

#[test]
fn bond_decreasing_in_rate() {
    let (p, o) = case_params(CaseId::D);
    let prices: Vec<f64> = (-20..=20).map(|k| bond_price(k as f64 * 0.01, 1.0, &p, o.maturity).unwrap()).collect();
    assert!(prices.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn b_integral_matches_quadrature() {
    for case in CaseId::ALL {
        let (p, o) = case_params(case);
        let t = o.maturity;
        for tau in [0.0, 0.25 * t, 0.8 * t] {
            let got = b_integral(tau, t, &p);
            let want = quad(|l| p.mean_reversion(l) * (1.0 - (-p.a * (t - l)).exp()), tau, t, 1e-15);
            assert!((got - want).abs() <= 1e-12, "{case} tau={tau}: {got} vs {want}");
        }
    }
}

#[test]
fn probabilities_stay_in_unit_interval() {
    for case in CaseId::ALL {
        let (p, o) = case_params(case);
        let q = p.without_cross_correlations();
        for a in 0..10 {
            let s = 30.0 + 25.0 * a as f64;
            for b in 0..10 {
                let v = 0.005 + 0.1 * b as f64;
                for r in [-0.05, 0.0, 0.03, 0.1, 0.25] {
                    for j in [1, 2] {
                        let pj = probability(j, s.ln(), v, r, 0.0, o.strike, &q, o.maturity).unwrap();
                        assert!((0.0..=1.0).contains(&pj), "{case} P{j}({s},{v},{r}) = {pj}");
                    }
                }
            }
        }
    }
}

#[test]
fn probability_limits() {
    let (p, o) = case_params(CaseId::A);
    let q = p.constant_rate_limit(0.05);
    for j in [1, 2] {
        let deep_in = probability(j, (10.0 * o.strike).ln(), 0.12, 0.05, 0.0, o.strike, &q, o.maturity).unwrap();
        let deep_out = probability(j, (0.1 * o.strike).ln(), 0.12, 0.05, 0.0, o.strike, &q, o.maturity).unwrap();
        assert!((deep_in - 1.0).abs() < 1e-4 && deep_out < 1e-4, "P{j}: {deep_in} {deep_out}");
    }
}

#[test]
fn domain_is_enforced() {
    let (p, o) = case_params(CaseId::B);
    assert!(matches!(call_price(100.0, 0.1, 0.02, 0.0, &p, &o), Err(Error::Domain(_))));
    let barrier = OptionSpec::up_and_out_call(100.0, 1.0, 130.0).unwrap();
    let q = p.without_cross_correlations();
    assert!(matches!(call_price(100.0, 0.1, 0.02, 0.0, &q, &barrier), Err(Error::Domain(_))));
}

#[test]
fn agrees_with_monte_carlo() {
    let (p, o) = case_params(CaseId::A);
    let q = p.without_cross_correlations();
    let price = call_price(100.0, 0.12, 0.04, 0.0, &q, &o).unwrap();
    let (mean, se) = mc_oracle(&q, &o, 100.0, 0.12, 0.04, 1_000_000, 500, 7).unwrap();
    assert!((mean - price).abs() <= 3.0 * se, "{price} vs {mean} +- {se}");
}
