use super::*;
use proptest::prelude::*;

fn ledger() -> ConstantsLedger {
    let mut l = ConstantsLedger {
        step: 1.0,
        m_s: 0.5,
        m_r_upper: 0.5,
        mu_r_upper: 1.0,
        k_r: 1.1,
        c_tc: 0.1,
        tau: 0.0,
        r: 1.0,
        r0: 0.5,
        l_norm: 1.0,
        m_r: 1.0,
        mu_r: 0.5,
        c_coe: 1.0,
        alpha: 1.0,
        c_fu: 1.0,
        l_grad_f: 0.0,
        c_grad_fa: 1.0,
        d_bound: 0.1,
        q: 2.0,
        gamma0: 1e-3,
        rho: 0.1,
        gamma_bar: 1e-3,
        delta_bar: 0.1,
        eps_split: DEFAULT_EPS_SPLIT,
    };
    l.tau = default_tau(&l).unwrap();
    l
}

#[test]
fn classical_discrepancy_limit() {
    let g = gamma_posterior_raw(1.0, 0.1, 1.1, 1.0, 0.0, 0.0).unwrap();
    assert!((g - 2.75).abs() < 1e-12, "{g}");
}

#[test]
fn gamma_reference_value() {
    let g = gamma_posterior_raw(0.5, 0.05, 1.05, 1.0, 0.01, 0.1).unwrap();
    assert!((g - 1.521_821_019_211_106_9).abs() < 1e-12, "{g}");
}

#[test]
fn gamma_infeasible_constants() {
    let err = gamma_posterior_raw(1.0, 0.1, 1.1, 1.0, 0.05, 0.1).unwrap_err();
    assert!(matches!(err, Error::Infeasible(_)));
}

#[test]
fn gamma_rejects_positive_gamma_with_zero_split() {
    assert!(gamma_posterior_raw(0.5, 0.1, 1.1, 1.0, 0.01, 0.0).is_err());
}

#[test]
fn discrepancy_boundary_is_inclusive() {
    assert!(posterior_stop_check(0.1, 0.1, 1.0));
    assert!(!posterior_stop_check(0.2, 0.1, 1.0));
    assert!(!posterior_stop_check(1e-300, 0.0, 2.0));
}

#[test]
fn gamma_hat_at_zero_and_one() {
    let l = ledger();
    assert_eq!(gamma_hat_prior(0, &l), 0.0);
    // M_R + (M_R ||L|| + D) / q = 0.5 + 0.6 / 2.
    assert!((gamma_hat_raw(1, 0.5, 0.5, 0.1, 1.0, 2.0) - 0.8).abs() < 1e-12);
    assert!((gamma_hat_prior(1, &l) - 0.8).abs() < 1e-12);
}

#[test]
fn gamma_hat_limit_branches_are_continuous() {
    // B = 1 and B = 1/q at q = 1.
    let exact = gamma_hat_raw(5, 0.0, 0.0, 0.0, 1.0, 1.0);
    assert_eq!(exact, 0.0);
    let near = gamma_hat_raw(5, 1e-7, 0.0, 0.0, 1.0, 1.0);
    assert!((near - 1e-6).abs() < 1e-12, "{near}");
    let a = gamma_hat_raw(6, 0.3, 0.2, 0.05, 1.0, 1.0);
    let b = gamma_hat_raw(6, 0.3, 0.2, 0.05, 1.0, 1.0 + 1e-9);
    assert!((a - b).abs() < 1e-6 * a);
}

#[test]
fn prior_index_reference_value() {
    let mut l = ledger();
    l.k_r = 1.0;
    l.mu_r_upper = 1.0;
    l.m_r_upper = 0.5;
    l.gamma_bar = 0.0;
    l.rho = f64::INFINITY;
    let p = prior_stop_index(0.1, &l).unwrap();
    assert_eq!(p.j_budget, 33);
    assert_eq!(p.j_star, 33);
    // Scan: largest j whose accumulated budget fits.
    let scan = (0..).take_while(|&j| j as f64 * 0.01 * 2.25 <= 0.75).last().unwrap();
    assert_eq!(scan, 33);
}

#[test]
fn prior_index_scales_like_inverse_delta_squared() {
    let mut l = ledger();
    l.rho = f64::INFINITY;
    let a = prior_stop_index(0.01, &l).unwrap().j_budget as f64;
    let b = prior_stop_index(0.005, &l).unwrap().j_budget as f64;
    assert!((b / a - 4.0).abs() < 0.01, "{a} {b}");
    let huge = prior_stop_index(1e6, &l).unwrap();
    assert_eq!(huge.j_star, 0);
    assert!(huge.zero_budget);
    assert!(prior_stop_index(0.0, &l).is_err());
}

#[test]
fn drift_budget_limits_prior_index() {
    let l = ledger();
    let p = prior_stop_index(1e-3, &l).unwrap();
    assert!(p.j_drift < p.j_budget);
    assert!(1e-3 * gamma_hat_prior(p.j_drift, &l) <= l.rho);
    assert!(1e-3 * gamma_hat_prior(p.j_drift + 1, &l) > l.rho);
}

#[test]
fn step_normalises_noise() {
    let mut l = ledger();
    l.rho = f64::INFINITY;
    let a = prior_stop_index(0.02, &l).unwrap().j_budget;
    l.step = 0.25;
    let b = prior_stop_index(0.04, &l).unwrap().j_budget;
    assert_eq!(a, b);
}

#[test]
fn ledger_validation() {
    let l = ledger();
    l.validate().unwrap();
    let mut bad = l.clone();
    bad.tau = 1.0;
    assert!(bad.validate().is_err());
    let mut bad = l.clone();
    bad.r0 = 2.0;
    assert!(bad.validate().is_err());
    let mut bad = l.clone();
    bad.k_r = 1.5;
    assert!(bad.validate().is_err());
    let mut bad = l;
    bad.mu_r_upper = 1.9;
    assert!(bad.validate().is_err());
}

proptest! {
    #[test]
    fn gamma_hat_grows_with_j(m_r in 0.05f64..1.2, m_s in 0.0f64..2.0, d in 0.0f64..1.0, q in 1.0f64..3.0, j in 0usize..30) {
        prop_assert!(gamma_hat_raw(j + 1, m_r, m_s, d, 1.0, q) > gamma_hat_raw(j, m_r, m_s, d, 1.0, q));
    }

    #[test]
    fn gamma_grows_with_lower_precision_factor(g in 0.0f64..0.01, dg in 1e-4f64..0.01) {
        let a = gamma_posterior_raw(0.7, 0.1, 1.1, 1.0, g, 0.4).unwrap();
        let b = gamma_posterior_raw(0.7, 0.1, 1.1, 1.0, g + dg, 0.4).unwrap();
        prop_assert!(b > a);
    }
}
