use enpp_core::params::profile_constant;
use statrs::function::gamma::ln_gamma;

fn beta_fn(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

#[test]
fn profile_constant_matches_beta_closed_form() {
    for alpha in [1e-3, 0.01, 0.05, 0.1, 0.2] {
        let expected = 1.5 * beta_fn(1.0 + alpha / 6.0, 1.5 + alpha / 3.0);
        let c = profile_constant(alpha);
        assert!((c - expected).abs() < 1e-12 * expected, "alpha {alpha}: {c} vs {expected}");
    }
}
