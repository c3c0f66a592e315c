use proptest::prelude::*;

use boussinesq_delay::certificate::{
    certify, check_gains, decay_constants, f_of_mu1, g_of_mu1, mu1_right_endpoint, phi_matrix,
};
use boussinesq_delay::config::Config;
use boussinesq_delay::params::{DelaySpec, SystemParams};

fn delay(d: f64, m: f64) -> DelaySpec {
    let mut s = DelaySpec::constant(0.5 * m);
    s.m = m;
    s.d = d;
    s
}

proptest! {
    #[test]
    fn phi_definiteness_matches_gain_condition(
        a1 in 0.05f64..3.0,
        alpha in -1.0f64..6.0,
        beta in prop_oneof![-3.0f64..-0.01, 0.01f64..3.0],
        d in 0.0f64..0.9,
    ) {
        let p = SystemParams::new(1.0, a1, 1.0, alpha, beta);
        let g = check_gains(&p, &delay(d, 1.0)).unwrap();
        let phi = phi_matrix(&p, d);
        // eigenvalue oracle from the quadratic formula
        let [[a, b], [_, c]] = phi.as_rows();
        let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
        let top = 0.5 * (a + c + disc);
        let margin = (alpha - g.threshold).abs() / g.threshold.max(1.0);
        prop_assume!(margin > 1e-9);
        prop_assert_eq!(g.admissible, top < 0.0);
        prop_assert_eq!(g.admissible, alpha > g.threshold);
    }

    #[test]
    fn f_minus_g_changes_sign_once(
        a1 in 0.05f64..3.0,
        beta in 0.01f64..2.0,
        excess in 0.05f64..4.0,
        d in 0.0f64..0.8,
        l in 0.3f64..2.0,
        m in 0.6f64..3.0,
    ) {
        let mut p = SystemParams::new(0.01, a1, l, 0.0, beta);
        let dly = delay(d, m);
        p.alpha = check_gains(&p, &dly).unwrap().threshold * (1.0 + excess);
        prop_assume!(p.length_ok());
        let r = mu1_right_endpoint(&p, &dly);
        prop_assume!(r > 0.0);
        let k = 400;
        let vals: Vec<f64> = (0..=k)
            .map(|j| {
                let mu = r * j as f64 / k as f64;
                f_of_mu1(&p, &dly, mu).unwrap() - g_of_mu1(&p, &dly, mu).unwrap()
            })
            .collect();
        prop_assert!(vals[0] < 0.0 && vals[k] > 0.0);
        let changes = vals.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count();
        prop_assert_eq!(changes, 1);
        prop_assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn zeta_and_lambda_shrink_with_weights(s in 1e-4f64..1.0) {
        let p = SystemParams::new(1.0, 1.0, 1.0, 2.0, 1.0);
        let dly = delay(0.0, 1.0);
        let dc = decay_constants(&p, &dly, 0.1 * s, 0.5 * s).unwrap();
        prop_assert!(dc.zeta > 1.0);
        prop_assert!(dc.zeta - 1.0 <= 2.1 * 0.5 * s / (1.0 - 0.5 * s));
        prop_assert!(dc.lambda <= 0.5 * s);
    }

    #[test]
    fn certificate_ignores_numerical_settings(
        n in 8usize..400,
        dt in 1e-4f64..0.4,
        horizon in 0.0f64..50.0,
        amplitude in -5.0f64..5.0,
        seed in any::<u64>(),
    ) {
        let text = include_str!("../configs/acceptance.toml");
        let base = Config::parse(text).unwrap();
        let mut c = base.clone();
        c.grid.n = n;
        c.run.dt = dt;
        c.run.horizon = horizon;
        c.run.amplitude = amplitude;
        c.run.seed = Some(seed);
        let a = certify(&base.system, &base.delay).unwrap();
        let b = certify(&c.system, &c.delay).unwrap();
        prop_assert_eq!(a.lambda.to_bits(), b.lambda.to_bits());
        prop_assert_eq!(a.zeta.to_bits(), b.zeta.to_bits());
    }
}
