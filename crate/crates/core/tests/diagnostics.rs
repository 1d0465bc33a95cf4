use lrsens::models::{birth_death, p53};
use lrsens::simulate::jump::ssa_path;
use lrsens::stats::{acf, decorrelation_time, iid_variance_oracle, DecorrelationOptions, IidMoments};
use lrsens::RngStream;

fn species_series(
    net: &lrsens::ReactionNetwork<f64>,
    x0: &[i64],
    horizon: f64,
    burn_in: usize,
    species: usize,
    seed: u64,
) -> (Vec<f64>, f64) {
    let traj = ssa_path(net, net.theta(), x0, horizon, RngStream::new(seed, 0)).unwrap();
    let step = horizon / 2048.0;
    let grid = traj.sample_grid(net, step);
    (grid[burn_in..].iter().map(|x| x[species] as f64).collect(), step)
}

#[test]
fn p53_precursor_acf_is_flagged_as_oscillating() {
    let net = p53::<f64>().unwrap();
    let (series, step) = species_series(&net, &[0, 0, 0], 1000.0, 200, 1, 21);
    let rho = acf(&series, series.len() / 2).unwrap();
    let d = decorrelation_time(&rho, step, series.len(), DecorrelationOptions::default()).unwrap();
    assert!(d.low_confidence, "lag {}, band {}", d.lag, d.band);
    assert!(rho.iter().any(|&r| r < -d.band), "no negative lobe");
}

#[test]
fn birth_death_decorrelation_is_confident_and_short() {
    let net = birth_death(10.0, 1.0).unwrap();
    let (series, step) = species_series(&net, &[10], 2000.0, 0, 0, 22);
    let rho = acf(&series, 200).unwrap();
    let d = decorrelation_time(&rho, step, series.len(), DecorrelationOptions::default()).unwrap();
    assert!(!d.low_confidence);
    // the ACF is e^{−dt}; it drops below the band near t = ln(1/band)
    let expected = 3.0 * (1.0 / d.band).ln();
    assert!(
        d.time > expected / 2.0 && d.time < expected * 2.0,
        "T_d {} vs {expected}",
        d.time
    );
}

/// `∫₀^∞ g(x) e^{−x} dx` by composite Simpson on `[0, 60]`.
fn exp_expectation(g: impl Fn(f64) -> f64) -> f64 {
    let (n, hi) = (60_000, 60.0);
    let h = hi / n as f64;
    let mut s = 0.0;
    for i in 0..=n {
        let x = i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * g(x) * (-x).exp();
    }
    s * h / 3.0
}

#[test]
fn exponential_moments_by_quadrature() {
    let w = |x: f64| 1.0 - x;
    let m = IidMoments {
        ef: exp_expectation(|x| x),
        ef2: exp_expectation(|x| x * x),
        ew: exp_expectation(w),
        ew2: exp_expectation(|x| w(x) * w(x)),
        efw: exp_expectation(|x| x * w(x)),
    };
    for (got, want) in [(m.ef, 1.0), (m.ef2, 2.0), (m.ew, 0.0), (m.ew2, 1.0), (m.efw, -1.0)] {
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
    let p = iid_variance_oracle(&m, 100.0);
    assert!((p.i2 - 200.0).abs() < 1e-6);
    assert!((p.i3 - 100.0).abs() < 1e-6);
    assert!((p.i3c_raw - 4.0).abs() < 1e-8);
    assert!((p.i3c_centered - 3.0).abs() < 1e-8);
}
