use lrsens::diffusion::{diffusion_eval, drift_eval};
use lrsens::ensemble::jump_ensemble;
use lrsens::models::{birth_death, logistic, p53};
use lrsens::simulate::euler_path;
use lrsens::simulate::jump::ssa_path;
use lrsens::stats::{linear_fit, mean, sample_variance};
use lrsens::{
    ctmc_score, euler_score, iid_score, DiffusionModel, EnsembleConfig, Observables, RngStream, SignConvention,
};

#[test]
fn ctmc_window_scores_are_additive() {
    let net = birth_death::<f64>(10.0, 1.0).unwrap();
    let (t, td) = (30.0, 7.5);
    for m in 0..100 {
        let traj = ssa_path(&net, net.theta(), &[0], t, RngStream::replica(1, 0, m)).unwrap();
        let full = ctmc_score(&traj, &net, net.theta(), SignConvention::Likelihood, true).unwrap();
        let head = ctmc_score(
            &traj.truncated(t - td),
            &net,
            net.theta(),
            SignConvention::Likelihood,
            false,
        )
        .unwrap();
        let tail = full.truncated(td).unwrap();
        for (p, ((w, h), t)) in full.total.iter().zip(&head.total).zip(&tail).enumerate() {
            assert!(
                (w - h - t).abs() <= 1e-12 * w.abs().max(1.0),
                "replica {m}, parameter {p}"
            );
        }
    }
}

#[test]
fn euler_window_scores_are_additive() {
    let model = logistic::<f64>().unwrap();
    let theta = [1.0, 100.0];
    for m in 0..20 {
        let path = euler_path(&model, &theta, &[93.0], 10.0, 1000, RngStream::replica(2, 0, m)).unwrap();
        let full = euler_score(&path, &model, &theta, true).unwrap();
        let tail = full.truncated(2.5).unwrap();
        let mut head = path.clone();
        head.steps = 750;
        head.horizon = 7.5;
        head.states.truncate(751);
        head.noise.truncate(750);
        let head = euler_score(&head, &model, &theta, false).unwrap();
        for ((w, h), t) in full.total.iter().zip(&head.total).zip(&tail) {
            assert!((w - h - t).abs() <= 1e-12 * w.abs().max(1.0));
        }
        assert_eq!(full.truncated(10.0).unwrap(), full.total);
    }
}

#[test]
fn reversed_sign_negates_the_score() {
    let net = p53::<f64>().unwrap();
    let traj = ssa_path(&net, net.theta(), &[0, 0, 0], 5.0, RngStream::new(3, 0)).unwrap();
    let a = ctmc_score(&traj, &net, net.theta(), SignConvention::Likelihood, false).unwrap();
    let b = ctmc_score(&traj, &net, net.theta(), SignConvention::Reversed, false).unwrap();
    for (x, y) in a.total.iter().zip(&b.total) {
        assert_eq!(*x, -*y);
    }
}

#[test]
fn score_has_mean_zero_and_linear_variance() {
    let net = birth_death(10.0, 1.0).unwrap();
    let obs = Observables::identity(net.species());
    let times = [10.0, 20.0, 40.0, 80.0];
    let cfg = EnsembleConfig::new(10_000, times.to_vec(), 4);
    let ens = jump_ensemble(&net, net.theta(), &[0], &obs, &cfg).unwrap();
    let mut variances = [Vec::new(), Vec::new()];
    for e in &ens {
        for (p, acc) in variances.iter_mut().enumerate() {
            let w = e.score.column(p);
            let v = sample_variance(&w).unwrap();
            let se = (v / w.len() as f64).sqrt();
            assert!(
                mean(&w).abs() <= 3.0 * se,
                "T = {}, parameter {p}: mean {}",
                e.time,
                mean(&w)
            );
            acc.push(v);
        }
    }
    for (p, v) in variances.iter().enumerate() {
        let fit = linear_fit(&times, v).unwrap();
        assert!(fit.r_squared > 0.95, "parameter {p}: R² {}", fit.r_squared);
    }
}

/// Gaussian transition log-density of a whole Euler path under `θ`.
fn euler_log_density(model: &dyn DiffusionModel<f64>, theta: &[f64], states: &[f64], dt: f64) -> f64 {
    let mut total = 0.0;
    for n in 1..states.len() {
        let x = [states[n - 1]];
        let a = drift_eval(model, theta, &x).unwrap()[0];
        let s = diffusion_eval(model, &x).unwrap()[(0, 0)];
        let r = states[n] - x[0] - a * dt;
        total -= r * r / (2.0 * s * s * dt);
    }
    total
}

#[test]
fn euler_score_is_the_gradient_of_the_path_log_density() {
    let model = logistic::<f64>().unwrap();
    let theta = [1.0, 100.0];
    for m in 0..10 {
        let path = euler_path(&model, &theta, &[93.0], 1.0, 100, RngStream::replica(5, 0, m)).unwrap();
        let w = euler_score(&path, &model, &theta, false).unwrap();
        for p in 0..2 {
            let h = 1e-5 * theta[p];
            let mut up = theta;
            let mut down = theta;
            up[p] += h;
            down[p] -= h;
            let fd = (euler_log_density(&model, &up, &path.states, path.dt())
                - euler_log_density(&model, &down, &path.states, path.dt()))
                / (2.0 * h);
            let scale = w.total[p].abs().max(fd.abs()).max(1e-6);
            assert!(
                (fd - w.total[p]).abs() / scale <= 1e-5,
                "path {m}, parameter {p}: {} vs {fd}",
                w.total[p]
            );
        }
    }
}

#[test]
fn iid_exponential_score_moments() {
    let theta = 2.0;
    let t = 100;
    let mut g = RngStream::new(6, 0).generator();
    let records: Vec<_> = (0..5000)
        .map(|_| {
            let xs: Vec<f64> = (0..t).map(|_| g.exponential::<f64>() / theta).collect();
            iid_score(&xs, |x| vec![1.0 / theta - x], |x| vec![*x]).unwrap()
        })
        .collect();
    let w: Vec<f64> = records.iter().map(|r| r.score[0]).collect();
    let v = sample_variance(&w).unwrap();
    let se = (v / w.len() as f64).sqrt();
    assert!(mean(&w).abs() <= 3.0 * se);
    let expected = t as f64 / (theta * theta);
    assert!(
        (v - expected).abs() <= 3.0 * expected * (2.0 / 5000.0f64).sqrt(),
        "Var(W) {v}"
    );
}
