use uqsurro_core::bnn::{self, Bnn, PriorSpec};
use uqsurro_core::data::{linear_problem, SplitFractions};
use uqsurro_core::ensemble::{self, ensemble_predict, mixture_moments, Ensemble};
use uqsurro_core::mcd::{self, mcd_sample, Method};
use uqsurro_core::net::{self, Activation, Dropout, LayerSpec, Mlp, OptimizerKind, TrainConfig};
use uqsurro_core::objectives::{gaussian_nll, softplus_inv, Objective};
use uqsurro_core::rng;
use uqsurro_core::{Error, Matrix};

fn cfg(lr: f64, epochs: usize, batch: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: lr,
        epochs,
        batch_size: batch,
        optimizer: OptimizerKind::Adam,
        l2_lambda: 0.0,
        seed: 0,
        split: SplitFractions::new(0.85, 0.05, 0.1).unwrap(),
    }
}

#[test]
fn forward_matches_straight_line_evaluation() {
    let layers = vec![
        LayerSpec::new(4, Activation::Tanh),
        LayerSpec::new(2, Activation::Linear),
    ];
    let mlp = Mlp::init(3, &layers, 11).unwrap();
    let x = [0.3, -1.2, 0.7];
    let (w0, b0, w1, b1) = (&mlp.weights()[0], &mlp.biases()[0], &mlp.weights()[1], &mlp.biases()[1]);
    let mut h = [0.0; 4];
    for j in 0..4 {
        let mut z = b0[j];
        for i in 0..3 {
            z += x[i] * w0[(i, j)];
        }
        h[j] = z.tanh();
    }
    let mut want = [0.0; 2];
    for k in 0..2 {
        want[k] = b1[k] + (0..4).map(|j| h[j] * w1[(j, k)]).sum::<f64>();
    }
    let got = mlp.forward(&x, None).unwrap();
    for k in 0..2 {
        assert!(
            (got[k] - want[k]).abs() <= 1e-12 * want[k].abs().max(1e-300),
            "{got:?} vs {want:?}"
        );
    }
}

#[test]
fn dropout_mask_drop_fraction() {
    let mlp = Mlp::zeros(
        1,
        &[
            LayerSpec::new(200, Activation::Relu),
            LayerSpec::new(1, Activation::Linear),
        ],
    )
    .unwrap();
    let dropout = Dropout::new(0.4).unwrap();
    let mut rng = rng::seeded(5);
    let masks = 100_000;
    let mut dropped = 0usize;
    for _ in 0..masks {
        let m = dropout.sample_mask(&mlp, &mut rng);
        dropped += m.keep(0).iter().filter(|k| !**k).count();
    }
    let frac = dropped as f64 / (masks * 200) as f64;
    assert!((frac - 0.4).abs() <= 0.01, "drop fraction {frac}");
    let se = (0.4f64 * 0.6 / (masks * 200) as f64).sqrt();
    assert!(
        (frac - 0.4).abs() <= 3.0 * se,
        "drop fraction {frac} beyond 3 standard errors"
    );
}

#[test]
fn linear_regression_converges() {
    let data = linear_problem(40).unwrap();
    let mlp = Mlp::init(1, &[LayerSpec::new(1, Activation::Linear)], 0).unwrap();
    let (trained, log) = net::train(
        mlp,
        &data,
        &cfg(0.01, 2000, 8),
        Objective::Mse,
        None,
        &mut rng::seeded(1),
    )
    .unwrap();
    assert_eq!(log.epochs(), 2000);
    let out = trained.forward_batch(data.inputs(), None).unwrap();
    let mse = uqsurro_core::objectives::mse(out.as_slice(), data.outputs().as_slice()).unwrap();
    assert!(mse < 1e-6, "final MSE {mse}");
}

#[test]
fn zero_learning_rate_leaves_weights() {
    let data = linear_problem(20).unwrap();
    let layers = LayerSpec::stack(&[5, 1], Activation::Tanh);
    let mlp = Mlp::init(1, &layers, 3).unwrap();
    for opt in [OptimizerKind::Sgd, OptimizerKind::Adam] {
        let c = TrainConfig {
            optimizer: opt,
            ..cfg(0.0, 1, 4)
        };
        let (trained, log) = net::train(mlp.clone(), &data, &c, Objective::Mse, None, &mut rng::seeded(0)).unwrap();
        assert_eq!(trained, mlp);
        assert_eq!(log.train_loss.len(), 1);
    }
}

#[test]
fn training_is_bit_reproducible() {
    let data = linear_problem(30).unwrap();
    let layers = LayerSpec::stack(&[6, 6, 1], Activation::Relu);
    let run = || {
        let mlp = Mlp::init(1, &layers, 9).unwrap();
        net::train(
            mlp,
            &data,
            &cfg(0.01, 30, 7),
            Objective::Mse,
            Some(Dropout::new(0.2).unwrap()),
            &mut rng::seeded(4),
        )
        .unwrap()
    };
    let (a, la) = run();
    let (b, lb) = run();
    assert_eq!(a, b);
    assert_eq!(la, lb);
}

#[test]
fn divergence_is_reported() {
    let data = linear_problem(20).unwrap();
    let mlp = Mlp::init(1, &LayerSpec::stack(&[4, 1], Activation::Relu), 0).unwrap();
    let c = TrainConfig {
        optimizer: OptimizerKind::Sgd,
        ..cfg(1e200, 5, 5)
    };
    let err = net::train(mlp, &data, &c, Objective::Mse, None, &mut rng::seeded(0)).unwrap_err();
    assert!(matches!(err, Error::Divergence { .. }), "{err}");
}

#[test]
fn mcd_constant_predictor_and_stored_samples() {
    let layers = LayerSpec::stack(&[8, 8, 1], Activation::Relu);
    let mut mlp = Mlp::zeros(2, &layers).unwrap();
    mlp.biases_mut()[2][0] = 3.5;
    let d = mcd::mcd_predict(&mlp, &[0.1, 0.2], 50, Dropout::new(0.4).unwrap(), &mut rng::seeded(0)).unwrap();
    assert_eq!(d.mean, vec![3.5]);
    assert_eq!(d.variance, vec![0.0]);

    let mlp = Mlp::init(2, &layers, 1).unwrap();
    let (d, samples) = mcd_sample(&mlp, &[0.4, -0.3], 200, Dropout::new(0.4).unwrap(), &mut rng::seeded(2)).unwrap();
    assert_eq!(samples.len(), 200);
    let direct = mcd::PredictiveDistribution::from_samples(&samples, Method::Mcd).unwrap();
    assert!((d.mean[0] - direct.mean[0]).abs() <= 1e-12);
    assert!((d.variance[0] - direct.variance[0]).abs() <= 1e-12);
    let mut reversed = samples.clone();
    reversed.reverse();
    let r = mcd::PredictiveDistribution::from_samples(&reversed, Method::Mcd).unwrap();
    assert!((r.variance[0] - direct.variance[0]).abs() <= 1e-12);
}

#[test]
fn mcd_variance_converges_with_t() {
    let mlp = Mlp::init(3, &LayerSpec::stack(&[30, 30, 1], Activation::Tanh), 4).unwrap();
    let x = [0.2, -0.5, 0.9];
    let dropout = Dropout::new(0.3).unwrap();
    let ts = [50usize, 200, 1000];
    let vars: Vec<f64> = ts
        .iter()
        .map(|&t| {
            mcd::mcd_predict(&mlp, &x, t, dropout, &mut rng::seeded(t as u64))
                .unwrap()
                .variance[0]
        })
        .collect();
    for i in 1..ts.len() {
        let bound = 3.0 * (2.0 / (ts[i - 1] - 1) as f64).sqrt() * vars[i];
        assert!(
            (vars[i] - vars[i - 1]).abs() <= bound,
            "T={} → {}: {vars:?}",
            ts[i - 1],
            ts[i]
        );
    }
}

#[test]
fn ensemble_fits_linear_task() {
    let data = linear_problem(40).unwrap();
    let arch = [LayerSpec::new(2, Activation::Linear)];
    let e = ensemble::train_ensemble(&data, &arch, &cfg(0.01, 2000, 8), 3, &mut rng::seeded(7)).unwrap();
    assert_eq!(e.size(), 3);
    assert_eq!(e.seeds().len(), 3);
    for m in e.members() {
        let out = m.forward_batch(data.inputs(), None).unwrap();
        let means: Vec<f64> = (0..out.rows()).map(|i| out[(i, 0)]).collect();
        let mse = uqsurro_core::objectives::mse(&means, data.outputs().as_slice()).unwrap();
        assert!(mse < 1e-4, "member MSE {mse}");
    }
}

#[test]
fn ensemble_null_update_keeps_distinct_members() {
    let data = linear_problem(20).unwrap();
    let arch = LayerSpec::stack(&[5, 2], Activation::Tanh);
    let e = ensemble::train_ensemble(&data, &arch, &cfg(0.0, 3, 5), 2, &mut rng::seeded(1)).unwrap();
    assert_ne!(e.members()[0], e.members()[1]);
    assert!(e.logs().iter().all(|l| l.epochs() == 3));
    assert!(matches!(
        ensemble::train_ensemble(&data, &arch, &cfg(0.0, 3, 5), 1, &mut rng::seeded(1)),
        Err(Error::InvalidHyperparameter(_))
    ));
}

#[test]
fn ensemble_prediction_ignores_member_order() {
    let arch = LayerSpec::stack(&[4, 2], Activation::Tanh);
    let members: Vec<Mlp> = (0..4).map(|s| Mlp::init(2, &arch, s).unwrap()).collect();
    let a = Ensemble::from_members(members.clone(), vec![0, 1, 2, 3], vec![]).unwrap();
    let mut rev = members;
    rev.reverse();
    let b = Ensemble::from_members(rev, vec![3, 2, 1, 0], vec![]).unwrap();
    let x = [0.3, 0.8];
    let (pa, pb) = (ensemble_predict(&a, &x).unwrap(), ensemble_predict(&b, &x).unwrap());
    assert!((pa.mean[0] - pb.mean[0]).abs() <= 1e-15);
    assert!((pa.variance[0] - pb.variance[0]).abs() <= 1e-12);

    let single = Ensemble::from_members(vec![Mlp::init(2, &arch, 0).unwrap()], vec![0], vec![]).unwrap();
    let head = ensemble::decode_heads(&single.members()[0].forward(&x, None).unwrap())[0];
    let p = ensemble_predict(&single, &x).unwrap();
    assert_eq!((p.mean[0], p.variance[0]), (head.mean, head.variance));
}

fn collapsed(sigma: f64, seed: u64) -> Bnn {
    let layers = LayerSpec::stack(&[6, 6, 2], Activation::Tanh);
    let mut b = Bnn::new(2, &layers, PriorSpec::default(), &mut rng::seeded(seed)).unwrap();
    let rho = softplus_inv(sigma);
    for r in &mut b.posterior_mut().rho {
        r.as_mut_slice().fill(rho);
    }
    b
}

#[test]
fn bnn_collapse_limits() {
    let b = collapsed(1e-8, 3);
    let x = [0.4, -0.1];
    let det = ensemble::decode_heads(&b.mean_network().unwrap().forward(&x, None).unwrap())[0];
    let p = bnn::bnn_predict(&b, &x, 50, &mut rng::seeded(1)).unwrap();
    assert!((p.mean[0] - det.mean).abs() <= 1e-6);
    assert!((p.variance[0] - det.variance).abs() <= 1e-6);

    // σ_q = 1e-6: the likelihood term is the deterministic NLL
    let b = collapsed(1e-6, 4);
    let xs = Matrix::from_rows(&[vec![0.1, 0.2], vec![-0.3, 0.5], vec![0.9, -0.7]]).unwrap();
    let ys = Matrix::from_rows(&[vec![0.5], vec![-0.2], vec![1.0]]).unwrap();
    let noise = b.sample_noise(&mut rng::seeded(2));
    let (loss, _) = bnn::elbo_loss_with_noise(&b, &xs, &ys, 1, &[noise]).unwrap();
    let kl = bnn::kl_gaussians(b.posterior(), b.prior()).unwrap();
    let out = b.mean_network().unwrap().forward_batch(&xs, None).unwrap();
    let det_nll = Objective::Nll.batch_loss(&out, &ys).unwrap().0 * 3.0;
    assert!((loss - kl - det_nll).abs() <= 1e-3);
}

#[test]
fn elbo_reassembles_from_terms() {
    let layers = LayerSpec::stack(&[5, 2], Activation::Tanh);
    let b = Bnn::new(2, &layers, PriorSpec::default(), &mut rng::seeded(8)).unwrap();
    let xs = Matrix::from_rows(&[vec![0.1, 0.2], vec![-0.3, 0.5]]).unwrap();
    let ys = Matrix::from_rows(&[vec![0.5], vec![-0.2]]).unwrap();
    let noise = b.sample_noise(&mut rng::seeded(3));
    let n_batches = 4;
    let (loss, _) = bnn::elbo_loss_with_noise(&b, &xs, &ys, n_batches, std::slice::from_ref(&noise)).unwrap();

    let mut kl = 0.0;
    for (mu, rho) in b.posterior().mu.iter().zip(&b.posterior().rho) {
        for (&m, &r) in mu.as_slice().iter().zip(rho.as_slice()) {
            let s = (1.0 + r.exp()).ln();
            kl += -s.ln() + (s * s + m * m) / 2.0 - 0.5;
        }
    }
    let out = b.network(&noise).unwrap().forward_batch(&xs, None).unwrap();
    let mut nll = 0.0;
    for i in 0..2 {
        let var = (1.0 + out[(i, 1)].exp()).ln() + 1e-6;
        nll += gaussian_nll(ys[(i, 0)], out[(i, 0)], var).unwrap();
    }
    assert!((loss - (kl / n_batches as f64 + nll)).abs() <= 1e-10);
    // an epoch's worth of minibatch KL shares recovers the full KL
    let share: f64 = (0..n_batches).map(|_| kl / n_batches as f64).sum();
    assert!((share - kl).abs() <= 1e-12);
}

#[test]
fn bnn_elbo_decreases_on_linear_task() {
    let data = linear_problem(60).unwrap();
    let arch = LayerSpec::stack(&[10, 10, 2], Activation::Tanh);
    let (_, log) = bnn::train_bnn(
        &data,
        &arch,
        &cfg(0.005, 300, 10),
        PriorSpec::default(),
        &mut rng::seeded(2),
    )
    .unwrap();
    let (first, last) = log.quartile_means();
    assert!(last < first, "first quartile {first}, last quartile {last}");
}

#[test]
fn bnn_null_update_and_reproducibility() {
    let data = linear_problem(20).unwrap();
    let arch = LayerSpec::stack(&[4, 2], Activation::Relu);
    let init = Bnn::new(1, &arch, PriorSpec::default(), &mut rng::seeded(5)).unwrap();
    let (after, _) = bnn::fit_bnn(init.clone(), &data, &cfg(0.0, 2, 5), &mut rng::seeded(1)).unwrap();
    assert_eq!(after, init);
    let run = || {
        bnn::fit_bnn(init.clone(), &data, &cfg(0.01, 5, 5), &mut rng::seeded(1))
            .unwrap()
            .0
    };
    assert_eq!(run(), run());
}

#[test]
fn forced_draws_mix_by_hand() {
    let draws = vec![vec![(1.0, 0.0)], vec![(3.0, 0.0)]];
    let p = bnn::mixture_of_draws(&draws, Method::Bnn).unwrap();
    assert_eq!((p.mean[0], p.variance[0]), (2.0, 1.0));
    assert_eq!(mixture_moments(&[(1.0, 0.0), (3.0, 0.0)]).unwrap(), (2.0, 1.0));
}
