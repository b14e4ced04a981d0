use occsim_core::geom2d::Vec2;
use occsim_core::obs::{Polyline, PolylineBatch, PolylineKind};
use occsim_net::predictor::{sample_input, PredictorSample};
use occsim_net::{clip_global_norm, Adam, AdamConfig, PredictorParams, Tensor2, OFFSET_SCALE, PREDICTION_HORIZON};
use occsim_net::loss::mse;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HISTORY: usize = 10;

/// One agent driving straight at constant speed along a road aligned with
/// the ego heading, either direction, plus the lane it drives on.
fn straight_sample<R: Rng>(rng: &mut R) -> PredictorSample {
    let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let lane_y = rng.random_range(-7.0..7.0);
    let speed = rng.random_range(0.0..15.0);
    let x0 = rng.random_range(-40.0..40.0);
    let vel = Vec2::new(dir * speed, 0.0);
    let psi = if dir > 0.0 { 0.0 } else { std::f64::consts::PI };
    let history = (0..HISTORY)
        .map(|i| {
            let t = (i as f64 - (HISTORY - 1) as f64) * 0.1;
            [x0 + vel.x * t, lane_y, speed, psi, t]
        })
        .collect();
    let lane = (0..10)
        .map(|i| {
            let x = -45.0 + 10.0 * i as f64;
            [x, lane_y, x + 10.0, lane_y, 0.0]
        })
        .collect();
    let observation = PolylineBatch {
        polylines: vec![
            Polyline { kind: PolylineKind::Lane, nodes: lane, valid: true },
            Polyline { kind: PolylineKind::Agent, nodes: history, valid: true },
        ],
    };
    let offsets = (1..=PREDICTION_HORIZON).map(|k| [vel.x * k as f64 * 0.1, 0.0]).collect();
    PredictorSample { observation, target: 1, offsets }
}

fn targets_of(samples: &[&PredictorSample]) -> Vec<f64> {
    samples.iter().flat_map(|s| s.offsets.iter().flat_map(|o| [o[0] / OFFSET_SCALE, o[1] / OFFSET_SCALE])).collect()
}

fn ade(params: &PredictorParams, samples: &[PredictorSample]) -> f64 {
    let refs: Vec<&PredictorSample> = samples.iter().collect();
    let (input, targets) = sample_input(&refs);
    let cache = params.forward(&input, &targets);
    let mut total = 0.0;
    for (b, s) in samples.iter().enumerate() {
        let pred = cache.offsets(b);
        total += pred.iter().zip(&s.offsets).map(|(p, o)| p.distance(Vec2::new(o[0], o[1]))).sum::<f64>() / pred.len() as f64;
    }
    total / samples.len() as f64
}

#[test]
fn trained_predictor_tracks_constant_velocity_within_twenty_centimeters() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let train: Vec<PredictorSample> = (0..2000).map(|_| straight_sample(&mut rng)).collect();
    let test: Vec<PredictorSample> = (0..300).map(|_| straight_sample(&mut rng)).collect();
    let mut params = PredictorParams::init(32, &mut rng);
    let mut opt = Adam::new(AdamConfig::with_lr(2e-3), &params);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let before = ade(&params, &test);
    for _ in 0..60 {
        order.shuffle(&mut rng);
        for chunk in order.chunks(64) {
            let batch: Vec<&PredictorSample> = chunk.iter().map(|&i| &train[i]).collect();
            let (input, targets) = sample_input(&batch);
            let cache = params.forward(&input, &targets);
            let (_, g) = mse(cache.out.data(), &targets_of(&batch));
            let d_out = Tensor2::from_vec(cache.out.rows(), cache.out.cols(), g).unwrap();
            let mut grads = params.backward(&input, &targets, &cache, &d_out);
            clip_global_norm(&mut grads, 1.0);
            opt.step(&mut params, &grads).unwrap();
        }
    }
    // the constant-velocity oracle is exact on this data, so its ADE is 0
    let after = ade(&params, &test);
    assert!(after < 0.2, "ADE {after:.3} m (untrained {before:.3} m)");
}
