use occsim_core::obs::{scale_node, Polyline, PolylineBatch, PolylineKind, MAX_NODES};
use occsim_net::{EncoderInput, EncoderParams, Params, PolicyParams, Tensor2};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_batch<R: Rng>(rng: &mut R, polylines: usize) -> PolylineBatch {
    let kinds = [PolylineKind::VisibleRegion, PolylineKind::Lane, PolylineKind::Agent];
    PolylineBatch {
        polylines: (0..polylines)
            .map(|_| Polyline {
                kind: kinds[rng.random_range(0..3)],
                nodes: (0..rng.random_range(1..=8))
                    .map(|_| [rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), rng.random_range(0.0..15.0), rng.random_range(-3.0..3.0), 0.0])
                    .collect(),
                valid: true,
            })
            .collect(),
    }
}

#[test]
fn permuting_polylines_permutes_features_and_keeps_the_global_feature() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let p = EncoderParams::init(16, &mut rng);
        let batch = random_batch(&mut rng, 6);
        let mut order: Vec<usize> = (0..6).collect();
        order.shuffle(&mut rng);
        let shuffled = PolylineBatch { polylines: order.iter().map(|&i| batch.polylines[i].clone()).collect() };
        let a = p.forward(&EncoderInput::from_batches(&[&batch]));
        let b = p.forward(&EncoderInput::from_batches(&[&shuffled]));
        for c in 0..16 {
            assert!((a.global.get(0, c) - b.global.get(0, c)).abs() < 1e-6);
        }
        for (new, &old) in order.iter().enumerate() {
            for c in 0..16 {
                assert!((a.out.get(old, c) - b.out.get(new, c)).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn masked_duplicate_polyline_leaves_output_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let p = EncoderParams::init(16, &mut rng);
        let batch = random_batch(&mut rng, 4);
        let mut dup = batch.clone();
        let mut copy = batch.polylines[rng.random_range(0..4)].clone();
        copy.valid = false;
        dup.polylines.insert(rng.random_range(0..5), copy);
        let a = p.forward(&EncoderInput::from_batches(&[&batch]));
        let b = p.forward(&EncoderInput::from_batches(&[&dup]));
        assert_eq!(a.global, b.global);
    }
}

#[test]
fn padded_entries_never_influence_outputs_or_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = PolicyParams::init(16, &mut rng);
    let mut batch = random_batch(&mut rng, 5);
    batch.polylines[2].valid = false;
    let clean = batch.padded();
    let mut noisy = clean.clone();
    for i in 0..noisy.features.len() {
        for j in 0..MAX_NODES {
            if !noisy.node_mask[i][j] || !noisy.polyline_mask[i] {
                noisy.features[i][j] = std::array::from_fn(|_| rng.random_range(-1e3..1e3));
            }
        }
    }
    let reference = EncoderInput::from_batches(&[&batch]);
    let a_in = EncoderInput::from_padded(&[&clean]);
    let b_in = EncoderInput::from_padded(&[&noisy]);
    assert_eq!(a_in, reference);
    assert_eq!(a_in, b_in);
    let a = p.forward(&b_in);
    let dv = [1.0];
    let ga = p.backward(&b_in, &a, Some(&Tensor2::from_vec(1, 2, vec![0.3, -0.2]).unwrap()), [0.1, 0.1], Some(&dv));
    let b = p.forward(&reference);
    let gb = p.backward(&reference, &b, Some(&Tensor2::from_vec(1, 2, vec![0.3, -0.2]).unwrap()), [0.1, 0.1], Some(&dv));
    assert_eq!(a.values, b.values);
    assert_eq!(ga, gb);
}

#[test]
fn masked_node_rows_receive_exactly_zero_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = EncoderParams::init(8, &mut rng);
    let mut batch = random_batch(&mut rng, 3);
    batch.polylines[1].valid = false;
    let input = EncoderInput::from_batches(&[&batch]);
    let c = p.forward(&input);
    let mut g = p.zeros_like();
    let dx = p.backward(&input, &c, &Tensor2::from_fn(1, 8, |_, j| j as f64 - 3.0), None, &mut g);
    // masked rows are absent from the input, so no gradient can reach them
    let valid: usize = [0, 2].iter().map(|&i| batch.polylines[i].nodes.len()).sum();
    assert_eq!(dx.rows(), valid);
}

/// Direct re-implementation of the critic path with nested loops.
fn oracle_value(p: &PolicyParams, batch: &PolylineBatch) -> f64 {
    let h = p.hidden();
    let lin = |x: &[f64], w: &Tensor2, b: &Tensor2, relu: bool| -> Vec<f64> {
        (0..w.cols())
            .map(|j| {
                let z = b.get(0, j) + (0..w.rows()).map(|i| x[i] * w.get(i, j)).sum::<f64>();
                if relu { z.max(0.0) } else { z }
            })
            .collect()
    };
    let mut feats = Vec::new();
    for pl in batch.polylines.iter().filter(|p| p.valid) {
        let mut pooled = vec![f64::NEG_INFINITY; h];
        for n in &pl.nodes {
            let mut x = scale_node(pl.kind, n).to_vec();
            x.extend((0..PolylineKind::COUNT).map(|k| (k == pl.kind.index()) as u8 as f64));
            let h1 = lin(&x, &p.encoder.node1.w, &p.encoder.node1.b, true);
            let h2 = lin(&h1, &p.encoder.node2.w, &p.encoder.node2.b, true);
            pooled.iter_mut().zip(h2).for_each(|(a, b)| *a = a.max(b));
        }
        feats.push(pooled);
    }
    let zero = Tensor2::zeros(1, h);
    let q: Vec<Vec<f64>> = feats.iter().map(|f| lin(f, &p.encoder.wq, &zero, false)).collect();
    let k: Vec<Vec<f64>> = feats.iter().map(|f| lin(f, &p.encoder.wk, &zero, false)).collect();
    let v: Vec<Vec<f64>> = feats.iter().map(|f| lin(f, &p.encoder.wv, &zero, false)).collect();
    let mut global = vec![0.0; h];
    for qi in &q {
        let s: Vec<f64> = k.iter().map(|kj| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / (h as f64).sqrt()).collect();
        let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|x| (x - m).exp()).collect();
        let z: f64 = e.iter().sum();
        for (w, vj) in e.iter().zip(&v) {
            for c in 0..h {
                global[c] += w / z * vj[c] / feats.len() as f64;
            }
        }
    }
    let hidden = lin(&global, &p.critic1.w, &p.critic1.b, true);
    lin(&hidden, &p.critic2.w, &p.critic2.b, false)[0]
}

#[test]
fn critic_matches_an_independent_forward_on_ten_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let p = PolicyParams::init(16, &mut rng);
        let n = rng.random_range(1..=8);
        let batch = random_batch(&mut rng, n);
        let got = p.forward_batches(&[&batch]).values[0];
        let want = oracle_value(&p, &batch);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

proptest! {
    #[test]
    fn attention_weights_sum_to_one_over_valid_keys(seed in 0u64..10_000, n in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = EncoderParams::init(8, &mut rng);
        let mut batch = random_batch(&mut rng, n);
        if n > 1 {
            batch.polylines[0].valid = false;
        }
        let input = EncoderInput::from_batches(&[&batch]);
        let c = p.forward(&input);
        let rows = c.attention_rows(&input, 0);
        prop_assert_eq!(rows.len(), batch.count(PolylineKind::VisibleRegion) + batch.count(PolylineKind::Lane) + batch.count(PolylineKind::Agent));
        for row in rows {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(row.iter().all(|&w| w >= 0.0));
        }
    }
}
