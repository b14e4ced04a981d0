//! Short-horizon motion predictor sharing the policy's encoder design.

use crate::encoder::{EncoderCache, EncoderInput, EncoderParams};
use crate::{Linear, Params, Tensor2};
use occsim_core::geom2d::Vec2;
use occsim_core::obs::{observe, ObsConfig, PolylineBatch, PolylineKind};
use occsim_core::safety::{ConstantVelocity, TrajectoryPredictor};
use occsim_core::world::WorldState;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Predicted steps at 0.1 s.
pub const PREDICTION_HORIZON: usize = 20;
/// Meters per unit of network output.
pub const OFFSET_SCALE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorParams {
    pub encoder: EncoderParams,
    /// Input: global feature then the target polyline's feature.
    pub head1: Linear,
    pub head2: Linear,
}

#[derive(Debug, Clone)]
pub struct PredictorCache {
    pub encoder: EncoderCache,
    pub joined: Tensor2,
    pub hidden: Tensor2,
    /// `B x 2K`, scaled offsets.
    pub out: Tensor2,
}

impl PredictorCache {
    /// Offsets of row `b` in meters, ego-frame axes, relative to the
    /// agent's current position.
    pub fn offsets(&self, b: usize) -> Vec<Vec2> {
        let r = self.out.row(b);
        (0..PREDICTION_HORIZON).map(|k| Vec2::new(r[2 * k], r[2 * k + 1]) * OFFSET_SCALE).collect()
    }
}

impl PredictorParams {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            encoder: EncoderParams::zeros(hidden),
            head1: Linear::zeros(2 * hidden, hidden),
            head2: Linear::zeros(hidden, 2 * PREDICTION_HORIZON),
        }
    }

    pub fn init<R: Rng>(hidden: usize, rng: &mut R) -> Self {
        Self {
            encoder: EncoderParams::init(hidden, rng),
            head1: Linear::init(2 * hidden, hidden, 2f64.sqrt(), rng),
            head2: Linear::init(hidden, 2 * PREDICTION_HORIZON, 0.1, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.encoder.hidden()
    }

    /// `targets[b]` is the global polyline index (into `input.polylines`) of
    /// the predicted agent in observation `b`.
    pub fn forward(&self, input: &EncoderInput, targets: &[usize]) -> PredictorCache {
        let h = self.hidden();
        let encoder = self.encoder.forward(input);
        let joined = Tensor2::from_fn(targets.len(), 2 * h, |b, c| {
            if c < h {
                encoder.global.get(b, c)
            } else {
                encoder.out.get(targets[b], c - h)
            }
        });
        let mut hidden = self.head1.forward(&joined);
        hidden.relu_inplace();
        let out = self.head2.forward(&hidden);
        PredictorCache { encoder, joined, hidden, out }
    }

    pub fn backward(&self, input: &EncoderInput, targets: &[usize], cache: &PredictorCache, d_out: &Tensor2) -> PredictorParams {
        let h = self.hidden();
        let mut grads = self.zeros_like();
        let mut dh = self.head2.backward(&cache.hidden, d_out, &mut grads.head2);
        dh.relu_mask(&cache.hidden);
        let dj = self.head1.backward(&cache.joined, &dh, &mut grads.head1);
        let mut d_global = Tensor2::zeros(targets.len(), h);
        let mut d_poly = Tensor2::zeros(input.polylines.len(), h);
        for (b, &t) in targets.iter().enumerate() {
            for c in 0..h {
                d_global.set(b, c, dj.get(b, c));
                d_poly.set(t, c, d_poly.get(t, c) + dj.get(b, h + c));
            }
        }
        self.encoder.backward(input, &cache.encoder, &d_global, Some(&d_poly), &mut grads.encoder);
        grads
    }
}

impl Params for PredictorParams {
    fn tensors(&self) -> Vec<&Tensor2> {
        let mut v = self.encoder.tensor_refs();
        v.extend([&self.head1.w, &self.head1.b, &self.head2.w, &self.head2.b]);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut v = self.encoder.tensor_refs_mut();
        v.extend([&mut self.head1.w, &mut self.head1.b, &mut self.head2.w, &mut self.head2.b]);
        v
    }

    fn tensor_names(&self) -> Vec<String> {
        let mut v = EncoderParams::names("encoder.");
        v.extend(["head1.w", "head1.b", "head2.w", "head2.b"].map(String::from));
        v
    }
}

/// Position of agent `idx` among the valid polylines of `batch`, found by
/// matching the newest history node against the agent's ego-frame position.
pub fn agent_polyline_index(world: &WorldState, batch: &PolylineBatch, idx: usize) -> Option<usize> {
    let local = world.ego().pose.to_local(world.agents[idx].pose.position);
    batch.valid_polylines().position(|p| {
        p.kind == PolylineKind::Agent
            && p.nodes.last().is_some_and(|n| (n[0] - local.x).abs() < 1e-9 && (n[1] - local.y).abs() < 1e-9)
    })
}

/// One supervised example: an observation, the target agent polyline and
/// its future offsets in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSample {
    pub observation: PolylineBatch,
    /// Index among `observation.valid_polylines()`.
    pub target: usize,
    pub offsets: Vec<[f64; 2]>,
}

/// Builds the encoder input and global target indices for a set of samples.
pub fn sample_input(samples: &[&PredictorSample]) -> (EncoderInput, Vec<usize>) {
    let batches: Vec<&PolylineBatch> = samples.iter().map(|s| &s.observation).collect();
    let input = EncoderInput::from_batches(&batches);
    let targets = samples.iter().zip(&input.observations).map(|(s, r)| r.start + s.target).collect();
    (input, targets)
}

/// Trained predictor used inside the safety check. Agents without a
/// matching polyline fall back to constant velocity.
#[derive(Debug, Clone)]
pub struct LearnedPredictor {
    pub params: PredictorParams,
    pub obs: ObsConfig,
}

impl TrajectoryPredictor for LearnedPredictor {
    fn predict_positions(&self, world: &WorldState, agent_idx: usize, steps: usize) -> Vec<Vec2> {
        let batch = observe(world, &self.obs);
        let Some(target) = agent_polyline_index(world, &batch, agent_idx) else {
            return ConstantVelocity.predict_positions(world, agent_idx, steps);
        };
        let input = EncoderInput::from_batches(&[&batch]);
        let cache = self.params.forward(&input, &[input.observations[0].start + target]);
        let ego = world.ego().pose;
        let now = ego.to_local(world.agents[agent_idx].pose.position);
        let offsets = cache.offsets(0);
        let cv = ConstantVelocity.predict_positions(world, agent_idx, steps);
        (0..steps)
            .map(|k| match offsets.get(k) {
                Some(&d) => ego.to_world(now + d),
                // past the learned horizon, continue at constant velocity
                None => {
                    let last = ego.to_world(now + offsets[PREDICTION_HORIZON - 1]);
                    last + (cv[k] - cv[PREDICTION_HORIZON - 1])
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use occsim_core::obs::Polyline;

    #[test]
    fn zero_weights_predict_zero_offsets_of_full_shape() {
        let p = PredictorParams::zeros(8);
        let batch = PolylineBatch {
            polylines: vec![Polyline { kind: PolylineKind::Agent, nodes: vec![[1.0, 2.0, 3.0, 0.0, 0.0]], valid: true }],
        };
        let input = EncoderInput::from_batches(&[&batch]);
        let c = p.forward(&input, &[0]);
        assert_eq!(c.out.shape(), (1, 2 * PREDICTION_HORIZON));
        assert!(c.offsets(0).iter().all(|o| *o == Vec2::ZERO));
        assert_eq!(c.offsets(0).len(), PREDICTION_HORIZON);
    }
}
