//! Analytic gradients against central finite differences, in f64.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arch::{Arch, Layer};
use crate::error::Result;
use crate::model::{mean_bce, Activations, Model};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Step is `step * max(1, |w|)`.
    pub step: f64,
    pub tolerance: f64,
    /// Weights sampled per layer; `None` checks every weight. Biases are
    /// always all checked.
    pub samples_per_layer: Option<usize>,
    pub batch: usize,
    /// Floor of the relative-error denominator. Central differences of a
    /// loss near 0.7 at h = 1e-5 carry about 1e-11 of rounding noise, so
    /// gradients much below 1e-8 cannot be resolved to 1e-3.
    pub grad_floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-3,
            samples_per_layer: Some(200),
            batch: 2,
            grad_floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mismatch {
    pub layer: Layer,
    pub bias: bool,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCheck {
    pub layer: Layer,
    pub checked: usize,
    /// Parameters skipped because the perturbation flipped a ReLU or a
    /// pooling choice even at a hundredth of the step.
    pub kinks: usize,
    pub max_rel_err: f64,
    pub mismatches: Vec<Mismatch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub arch: Arch,
    pub seed: u64,
    pub layers: Vec<LayerCheck>,
}

impl GradCheckReport {
    pub fn checked(&self) -> usize {
        self.layers.iter().map(|l| l.checked).sum()
    }

    pub fn kinks(&self) -> usize {
        self.layers.iter().map(|l| l.kinks).sum()
    }

    pub fn max_rel_err(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.max_rel_err)
            .fold(0.0, f64::max)
    }

    /// No mismatches, and kink skips stay under 1% of the checked set.
    pub fn passed(&self) -> bool {
        self.layers.iter().all(|l| l.mismatches.is_empty())
            && self.kinks() * 100 < self.checked().max(1)
    }
}

pub fn rel_err(a: f64, n: f64, grad_floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(grad_floor)
}

fn get(m: &Model<f64>, layer: Layer, bias: bool, i: usize) -> f64 {
    let lp = m.params.layer(layer);
    if bias {
        lp.b[i]
    } else {
        lp.w[i]
    }
}

fn set(m: &mut Model<f64>, layer: Layer, bias: bool, i: usize, v: f64) {
    let lp = m.params.layer_mut(layer);
    if bias {
        lp.b[i] = v;
    } else {
        lp.w[i] = v;
    }
}

fn loss_at(
    model: &Model<f64>,
    layer: Layer,
    acts: &mut Activations<f64>,
    labels: &[u8],
) -> (f64, u64) {
    model.forward_from(layer, acts);
    (mean_bce(&acts.probs, labels), acts.pattern_hash(layer))
}

/// Checks a freshly initialized network of shape `arch` on a random batch,
/// dropout off. Everything random derives from `seed`.
pub fn gradcheck(arch: Arch, seed: u64, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut model: Model<f64> = Model::init(arch, 0, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let x: Vec<f64> = (0..cfg.batch * arch.input_len())
        .map(|_| rng.random())
        .collect();
    let labels: Vec<u8> = (0..cfg.batch).map(|i| (i % 2 == 0) as u8).collect();

    let mut acts = model.forward(&x, None)?;
    let grad = model.backward(&acts, &labels)?;

    let mut layers = Vec::new();
    for layer in Layer::ALL {
        let (nw, nb) = arch.layer_sizes(layer);
        let weights: Vec<usize> = match cfg.samples_per_layer {
            Some(k) if k < nw => {
                let mut v = sample(&mut rng, nw, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..nw).collect(),
        };
        let targets = weights
            .into_iter()
            .map(|i| (false, i))
            .chain((0..nb).map(|i| (true, i)));
        let base_hash = acts.pattern_hash(layer);
        let mut check = LayerCheck {
            layer,
            checked: 0,
            kinks: 0,
            max_rel_err: 0.0,
            mismatches: Vec::new(),
        };
        for (bias, index) in targets {
            let analytic = {
                let g = grad.layer(layer);
                if bias {
                    g.b[index]
                } else {
                    g.w[index]
                }
            };
            let orig = get(&model, layer, bias, index);
            let mut h = cfg.step * orig.abs().max(1.0);
            let mut numeric = None;
            for _ in 0..2 {
                set(&mut model, layer, bias, index, orig + h);
                let (lp, hp) = loss_at(&model, layer, &mut acts, &labels);
                set(&mut model, layer, bias, index, orig - h);
                let (lm, hm) = loss_at(&model, layer, &mut acts, &labels);
                set(&mut model, layer, bias, index, orig);
                if hp == base_hash && hm == base_hash {
                    numeric = Some((lp - lm) / (2.0 * h));
                    break;
                }
                h /= 100.0;
            }
            check.checked += 1;
            let Some(numeric) = numeric else {
                check.kinks += 1;
                continue;
            };
            let e = rel_err(analytic, numeric, cfg.grad_floor);
            check.max_rel_err = check.max_rel_err.max(e);
            if e > cfg.tolerance {
                check.mismatches.push(Mismatch {
                    layer,
                    bias,
                    index,
                    analytic,
                    numeric,
                    rel_err: e,
                });
            }
        }
        // leave later stages consistent with the unperturbed weights
        model.forward_from(Layer::Conv1, &mut acts);
        layers.push(check);
    }
    Ok(GradCheckReport { arch, seed, layers })
}
