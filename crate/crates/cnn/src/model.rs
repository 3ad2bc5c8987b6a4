//! The network: conv1 (5x5, stride 4) -> ReLU -> max pool 2x2 -> conv2 (5x5)
//! -> ReLU -> fc1 -> ReLU -> dropout -> fc2 -> sigmoid.
//!
//! Tensors are row-major HWC per example, stacked along the batch. Conv
//! weights are HWIO, i.e. a (kh*kw*cin) x cout matrix against im2col rows.
//! Fc weights are stored [in][out].

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arch::{expected_param_count, Arch, Layer, CONV1_STRIDE, IN_CHANNELS, KERNEL, POOL};
use crate::error::{Error, Result};
use crate::scalar::{gemm, Mat, Scalar};

pub const BCE_EPS: f64 = 1e-7;
pub const DROPOUT_RATE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub w: Vec<T>,
    pub b: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub layers: [LayerParams<T>; 4],
}

impl<T: Scalar> Params<T> {
    pub fn zeros(arch: &Arch) -> Self {
        let mk = |l: Layer| {
            let (w, b) = arch.layer_sizes(l);
            LayerParams {
                w: vec![T::zero(); w],
                b: vec![T::zero(); b],
            }
        };
        Params {
            layers: Layer::ALL.map(mk),
        }
    }

    pub fn layer(&self, l: Layer) -> &LayerParams<T> {
        &self.layers[l as usize]
    }

    pub fn layer_mut(&mut self, l: Layer) -> &mut LayerParams<T> {
        &mut self.layers[l as usize]
    }

    /// All tensors in file order: w1, b1, w2, b2, w3, b3, w4, b4.
    pub fn tensors(&self) -> impl Iterator<Item = &[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.w.as_slice(), l.b.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<T>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b])
    }

    pub fn count(&self) -> usize {
        self.tensors().map(|t| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        let conv = |v: &Vec<T>| v.iter().map(|x| U::from_f64(x.as_f64())).collect();
        Params {
            layers: std::array::from_fn(|i| LayerParams {
                w: conv(&self.layers[i].w),
                b: conv(&self.layers[i].b),
            }),
        }
    }

    /// self -= lr * grad
    pub fn sgd_step(&mut self, grad: &Params<T>, lr: T) {
        for (p, g) in self.tensors_mut().zip(grad.tensors()) {
            for (pi, gi) in p.iter_mut().zip(g) {
                *pi = *pi - lr * *gi;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub arch: Arch,
    pub qp: u8,
    pub params: Params<T>,
}

pub type CnnModel = Model<f32>;

/// Per-batch intermediate values kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Activations<T> {
    pub batch: usize,
    cols1: Vec<T>,
    z1: Vec<T>,
    a1: Vec<T>,
    pooled: Vec<T>,
    argmax: Vec<u32>,
    cols2: Vec<T>,
    z2: Vec<T>,
    a2: Vec<T>,
    z3: Vec<T>,
    mask: Option<Vec<T>>,
    a3: Vec<T>,
    z4: Vec<T>,
    pub probs: Vec<T>,
}

impl<T: Scalar> Activations<T> {
    pub fn fc1_output(&self) -> &[T] {
        &self.a3
    }

    pub fn dropout_mask(&self) -> Option<&[T]> {
        self.mask.as_deref()
    }

    /// Hash of the ReLU on/off states and pooling choices of every stage
    /// from `layer` on. Equal hashes mean the same piecewise-linear branch.
    pub fn pattern_hash(&self, layer: Layer) -> u64 {
        let mut h = DefaultHasher::new();
        let mut stages: Vec<&[T]> = Vec::new();
        if layer == Layer::Conv1 {
            stages.push(&self.z1);
            self.argmax.hash(&mut h);
        }
        if matches!(layer, Layer::Conv1 | Layer::Conv2) {
            stages.push(&self.z2);
        }
        if layer != Layer::Fc2 {
            stages.push(&self.z3);
        }
        for z in stages {
            for chunk in z.chunks(64) {
                let mut bits = 0u64;
                for (i, &v) in chunk.iter().enumerate() {
                    bits |= ((v > T::zero()) as u64) << i;
                }
                bits.hash(&mut h);
            }
        }
        h.finish()
    }
}

pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Binary cross-entropy with p clamped to [eps, 1 - eps].
pub fn bce<T: Scalar>(p: T, label: u8) -> T {
    let eps = T::from_f64(BCE_EPS);
    let p = p.max(eps).min(T::one() - eps);
    if label != 0 {
        -p.ln()
    } else {
        -(T::one() - p).ln()
    }
}

pub fn mean_bce<T: Scalar>(probs: &[T], labels: &[u8]) -> T {
    let s = probs
        .iter()
        .zip(labels)
        .fold(T::zero(), |acc, (&p, &y)| acc + bce(p, y));
    s / T::from_f64(probs.len() as f64)
}

/// Face when p >= threshold.
pub fn is_face(p: f64, threshold: f64) -> bool {
    p >= threshold
}

fn add_bias<T: Scalar>(z: &mut [T], b: &[T]) {
    for row in z.chunks_exact_mut(b.len()) {
        for (v, &bi) in row.iter_mut().zip(b) {
            *v = *v + bi;
        }
    }
}

fn relu_into<T: Scalar>(z: &[T], a: &mut Vec<T>) {
    a.clear();
    a.extend(z.iter().map(|&v| v.max(T::zero())));
}

fn column_sums<T: Scalar>(m: &[T], cols: usize, out: &mut [T]) {
    out.fill(T::zero());
    for row in m.chunks_exact(cols) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o = *o + v;
        }
    }
}

fn relu_grad<T: Scalar>(d: &mut [T], z: &[T]) {
    for (g, &v) in d.iter_mut().zip(z) {
        if v <= T::zero() {
            *g = T::zero();
        }
    }
}

impl<T: Scalar> Model<T> {
    /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and
    /// biases, drawn layer by layer from one seeded stream.
    pub fn init(arch: Arch, qp: u8, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Params::zeros(&arch);
        for l in Layer::ALL {
            let s = 1.0 / (arch.fan_in(l) as f64).sqrt();
            let lp = params.layer_mut(l);
            for v in lp.w.iter_mut().chain(lp.b.iter_mut()) {
                *v = T::from_f64(rng.random_range(-s..s));
            }
        }
        let m = Model { arch, qp, params };
        if arch.is_published() {
            assert_eq!(
                Some(m.param_count()),
                expected_param_count(arch.input),
                "architecture does not reproduce the published parameter count"
            );
        }
        m
    }

    /// The published architecture for a 64 or 128 input.
    pub fn published(input: usize, qp: u8, seed: u64) -> Result<Self> {
        Ok(Self::init(Arch::published(input)?, qp, seed))
    }

    pub fn zeros(arch: Arch, qp: u8) -> Self {
        Model {
            arch,
            qp,
            params: Params::zeros(&arch),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            arch: self.arch,
            qp: self.qp,
            params: self.params.cast(),
        }
    }

    fn check_input(&self, x: &[T]) -> Result<usize> {
        let n = self.arch.input_len();
        if x.is_empty() || x.len() % n != 0 {
            return Err(Error::ShapeMismatch(format!(
                "input of {} values is not a whole number of {}x{}x{} images",
                x.len(),
                self.arch.input,
                self.arch.input,
                IN_CHANNELS
            )));
        }
        Ok(x.len() / n)
    }

    /// Forward pass over a batch of HWC images. Dropout on fc1 is applied
    /// only when an rng and rate are given.
    pub fn forward(
        &self,
        x: &[T],
        dropout: Option<(&mut ChaCha8Rng, f64)>,
    ) -> Result<Activations<T>> {
        let batch = self.check_input(x)?;
        let mut acts = Activations {
            batch,
            ..Default::default()
        };
        self.im2col1(x, &mut acts);
        if let Some((rng, rate)) = dropout {
            acts.mask = Some(self.draw_mask(batch, rng, rate));
        }
        self.forward_from(Layer::Conv1, &mut acts);
        Ok(acts)
    }

    /// Eval-mode probabilities for a batch.
    pub fn predict_proba(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.forward(x, None)?.probs)
    }

    fn draw_mask(&self, batch: usize, rng: &mut ChaCha8Rng, rate: f64) -> Vec<T> {
        let keep = 1.0 - rate;
        let scale = T::from_f64(1.0 / keep);
        (0..batch * self.arch.fc_units)
            .map(|_| {
                if rng.random::<f64>() < keep {
                    scale
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    fn im2col1(&self, x: &[T], acts: &mut Activations<T>) {
        let a = &self.arch;
        let (s, o, k) = (a.input, a.conv1_out(), a.k1());
        acts.cols1.clear();
        acts.cols1.reserve(acts.batch * o * o * k);
        for img in x.chunks_exact(a.input_len()) {
            for oy in 0..o {
                for ox in 0..o {
                    for ky in 0..KERNEL {
                        let y = oy * CONV1_STRIDE + ky;
                        let start = (y * s + ox * CONV1_STRIDE) * IN_CHANNELS;
                        acts.cols1
                            .extend_from_slice(&img[start..start + KERNEL * IN_CHANNELS]);
                    }
                }
            }
        }
    }

    /// Recomputes every stage from `layer` on, reusing the cached inputs
    /// of earlier stages and any dropout mask already drawn.
    pub fn forward_from(&self, layer: Layer, acts: &mut Activations<T>) {
        let a = &self.arch;
        let bsz = acts.batch;
        let p = &self.params;
        if layer == Layer::Conv1 {
            let rows = bsz * a.conv1_out() * a.conv1_out();
            let lp = p.layer(Layer::Conv1);
            acts.z1.resize(rows * a.filters1, T::zero());
            gemm(
                Mat::new(&acts.cols1, rows, a.k1()),
                Mat::new(&lp.w, a.k1(), a.filters1),
                &mut acts.z1,
                false,
            );
            add_bias(&mut acts.z1, &lp.b);
            relu_into(&acts.z1, &mut acts.a1);
            self.pool(acts);
            self.im2col2(acts);
        }
        if matches!(layer, Layer::Conv1 | Layer::Conv2) {
            let rows = bsz * a.conv2_out() * a.conv2_out();
            let lp = p.layer(Layer::Conv2);
            acts.z2.resize(rows * a.filters2, T::zero());
            gemm(
                Mat::new(&acts.cols2, rows, a.k2()),
                Mat::new(&lp.w, a.k2(), a.filters2),
                &mut acts.z2,
                false,
            );
            add_bias(&mut acts.z2, &lp.b);
            // rows of one example are contiguous, so this is already the
            // flattened HWC fc1 input
            relu_into(&acts.z2, &mut acts.a2);
        }
        if layer != Layer::Fc2 {
            let lp = p.layer(Layer::Fc1);
            acts.z3.resize(bsz * a.fc_units, T::zero());
            gemm(
                Mat::new(&acts.a2, bsz, a.flat()),
                Mat::new(&lp.w, a.flat(), a.fc_units),
                &mut acts.z3,
                false,
            );
            add_bias(&mut acts.z3, &lp.b);
            relu_into(&acts.z3, &mut acts.a3);
            if let Some(mask) = &acts.mask {
                for (v, &m) in acts.a3.iter_mut().zip(mask) {
                    *v = *v * m;
                }
            }
        }
        let lp = p.layer(Layer::Fc2);
        acts.z4.resize(bsz, T::zero());
        gemm(
            Mat::new(&acts.a3, bsz, a.fc_units),
            Mat::new(&lp.w, a.fc_units, 1),
            &mut acts.z4,
            false,
        );
        add_bias(&mut acts.z4, &lp.b);
        acts.probs.clear();
        acts.probs.extend(acts.z4.iter().map(|&z| sigmoid(z)));
    }

    fn pool(&self, acts: &mut Activations<T>) {
        let a = &self.arch;
        let (c, po, f) = (a.conv1_out(), a.pool_out(), a.filters1);
        acts.pooled.clear();
        acts.argmax.clear();
        for b in 0..acts.batch {
            let base = b * c * c * f;
            for py in 0..po {
                for px in 0..po {
                    for ch in 0..f {
                        let mut best = base + ((py * POOL) * c + px * POOL) * f + ch;
                        for dy in 0..POOL {
                            for dx in 0..POOL {
                                let i = base + ((py * POOL + dy) * c + px * POOL + dx) * f + ch;
                                if acts.a1[i] > acts.a1[best] {
                                    best = i;
                                }
                            }
                        }
                        acts.pooled.push(acts.a1[best]);
                        acts.argmax.push(best as u32);
                    }
                }
            }
        }
    }

    fn im2col2(&self, acts: &mut Activations<T>) {
        let a = &self.arch;
        let (p, o, f) = (a.pool_out(), a.conv2_out(), a.filters1);
        acts.cols2.clear();
        acts.cols2.reserve(acts.batch * o * o * a.k2());
        for img in acts.pooled.chunks_exact(p * p * f) {
            for oy in 0..o {
                for ox in 0..o {
                    for ky in 0..KERNEL {
                        let start = ((oy + ky) * p + ox) * f;
                        acts.cols2
                            .extend_from_slice(&img[start..start + KERNEL * f]);
                    }
                }
            }
        }
    }

    /// Gradient of the batch-mean BCE loss w.r.t. every parameter, using the
    /// activations (and dropout mask) of a previous forward pass.
    pub fn backward(&self, acts: &Activations<T>, labels: &[u8]) -> Result<Params<T>> {
        let a = &self.arch;
        let bsz = acts.batch;
        if labels.len() != bsz {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for a batch of {bsz}",
                labels.len()
            )));
        }
        let mut g = Params::zeros(a);
        let p = &self.params;
        let inv_b = T::from_f64(1.0 / bsz as f64);

        // d loss / d logit = p - y
        let dz4: Vec<T> = acts
            .probs
            .iter()
            .zip(labels)
            .map(|(&pr, &y)| (pr - if y != 0 { T::one() } else { T::zero() }) * inv_b)
            .collect();
        {
            let gl = g.layer_mut(Layer::Fc2);
            gemm(
                Mat::new(&acts.a3, bsz, a.fc_units).t(),
                Mat::new(&dz4, bsz, 1),
                &mut gl.w,
                false,
            );
            gl.b[0] = dz4.iter().fold(T::zero(), |s, &v| s + v);
        }

        let mut dz3 = vec![T::zero(); bsz * a.fc_units];
        gemm(
            Mat::new(&dz4, bsz, 1),
            Mat::new(&p.layer(Layer::Fc2).w, a.fc_units, 1).t(),
            &mut dz3,
            false,
        );
        if let Some(mask) = &acts.mask {
            for (d, &m) in dz3.iter_mut().zip(mask) {
                *d = *d * m;
            }
        }
        relu_grad(&mut dz3, &acts.z3);
        {
            let gl = g.layer_mut(Layer::Fc1);
            gemm(
                Mat::new(&acts.a2, bsz, a.flat()).t(),
                Mat::new(&dz3, bsz, a.fc_units),
                &mut gl.w,
                false,
            );
            column_sums(&dz3, a.fc_units, &mut gl.b);
        }

        let mut dz2 = vec![T::zero(); bsz * a.flat()];
        gemm(
            Mat::new(&dz3, bsz, a.fc_units),
            Mat::new(&p.layer(Layer::Fc1).w, a.flat(), a.fc_units).t(),
            &mut dz2,
            false,
        );
        relu_grad(&mut dz2, &acts.z2);
        let rows2 = bsz * a.conv2_out() * a.conv2_out();
        {
            let gl = g.layer_mut(Layer::Conv2);
            gemm(
                Mat::new(&acts.cols2, rows2, a.k2()).t(),
                Mat::new(&dz2, rows2, a.filters2),
                &mut gl.w,
                false,
            );
            column_sums(&dz2, a.filters2, &mut gl.b);
        }

        let mut dcols2 = vec![T::zero(); rows2 * a.k2()];
        gemm(
            Mat::new(&dz2, rows2, a.filters2),
            Mat::new(&p.layer(Layer::Conv2).w, a.k2(), a.filters2).t(),
            &mut dcols2,
            false,
        );
        let dpooled = self.col2im2(&dcols2, bsz);

        let mut dz1 = vec![T::zero(); acts.z1.len()];
        for (&d, &i) in dpooled.iter().zip(&acts.argmax) {
            dz1[i as usize] = dz1[i as usize] + d;
        }
        relu_grad(&mut dz1, &acts.z1);
        let rows1 = bsz * a.conv1_out() * a.conv1_out();
        {
            let gl = g.layer_mut(Layer::Conv1);
            gemm(
                Mat::new(&acts.cols1, rows1, a.k1()).t(),
                Mat::new(&dz1, rows1, a.filters1),
                &mut gl.w,
                false,
            );
            column_sums(&dz1, a.filters1, &mut gl.b);
        }
        Ok(g)
    }

    fn col2im2(&self, dcols: &[T], bsz: usize) -> Vec<T> {
        let a = &self.arch;
        let (p, o, f) = (a.pool_out(), a.conv2_out(), a.filters1);
        let mut out = vec![T::zero(); bsz * p * p * f];
        let mut rows = dcols.chunks_exact(a.k2());
        for b in 0..bsz {
            let img = &mut out[b * p * p * f..(b + 1) * p * p * f];
            for oy in 0..o {
                for ox in 0..o {
                    let row = rows.next().unwrap();
                    for ky in 0..KERNEL {
                        let start = ((oy + ky) * p + ox) * f;
                        let src = &row[ky * KERNEL * f..(ky + 1) * KERNEL * f];
                        for (d, &s) in img[start..start + KERNEL * f].iter_mut().zip(src) {
                            *d = *d + s;
                        }
                    }
                }
            }
        }
        out
    }

    /// Mean loss and gradient of one batch.
    pub fn loss_and_grad(
        &self,
        x: &[T],
        labels: &[u8],
        dropout: Option<(&mut ChaCha8Rng, f64)>,
    ) -> Result<(T, Params<T>)> {
        let acts = self.forward(x, dropout)?;
        let g = self.backward(&acts, labels)?;
        Ok((mean_bce(&acts.probs, labels), g))
    }
}

/// Bytes in [0, 255] to reals in [0, 1].
pub fn scale_input<T: Scalar>(bytes: &[u8]) -> Vec<T> {
    let k = T::from_f64(1.0 / 255.0);
    bytes.iter().map(|&b| T::from_f64(b as f64) * k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Arch {
        Arch::shrunken(64).unwrap()
    }

    fn input(arch: &Arch, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * arch.input_len()).map(|_| rng.random()).collect()
    }

    #[test]
    fn zero_model_outputs_half() {
        let m: Model<f64> = Model::zeros(tiny(), 32);
        let p = m.predict_proba(&input(&m.arch, 3, 1)).unwrap();
        assert_eq!(p, vec![0.5; 3]);
    }

    #[test]
    fn bce_values() {
        assert!((bce(0.5f64, 0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce(0.5f64, 1) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce(1.0 - BCE_EPS, 1) < 1e-6);
        assert!(bce(1.0f64, 0).is_finite());
    }

    #[test]
    fn shape_mismatch() {
        let m: Model<f32> = Model::zeros(tiny(), 32);
        assert!(matches!(
            m.forward(&[0.0; 10], None),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(m.forward(&[], None).is_err());
    }

    #[test]
    fn zero_weights_leave_only_bias_paths() {
        let arch = tiny();
        let m: Model<f64> = Model::zeros(arch, 32);
        let (_, g) = m.loss_and_grad(&input(&arch, 2, 3), &[1, 0], None).unwrap();
        for l in [Layer::Conv1, Layer::Conv2, Layer::Fc1] {
            assert!(g.layer(l).w.iter().all(|&v| v == 0.0));
            assert!(g.layer(l).b.iter().all(|&v| v == 0.0));
        }
        assert!(g.layer(Layer::Fc2).w.iter().all(|&v| v == 0.0));
        // (0.5 - 1 + 0.5 - 0) / 2
        assert_eq!(g.layer(Layer::Fc2).b[0], 0.0);
        let (_, g) = m.loss_and_grad(&input(&arch, 1, 3), &[1], None).unwrap();
        assert_eq!(g.layer(Layer::Fc2).b[0], -0.5);
    }

    #[test]
    fn batch_gradient_is_mean_of_singles() {
        let arch = tiny();
        let m: Model<f64> = Model::init(arch, 32, 7);
        let x = input(&arch, 3, 4);
        let labels = [1, 0, 1];
        let (_, gb) = m.loss_and_grad(&x, &labels, None).unwrap();
        let mut sum = Params::zeros(&arch);
        for (i, img) in x.chunks_exact(arch.input_len()).enumerate() {
            let (_, g) = m.loss_and_grad(img, &labels[i..i + 1], None).unwrap();
            for (s, t) in sum.tensors_mut().zip(g.tensors()) {
                for (a, &b) in s.iter_mut().zip(t) {
                    *a += b / 3.0;
                }
            }
        }
        for (a, b) in gb.tensors().zip(sum.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn dropped_unit_gets_no_outgoing_gradient() {
        let arch = tiny();
        let m: Model<f64> = Model::init(arch, 32, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let acts = m
            .forward(&input(&arch, 1, 2), Some((&mut rng, DROPOUT_RATE)))
            .unwrap();
        let g = m.backward(&acts, &[1]).unwrap();
        let mask = acts.dropout_mask().unwrap();
        let dropped: Vec<usize> = (0..arch.fc_units).filter(|&u| mask[u] == 0.0).collect();
        assert!(!dropped.is_empty());
        for u in dropped {
            assert_eq!(g.layer(Layer::Fc2).w[u], 0.0);
            assert_eq!(acts.fc1_output()[u], 0.0);
        }
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let arch = Arch::with_widths(64, 1, 1, 50_000).unwrap();
        let m: Model<f64> = Model::zeros(arch, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mask = m.draw_mask(4, &mut rng, DROPOUT_RATE);
        let mean = mask.iter().sum::<f64>() / mask.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean mask {mean}");
    }

    #[test]
    fn eval_forward_is_pure() {
        let arch = tiny();
        let m: Model<f32> = Model::init(arch, 32, 1);
        let x: Vec<f32> = input(&arch, 2, 6).iter().map(|&v| v as f32).collect();
        let a = m.predict_proba(&x).unwrap();
        let b = m.predict_proba(&x).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn init_is_seeded() {
        let arch = tiny();
        let a: Model<f32> = Model::init(arch, 32, 1);
        let b: Model<f32> = Model::init(arch, 32, 1);
        let c: Model<f32> = Model::init(arch, 32, 2);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let s = 1.0 / (arch.k1() as f32).sqrt();
        assert!(a.params.layer(Layer::Conv1).w.iter().all(|v| v.abs() <= s));
    }

    #[test]
    fn tie_counts_as_face() {
        assert!(is_face(0.7, 0.5));
        assert!(is_face(0.5, 0.5));
        assert!(!is_face(0.3, 0.5));
    }
}
