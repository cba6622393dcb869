//! Affine coupling flows.
//!
//! A [`FlowGenerator`] is a stack of coupling layers. In the generative
//! direction `x = g(z)` each layer keeps one part of its input fixed and
//! transforms the other:
//!
//! ```text
//! out[P] = in[P]
//! out[Q] = in[Q] ⊙ exp(s(in[P])) + t(in[P])
//! ```
//!
//! The normalizing direction `z = f(x)` inverts this layer by layer, and each
//! layer contributes `−Σ_j s_j(in[P])` to `log |det ∂f/∂x|`. Consecutive layers
//! swap the roles of `P` and `Q`, so every coordinate is transformed.
//!
//! `s` and `t` are one-hidden-layer networks with a `tanh` hidden layer;
//! `s` ends in `tanh` (so each layer rescales by at most `e`) and `t` is
//! linear.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::std_normal_log_density;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - out * out,
            Activation::Identity => 1.0,
        }
    }
}

/// Shallow feed-forward map `ℝ^input → ℝ^output` with one `tanh` hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingNet {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub output_activation: Activation,
    /// `hidden × input`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `output × hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

struct NetTrace {
    hidden: Vec<f64>,
    out: Vec<f64>,
}

impl CouplingNet {
    pub fn zeros(input: usize, hidden: usize, output: usize, output_activation: Activation) -> Self {
        Self {
            input,
            hidden,
            output,
            output_activation,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; output * hidden],
            b2: vec![0.0; output],
        }
    }

    /// Hidden layer uniform in `±1/√fan_in`; output layer zero, so the net
    /// starts out returning zero.
    pub fn init<R: Rng + ?Sized>(
        input: usize,
        hidden: usize,
        output: usize,
        output_activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::zeros(input, hidden, output, output_activation);
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        for w in net.w1.iter_mut().chain(net.b1.iter_mut()) {
            *w = rng.random_range(-bound..bound);
        }
        net
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    fn trace(&self, a: &[f64]) -> NetTrace {
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|i| {
                let row = &self.w1[i * self.input..(i + 1) * self.input];
                (self.b1[i] + row.iter().zip(a).map(|(w, x)| w * x).sum::<f64>()).tanh()
            })
            .collect();
        let out = (0..self.output)
            .map(|o| {
                let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
                self.output_activation
                    .apply(self.b2[o] + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>())
            })
            .collect();
        NetTrace { hidden, out }
    }

    pub fn eval(&self, a: &[f64]) -> Vec<f64> {
        self.trace(a).out
    }

    /// Accumulates `∂/∂θ` of `⟨g_out, net(a)⟩` into `grad` and returns the
    /// gradient with respect to `a`.
    fn backprop(&self, a: &[f64], trace: &NetTrace, g_out: &[f64], grad: &mut CouplingNet) -> Vec<f64> {
        let g_pre: Vec<f64> = g_out
            .iter()
            .zip(&trace.out)
            .map(|(g, o)| g * self.output_activation.derivative_from_output(*o))
            .collect();
        let mut g_hidden = vec![0.0; self.hidden];
        for (o, &gp) in g_pre.iter().enumerate() {
            if gp == 0.0 {
                continue;
            }
            grad.b2[o] += gp;
            let row = o * self.hidden..(o + 1) * self.hidden;
            for ((gw, w), (h, gh)) in grad.w2[row.clone()]
                .iter_mut()
                .zip(&self.w2[row])
                .zip(trace.hidden.iter().zip(g_hidden.iter_mut()))
            {
                *gw += gp * h;
                *gh += gp * w;
            }
        }
        let mut g_in = vec![0.0; self.input];
        for (i, (gh, h)) in g_hidden.iter().zip(&trace.hidden).enumerate() {
            let gp = gh * (1.0 - h * h);
            if gp == 0.0 {
                continue;
            }
            grad.b1[i] += gp;
            let row = i * self.input..(i + 1) * self.input;
            for ((gw, w), (x, gi)) in grad.w1[row.clone()]
                .iter_mut()
                .zip(&self.w1[row])
                .zip(a.iter().zip(g_in.iter_mut()))
            {
                *gw += gp * x;
                *gi += gp * w;
            }
        }
        g_in
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }
}

/// Which part of the vector a coupling layer passes through unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    /// Pass-through `[0, split)`, transform `[split, dim)`.
    Lower,
    /// Pass-through `[split, dim)`, transform `[0, split)`.
    Upper,
}

impl Parity {
    pub fn flipped(self) -> Self {
        match self {
            Parity::Lower => Parity::Upper,
            Parity::Upper => Parity::Lower,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingLayer {
    pub dim: usize,
    pub split: usize,
    pub parity: Parity,
    pub scale_net: CouplingNet,
    pub translate_net: CouplingNet,
}

struct LayerTrace {
    pass: Vec<f64>,
    scale: NetTrace,
    translate: NetTrace,
    /// Transformed part after the layer (normalizing direction).
    out_q: Vec<f64>,
}

impl CouplingLayer {
    pub fn pass_range(&self) -> std::ops::Range<usize> {
        match self.parity {
            Parity::Lower => 0..self.split,
            Parity::Upper => self.split..self.dim,
        }
    }

    pub fn transform_range(&self) -> std::ops::Range<usize> {
        match self.parity {
            Parity::Lower => self.split..self.dim,
            Parity::Upper => 0..self.split,
        }
    }

    fn zeros_like(&self) -> Self {
        let z = |n: &CouplingNet| CouplingNet::zeros(n.input, n.hidden, n.output, n.output_activation);
        Self {
            dim: self.dim,
            split: self.split,
            parity: self.parity,
            scale_net: z(&self.scale_net),
            translate_net: z(&self.translate_net),
        }
    }

    /// Normalizing direction, in place. Returns this layer's `log |det|`.
    fn inverse_in_place(&self, h: &mut [f64]) -> f64 {
        let pass = &h[self.pass_range()];
        let s = self.scale_net.eval(pass);
        let t = self.translate_net.eval(pass);
        for ((v, s), t) in h[self.transform_range()].iter_mut().zip(&s).zip(&t) {
            *v = (*v - t) * (-s).exp();
        }
        -s.iter().sum::<f64>()
    }

    fn inverse_traced(&self, h: &mut [f64]) -> (f64, LayerTrace) {
        let pass = h[self.pass_range()].to_vec();
        let scale = self.scale_net.trace(&pass);
        let translate = self.translate_net.trace(&pass);
        let q = &mut h[self.transform_range()];
        for ((v, s), t) in q.iter_mut().zip(&scale.out).zip(&translate.out) {
            *v = (*v - t) * (-s).exp();
        }
        let out_q = q.to_vec();
        let log_det = -scale.out.iter().sum::<f64>();
        (log_det, LayerTrace { pass, scale, translate, out_q })
    }

    /// Generative direction, in place.
    fn forward_in_place(&self, h: &mut [f64]) {
        let pass = &h[self.pass_range()];
        let s = self.scale_net.eval(pass);
        let t = self.translate_net.eval(pass);
        for ((v, s), t) in h[self.transform_range()].iter_mut().zip(&s).zip(&t) {
            *v = *v * s.exp() + t;
        }
    }

    /// Given `g` = ∂ℓ/∂(layer output) and the weight `w` on this layer's
    /// log-determinant, accumulates parameter gradients and overwrites `g`
    /// with ∂ℓ/∂(layer input).
    fn backward(&self, trace: &LayerTrace, g: &mut [f64], w: f64, grad: &mut CouplingLayer) {
        let (pr, qr) = (self.pass_range(), self.transform_range());
        let g_q = g[qr.clone()].to_vec();
        let mut g_s = Vec::with_capacity(g_q.len());
        let mut g_t = Vec::with_capacity(g_q.len());
        for (((gq, s), o), gin) in g_q.iter().zip(&trace.scale.out).zip(&trace.out_q).zip(g[qr].iter_mut()) {
            let g_b = gq * (-s).exp();
            *gin = g_b;
            g_t.push(-g_b);
            g_s.push(-gq * o - w);
        }
        let from_s = self.scale_net.backprop(&trace.pass, &trace.scale, &g_s, &mut grad.scale_net);
        let from_t = self.translate_net.backprop(&trace.pass, &trace.translate, &g_t, &mut grad.translate_net);
        for ((gp, a), b) in g[pr].iter_mut().zip(&from_s).zip(&from_t) {
            *gp += a + b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowArchitecture {
    pub dim: usize,
    /// Each block is two coupling layers with opposite parity.
    pub blocks: usize,
    pub hidden: usize,
}

impl FlowArchitecture {
    /// Pass-through size of a `Lower` layer: `⌊D/2⌋`.
    pub fn split(&self) -> usize {
        self.dim / 2
    }

    pub fn num_layers(&self) -> usize {
        2 * self.blocks
    }
}

/// An invertible coupling stack. `layers[0]` is closest to the latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowGenerator {
    pub dim: usize,
    pub layers: Vec<CouplingLayer>,
}

impl FlowGenerator {
    /// Random hidden layers, zero output layers: starts as the identity map.
    pub fn new<R: Rng + ?Sized>(arch: FlowArchitecture, rng: &mut R) -> Self {
        Self::build(arch, |i, h, o, act| CouplingNet::init(i, h, o, act, rng))
    }

    /// All parameters zero (the identity map).
    pub fn identity(arch: FlowArchitecture) -> Self {
        Self::build(arch, CouplingNet::zeros)
    }

    fn build(arch: FlowArchitecture, mut make: impl FnMut(usize, usize, usize, Activation) -> CouplingNet) -> Self {
        let split = arch.split();
        let mut parity = Parity::Lower;
        let layers = (0..arch.num_layers())
            .map(|_| {
                let (p, q) = match parity {
                    Parity::Lower => (split, arch.dim - split),
                    Parity::Upper => (arch.dim - split, split),
                };
                let layer = CouplingLayer {
                    dim: arch.dim,
                    split,
                    parity,
                    scale_net: make(p, arch.hidden, q, Activation::Tanh),
                    translate_net: make(p, arch.hidden, q, Activation::Identity),
                };
                parity = parity.flipped();
                layer
            })
            .collect();
        Self { dim: arch.dim, layers }
    }

    pub fn architecture(&self) -> FlowArchitecture {
        FlowArchitecture {
            dim: self.dim,
            blocks: self.layers.len() / 2,
            hidden: self.layers.first().map_or(0, |l| l.scale_net.hidden),
        }
    }

    /// Same shape with every parameter zero; used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        Self {
            dim: self.dim,
            layers: self.layers.iter().map(CouplingLayer::zeros_like).collect(),
        }
    }

    /// Sets the output bias of each translation net in the outermost block so
    /// that, while every output weight is zero, `f(x) = x − center`.
    pub fn set_translation(&mut self, center: &[f64]) {
        let n = self.layers.len();
        for layer in &mut self.layers[n.saturating_sub(2)..] {
            let range = layer.transform_range();
            layer.translate_net.b2.copy_from_slice(&center[range]);
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.scale_net.num_params() + l.translate_net.num_params())
            .sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.scale_net.params().chain(l.translate_net.params()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.scale_net.params_mut().chain(l.translate_net.params_mut()))
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: v.len() });
        }
        Ok(())
    }

    /// `z = f(x)` and `log |det ∂f/∂x|`.
    pub fn inverse(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check_dim(x)?;
        let mut h = x.to_vec();
        let mut log_det = 0.0;
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            log_det += layer.inverse_in_place(&mut h);
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::non_finite(format!("flow inverse at layer {idx}")));
            }
        }
        Ok((h, log_det))
    }

    /// `x = g(z)`.
    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        let mut h = z.to_vec();
        for (idx, layer) in self.layers.iter().enumerate() {
            layer.forward_in_place(&mut h);
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::non_finite(format!("flow forward at layer {idx}")));
            }
        }
        Ok(h)
    }

    /// `log N(f(x); 0, I) + log |det ∂f/∂x|`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let (z, log_det) = self.inverse(x)?;
        Ok(std_normal_log_density(&z) + log_det)
    }

    /// Adds `weight · ∂ log p(x) / ∂θ` into `grad` (which must have this
    /// flow's shape) and returns `log p(x)`.
    pub fn accumulate_gradient(&self, x: &[f64], weight: f64, grad: &mut FlowGenerator) -> Result<f64> {
        self.check_dim(x)?;
        let mut h = x.to_vec();
        let mut log_det = 0.0;
        let mut traces = Vec::with_capacity(self.layers.len());
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let (ld, trace) = layer.inverse_traced(&mut h);
            if h.iter().any(|v| !v.is_finite()) || !ld.is_finite() {
                return Err(Error::non_finite(format!("flow inverse at layer {idx}")));
            }
            log_det += ld;
            traces.push(trace);
        }
        let log_p = std_normal_log_density(&h) + log_det;
        if weight == 0.0 {
            return Ok(log_p);
        }
        // ∂/∂z of weight · log N(z) is −weight · z.
        let mut g: Vec<f64> = h.iter().map(|z| -weight * z).collect();
        // traces were pushed from the outermost layer inwards; unwind from layer 0 up.
        for ((layer, trace), gl) in self.layers.iter().zip(traces.iter().rev()).zip(grad.layers.iter_mut()) {
            layer.backward(trace, &mut g, weight, gl);
        }
        Ok(log_p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::seeded_rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Random flow with every parameter (including output layers) non-zero.
    pub(crate) fn random_flow(arch: FlowArchitecture, seed: u64, scale: f64) -> FlowGenerator {
        let mut rng = seeded_rng(seed);
        let mut flow = FlowGenerator::new(arch, &mut rng);
        for p in flow.params_mut() {
            *p = scale * rng.sample::<f64, _>(StandardNormal);
        }
        flow
    }

    fn random_vec(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..dim).map(|_| StandardNormal.sample(rng)).collect()
    }

    /// Central-difference Jacobian of `f` followed by `ln |det|` via LU with
    /// partial pivoting.
    fn numeric_log_abs_det(flow: &FlowGenerator, x: &[f64]) -> f64 {
        let d = x.len();
        let h = 1e-6;
        let mut jac = vec![vec![0.0; d]; d];
        for j in 0..d {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let (zp, _) = flow.inverse(&xp).unwrap();
            let (zm, _) = flow.inverse(&xm).unwrap();
            for i in 0..d {
                jac[i][j] = (zp[i] - zm[i]) / (2.0 * h);
            }
        }
        let mut log_det = 0.0;
        for c in 0..d {
            let p = (c..d).max_by(|&a, &b| jac[a][c].abs().total_cmp(&jac[b][c].abs())).unwrap();
            jac.swap(c, p);
            log_det += jac[c][c].abs().ln();
            for r in c + 1..d {
                let f = jac[r][c] / jac[c][c];
                for k in c..d {
                    jac[r][k] -= f * jac[c][k];
                }
            }
        }
        log_det
    }

    #[test]
    fn zero_parameters_give_identity() {
        let flow = FlowGenerator::identity(FlowArchitecture { dim: 5, blocks: 2, hidden: 8 });
        let x = [0.3, -1.0, 2.0, 0.0, 7.5];
        let (z, ld) = flow.inverse(&x).unwrap();
        assert_eq!(z, x);
        assert_eq!(ld, 0.0);
        assert_eq!(flow.forward(&x).unwrap(), x);
    }

    #[test]
    fn fresh_flow_is_identity() {
        let flow = FlowGenerator::new(FlowArchitecture { dim: 6, blocks: 4, hidden: 16 }, &mut seeded_rng(1));
        let x = [0.3, -1.0, 2.0, 0.0, 7.5, 1.0];
        let (z, ld) = flow.inverse(&x).unwrap();
        assert_eq!(z, x);
        assert_eq!(ld, 0.0);
    }

    #[test]
    fn single_layer_constant_scale_hand_evaluation() {
        // D = 2, d = 1: s ≡ c via the output bias, t(h1) = 0.5 * tanh(h1).
        let mut flow = FlowGenerator::identity(FlowArchitecture { dim: 2, blocks: 1, hidden: 1 });
        flow.layers.truncate(1);
        let c = 0.4f64;
        let layer = &mut flow.layers[0];
        layer.scale_net.b2[0] = c.atanh();
        layer.translate_net.w1[0] = 1.0;
        layer.translate_net.w2[0] = 0.5;
        let x = [0.7, -1.3];
        let (z, ld) = flow.inverse(&x).unwrap();
        let t = 0.5 * 0.7f64.tanh();
        assert!((z[0] - 0.7).abs() < 1e-15);
        assert!((z[1] - (-1.3 - t) * (-c).exp()).abs() < 1e-12);
        assert!((ld + c).abs() < 1e-12);
    }

    #[test]
    fn parity_alternates_with_complementary_pass_sets() {
        for dim in [1usize, 2, 5, 39] {
            let flow = FlowGenerator::identity(FlowArchitecture { dim, blocks: 4, hidden: 4 });
            for pair in flow.layers.windows(2) {
                assert_ne!(pair[0].parity, pair[1].parity);
                assert_eq!(pair[0].pass_range(), pair[1].transform_range());
                assert_eq!(pair[0].transform_range(), pair[1].pass_range());
            }
        }
    }

    #[test]
    fn split_of_39_is_19_20() {
        let flow = FlowGenerator::identity(FlowArchitecture { dim: 39, blocks: 1, hidden: 4 });
        assert_eq!(flow.layers[0].pass_range(), 0..19);
        assert_eq!(flow.layers[0].transform_range(), 19..39);
        assert_eq!(flow.layers[0].scale_net.output, 20);
        assert_eq!(flow.layers[1].scale_net.input, 20);
    }

    #[test]
    fn round_trip_both_directions() {
        let flow = random_flow(FlowArchitecture { dim: 7, blocks: 3, hidden: 12 }, 3, 0.3);
        let mut rng = seeded_rng(4);
        for _ in 0..200 {
            let x = random_vec(7, &mut rng);
            let (z, _) = flow.inverse(&x).unwrap();
            let back = flow.forward(&z).unwrap();
            let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9);
            let x2 = flow.forward(&x).unwrap();
            let (z2, _) = flow.inverse(&x2).unwrap();
            let err = x.iter().zip(&z2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9);
        }
    }

    #[test]
    fn log_det_matches_numeric_jacobian() {
        for (dim, seed) in [(1usize, 1u64), (2, 2), (3, 3), (5, 4), (8, 5)] {
            let flow = random_flow(FlowArchitecture { dim, blocks: 2, hidden: 6 }, seed, 0.4);
            let mut rng = seeded_rng(seed + 100);
            for _ in 0..10 {
                let x = random_vec(dim, &mut rng);
                let (_, ld) = flow.inverse(&x).unwrap();
                let num = numeric_log_abs_det(&flow, &x);
                assert!((ld - num).abs() <= 1e-4 * ld.abs().max(1e-2), "D={dim}: {ld} vs {num}");
            }
        }
    }

    #[test]
    fn dimension_one_flow_is_elementwise_affine() {
        let flow = random_flow(FlowArchitecture { dim: 1, blocks: 2, hidden: 3 }, 9, 0.5);
        let (z1, ld1) = flow.inverse(&[0.2]).unwrap();
        let (z2, ld2) = flow.inverse(&[1.2]).unwrap();
        assert!((ld1 - ld2).abs() < 1e-14);
        assert!(((z2[0] - z1[0]) - ld1.exp()).abs() < 1e-12);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut flow = random_flow(FlowArchitecture { dim: 4, blocks: 1, hidden: 5 }, 21, 0.5);
        let x = [0.5, -0.7, 1.1, 0.2];
        let w = 0.8;
        let mut grad = flow.zeros_like();
        flow.accumulate_gradient(&x, w, &mut grad).unwrap();
        let analytic: Vec<f64> = grad.params().copied().collect();
        let n = flow.num_params();
        for i in 0..n {
            let eval = |flow: &FlowGenerator| w * flow.log_density(&x).unwrap();
            let orig = *flow.params().nth(i).unwrap();
            *flow.params_mut().nth(i).unwrap() = orig + 1e-5;
            let up = eval(&flow);
            *flow.params_mut().nth(i).unwrap() = orig - 1e-5;
            let down = eval(&flow);
            *flow.params_mut().nth(i).unwrap() = orig;
            let fd = (up - down) / 2e-5;
            let a = analytic[i];
            assert!((a - fd).abs() <= 1e-4 * a.abs().max(fd.abs()).max(1e-6), "param {i}: {a} vs {fd}");
        }
    }

    #[test]
    fn translation_init_centers_the_flow() {
        let mut flow = FlowGenerator::new(FlowArchitecture { dim: 5, blocks: 2, hidden: 4 }, &mut seeded_rng(2));
        let c = [1.0, -2.0, 0.5, 3.0, -0.25];
        flow.set_translation(&c);
        let (z, ld) = flow.inverse(&c).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(ld, 0.0);
    }

    #[test]
    fn non_finite_input_is_reported() {
        let flow = random_flow(FlowArchitecture { dim: 2, blocks: 1, hidden: 2 }, 1, 0.5);
        assert!(matches!(flow.inverse(&[f64::NAN, 0.0]), Err(Error::NonFinite { .. })));
        assert!(matches!(flow.inverse(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
