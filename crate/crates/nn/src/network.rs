//! Residual 3D backbone, multi-scale max-pool features, location FFN and
//! three binary prediction heads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use carryscan_core::decision::ClassProbabilities;

use crate::error::NnError;
use crate::layers::{global_max_pool, global_max_pool_backward, relu, relu_backward, Conv3d, Linear};
use crate::loss::{focal_loss_logit, softmax_first, FocalParams};
use crate::tensor::{Param, Volume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dims: [usize; 3],
    pub stem_channels: usize,
    /// Bottleneck blocks per stage.
    pub block_counts: [usize; 4],
    /// Bottleneck (inner) width per stage; outputs are four times wider.
    pub stage_widths: [usize; 4],
    pub location_hidden: [usize; 3],
    pub head_hidden: [usize; 3],
    /// Range normalization: `2 r / range_scale - 1`.
    pub range_scale: f64,
    /// Azimuth normalization: `θ / azimuth_scale_deg`.
    pub azimuth_scale_deg: f64,
    pub seed: u64,
}

impl NetworkConfig {
    /// The full-size backbone: 3, 4, 6, 3 blocks with 256..2048 outputs.
    pub fn full() -> Self {
        Self {
            input_dims: [24, 24, 10],
            stem_channels: 64,
            block_counts: [3, 4, 6, 3],
            stage_widths: [64, 128, 256, 512],
            location_hidden: [64, 64, 64],
            head_hidden: [512, 128, 32],
            range_scale: 15.18,
            azimuth_scale_deg: 90.0,
            seed: 0,
        }
    }

    /// One block per stage and all channel widths divided by 8.
    pub fn reduced() -> Self {
        let full = Self::full();
        Self {
            stem_channels: full.stem_channels / 8,
            block_counts: [1, 1, 1, 1],
            stage_widths: full.stage_widths.map(|w| w / 8),
            ..full
        }
    }

    pub fn stage_outputs(&self) -> [usize; 4] {
        self.stage_widths.map(|w| 4 * w)
    }

    pub fn pooled_features(&self) -> usize {
        self.stage_outputs().iter().sum()
    }

    pub fn feature_len(&self) -> usize {
        self.pooled_features() + self.location_hidden[2]
    }
}

/// 1×1×1 reduce, 3×3×3, 1×1×1 restore with an identity or projection
/// shortcut. A stride-2 block downsamples in its 3×3×3 layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Bottleneck {
    pub reduce: Conv3d,
    pub spatial: Conv3d,
    pub restore: Conv3d,
    pub projection: Option<Conv3d>,
}

#[derive(Debug, Clone)]
struct BlockTrace {
    a1: Volume,
    a2: Volume,
    out: Volume,
}

impl Bottleneck {
    fn new(name: &str, inputs: usize, width: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        let outputs = 4 * width;
        let projection = (inputs != outputs || stride != 1).then(|| Conv3d::new(&format!("{name}.proj"), inputs, outputs, 1, stride, 1.0, rng));
        Self {
            reduce: Conv3d::new(&format!("{name}.conv1"), inputs, width, 1, 1, 1.0, rng),
            spatial: Conv3d::new(&format!("{name}.conv2"), width, width, 3, stride, 1.0, rng),
            // smaller residual branch at init keeps activations bounded without normalization
            restore: Conv3d::new(&format!("{name}.conv3"), width, outputs, 1, 1, 0.5, rng),
            projection,
        }
    }

    fn forward(&self, x: &Volume) -> Result<BlockTrace, NnError> {
        let mut a1 = self.reduce.forward(x)?;
        a1.relu_in_place();
        let mut a2 = self.spatial.forward(&a1)?;
        a2.relu_in_place();
        let mut out = self.restore.forward(&a2)?;
        match &self.projection {
            Some(p) => {
                let s = p.forward(x)?;
                out.data.iter_mut().zip(&s.data).for_each(|(o, v)| *o += v);
            }
            None => out.data.iter_mut().zip(&x.data).for_each(|(o, v)| *o += v),
        }
        out.relu_in_place();
        Ok(BlockTrace { a1, a2, out })
    }

    fn backward(&mut self, x: &Volume, t: &BlockTrace, mut dout: Volume) -> Volume {
        relu_backward(&t.out.data, &mut dout.data);
        let mut da2 = self.restore.backward(&t.a2, &dout);
        relu_backward(&t.a2.data, &mut da2.data);
        let mut da1 = self.spatial.backward(&t.a1, &da2);
        relu_backward(&t.a1.data, &mut da1.data);
        let mut dx = self.reduce.backward(x, &da1);
        match &mut self.projection {
            Some(p) => {
                let ds = p.backward(x, &dout);
                dx.data.iter_mut().zip(&ds.data).for_each(|(a, b)| *a += b);
            }
            None => dx.data.iter_mut().zip(&dout.data).for_each(|(a, b)| *a += b),
        }
        dx
    }

    fn convs_mut(&mut self) -> Vec<&mut Conv3d> {
        let mut v = vec![&mut self.reduce, &mut self.spatial, &mut self.restore];
        if let Some(p) = &mut self.projection {
            v.push(p);
        }
        v
    }

    fn convs(&self) -> Vec<&Conv3d> {
        let mut v = vec![&self.reduce, &self.spatial, &self.restore];
        if let Some(p) = &self.projection {
            v.push(p);
        }
        v
    }
}

/// Stack of fully connected layers, ReLU between them; the last layer is
/// linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    fn new(name: &str, sizes: &[usize], last_gain: f64, rng: &mut ChaCha8Rng) -> Self {
        let n = sizes.len() - 1;
        Self {
            layers: (0..n)
                .map(|i| Linear::new(&format!("{name}.fc{}", i + 1), sizes[i], sizes[i + 1], if i + 1 == n { last_gain } else { 1.0 }, rng))
                .collect(),
        }
    }

    /// Output of every layer (post-activation for hidden layers).
    fn forward(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, NnError> {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let mut y = l.forward(acts.last().map_or(x, |a| a.as_slice()))?;
            if i + 1 < self.layers.len() {
                relu(&mut y);
            }
            acts.push(y);
        }
        Ok(acts)
    }

    fn backward(&mut self, x: &[f64], acts: &[Vec<f64>], dy: &[f64]) -> Vec<f64> {
        let mut g = dy.to_vec();
        for i in (0..self.layers.len()).rev() {
            if i + 1 < self.layers.len() {
                relu_backward(&acts[i], &mut g);
            }
            let input = if i == 0 { x } else { &acts[i - 1] };
            g = self.layers[i].backward(input, &g);
        }
        g
    }
}

/// Network input: one cube and its centre location.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// `[range, azimuth, elevation]` values, single channel.
    pub cube: Vec<f64>,
    pub range_m: f64,
    pub azimuth_deg: f64,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    input: Volume,
    stem: Volume,
    blocks: Vec<BlockTrace>,
    pool_idx: Vec<Vec<usize>>,
    location_in: [f64; 2],
    location: Vec<Vec<f64>>,
    features: Vec<f64>,
    heads: Vec<Vec<Vec<f64>>>,
    pub probabilities: ClassProbabilities,
}

impl ForwardTrace {
    /// Output of each stage's last block.
    pub fn stage_outputs<'a>(&'a self, net: &Network) -> Vec<&'a Volume> {
        let mut idx = 0;
        net.config
            .block_counts
            .iter()
            .map(|&n| {
                idx += n;
                &self.blocks[idx - 1].out
            })
            .collect()
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn logit_diffs(&self) -> [f64; 3] {
        std::array::from_fn(|h| {
            let o = self.heads[h].last().unwrap();
            o[0] - o[1]
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub stem: Conv3d,
    pub blocks: Vec<Bottleneck>,
    pub location: Mlp,
    pub heads: Vec<Mlp>,
}

impl Network {
    pub fn new(config: NetworkConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let stem = Conv3d::new("conv1", 1, config.stem_channels, 3, 1, 1.0, &mut rng);
        let mut blocks = Vec::new();
        let mut inputs = config.stem_channels;
        for (s, (&count, &width)) in config.block_counts.iter().zip(&config.stage_widths).enumerate() {
            for b in 0..count {
                let stride = if b + 1 == count { 2 } else { 1 };
                blocks.push(Bottleneck::new(&format!("conv{}_{}", s + 2, b + 1), inputs, width, stride, &mut rng));
                inputs = 4 * width;
            }
        }
        let lh = config.location_hidden;
        let location = Mlp::new("location", &[2, lh[0], lh[1], lh[2]], 1.0, &mut rng);
        let hh = config.head_hidden;
        let sizes = [config.feature_len(), hh[0], hh[1], hh[2], 2];
        let heads = ["head_laptop", "head_phone", "head_knife"]
            .iter()
            .map(|n| Mlp::new(n, &sizes, 0.01, &mut rng))
            .collect();
        Self {
            config,
            stem,
            blocks,
            location,
            heads,
        }
    }

    pub fn location_input(&self, range_m: f64, azimuth_deg: f64) -> [f64; 2] {
        [
            2.0 * range_m / self.config.range_scale - 1.0,
            azimuth_deg / self.config.azimuth_scale_deg,
        ]
    }

    pub fn forward(&self, sample: &Sample) -> Result<ForwardTrace, NnError> {
        let dims = self.config.input_dims;
        if sample.cube.len() != dims.iter().product::<usize>() {
            return Err(NnError::Shape {
                op: "network input".into(),
                expected: format!("{}x{}x{} cube", dims[0], dims[1], dims[2]),
                found: format!("{} values", sample.cube.len()),
            });
        }
        let input = Volume::from_data(1, dims, sample.cube.clone());
        let mut stem = self.stem.forward(&input)?;
        stem.relu_in_place();
        let mut blocks: Vec<BlockTrace> = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let x = blocks.last().map_or(&stem, |t| &t.out);
            let t = b.forward(x)?;
            blocks.push(t);
        }
        let mut features = Vec::with_capacity(self.config.feature_len());
        let mut pool_idx = Vec::new();
        let mut end = 0;
        for &n in &self.config.block_counts {
            end += n;
            let (v, i) = global_max_pool(&blocks[end - 1].out);
            features.extend(v);
            pool_idx.push(i);
        }
        let location_in = self.location_input(sample.range_m, sample.azimuth_deg);
        let location = self.location.forward(&location_in)?;
        features.extend_from_slice(location.last().unwrap());
        let heads: Vec<Vec<Vec<f64>>> = self.heads.iter().map(|h| h.forward(&features)).collect::<Result<_, _>>()?;
        let probabilities = std::array::from_fn(|h| {
            let o = heads[h].last().unwrap();
            softmax_first(o[0], o[1])
        });
        Ok(ForwardTrace {
            input,
            stem,
            blocks,
            pool_idx,
            location_in,
            location,
            features,
            heads,
            probabilities,
        })
    }

    pub fn predict(&self, sample: &Sample) -> Result<ClassProbabilities, NnError> {
        Ok(self.forward(sample)?.probabilities)
    }

    /// Summed focal loss of the three heads.
    pub fn loss(&self, trace: &ForwardTrace, labels: [bool; 3], focal: &FocalParams) -> f64 {
        let d = trace.logit_diffs();
        (0..3)
            .map(|h| {
                let [w1, w2] = focal.weights[h];
                focal_loss_logit(d[h], labels[h], w1, w2, focal.alpha).0
            })
            .sum()
    }

    /// Backpropagates `scale · Loss` and accumulates into every gradient.
    /// Returns the (unscaled) loss.
    pub fn backward(&mut self, trace: &ForwardTrace, labels: [bool; 3], focal: &FocalParams, scale: f64) -> f64 {
        let d = trace.logit_diffs();
        let mut total = 0.0;
        let mut dfeat = vec![0.0; trace.features.len()];
        for h in 0..3 {
            let [w1, w2] = focal.weights[h];
            let (l, g) = focal_loss_logit(d[h], labels[h], w1, w2, focal.alpha);
            total += l;
            let dout = [scale * g, -scale * g];
            let dx = self.heads[h].backward(&trace.features, &trace.heads[h], &dout);
            dfeat.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        }
        let pooled = self.config.pooled_features();
        self.location.backward(&trace.location_in, &trace.location, &dfeat[pooled..]);

        // scatter pooled gradients back to the stage outputs
        let mut stage_grads: Vec<Option<Volume>> = vec![None; self.blocks.len()];
        let (mut end, mut off) = (0, 0);
        for (s, &n) in self.config.block_counts.iter().enumerate() {
            end += n;
            let out = &trace.blocks[end - 1].out;
            let g = &dfeat[off..off + out.channels];
            stage_grads[end - 1] = Some(global_max_pool_backward(out, &trace.pool_idx[s], g));
            off += out.channels;
        }
        let mut carry: Option<Volume> = None;
        for i in (0..self.blocks.len()).rev() {
            let mut g = stage_grads[i].take().unwrap_or_else(|| {
                let o = &trace.blocks[i].out;
                Volume::zeros(o.channels, o.dims)
            });
            if let Some(c) = carry.take() {
                g.data.iter_mut().zip(&c.data).for_each(|(a, b)| *a += b);
            }
            let x = if i == 0 { &trace.stem } else { &trace.blocks[i - 1].out };
            carry = Some(self.blocks[i].backward(x, &trace.blocks[i], g));
        }
        let mut dstem = carry.expect("at least one block");
        relu_backward(&trace.stem.data, &mut dstem.data);
        self.stem.backward(&trace.input, &dstem);
        total
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = Vec::new();
        out.extend(self.stem.params_mut());
        for b in &mut self.blocks {
            for c in b.convs_mut() {
                out.extend(c.params_mut());
            }
        }
        for l in &mut self.location.layers {
            out.extend(l.params_mut());
        }
        for h in &mut self.heads {
            for l in &mut h.layers {
                out.extend(l.params_mut());
            }
        }
        out
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out: Vec<&Param> = Vec::new();
        out.extend(self.stem.params());
        for b in &self.blocks {
            for c in b.convs() {
                out.extend(c.params());
            }
        }
        for l in &self.location.layers {
            out.extend(l.params());
        }
        for h in &self.heads {
            for l in &h.layers {
                out.extend(l.params());
            }
        }
        out
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(|p| p.zero_grad());
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Number of 3D convolutions on the main path (projections excluded).
    pub fn main_path_convs(&self) -> usize {
        1 + 3 * self.blocks.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(seed: u64, dims: [usize; 3]) -> Sample {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Sample {
            cube: (0..dims.iter().product::<usize>()).map(|_| rng.random_range(0.0..1.0)).collect(),
            range_m: 4.0,
            azimuth_deg: -10.0,
        }
    }

    #[test]
    fn reduced_shapes_and_lengths() {
        let net = Network::new(NetworkConfig::reduced());
        assert_eq!(net.config.feature_len(), 480 + 64);
        let t = net.forward(&sample(1, [24, 24, 10])).unwrap();
        let shapes: Vec<_> = t.stage_outputs(&net).iter().map(|v| v.shape()).collect();
        assert_eq!(shapes, vec![(12, 12, 5, 32), (6, 6, 3, 64), (3, 3, 2, 128), (2, 2, 1, 256)]);
        assert_eq!(t.features().len(), 544);
        assert_eq!(t.stem.shape(), (24, 24, 10, 8));
    }

    #[test]
    fn full_profile_layer_counts() {
        let c = NetworkConfig::full();
        assert_eq!(c.pooled_features(), 3840);
        assert_eq!(c.feature_len(), 3904);
        assert_eq!(1 + 3 * c.block_counts.iter().sum::<usize>(), 49);
    }

    #[test]
    fn untrained_is_near_half_and_deterministic() {
        let net = Network::new(NetworkConfig::reduced());
        let s = sample(2, [24, 24, 10]);
        let p = net.predict(&s).unwrap();
        for v in p {
            assert!((v - 0.5).abs() < 0.05, "{p:?}");
        }
        assert_eq!(net.predict(&s).unwrap(), p);
        let zero = Sample {
            cube: vec![0.0; 5760],
            ..s
        };
        assert!(net.predict(&zero).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn wrong_input_size_is_an_error() {
        let net = Network::new(NetworkConfig::reduced());
        let err = net.predict(&sample(0, [24, 24, 9])).unwrap_err().to_string();
        assert!(err.contains("24x24x10"), "{err}");
    }
}
