//! Convolution, fully connected and pooling layers with hand-written
//! backward passes.

use std::borrow::Cow;

use rand::Rng;

use crate::error::NnError;
use crate::tensor::{gemm, Param, Volume};

/// Cubic 3D convolution with same-padding, `kernel` odd.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub weight: Param,
    pub bias: Param,
}

impl Conv3d {
    /// Kaiming-normal weights, zero bias. `gain` scales the weight std.
    pub fn new(name: &str, in_channels: usize, out_channels: usize, kernel: usize, stride: usize, gain: f64, rng: &mut impl Rng) -> Self {
        assert!(kernel % 2 == 1 && stride >= 1);
        let fan_in = in_channels * kernel.pow(3);
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            weight: Param::normal(
                format!("{name}.weight"),
                &[out_channels, in_channels, kernel, kernel, kernel],
                gain * (2.0 / fan_in as f64).sqrt(),
                rng,
            ),
            bias: Param::zeros(format!("{name}.bias"), &[out_channels]),
        }
    }

    fn pad(&self) -> usize {
        self.kernel / 2
    }

    /// `ceil(d / stride)` per dimension.
    pub fn output_dims(&self, dims: [usize; 3]) -> [usize; 3] {
        dims.map(|d| (d + 2 * self.pad() - self.kernel) / self.stride + 1)
    }

    fn check(&self, x: &Volume) -> Result<(), NnError> {
        if x.channels != self.in_channels {
            return Err(NnError::Shape {
                op: format!("conv3d {}", self.weight.name),
                expected: format!("{} input channels", self.in_channels),
                found: format!("{} channels, dims {:?}", x.channels, x.dims),
            });
        }
        if x.dims.iter().any(|&d| d == 0) {
            return Err(NnError::Shape {
                op: format!("conv3d {}", self.weight.name),
                expected: "non-empty spatial dims".into(),
                found: format!("{:?}", x.dims),
            });
        }
        Ok(())
    }

    /// Column matrix `[in_channels·k³, output voxels]`.
    fn im2col<'a>(&self, x: &'a Volume, od: [usize; 3]) -> Cow<'a, [f64]> {
        let k = self.kernel;
        let s = self.stride;
        if k == 1 && s == 1 {
            return Cow::Borrowed(&x.data);
        }
        let pad = self.pad() as isize;
        let [d0, d1, d2] = x.dims;
        let ov = od[0] * od[1] * od[2];
        let mut col = vec![0.0; x.channels * k * k * k * ov];
        let mut row = 0;
        for c in 0..x.channels {
            let xc = x.channel(c);
            for a in 0..k {
                for b in 0..k {
                    for e in 0..k {
                        let out = &mut col[row * ov..(row + 1) * ov];
                        row += 1;
                        let mut o = 0;
                        for i in 0..od[0] {
                            let ii = (i * s) as isize + a as isize - pad;
                            if ii < 0 || ii >= d0 as isize {
                                o += od[1] * od[2];
                                continue;
                            }
                            for j in 0..od[1] {
                                let jj = (j * s) as isize + b as isize - pad;
                                if jj < 0 || jj >= d1 as isize {
                                    o += od[2];
                                    continue;
                                }
                                let base = (ii as usize * d1 + jj as usize) * d2;
                                for l in 0..od[2] {
                                    let ll = (l * s) as isize + e as isize - pad;
                                    if ll >= 0 && ll < d2 as isize {
                                        out[o] = xc[base + ll as usize];
                                    }
                                    o += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        Cow::Owned(col)
    }

    fn col2im(&self, col: &[f64], channels: usize, dims: [usize; 3], od: [usize; 3]) -> Vec<f64> {
        let k = self.kernel;
        let s = self.stride;
        let n = dims[0] * dims[1] * dims[2];
        if k == 1 && s == 1 {
            return col.to_vec();
        }
        let pad = self.pad() as isize;
        let [d0, d1, d2] = dims;
        let ov = od[0] * od[1] * od[2];
        let mut dx = vec![0.0; channels * n];
        let mut row = 0;
        for c in 0..channels {
            let xc = &mut dx[c * n..(c + 1) * n];
            for a in 0..k {
                for b in 0..k {
                    for e in 0..k {
                        let src = &col[row * ov..(row + 1) * ov];
                        row += 1;
                        let mut o = 0;
                        for i in 0..od[0] {
                            let ii = (i * s) as isize + a as isize - pad;
                            if ii < 0 || ii >= d0 as isize {
                                o += od[1] * od[2];
                                continue;
                            }
                            for j in 0..od[1] {
                                let jj = (j * s) as isize + b as isize - pad;
                                if jj < 0 || jj >= d1 as isize {
                                    o += od[2];
                                    continue;
                                }
                                let base = (ii as usize * d1 + jj as usize) * d2;
                                for l in 0..od[2] {
                                    let ll = (l * s) as isize + e as isize - pad;
                                    if ll >= 0 && ll < d2 as isize {
                                        xc[base + ll as usize] += src[o];
                                    }
                                    o += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    pub fn forward(&self, x: &Volume) -> Result<Volume, NnError> {
        self.check(x)?;
        let od = self.output_dims(x.dims);
        let ov = od[0] * od[1] * od[2];
        let col = self.im2col(x, od);
        let ck = self.in_channels * self.kernel.pow(3);
        let mut out = Volume::zeros(self.out_channels, od);
        for (c, &b) in self.bias.value.iter().enumerate() {
            out.data[c * ov..(c + 1) * ov].iter_mut().for_each(|v| *v = b);
        }
        gemm(self.out_channels, ck, ov, &self.weight.value, false, &col, false, 1.0, &mut out.data);
        Ok(out)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, x: &Volume, dout: &Volume) -> Volume {
        let od = self.output_dims(x.dims);
        debug_assert_eq!(dout.dims, od);
        let ov = od[0] * od[1] * od[2];
        let ck = self.in_channels * self.kernel.pow(3);
        let col = self.im2col(x, od);
        gemm(self.out_channels, ov, ck, &dout.data, false, &col, true, 1.0, &mut self.weight.grad);
        for (c, g) in self.bias.grad.iter_mut().enumerate() {
            *g += dout.data[c * ov..(c + 1) * ov].iter().sum::<f64>();
        }
        let mut dcol = vec![0.0; ck * ov];
        gemm(ck, self.out_channels, ov, &self.weight.value, true, &dout.data, false, 0.0, &mut dcol);
        Volume::from_data(x.channels, x.dims, self.col2im(&dcol, x.channels, x.dims, od))
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }
}

/// Fully connected layer `y = W x + b`, `W` stored `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    pub fn new(name: &str, inputs: usize, outputs: usize, gain: f64, rng: &mut impl Rng) -> Self {
        Self {
            inputs,
            outputs,
            weight: Param::normal(format!("{name}.weight"), &[outputs, inputs], gain * (2.0 / inputs as f64).sqrt(), rng),
            bias: Param::zeros(format!("{name}.bias"), &[outputs]),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        if x.len() != self.inputs {
            return Err(NnError::Shape {
                op: format!("linear {}", self.weight.name),
                expected: format!("{} inputs", self.inputs),
                found: format!("{}", x.len()),
            });
        }
        let mut y = self.bias.value.clone();
        gemm(self.outputs, self.inputs, 1, &self.weight.value, false, x, false, 1.0, &mut y);
        Ok(y)
    }

    pub fn backward(&mut self, x: &[f64], dy: &[f64]) -> Vec<f64> {
        gemm(self.outputs, 1, self.inputs, dy, false, x, false, 1.0, &mut self.weight.grad);
        for (g, d) in self.bias.grad.iter_mut().zip(dy) {
            *g += d;
        }
        let mut dx = vec![0.0; self.inputs];
        gemm(self.inputs, self.outputs, 1, &self.weight.value, true, dy, false, 0.0, &mut dx);
        dx
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }
}

/// Per-channel maximum over all voxels, with the winning voxel index.
pub fn global_max_pool(x: &Volume) -> (Vec<f64>, Vec<usize>) {
    (0..x.channels)
        .map(|c| {
            let ch = x.channel(c);
            let (i, v) = ch
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
            (v, i)
        })
        .unzip()
}

pub fn global_max_pool_backward(x: &Volume, argmax: &[usize], dy: &[f64]) -> Volume {
    let mut dx = Volume::zeros(x.channels, x.dims);
    let n = x.voxels();
    for (c, (&i, &d)) in argmax.iter().zip(dy).enumerate() {
        dx.data[c * n + i] += d;
    }
    dx
}

pub(crate) fn relu(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

/// Masks `grad` where the post-activation output is not positive.
pub(crate) fn relu_backward(post: &[f64], grad: &mut [f64]) {
    for (g, &y) in grad.iter_mut().zip(post) {
        if y <= 0.0 {
            *g = 0.0;
        }
    }
}
