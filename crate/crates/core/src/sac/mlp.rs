//! Fully connected network with rectified hidden layers and a linear output.
//!
//! Parameters live in one flat vector, layer by layer, each layer as its
//! row-major `out x in` weight matrix followed by its bias.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::SacError;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input of every layer (post-activation of the previous one).
    inputs: Vec<Array2<f64>>,
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Uniform initialization in `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|s| *s > 0), "invalid layer sizes {sizes:?}");
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] * w[1] + w[1]) {
                params.push(rng.random_range(-bound..bound));
            }
        }
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self, SacError> {
        if sizes.len() < 2 || sizes.contains(&0) || params.len() != param_count(sizes) {
            return Err(SacError::ShapeMismatch {
                expected: param_count(sizes),
                found: params.len(),
            });
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = vec![0];
        for w in self.sizes.windows(2) {
            off.push(off.last().unwrap() + w[0] * w[1] + w[1]);
        }
        off
    }

    fn layer(&self, l: usize, offset: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = ArrayView2::from_shape((n_out, n_in), &self.params[offset..offset + n_in * n_out]).unwrap();
        let b = ArrayView1::from(&self.params[offset + n_in * n_out..offset + n_in * n_out + n_out]);
        (w, b)
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward_tape(x).0
    }

    /// Forward pass over a batch (one row per sample).
    pub fn forward_tape(&self, x: ArrayView2<f64>) -> (Array2<f64>, Tape) {
        assert_eq!(x.ncols(), self.input_dim(), "input width");
        let offsets = self.offsets();
        let layers = self.sizes.len() - 1;
        let mut inputs = Vec::with_capacity(layers);
        let mut h = x.to_owned();
        for l in 0..layers {
            let (w, b) = self.layer(l, offsets[l]);
            let mut z = h.dot(&w.t());
            z += &b;
            if l + 1 < layers {
                z.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(h);
            h = z;
        }
        (h, Tape { inputs })
    }

    /// Gradient of `sum(dout ⊙ output)` with respect to the parameters and,
    /// when asked, the input.
    pub fn backward(&self, tape: &Tape, dout: ArrayView2<f64>, input_grad: bool) -> (Vec<f64>, Option<Array2<f64>>) {
        let offsets = self.offsets();
        let layers = self.sizes.len() - 1;
        let mut grad = vec![0.0; self.params.len()];
        let mut dz = dout.to_owned();
        let mut dx = None;
        for l in (0..layers).rev() {
            let (w, _) = self.layer(l, offsets[l]);
            let x = &tape.inputs[l];
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let dw = dz.t().dot(x);
            let db = dz.sum_axis(Axis(0));
            let off = offsets[l];
            grad[off..off + n_in * n_out].copy_from_slice(dw.as_slice().unwrap());
            grad[off + n_in * n_out..off + n_in * n_out + n_out].copy_from_slice(db.as_slice().unwrap());
            if l > 0 {
                let mut dh = dz.dot(&w);
                // x is the rectified pre-activation of the previous layer
                ndarray::Zip::from(&mut dh).and(x).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
                dz = dh;
            } else if input_grad {
                dx = Some(dz.dot(&w));
            }
        }
        (grad, dx)
    }

    /// Gradient of `sum(dout ⊙ output)` with respect to input columns
    /// `first_col..`, skipping parameter gradients.
    pub fn backward_input(&self, tape: &Tape, dout: ArrayView2<f64>, first_col: usize) -> Array2<f64> {
        let offsets = self.offsets();
        let mut dz = dout.to_owned();
        for l in (0..self.sizes.len() - 1).rev() {
            let (w, _) = self.layer(l, offsets[l]);
            let w = if l == 0 { w.slice_move(s![.., first_col..]) } else { w };
            let mut dh = dz.dot(&w);
            if l > 0 {
                ndarray::Zip::from(&mut dh).and(&tape.inputs[l]).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            dz = dh;
        }
        dz
    }

    /// Single-sample convenience forward.
    pub fn forward_one(&self, x: &[f64]) -> Array1<f64> {
        let x = ArrayView2::from_shape((1, x.len()), x).unwrap();
        self.forward(x).slice(s![0, ..]).to_owned()
    }
}

/// `target ← (1 − τ)·target + τ·online`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<(), SacError> {
    if target.sizes != online.sizes {
        return Err(SacError::ShapeMismatch {
            expected: online.params.len(),
            found: target.params.len(),
        });
    }
    for (t, o) in target.params.iter_mut().zip(&online.params) {
        *t = (1.0 - tau) * *t + tau * o;
    }
    Ok(())
}
