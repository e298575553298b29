use ndarray::{Array2, ArrayView2};
use rand::Rng as _;

use super::gelu;
use super::tape::{Gradients, Tape, Var};

/// Fully connected GELU network with a linear head.
///
/// Parameters live in one flat vector, layer by layer: the weight matrix
/// (fan_in × fan_out, row-major) followed by the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Parameter leaves of one tape evaluation, in layout order.
pub struct MlpVars {
    layers: Vec<(Var, Var)>,
}

impl Mlp {
    /// Kaiming-uniform hidden layers (bound √(6 / fan_in)), zero biases, and
    /// an all-zero output layer.
    pub fn new(sizes: &[usize], rng: &mut crate::rng::Rng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let mut params = Vec::with_capacity(param_count(sizes));
        let last = sizes.len() - 2;
        for (l, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(if l == last { 0.0 } else { rng.gen_range(-bound..bound) });
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Mlp {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Option<Self> {
        (params.len() == param_count(sizes)).then(|| Mlp {
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

    fn layer(&self, l: usize) -> (ArrayView2<'_, f64>, ArrayView2<'_, f64>) {
        let offset: usize = self.sizes.windows(2).take(l).map(|w| w[0] * w[1] + w[1]).sum();
        let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
        let w = ArrayView2::from_shape((fi, fo), &self.params[offset..offset + fi * fo]).unwrap();
        let b = ArrayView2::from_shape((1, fo), &self.params[offset + fi * fo..offset + fi * fo + fo]).unwrap();
        (w, b)
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Records the forward pass of a batch (rows) on `tape`.
    pub fn forward_tape(&self, tape: &mut Tape, x: Var) -> (Var, MlpVars) {
        let mut h = x;
        let mut layers = Vec::with_capacity(self.n_layers());
        for l in 0..self.n_layers() {
            let (w, b) = self.layer(l);
            let (vw, vb) = (tape.leaf(w.to_owned()), tape.leaf(b.to_owned()));
            let z = tape.matmul(h, vw);
            let z = tape.add_row(z, vb);
            h = if l + 1 < self.n_layers() { tape.gelu(z) } else { z };
            layers.push((vw, vb));
        }
        (h, MlpVars { layers })
    }

    /// Tape-free forward pass; bit-identical to [`Mlp::forward_tape`].
    pub fn infer(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut h = x.to_owned();
        for l in 0..self.n_layers() {
            let (w, b) = self.layer(l);
            let mut z = h.dot(&w);
            z = &z + &b;
            h = if l + 1 < self.n_layers() { z.mapv(gelu) } else { z };
        }
        h
    }

    /// Gathers parameter adjoints into one flat vector (layout order).
    pub fn collect_grad(&self, vars: &MlpVars, grads: &Gradients) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.params.len());
        for (l, &(vw, vb)) in vars.layers.iter().enumerate() {
            let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
            match grads.get(vw) {
                Some(g) => out.extend(g.iter()),
                None => out.extend(std::iter::repeat_n(0.0, fi * fo)),
            }
            match grads.get(vb) {
                Some(g) => out.extend(g.iter()),
                None => out.extend(std::iter::repeat_n(0.0, fo)),
            }
        }
        out
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn layout_and_zero_head() {
        let mut rng = substream(1, 0);
        let mlp = Mlp::new(&[3, 5, 5, 2], &mut rng);
        assert_eq!(mlp.params().len(), 3 * 5 + 5 + 5 * 5 + 5 + 5 * 2 + 2);
        let x = Array2::from_elem((4, 3), 0.7);
        assert!(mlp.infer(x.view()).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tape_and_infer_agree_bitwise() {
        let mut rng = substream(2, 0);
        let mut mlp = Mlp::new(&[4, 8, 8, 8, 3], &mut rng);
        for p in mlp.params_mut().iter_mut() {
            *p += rng.gen_range(-0.1..0.1);
        }
        let x = Array2::from_shape_fn((6, 4), |(i, j)| (i as f64 - 2.0) * 0.3 + j as f64 * 0.1);
        let mut tape = Tape::new();
        let vx = tape.leaf(x.clone());
        let (out, _) = mlp.forward_tape(&mut tape, vx);
        let inferred = mlp.infer(x.view());
        for (a, b) in tape.value(out).iter().zip(inferred.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
