//! Fully connected network with ReLU hidden layers and a linear output,
//! plus backpropagation and Adam.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// Shape `(n_out, n_in)`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations kept for the backward pass; `acts[0]` is the input batch.
pub struct ForwardCache {
    acts: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("at least the input")
    }
}

impl Mlp {
    /// He-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|io| {
                let bound = (6.0 / io[0].max(1) as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                Dense {
                    w: Array2::from_shape_simple_fn((io[1], io[0]), || dist.sample(rng)),
                    b: Array1::zeros(io[1]),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            layers: sizes
                .windows(2)
                .map(|io| Dense { w: Array2::zeros((io[1], io[0])), b: Array1::zeros(io[1]) })
                .collect(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].w.ncols()];
        s.extend(self.layers.iter().map(|l| l.w.nrows()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").w.nrows()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Forward pass over a batch of rows.
    pub fn forward_cached(&self, x: Array2<f64>) -> ForwardCache {
        assert_eq!(x.ncols(), self.input_dim(), "input width does not match the network");
        let mut acts = vec![x];
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&l.w.t()) + &l.b;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        ForwardCache { acts }
    }

    pub fn forward(&self, x: Array2<f64>) -> Array2<f64> {
        self.forward_cached(x).acts.pop().expect("output")
    }

    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let row = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row shape");
        self.forward(row).into_raw_vec_and_offset().0
    }

    /// Gradients of a loss given its derivative with respect to the output.
    pub fn backward(&self, cache: &ForwardCache, d_out: Array2<f64>) -> Mlp {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = d_out;
        for i in (0..self.layers.len()).rev() {
            let a_in = &cache.acts[i];
            let gw = delta.t().dot(a_in);
            let gb = delta.sum_axis(Axis(0));
            grads.push(Dense { w: gw, b: gb });
            if i > 0 {
                let mut d_prev = delta.dot(&self.layers[i].w);
                // ReLU mask from the hidden activation.
                ndarray::Zip::from(&mut d_prev).and(a_in).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = d_prev;
            }
        }
        grads.reverse();
        Mlp { layers: grads }
    }

    /// Flat parameter view in layer order, weights row-major then biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter length");
        let mut k = 0;
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = flat[k];
                k += 1;
            }
        }
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.sizes() == other.sizes()
    }

    /// `self <- tau * src + (1 - tau) * self`.
    pub fn blend_from(&mut self, src: &Mlp, tau: f64) {
        assert!(self.same_shape(src));
        for (a, b) in self.layers.iter_mut().zip(&src.layers) {
            a.w.zip_mut_with(&b.w, |x, &y| *x = tau * y + (1.0 - tau) * *x);
            a.b.zip_mut_with(&b.b, |x, &y| *x = tau * y + (1.0 - tau) * *x);
        }
    }

    /// Euclidean distance between parameter vectors.
    pub fn distance(&self, other: &Mlp) -> f64 {
        self.flatten().iter().zip(other.flatten()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
    pub m: Mlp,
    pub v: Mlp,
    pub t: u64,
}

impl Adam {
    pub fn new(shape_of: &Mlp, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let sizes = shape_of.sizes();
        Self { beta1, beta2, eps, lr, m: Mlp::zeros(&sizes), v: Mlp::zeros(&sizes), t: 0 }
    }

    pub fn step(&mut self, params: &mut Mlp, grads: &Mlp) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let (lr, eps) = (self.lr, self.eps);
        for (((p, g), m), v) in
            params.layers.iter_mut().zip(&grads.layers).zip(&mut self.m.layers).zip(&mut self.v.layers)
        {
            let upd = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            };
            ndarray::Zip::from(&mut p.w).and(&g.w).and(&mut m.w).and(&mut v.w).for_each(|p, &g, m, v| upd(p, g, m, v));
            ndarray::Zip::from(&mut p.b).and(&g.b).and(&mut m.b).and(&mut v.b).for_each(|p, &g, m, v| upd(p, g, m, v));
        }
    }
}
