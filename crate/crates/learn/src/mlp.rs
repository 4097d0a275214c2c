//! Fully connected network on flat `f64` storage with batched GEMM.

use rand::Rng;
use rand_distr::StandardNormal;

/// Multi-layer perceptron with ELU hidden activations and a linear output.
///
/// Parameters are stored flat, layer by layer: row-major weight
/// `(out × in)` followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Layer activations of a batched forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct MlpCache {
    batch: usize,
    acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("at least the input")
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// `c (m × n) = a (m × k) · b`, with explicit strides for `a` and `b`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: the slices cover the strided extents given the asserted shapes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Mlp {
    /// Orthogonal initialisation with gain `hidden_gain` on hidden layers and
    /// `output_gain` on the last layer; biases start at zero.
    pub fn new<R: Rng>(sizes: &[usize], hidden_gain: f64, output_gain: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0));
        let total = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let mut params = Vec::with_capacity(total);
        let layers = sizes.len() - 1;
        for (l, w) in sizes.windows(2).enumerate() {
            let gain = if l + 1 == layers { output_gain } else { hidden_gain };
            params.extend(orthogonal(w[1], w[0], gain, rng));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Option<Self> {
        let total: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        (sizes.len() >= 2 && params.len() == total).then(|| Self {
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

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// `(weight, bias)` slices of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (off, n_in, n_out) = self.layer_offset(l);
        let (w, rest) = self.params[off..].split_at(n_in * n_out);
        (w, &rest[..n_out])
    }

    fn layer_offset(&self, l: usize) -> (usize, usize, usize) {
        let off = self.sizes[..=l]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        (off, self.sizes[l], self.sizes[l + 1])
    }

    fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Forward pass on a row-major `(batch × input_dim)` block.
    pub fn forward(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let mut cache = self.forward_cached(x, batch);
        cache.acts.pop().unwrap()
    }

    pub fn forward_cached(&self, x: &[f64], batch: usize) -> MlpCache {
        assert_eq!(x.len(), batch * self.input_dim());
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        for l in 0..self.num_layers() {
            let (w, b) = self.layer(l);
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut z = Vec::with_capacity(batch * n_out);
            for _ in 0..batch {
                z.extend_from_slice(b);
            }
            let input = acts.last().unwrap();
            gemm(batch, n_in, n_out, input, n_in, 1, w, 1, n_in, 1.0, &mut z);
            if l + 1 < self.num_layers() {
                z.iter_mut().for_each(|v| *v = elu(*v));
            }
            acts.push(z);
        }
        MlpCache { batch, acts }
    }

    /// Accumulates `∂L/∂params` into `grad` given `∂L/∂output`.
    pub fn backward(&self, cache: &MlpCache, d_out: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        let batch = cache.batch;
        let mut delta = d_out.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (off, ..) = self.layer_offset(l);
            let input = &cache.acts[l];
            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            // dW += delta^T · input
            gemm(n_out, batch, n_in, &delta, 1, n_out, input, n_in, 1, 1.0, gw);
            for row in delta.chunks_exact(n_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l > 0 {
                let (w, _) = self.layer(l);
                let mut d_in = vec![0.0; batch * n_in];
                gemm(batch, n_out, n_in, &delta, n_out, 1, w, n_in, 1, 0.0, &mut d_in);
                // ELU derivative from the activation: 1 if positive, else y + 1
                for (d, &y) in d_in.iter_mut().zip(input) {
                    if y <= 0.0 {
                        *d *= y + 1.0;
                    }
                }
                delta = d_in;
            }
        }
    }
}

/// `rows × cols` matrix with orthonormal rows or columns, scaled by `gain`.
fn orthogonal<R: Rng>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (r, c) = (rows.max(cols), rows.min(cols));
    let mut a: Vec<Vec<f64>> = (0..c)
        .map(|_| (0..r).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    // modified Gram-Schmidt on the c columns of length r
    for i in 0..c {
        for j in 0..i {
            let dot: f64 = a[i].iter().zip(&a[j]).map(|(x, y)| x * y).sum();
            let (head, tail) = a.split_at_mut(i);
            for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                *x -= dot * y;
            }
        }
        let norm = a[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        a[i].iter_mut().for_each(|x| *x /= norm);
    }
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[i * cols + j] = gain * if rows >= cols { a[j][i] } else { a[i][j] };
        }
    }
    out
}
