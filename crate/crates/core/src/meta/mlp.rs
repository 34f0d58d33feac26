//! Dense feedforward network over a flat parameter vector.
//!
//! Parameters are laid out layer by layer as the row-major weight matrix
//! (`out × in`) followed by the bias vector when biases are enabled.

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::linalg::{norm, Matrix};
use crate::rng::OracleRng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative<T: Scalar>(self, z: T, a: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - a * a,
            Activation::Identity => T::one(),
        }
    }
}

/// Layer widths and hidden activation; the output layer is always linear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    sizes: Vec<usize>,
    hidden: Activation,
    bias: bool,
}

impl Architecture {
    pub fn new(sizes: Vec<usize>, hidden: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(CoreError::InvalidConfig(format!(
                "need at least two positive layer sizes, got {sizes:?}"
            )));
        }
        Ok(Self {
            sizes,
            hidden,
            bias: true,
        })
    }

    /// `1 → 40 → 40 → 1` with ReLU.
    pub fn sine_regressor() -> Self {
        Self::new(vec![1, 40, 40, 1], Activation::Relu).expect("static sizes")
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn with_activation(mut self, hidden: Activation) -> Self {
        self.hidden = hidden;
        self
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn hidden(&self) -> Activation {
        self.hidden
    }

    pub fn has_bias(&self) -> bool {
        self.bias
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("nonempty")
    }

    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn layer_len(&self, l: usize) -> usize {
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        o * i + if self.bias { o } else { 0 }
    }

    pub fn param_count(&self) -> usize {
        (0..self.layers()).map(|l| self.layer_len(l)).sum()
    }

    fn activation(&self, l: usize) -> Activation {
        if l + 1 == self.layers() {
            Activation::Identity
        } else {
            self.hidden
        }
    }

    /// Every entry `U(−1/√fan_in, 1/√fan_in)`.
    pub fn init<T: Scalar>(&self, rng: &mut OracleRng) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.layers() {
            let bound = 1.0 / (self.sizes[l] as f64).sqrt();
            for _ in 0..self.layer_len(l) {
                out.push(T::lit(rng.random_range(-bound..=bound)));
            }
        }
        out
    }

    /// Splits a flat vector into per-layer `(W, b)`; `b` is empty without biases.
    pub fn unflatten<T: Scalar>(&self, params: &[T]) -> Result<Vec<(Matrix<T>, Vec<T>)>> {
        if params.len() != self.param_count() {
            return Err(CoreError::DimensionMismatch {
                context: "network parameters",
                expected: self.param_count(),
                actual: params.len(),
            });
        }
        let mut off = 0;
        let mut layers = Vec::with_capacity(self.layers());
        for l in 0..self.layers() {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let w = Matrix::from_row_major(o, i, params[off..off + o * i].to_vec())?;
            off += o * i;
            let b = if self.bias {
                let b = params[off..off + o].to_vec();
                off += o;
                b
            } else {
                Vec::new()
            };
            layers.push((w, b));
        }
        Ok(layers)
    }

    pub fn flatten<T: Scalar>(&self, layers: &[(Matrix<T>, Vec<T>)]) -> Result<Vec<T>> {
        if layers.len() != self.layers() {
            return Err(CoreError::InvalidData("layer count mismatch".into()));
        }
        let mut out = Vec::with_capacity(self.param_count());
        for (l, (w, b)) in layers.iter().enumerate() {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            if w.rows() != o || w.cols() != i || b.len() != if self.bias { o } else { 0 } {
                return Err(CoreError::InvalidData(format!("layer {l} has the wrong shape")));
            }
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        Ok(out)
    }

    /// Network output for one input. Panics on a parameter length mismatch.
    pub fn forward<T: Scalar>(&self, params: &[T], input: &[T]) -> Vec<T> {
        assert_eq!(params.len(), self.param_count(), "parameter length");
        assert_eq!(input.len(), self.input_dim(), "input length");
        let mut a = input.to_vec();
        let mut off = 0;
        for l in 0..self.layers() {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let w = &params[off..off + o * i];
            off += o * i;
            let act = self.activation(l);
            let mut next = Vec::with_capacity(o);
            for r in 0..o {
                let row = &w[r * i..(r + 1) * i];
                let mut s = if self.bias { params[off + r] } else { T::zero() };
                for (wv, av) in row.iter().zip(&a) {
                    s = s + *wv * *av;
                }
                next.push(act.apply(s));
            }
            if self.bias {
                off += o;
            }
            a = next;
        }
        a
    }

    /// Sum of squared errors over the batch and its gradient.
    ///
    /// `inputs` holds `M × input_dim` values and `targets` `M × output_dim`.
    pub fn loss_grad<T: Scalar>(&self, params: &[T], inputs: &[T], targets: &[T]) -> (T, Vec<T>) {
        let mut grad = vec![T::zero(); self.param_count()];
        let loss = self.accumulate(params, inputs, targets, Some(&mut grad));
        (loss, grad)
    }

    pub fn loss<T: Scalar>(&self, params: &[T], inputs: &[T], targets: &[T]) -> T {
        self.accumulate(params, inputs, targets, None)
    }

    fn accumulate<T: Scalar>(
        &self,
        params: &[T],
        inputs: &[T],
        targets: &[T],
        mut grad: Option<&mut Vec<T>>,
    ) -> T {
        let (din, dout) = (self.input_dim(), self.output_dim());
        assert_eq!(params.len(), self.param_count(), "parameter length");
        assert_eq!(inputs.len() % din, 0, "input length");
        let points = inputs.len() / din;
        assert_eq!(targets.len(), points * dout, "target length");

        let nl = self.layers();
        let mut offsets = Vec::with_capacity(nl);
        let mut off = 0;
        for l in 0..nl {
            offsets.push(off);
            off += self.layer_len(l);
        }
        // acts[0] is the input, acts[l + 1] the output of layer l.
        let mut pre: Vec<Vec<T>> = (0..nl).map(|l| vec![T::zero(); self.sizes[l + 1]]).collect();
        let mut acts: Vec<Vec<T>> = self.sizes.iter().map(|&s| vec![T::zero(); s]).collect();
        let max_width = *self.sizes.iter().max().expect("nonempty");
        let mut delta = vec![T::zero(); max_width];
        let mut prev_delta = vec![T::zero(); max_width];
        let two = T::lit(2.0);
        let mut loss = T::zero();

        for p in 0..points {
            acts[0].copy_from_slice(&inputs[p * din..(p + 1) * din]);
            for l in 0..nl {
                let (i, o) = (self.sizes[l], self.sizes[l + 1]);
                let w = &params[offsets[l]..offsets[l] + o * i];
                let act = self.activation(l);
                let (head, tail) = acts.split_at_mut(l + 1);
                let input = &head[l];
                let out = &mut tail[0];
                for r in 0..o {
                    let row = &w[r * i..(r + 1) * i];
                    let mut s = if self.bias {
                        params[offsets[l] + o * i + r]
                    } else {
                        T::zero()
                    };
                    for (wv, av) in row.iter().zip(input.iter()) {
                        s = s + *wv * *av;
                    }
                    pre[l][r] = s;
                    out[r] = act.apply(s);
                }
            }
            let y = &acts[nl];
            let t = &targets[p * dout..(p + 1) * dout];
            for k in 0..dout {
                let r = y[k] - t[k];
                loss = loss + r * r;
                delta[k] = two * r;
            }
            let Some(g) = grad.as_deref_mut() else {
                continue;
            };
            for l in (0..nl).rev() {
                let (i, o) = (self.sizes[l], self.sizes[l + 1]);
                let base = offsets[l];
                let input = &acts[l];
                for r in 0..o {
                    let d = delta[r];
                    if d == T::zero() {
                        continue;
                    }
                    let gw = &mut g[base + r * i..base + (r + 1) * i];
                    for (gv, av) in gw.iter_mut().zip(input.iter()) {
                        *gv = *gv + d * *av;
                    }
                    if self.bias {
                        g[base + o * i + r] = g[base + o * i + r] + d;
                    }
                }
                if l == 0 {
                    break;
                }
                let w = &params[base..base + o * i];
                let below = self.activation(l - 1);
                for c in 0..i {
                    prev_delta[c] = T::zero();
                }
                for r in 0..o {
                    let d = delta[r];
                    if d == T::zero() {
                        continue;
                    }
                    let row = &w[r * i..(r + 1) * i];
                    for (pd, wv) in prev_delta[..i].iter_mut().zip(row) {
                        *pd = *pd + *wv * d;
                    }
                }
                for c in 0..i {
                    delta[c] = prev_delta[c] * below.derivative(pre[l - 1][c], acts[l][c]);
                }
            }
        }
        loss
    }
}

/// Network value bundling an architecture with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub arch: Architecture,
    pub params: Vec<T>,
}

impl<T: Scalar> Mlp<T> {
    pub fn new(arch: Architecture, params: Vec<T>) -> Result<Self> {
        if params.len() != arch.param_count() {
            return Err(CoreError::DimensionMismatch {
                context: "network parameters",
                expected: arch.param_count(),
                actual: params.len(),
            });
        }
        Ok(Self { arch, params })
    }

    pub fn random(arch: Architecture, rng: &mut OracleRng) -> Self {
        let params = arch.init(rng);
        Self { arch, params }
    }

    pub fn zeros(arch: Architecture) -> Self {
        let params = vec![T::zero(); arch.param_count()];
        Self { arch, params }
    }

    pub fn forward(&self, input: &[T]) -> Vec<T> {
        self.arch.forward(&self.params, input)
    }
}

/// `H u` by central differences of `grad`:
/// `(∇(x + h u) − ∇(x − h u)) / 2h` with `h = √eps (1 + ‖x‖) / ‖u‖`.
pub fn fd_hvp<T: Scalar>(grad: impl Fn(&[T]) -> Vec<T>, x: &[T], u: &[T]) -> Vec<T> {
    let un = norm(u);
    if un == T::zero() {
        return vec![T::zero(); x.len()];
    }
    let h = T::epsilon().sqrt() * (T::one() + norm(x)) / un.max(T::min_positive_value());
    let plus: Vec<T> = x.iter().zip(u).map(|(&a, &b)| a + h * b).collect();
    let minus: Vec<T> = x.iter().zip(u).map(|(&a, &b)| a - h * b).collect();
    let gp = grad(&plus);
    let gm = grad(&minus);
    let denom = h + h;
    gp.iter().zip(&gm).map(|(&a, &b)| (a - b) / denom).collect()
}
