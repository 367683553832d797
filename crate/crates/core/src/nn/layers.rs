//! Linear layers, multilayer perceptrons and the GRU cell.

use rand::Rng;

use super::params::{ParamId, ParameterStore};
use super::tape::{Tape, Var};
use super::NnError;

/// `y = x·W + b` with `W` stored as `in`×`out` under `<name>.weight` and `b`
/// under `<name>.bias`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let weight = store.add_uniform(&format!("{name}.weight"), in_dim, out_dim, rng)?;
        let bias = store.add_zeros(&format!("{name}.bias"), out_dim)?;
        Ok(Self {
            weight,
            bias,
            in_dim,
            out_dim,
        })
    }

    /// Binds to parameters already present in `store` (e.g. after loading).
    pub fn bind(store: &ParameterStore, name: &str) -> Result<Self, NnError> {
        let weight = lookup(store, &format!("{name}.weight"))?;
        let bias = lookup(store, &format!("{name}.bias"))?;
        let (in_dim, out_dim) = store.value(weight).dim();
        if store.value(bias).dim() != (1, out_dim) {
            return Err(NnError::Shape(format!(
                "{name}.bias does not match {name}.weight"
            )));
        }
        Ok(Self {
            weight,
            bias,
            in_dim,
            out_dim,
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Var {
        self.forward_parts(tape, &[x])
    }

    /// Applies the layer to the horizontal concatenation of `parts`. Parts
    /// with a single row are broadcast across the rows of the others.
    pub fn forward_parts(&self, tape: &mut Tape, parts: &[Var]) -> Var {
        let w = tape.param(self.weight);
        let b = tape.param(self.bias);
        let width: usize = parts.iter().map(|&p| tape.shape(p).1).sum();
        assert_eq!(
            width, self.in_dim,
            "linear: input width {width} != {}",
            self.in_dim
        );
        let rows = parts.iter().map(|&p| tape.shape(p).0).max().unwrap_or(1);
        let mut full: Option<Var> = None;
        let mut bcast: Option<Var> = Some(b);
        let mut start = 0;
        for &p in parts {
            let (r, c) = tape.shape(p);
            if c == 0 {
                continue;
            }
            let y = tape.matmul_rows(p, w, start);
            start += c;
            if r == rows && rows != 1 {
                full = Some(match full {
                    Some(f) => tape.add(f, y),
                    None => y,
                });
            } else {
                assert_eq!(r, 1, "linear: incompatible row counts");
                bcast = Some(match bcast {
                    Some(f) => tape.add(f, y),
                    None => y,
                });
            }
        }
        let row = bcast.expect("bias present");
        match full {
            Some(f) => tape.add_row(f, row),
            None => {
                if rows == 1 {
                    row
                } else {
                    let z = tape.zeros(rows, self.out_dim);
                    tape.add_row(z, row)
                }
            }
        }
    }
}

fn lookup(store: &ParameterStore, name: &str) -> Result<ParamId, NnError> {
    store
        .id(name)
        .ok_or_else(|| NnError::MissingParameter(name.to_string()))
}

/// Linear layers with ReLU between them (none after the last).
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `dims = [in, hidden…, out]`; layers are named `<name>.<i>`.
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        dims: &[usize],
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { layers })
    }

    pub fn bind(store: &ParameterStore, name: &str) -> Result<Self, NnError> {
        let mut layers = Vec::new();
        while store
            .id(&format!("{name}.{}.weight", layers.len()))
            .is_some()
        {
            layers.push(Linear::bind(store, &format!("{name}.{}", layers.len()))?);
        }
        if layers.is_empty() {
            return Err(NnError::MissingParameter(format!("{name}.0.weight")));
        }
        Ok(Self { layers })
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("nonempty").out_dim
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Var {
        self.forward_parts(tape, &[x])
    }

    pub fn forward_parts(&self, tape: &mut Tape, parts: &[Var]) -> Var {
        let mut h = self.layers[0].forward_parts(tape, parts);
        for layer in &self.layers[1..] {
            h = tape.relu(h);
            h = layer.forward(tape, h);
        }
        h
    }
}

/// Gated recurrent unit. Input-side weights `<name>.input` map to the
/// stacked (reset, update, candidate) pre-activations and carry the biases;
/// `<name>.hidden.weight` is the bias-free hidden-side counterpart.
#[derive(Clone, Debug)]
pub struct GruCell {
    pub input: Linear,
    pub hidden: ParamId,
    pub dim: usize,
}

impl GruCell {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        in_dim: usize,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let input = Linear::new(store, &format!("{name}.input"), in_dim, 3 * dim, rng)?;
        let hidden = store.add_uniform(&format!("{name}.hidden.weight"), dim, 3 * dim, rng)?;
        Ok(Self { input, hidden, dim })
    }

    pub fn bind(store: &ParameterStore, name: &str) -> Result<Self, NnError> {
        let input = Linear::bind(store, &format!("{name}.input"))?;
        let hidden = lookup(store, &format!("{name}.hidden.weight"))?;
        let dim = input.out_dim / 3;
        if store.value(hidden).dim() != (dim, 3 * dim) {
            return Err(NnError::Shape(format!("{name}: hidden weight shape")));
        }
        Ok(Self { input, hidden, dim })
    }

    /// `r = σ(x W_r + h U_r + b_r)`, `u = σ(x W_u + h U_u + b_u)`,
    /// `n = tanh(x W_n + r ⊙ (h U_n) + b_n)`, `h' = (1 − u) ⊙ n + u ⊙ h`.
    pub fn forward(&self, tape: &mut Tape, x: Var, h: Var) -> Var {
        let gh = self.project_hidden(tape, h);
        self.forward_projected(tape, x, h, gh)
    }

    /// `h U` for all three gates (N×3d).
    pub fn project_hidden(&self, tape: &mut Tape, h: Var) -> Var {
        let u_h = tape.param(self.hidden);
        tape.matmul(h, u_h)
    }

    /// [`GruCell::forward`] with `gh = h U` supplied by the caller.
    pub fn forward_projected(&self, tape: &mut Tape, x: Var, h: Var, gh: Var) -> Var {
        let d = self.dim;
        let gx = self.input.forward(tape, x);
        let (xr, xu, xn) = (
            tape.slice_cols(gx, 0, d),
            tape.slice_cols(gx, d, d),
            tape.slice_cols(gx, 2 * d, d),
        );
        let (hr, hu, hn) = (
            tape.slice_cols(gh, 0, d),
            tape.slice_cols(gh, d, d),
            tape.slice_cols(gh, 2 * d, d),
        );
        let r = tape.add(xr, hr);
        let r = tape.sigmoid(r);
        let u = tape.add(xu, hu);
        let u = tape.sigmoid(u);
        let rn = tape.mul(r, hn);
        let n = tape.add(xn, rn);
        let n = tape.tanh(n);
        let keep = tape.affine(u, -1.0, 1.0);
        let a = tape.mul(keep, n);
        let b = tape.mul(u, h);
        tape.add(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Gradients;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_examples() {
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l = Linear::new(&mut store, "id", 2, 2, &mut rng).unwrap();
        *store.value_mut(l.weight) = Array2::eye(2);
        let mut t = Tape::new(&store);
        let x = t.row(&[1.0, 2.0]);
        let y = l.forward(&mut t, x);
        assert_eq!(t.value(y), array![[1.0, 2.0]]);

        let mut store = ParameterStore::new();
        let l = Linear::new(&mut store, "sum", 2, 1, &mut rng).unwrap();
        *store.value_mut(l.weight) = array![[1.0], [1.0]];
        let mut t = Tape::new(&store);
        let x = t.row(&[2.0, 3.0]);
        let y = l.forward(&mut t, x);
        assert_eq!(t.value(y), array![[5.0]]);
    }

    #[test]
    fn forward_parts_equals_concat() {
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = Linear::new(&mut store, "l", 5, 3, &mut rng).unwrap();
        *store.value_mut(l.bias) = array![[0.1, -0.2, 0.3]];
        let mut t = Tape::new(&store);
        let a = t.constant(array![[1.0, 2.0], [3.0, 4.0]]);
        let c = t.row(&[0.5, -1.0, 2.0]);
        let split = l.forward_parts(&mut t, &[a, c]);
        let cc = t.constant(array![[0.5, -1.0, 2.0], [0.5, -1.0, 2.0]]);
        let joined = t.concat(&[a, cc]);
        let whole = l.forward(&mut t, joined);
        for (x, y) in t.value(split).iter().zip(t.value(whole).iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gru_zero_weights() {
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gru = GruCell::new(&mut store, "gru", 3, 3, &mut rng).unwrap();
        for id in store.ids().collect::<Vec<_>>() {
            store.value_mut(id).fill(0.0);
        }
        let mut t = Tape::new(&store);
        let x = t.row(&[1.0, -2.0, 0.5]);
        let h = t.row(&[0.4, -0.6, 2.0]);
        let out = gru.forward(&mut t, x, h);
        assert_eq!(t.value(out), array![[0.2, -0.3, 1.0]]);
        let z = t.row(&[0.0, 0.0, 0.0]);
        let out = gru.forward(&mut t, x, z);
        assert_eq!(t.value(out), array![[0.0, 0.0, 0.0]]);
    }

    #[test]
    fn gru_matches_reference_formula() {
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gru = GruCell::new(&mut store, "gru", 2, 2, &mut rng).unwrap();
        let mut b = Array2::zeros((1, 6));
        b.iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = 0.1 * i as f64 - 0.2);
        *store.value_mut(gru.input.bias) = b;
        let x = array![[0.7, -0.3]];
        let h = array![[0.2, 0.9]];
        let wi = store.value(gru.input.weight).clone();
        let bi = store.value(gru.input.bias).clone();
        let wh = store.value(gru.hidden).clone();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let gx = x.dot(&wi) + &bi;
        let gh = h.dot(&wh);
        let mut expect = [0.0; 2];
        for j in 0..2 {
            let r = sig(gx[[0, j]] + gh[[0, j]]);
            let u = sig(gx[[0, 2 + j]] + gh[[0, 2 + j]]);
            let n = (gx[[0, 4 + j]] + r * gh[[0, 4 + j]]).tanh();
            expect[j] = (1.0 - u) * n + u * h[[0, j]];
        }
        let mut t = Tape::new(&store);
        let xv = t.constant(x);
        let hv = t.constant(h);
        let out = gru.forward(&mut t, xv, hv);
        for j in 0..2 {
            assert!((t.value(out)[[0, j]] - expect[j]).abs() < 1e-14);
        }
        let s = t.sum(out);
        let mut g = Gradients::zeros_like(&store);
        t.backward(s, &mut g);
        assert!(g.is_finite());
    }

    #[test]
    fn bind_recovers_layers() {
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        Mlp::new(&mut store, "m", &[4, 8, 8, 2], &mut rng).unwrap();
        let m = Mlp::bind(&store, "m").unwrap();
        assert_eq!(m.layers.len(), 3);
        assert_eq!(m.out_dim(), 2);
        assert!(matches!(
            Mlp::bind(&store, "missing"),
            Err(NnError::MissingParameter(_))
        ));
    }
}
