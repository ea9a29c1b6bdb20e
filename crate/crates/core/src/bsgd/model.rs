//! Bounded differentiable models with hand-derived gradients.
//!
//! Inputs are column indices encoded as `±1` bit vectors: coordinate `i` is
//! `1 - 2·bit_i(x)`, so a parity over a set `S` is the product of the
//! coordinates in `S`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// `f_w : X → [-1, 1]` with an explicit gradient in `w`.
pub trait ParametricModel: Send + Sync {
    fn param_count(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// `f_w(x)`.
    fn evaluate(&self, w: &[f64], x: &[f64]) -> f64;
    /// Writes `∇_w f_w(x)` into `grad` and returns `f_w(x)`.
    fn value_and_grad(&self, w: &[f64], x: &[f64], grad: &mut [f64]) -> f64;
}

/// `½ (f - y)²`; at most 2 for outputs and labels in `[-1, 1]`.
pub fn squared_loss(f: f64, y: f64) -> f64 {
    0.5 * (f - y) * (f - y)
}

/// Per-sample loss gradient `(f - y) ∇f`, written into `grad`.
pub fn loss_gradient(model: &dyn ParametricModel, w: &[f64], x: &[f64], y: f64, grad: &mut [f64]) -> f64 {
    let f = model.value_and_grad(w, x, grad);
    let r = f - y;
    grad.iter_mut().for_each(|g| *g *= r);
    squared_loss(f, y)
}

/// `tanh(⟨w, x⟩ + b)`, with the bias as the last parameter when present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearTanh {
    pub dim: usize,
    pub bias: bool,
}

impl ParametricModel for LinearTanh {
    fn param_count(&self) -> usize {
        self.dim + self.bias as usize
    }

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, w: &[f64], x: &[f64]) -> f64 {
        let mut a: f64 = w[..self.dim].iter().zip(x).map(|(w, x)| w * x).sum();
        if self.bias {
            a += w[self.dim];
        }
        a.tanh()
    }

    fn value_and_grad(&self, w: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let f = self.evaluate(w, x);
        let d = 1.0 - f * f;
        for (g, xi) in grad.iter_mut().zip(x) {
            *g = d * xi;
        }
        if self.bias {
            grad[self.dim] = d;
        }
        f
    }
}

/// One hidden tanh layer and a tanh output:
/// `tanh(Σ_j v_j tanh(⟨W_j, x⟩ + b_j) + c)`.
///
/// Parameter layout: `W` (row-major, `hidden × dim`), `b`, `v`, `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub dim: usize,
    pub hidden: usize,
}

impl Mlp {
    fn hidden_pre(&self, w: &[f64], x: &[f64], j: usize) -> f64 {
        let row = &w[j * self.dim..(j + 1) * self.dim];
        row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + w[self.hidden * self.dim + j]
    }
}

impl ParametricModel for Mlp {
    fn param_count(&self) -> usize {
        self.hidden * self.dim + 2 * self.hidden + 1
    }

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, w: &[f64], x: &[f64]) -> f64 {
        let v0 = self.hidden * self.dim + self.hidden;
        let mut a = w[v0 + self.hidden];
        for j in 0..self.hidden {
            a += w[v0 + j] * self.hidden_pre(w, x, j).tanh();
        }
        a.tanh()
    }

    fn value_and_grad(&self, w: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let (h, dim) = (self.hidden, self.dim);
        let b0 = h * dim;
        let v0 = b0 + h;
        let mut hs = [0.0f64; 256];
        let mut hv = Vec::new();
        let hid: &mut [f64] = if h <= hs.len() {
            &mut hs[..h]
        } else {
            hv.resize(h, 0.0);
            &mut hv
        };
        let mut a = w[v0 + h];
        for j in 0..h {
            hid[j] = self.hidden_pre(w, x, j).tanh();
            a += w[v0 + j] * hid[j];
        }
        let f = a.tanh();
        let d = 1.0 - f * f;
        for j in 0..h {
            grad[v0 + j] = d * hid[j];
            let dj = d * w[v0 + j] * (1.0 - hid[j] * hid[j]);
            grad[b0 + j] = dj;
            for (g, xi) in grad[j * dim..(j + 1) * dim].iter_mut().zip(x) {
                *g = dj * xi;
            }
        }
        grad[v0 + h] = d;
        f
    }
}

/// Shipped architectures.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    LinearTanh { bias: bool },
    Mlp { hidden: usize },
}

impl Architecture {
    /// `linear`, `linear-nobias`, or `mlp<width>`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Architecture::LinearTanh { bias: true }),
            "linear-nobias" => Ok(Architecture::LinearTanh { bias: false }),
            _ => s
                .strip_prefix("mlp")
                .and_then(|w| w.parse::<usize>().ok())
                .filter(|&w| w > 0)
                .map(|hidden| Architecture::Mlp { hidden })
                .ok_or_else(|| LabError::InvalidInput(format!("unknown architecture {s:?}"))),
        }
    }

    pub fn build(&self, dim: usize) -> Box<dyn ParametricModel> {
        match *self {
            Architecture::LinearTanh { bias } => Box::new(LinearTanh { dim, bias }),
            Architecture::Mlp { hidden } => Box::new(Mlp { dim, hidden }),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Architecture::LinearTanh { bias: true } => "linear".into(),
            Architecture::LinearTanh { bias: false } => "linear-nobias".into(),
            Architecture::Mlp { hidden } => format!("mlp{hidden}"),
        }
    }
}

/// Bits needed to index `cols` columns (at least one).
pub fn input_dim_for(cols: usize) -> usize {
    let mut d = 1;
    while (1usize << d) < cols {
        d += 1;
    }
    d
}

/// `±1` encoding of a column index.
pub fn encode_column(col: usize, dim: usize) -> Vec<f64> {
    (0..dim).map(|i| if col >> i & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

/// Central finite-difference gradient of the per-sample loss.
pub fn finite_difference_gradient(model: &dyn ParametricModel, w: &[f64], x: &[f64], y: f64, h: f64) -> Vec<f64> {
    let mut probe = w.to_vec();
    (0..w.len())
        .map(|i| {
            probe[i] = w[i] + h;
            let up = squared_loss(model.evaluate(&probe, x), y);
            probe[i] = w[i] - h;
            let down = squared_loss(model.evaluate(&probe, x), y);
            probe[i] = w[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - n| / max(|a|, |n|, 1e-3)`, maximized over coordinates.
pub fn gradient_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-3))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from_seed;
    use rand::Rng;

    #[test]
    fn parameter_counts() {
        assert_eq!(Mlp { dim: 10, hidden: 32 }.param_count(), 32 * 10 + 65);
        assert_eq!(LinearTanh { dim: 3, bias: true }.param_count(), 4);
        assert_eq!(Architecture::parse("mlp32").unwrap(), Architecture::Mlp { hidden: 32 });
        assert!(Architecture::parse("mlp").is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = rng_from_seed(1);
        let models: Vec<Box<dyn ParametricModel>> = vec![
            Box::new(LinearTanh { dim: 4, bias: true }),
            Box::new(Mlp { dim: 4, hidden: 5 }),
        ];
        for m in &models {
            for _ in 0..20 {
                let w: Vec<f64> = (0..m.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let x = encode_column(rng.gen_range(0..16), 4);
                let y = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let mut g = vec![0.0; m.param_count()];
                loss_gradient(m.as_ref(), &w, &x, y, &mut g);
                let n = finite_difference_gradient(m.as_ref(), &w, &x, y, 1e-4);
                assert!(gradient_relative_error(&g, &n) <= 1e-5);
            }
        }
    }

    #[test]
    fn encoding() {
        assert_eq!(encode_column(0b101, 3), vec![-1.0, 1.0, -1.0]);
        assert_eq!(input_dim_for(1024), 10);
        assert_eq!(input_dim_for(1), 1);
        assert_eq!(input_dim_for(5), 3);
    }
}
