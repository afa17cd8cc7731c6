//! Symbolic time functions with exact derivatives.
//!
//! Every component is a polynomial plus a sum of sinusoids
//! `amplitude * sin(frequency * t + phase)` (angular frequency), so
//! derivatives of any order are available in closed form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub component: usize,
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Sinusoid {
    fn derivative(&self, t: f64, k: usize) -> f64 {
        let w = self.frequency;
        self.amplitude
            * w.powi(k as i32)
            * (w * t + self.phase + k as f64 * std::f64::consts::FRAC_PI_2).sin()
    }
}

/// Vector-valued forcing `t -> R^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ForcingRepr", into = "ForcingRepr")]
pub struct ForcingFunction {
    poly: Vec<Vec<f64>>,
    sin: Vec<Sinusoid>,
    max_order: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct ForcingRepr {
    #[serde(default)]
    poly: Vec<Vec<f64>>,
    #[serde(default)]
    sin: Vec<Sinusoid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_order: Option<usize>,
}

impl TryFrom<ForcingRepr> for ForcingFunction {
    type Error = Error;

    fn try_from(r: ForcingRepr) -> Result<Self> {
        let dim = r.poly.len();
        if let Some(s) = r.sin.iter().find(|s| s.component >= dim) {
            return Err(Error::Data(format!(
                "sinusoid component {} out of range (dimension {dim})",
                s.component
            )));
        }
        let finite = r.poly.iter().flatten().all(|c| c.is_finite())
            && r
                .sin
                .iter()
                .all(|s| s.amplitude.is_finite() && s.frequency.is_finite() && s.phase.is_finite());
        if !finite {
            return Err(Error::Data("non-finite forcing coefficient".into()));
        }
        Ok(ForcingFunction {
            poly: r.poly,
            sin: r.sin,
            max_order: r.max_order,
        })
    }
}

impl From<ForcingFunction> for ForcingRepr {
    fn from(f: ForcingFunction) -> Self {
        ForcingRepr {
            poly: f.poly,
            sin: f.sin,
            max_order: f.max_order,
        }
    }
}

fn falling_factorial(j: usize, k: usize) -> f64 {
    ((j - k + 1)..=j).fold(1.0, |acc, v| acc * v as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    falling_factorial(n, k) / falling_factorial(k, k)
}

fn poly_derivative(coeffs: &[f64], t: f64, k: usize) -> f64 {
    // Horner on the differentiated coefficients.
    let mut acc = 0.0;
    for j in (k..coeffs.len()).rev() {
        acc = acc * t + coeffs[j] * falling_factorial(j, k);
    }
    acc
}

impl ForcingFunction {
    pub fn zeros(dim: usize) -> Self {
        ForcingFunction {
            poly: vec![Vec::new(); dim],
            sin: Vec::new(),
            max_order: None,
        }
    }

    pub fn constant(values: &[f64]) -> Self {
        ForcingFunction {
            poly: values.iter().map(|&v| vec![v]).collect(),
            sin: Vec::new(),
            max_order: None,
        }
    }

    /// One coefficient list per component, ascending powers of `t`.
    pub fn polynomial(coeffs: Vec<Vec<f64>>) -> Self {
        ForcingFunction {
            poly: coeffs,
            sin: Vec::new(),
            max_order: None,
        }
    }

    pub fn with_sinusoid(mut self, s: Sinusoid) -> Result<Self> {
        if s.component >= self.dim() {
            return Err(Error::Data(format!(
                "sinusoid component {} out of range",
                s.component
            )));
        }
        self.sin.push(s);
        Ok(self)
    }

    /// Declares the highest derivative order callers may request.
    pub fn with_max_order(mut self, order: usize) -> Self {
        self.max_order = Some(order);
        self
    }

    pub fn dim(&self) -> usize {
        self.poly.len()
    }

    pub fn max_order(&self) -> Option<usize> {
        self.max_order
    }

    pub fn check_order(&self, k: usize) -> Result<()> {
        match self.max_order {
            Some(m) if k > m => Err(Error::Differentiability {
                requested: k,
                available: m,
            }),
            _ => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.poly.iter().flatten().all(|&c| c == 0.0) && self.sin.iter().all(|s| s.amplitude == 0.0)
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        self.derivative_unchecked(t, 0)
    }

    /// k-th derivative at `t`.
    pub fn derivative(&self, t: f64, k: usize) -> Result<DVector<f64>> {
        self.check_order(k)?;
        Ok(self.derivative_unchecked(t, k))
    }

    fn derivative_unchecked(&self, t: f64, k: usize) -> DVector<f64> {
        let mut out = DVector::from_iterator(
            self.dim(),
            self.poly.iter().map(|c| poly_derivative(c, t, k)),
        );
        for s in &self.sin {
            out[s.component] += s.derivative(t, k);
        }
        out
    }

    /// The function `t -> self(t + dt)`.
    pub fn shifted(&self, dt: f64) -> Self {
        let poly = self
            .poly
            .iter()
            .map(|c| {
                (0..c.len())
                    .map(|k| {
                        (k..c.len())
                            .map(|j| c[j] * binomial(j, k) * dt.powi((j - k) as i32))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let sin = self
            .sin
            .iter()
            .map(|s| Sinusoid {
                phase: s.phase + s.frequency * dt,
                ..s.clone()
            })
            .collect();
        ForcingFunction {
            poly,
            sin,
            max_order: self.max_order,
        }
    }

    /// The function `t -> m * self(t)`.
    pub fn transform(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "cannot apply {}x{} matrix to forcing of dimension {}",
                m.nrows(),
                m.ncols(),
                self.dim()
            )));
        }
        let mut poly = vec![Vec::new(); m.nrows()];
        for (r, out) in poly.iter_mut().enumerate() {
            for (c, coeffs) in self.poly.iter().enumerate() {
                let w = m[(r, c)];
                if w == 0.0 {
                    continue;
                }
                if out.len() < coeffs.len() {
                    out.resize(coeffs.len(), 0.0);
                }
                for (o, v) in out.iter_mut().zip(coeffs) {
                    *o += w * v;
                }
            }
        }
        let mut sin = Vec::new();
        for s in &self.sin {
            for r in 0..m.nrows() {
                let w = m[(r, s.component)];
                if w != 0.0 {
                    sin.push(Sinusoid {
                        component: r,
                        amplitude: w * s.amplitude,
                        ..s.clone()
                    });
                }
            }
        }
        Ok(ForcingFunction {
            poly,
            sin,
            max_order: self.max_order,
        })
    }

    /// Components `range` as a new forcing.
    pub fn rows(&self, range: std::ops::Range<usize>) -> Self {
        let start = range.start;
        let sin = self
            .sin
            .iter()
            .filter(|s| range.contains(&s.component))
            .map(|s| Sinusoid {
                component: s.component - start,
                ..s.clone()
            })
            .collect();
        ForcingFunction {
            poly: self.poly[range].to_vec(),
            sin,
            max_order: self.max_order,
        }
    }

    /// `[self; other]`.
    pub fn stack(&self, other: &ForcingFunction) -> Self {
        let offset = self.dim();
        let mut poly = self.poly.clone();
        poly.extend(other.poly.iter().cloned());
        let mut sin = self.sin.clone();
        sin.extend(other.sin.iter().map(|s| Sinusoid {
            component: s.component + offset,
            ..s.clone()
        }));
        let max_order = match (self.max_order, other.max_order) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        ForcingFunction {
            poly,
            sin,
            max_order,
        }
    }
}

/// Initial trajectory on `[-tau, 0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HistoryFunction(ForcingFunction);

impl HistoryFunction {
    pub fn new(f: ForcingFunction) -> Self {
        HistoryFunction(f)
    }

    pub fn constant(z: &[f64]) -> Self {
        HistoryFunction(ForcingFunction::constant(z))
    }

    pub fn polynomial(coeffs: Vec<Vec<f64>>) -> Self {
        HistoryFunction(ForcingFunction::polynomial(coeffs))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn declared_order(&self) -> Option<usize> {
        self.0.max_order()
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        self.0.eval(t)
    }

    pub fn derivative(&self, t: f64, k: usize) -> Result<DVector<f64>> {
        self.0.derivative(t, k)
    }

    pub fn as_forcing(&self) -> &ForcingFunction {
        &self.0
    }
}
