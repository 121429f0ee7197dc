//! Benchmark Dirichlet problems on the unit ball with known solutions, and
//! the error metrics used to score a trained model against them.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::sampler::{uniform_in_ball, FractionalParams, RngStream};
use crate::specfun::ln_gamma;
use crate::wos::{Ball, Domain};

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Points with `|exact| <= MRE_EXCLUSION` are left out of the relative error.
pub const MRE_EXCLUSION: f64 = 1e-8;

/// `(-Δ)^{α/2} u = f` in the domain, `u = g` outside it.
#[derive(Clone)]
pub struct ProblemSpec {
    pub example: u8,
    pub params: FractionalParams,
    pub domain: Arc<dyn Domain>,
    /// `None` means `f = 0`, which lets the estimator skip inner sampling.
    pub source: Option<ScalarField>,
    pub boundary: ScalarField,
    pub exact: Option<ScalarField>,
    /// Train with the loss that also penalizes `R(x) != R(-x)`.
    pub radial: bool,
    /// Point where `g` and `exact` blow up, if any.
    pub singularity: Option<Vec<f64>>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("example", &self.example)
            .field("params", &self.params)
            .field("domain", &self.domain)
            .field("has_source", &self.source.is_some())
            .field("has_exact", &self.exact.is_some())
            .field("radial", &self.radial)
            .finish()
    }
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    fn eval(&self, field: &ScalarField, what: &'static str, x: &[f64]) -> Result<f64> {
        if self.singularity.as_deref() == Some(x) {
            return Err(Error::Domain(format!("{what} is singular at {x:?}")));
        }
        let v = field(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                what,
                point: x.to_vec(),
            })
        }
    }

    pub fn source_at(&self, x: &[f64]) -> Result<f64> {
        match &self.source {
            Some(f) => self.eval(f, "source", x),
            None => Ok(0.0),
        }
    }

    pub fn boundary_at(&self, x: &[f64]) -> Result<f64> {
        self.eval(&self.boundary, "boundary", x)
    }

    pub fn exact_at(&self, x: &[f64]) -> Result<f64> {
        match &self.exact {
            Some(u) => self.eval(u, "exact solution", x),
            None => Err(Error::Domain(format!("example {} has no exact solution", self.example))),
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Source constant of example 1, `2^α Γ(α/2 + d/2) Γ(α/2 + 1) / Γ(d/2)`.
pub fn example1_source(p: &FractionalParams) -> f64 {
    let (a, h) = (p.alpha(), p.dim() as f64 / 2.0);
    let ln = a * std::f64::consts::LN_2 + lg(a / 2.0 + h) + lg(a / 2.0 + 1.0) - lg(h);
    ln.exp()
}

/// `b` in example 2's source `b (1 - (1 + α/d)|x|^2)`.
pub fn example2_scale(p: &FractionalParams) -> f64 {
    let (a, h) = (p.alpha(), p.dim() as f64 / 2.0);
    let ln = a * std::f64::consts::LN_2 + lg(a / 2.0 + h) + lg(a / 2.0 + 2.0) - lg(h);
    ln.exp()
}

/// Constant of the fundamental solution `c |x|^{α - d}`.
pub fn fundamental_constant(p: &FractionalParams) -> f64 {
    let (a, h) = (p.alpha(), p.dim() as f64 / 2.0);
    let ln = lg(h - a / 2.0) - a * std::f64::consts::LN_2 - h * std::f64::consts::PI.ln() - lg(a / 2.0);
    ln.exp()
}

// arguments here are positive by construction of FractionalParams
fn lg(x: f64) -> f64 {
    ln_gamma(x).expect("positive gamma argument")
}

fn unit_ball(p: &FractionalParams) -> Arc<dyn Domain> {
    Arc::new(Ball::unit(p.dim()))
}

/// Constant source, zero exterior data, `u = (1 - |x|^2)_+^{α/2}`.
pub fn example1(p: FractionalParams) -> ProblemSpec {
    let c = example1_source(&p);
    let half = p.alpha() / 2.0;
    ProblemSpec {
        example: 1,
        params: p,
        domain: unit_ball(&p),
        source: Some(Arc::new(move |_| c)),
        boundary: Arc::new(|_| 0.0),
        exact: Some(Arc::new(move |x| (1.0 - norm2(x)).max(0.0).powf(half))),
        radial: true,
        singularity: None,
    }
}

/// Quadratic source, zero exterior data, `u = (1 - |x|^2)_+^{1 + α/2}`.
pub fn example2(p: FractionalParams) -> ProblemSpec {
    let b = example2_scale(&p);
    let k = 1.0 + p.alpha() / p.dim() as f64;
    let e = 1.0 + p.alpha() / 2.0;
    ProblemSpec {
        example: 2,
        params: p,
        domain: unit_ball(&p),
        source: Some(Arc::new(move |x| b * (1.0 - k * norm2(x)))),
        boundary: Arc::new(|_| 0.0),
        exact: Some(Arc::new(move |x| (1.0 - norm2(x)).max(0.0).powf(e))),
        radial: true,
        singularity: None,
    }
}

/// No source; exterior data and solution are the fundamental solution
/// centred at `y = (2, 0, ..., 0)`.
pub fn example3(p: FractionalParams) -> ProblemSpec {
    let c = fundamental_constant(&p);
    let e = p.alpha() - p.dim() as f64;
    let mut y = vec![0.0; p.dim()];
    y[0] = 2.0;
    let pole = y.clone();
    let u: ScalarField = Arc::new(move |x| {
        let r2: f64 = x.iter().zip(&pole).map(|(a, b)| (a - b) * (a - b)).sum();
        c * r2.powf(e / 2.0)
    });
    ProblemSpec {
        example: 3,
        params: p,
        domain: unit_ball(&p),
        source: None,
        boundary: u.clone(),
        exact: Some(u),
        radial: false,
        singularity: Some(y),
    }
}

/// No source; `g(x) = u(x) = x_1 + ... + x_d`.
pub fn example4(p: FractionalParams) -> ProblemSpec {
    let u: ScalarField = Arc::new(|x| x.iter().sum());
    ProblemSpec {
        example: 4,
        params: p,
        domain: unit_ball(&p),
        source: None,
        boundary: u.clone(),
        exact: Some(u),
        radial: false,
        singularity: None,
    }
}

pub fn example(id: u8, p: FractionalParams) -> Result<ProblemSpec> {
    match id {
        1 => Ok(example1(p)),
        2 => Ok(example2(p)),
        3 => Ok(example3(p)),
        4 => Ok(example4(p)),
        _ => Err(Error::Domain(format!("unknown example {id}, expected 1 to 4"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub mse: f64,
    pub mre: f64,
    pub n_points: usize,
    pub n_excluded: usize,
}

/// Scores predictions against the exact solution at the given points.
pub fn score(prob: &ProblemSpec, points: &[Vec<f64>], predictions: &[f64]) -> Result<MetricReport> {
    if points.is_empty() {
        return Err(Error::Domain("no evaluation points".into()));
    }
    if points.len() != predictions.len() {
        return Err(Error::Domain(format!(
            "{} points but {} predictions",
            points.len(),
            predictions.len()
        )));
    }
    let mut sq = 0.0;
    let mut rel = 0.0;
    let mut n_excluded = 0;
    for (x, &pred) in points.iter().zip(predictions) {
        let v = prob.exact_at(x)?;
        sq += (pred - v) * (pred - v);
        if v.abs() > MRE_EXCLUSION {
            rel += (pred - v).abs() / v.abs();
        } else {
            n_excluded += 1;
        }
    }
    let n = points.len();
    let kept = n - n_excluded;
    Ok(MetricReport {
        mse: sq / n as f64,
        mre: if kept > 0 { rel / kept as f64 } else { f64::NAN },
        n_points: n,
        n_excluded,
    })
}

/// Uniform evaluation points in the origin-centred ball of `region_radius`.
pub fn evaluation_points(d: usize, n: usize, region_radius: f64, rng: &mut RngStream) -> Vec<Vec<f64>> {
    (0..n).map(|_| uniform_in_ball(d, region_radius, rng)).collect()
}

/// MSE and MRE of `m` over `n` uniform points in the ball of `region_radius`.
pub fn evaluate_model(
    m: &Mlp,
    prob: &ProblemSpec,
    n: usize,
    region_radius: f64,
    rng: &mut RngStream,
) -> Result<MetricReport> {
    if prob.exact.is_none() {
        return Err(Error::Domain(format!("example {} has no exact solution", prob.example)));
    }
    let points = evaluation_points(prob.dim(), n, region_radius, rng);
    let predictions = m.predict_rows(&points)?;
    score(prob, &points, &predictions)
}
