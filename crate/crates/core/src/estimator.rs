//! Monte Carlo estimation of `u(x)` by Walk-on-Spheres and training-set
//! generation.
//!
//! For `x` in the domain, one path contributes
//! `g(rho_N) + sum_n kappa r_n^alpha f(rho_{n-1} + r_n v_n)`, where `v_n` is
//! drawn from the normalized occupation measure of the unit ball. Outside
//! the domain the estimate is `g(x)`.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problems::ProblemSpec;
use crate::sampler::{
    fill_inner_point, uniform_in_ball, DirectionMode, ExitRadiusLaw, FractionalParams, InnerRadiusSampler, RngStream,
    DEFAULT_NEWTON_DELTA, DEFAULT_NEWTON_START,
};
use crate::specfun::ln_gamma;
use crate::stats::RunningStats;
use crate::wos::{walk, DEFAULT_STEP_CAP};

/// Stream id reserved for drawing training point locations.
pub const POINT_STREAM: u64 = u64::MAX;

pub const DEFAULT_SAMPLING_RADIUS: f64 = 1.5;

/// Total mass of the occupation measure of the unit ball,
/// `(2^{1-α}/α) Γ(d/2) / (Γ(α/2) Γ(d/2 + α/2))`.
pub fn kappa(p: &FractionalParams) -> f64 {
    let (a, h) = (p.alpha(), p.dim() as f64 / 2.0);
    let lg = |x: f64| ln_gamma(x).expect("positive gamma argument");
    let ln = (1.0 - a) * std::f64::consts::LN_2 - a.ln() + lg(h) - lg(a / 2.0) - lg(h + a / 2.0);
    ln.exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Paths per point, `M`.
    pub paths: usize,
    /// Draws of `v` averaged at each step.
    pub inner_samples: usize,
    pub mode: DirectionMode,
    pub nr_delta: f64,
    pub nr_start: f64,
    /// Reuse a single `v` for every step of a path.
    pub one_v_per_path: bool,
    pub step_cap: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            paths: 100,
            inner_samples: 1,
            mode: DirectionMode::Isotropic,
            nr_delta: DEFAULT_NEWTON_DELTA,
            nr_start: DEFAULT_NEWTON_START,
            one_v_per_path: false,
            step_cap: DEFAULT_STEP_CAP,
        }
    }
}

impl EstimatorConfig {
    pub fn with_paths(paths: usize) -> Self {
        Self {
            paths,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEstimate {
    pub value: f64,
    /// Empirical standard error of the path average.
    pub std_error: f64,
    pub paths: usize,
    pub mean_steps: f64,
}

/// Per-problem state shared by every path: κ and the two samplers.
#[derive(Debug)]
pub struct Estimator<'a> {
    prob: &'a ProblemSpec,
    cfg: EstimatorConfig,
    kappa: f64,
    exit: ExitRadiusLaw,
    inner: InnerRadiusSampler,
}

impl<'a> Estimator<'a> {
    pub fn new(prob: &'a ProblemSpec, cfg: EstimatorConfig) -> Result<Self> {
        if cfg.paths == 0 {
            return Err(Error::Domain("at least one path per point is required".into()));
        }
        if cfg.inner_samples == 0 {
            return Err(Error::Domain("at least one inner sample per step is required".into()));
        }
        if prob.domain.dim() != prob.dim() {
            return Err(Error::Domain(
                "problem domain and parameters disagree on dimension".into(),
            ));
        }
        let p = prob.params;
        Ok(Self {
            prob,
            cfg,
            kappa: kappa(&p),
            exit: ExitRadiusLaw::new(&p),
            inner: InnerRadiusSampler::new(&p, cfg.nr_start, cfg.nr_delta)?,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// One path from `x` (inside the domain): its value and step count.
    pub fn path_value(&self, x: &[f64], rng: &mut RngStream) -> Result<(f64, usize)> {
        let prob = self.prob;
        let alpha = prob.params.alpha();
        let d = x.len();
        let k = self.cfg.inner_samples;
        let mode = self.cfg.mode;
        let mut fixed_v = None;
        if prob.source.is_some() && self.cfg.one_v_per_path {
            let mut v = vec![0.0; d];
            fill_inner_point(&mut v, &self.inner, mode, rng)?;
            fixed_v = Some(v);
        }
        let mut v = vec![0.0; d];
        let mut y = vec![0.0; d];
        let mut acc = 0.0;
        let end = walk(
            prob.domain.as_ref(),
            x,
            &self.exit,
            mode,
            rng,
            self.cfg.step_cap,
            |rho, r, rng| {
                if prob.source.is_none() {
                    return Ok(());
                }
                let mut sum = 0.0;
                for _ in 0..k {
                    let v = match &fixed_v {
                        Some(fixed) => fixed,
                        None => {
                            fill_inner_point(&mut v, &self.inner, mode, rng)?;
                            &v
                        }
                    };
                    y.iter_mut()
                        .zip(rho.iter().zip(v))
                        .for_each(|(yi, (ri, vi))| *yi = ri + r * vi);
                    sum += prob.source_at(&y)?;
                }
                acc += self.kappa * r.powf(alpha) * sum / k as f64;
                Ok(())
            },
        )?;
        let g = prob.boundary_at(&end.exit_point)?;
        Ok((g + acc, end.steps))
    }

    /// Average of `M` paths from `x`; path `j` uses stream `(point, j)`.
    pub fn estimate(&self, x: &[f64], seed: u64, point: u32) -> Result<PointEstimate> {
        if x.len() != self.prob.dim() {
            return Err(Error::Domain(format!(
                "point has {} coordinates, problem has dimension {}",
                x.len(),
                self.prob.dim()
            )));
        }
        if !self.prob.domain.contains(x) {
            return Ok(PointEstimate {
                value: self.prob.boundary_at(x)?,
                std_error: 0.0,
                paths: 0,
                mean_steps: 0.0,
            });
        }
        let paths =
            u32::try_from(self.cfg.paths).map_err(|_| Error::Domain(format!("too many paths: {}", self.cfg.paths)))?;
        let results: Vec<(f64, usize)> = (0..paths)
            .into_par_iter()
            .map(|j| self.path_value(x, &mut RngStream::for_path(seed, point, j)))
            .collect::<Result<_>>()?;
        let stats: RunningStats = results.iter().map(|r| r.0).collect();
        let steps: usize = results.iter().map(|r| r.1).sum();
        let value = stats.mean();
        if !value.is_finite() {
            return Err(Error::NonFinite {
                what: "estimate",
                point: x.to_vec(),
            });
        }
        Ok(PointEstimate {
            value,
            std_error: stats.std_error(),
            paths: results.len(),
            mean_steps: steps as f64 / results.len() as f64,
        })
    }
}

pub fn estimate_u(
    x: &[f64],
    prob: &ProblemSpec,
    cfg: &EstimatorConfig,
    seed: u64,
    point: u32,
) -> Result<PointEstimate> {
    Estimator::new(prob, *cfg)?.estimate(x, seed, point)
}

/// Pairs `(x_k, u_hat_k)`, one row of `points` per pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub points: Array2<f64>,
    pub values: Array1<f64>,
}

impl TrainingSet {
    pub fn new(points: Array2<f64>, values: Array1<f64>) -> Result<Self> {
        if points.nrows() != values.len() {
            return Err(Error::Domain(format!(
                "{} points but {} values",
                points.nrows(),
                values.len()
            )));
        }
        Ok(Self { points, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Header `x_1,...,x_d,u_hat`, then one row per pair.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.dim()).map(|i| format!("x_{i}")).collect();
        header.push("u_hat".into());
        writeln!(out, "{}", header.join(","))?;
        for (row, u) in self.points.rows().into_iter().zip(&self.values) {
            for x in row {
                write!(out, "{x},")?;
            }
            writeln!(out, "{u}")?;
        }
        Ok(())
    }

    /// Reads the format of [`TrainingSet::write_csv`]; lines starting with
    /// `#` are skipped.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut dim = None;
        let mut flat = Vec::new();
        let mut values = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let Some(d) = dim else {
                let n = fields.len();
                let ok = n >= 2
                    && fields[n - 1] == "u_hat"
                    && fields[..n - 1]
                        .iter()
                        .enumerate()
                        .all(|(j, f)| *f == format!("x_{}", j + 1));
                if !ok {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("expected header x_1,...,x_d,u_hat, got {line:?}"),
                    });
                }
                dim = Some(n - 1);
                continue;
            };
            if fields.len() != d + 1 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {} fields, got {}", d + 1, fields.len()),
                });
            }
            for (j, f) in fields.iter().enumerate() {
                let v: f64 = f.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("invalid number {f:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("non-finite value {f:?}"),
                    });
                }
                if j < d {
                    flat.push(v);
                } else {
                    values.push(v);
                }
            }
        }
        let d = dim.ok_or(Error::Parse {
            line: 0,
            message: "missing header".into(),
        })?;
        let points = Array2::from_shape_vec((values.len(), d), flat).expect("row lengths checked");
        Self::new(points, Array1::from(values))
    }
}

/// Draws `n_points` locations uniformly in the ball of `sampling_radius` and
/// estimates `u` at each; point `k` uses path streams `(k, 0..M)`.
pub fn generate_training_set(
    prob: &ProblemSpec,
    n_points: usize,
    cfg: &EstimatorConfig,
    sampling_radius: f64,
    seed: u64,
) -> Result<TrainingSet> {
    let circumradius = prob.domain.circumradius();
    if !(sampling_radius >= circumradius) {
        return Err(Error::Domain(format!(
            "sampling radius {sampling_radius} does not cover the domain (circumradius {circumradius})"
        )));
    }
    let n = u32::try_from(n_points).map_err(|_| Error::Domain(format!("too many points: {n_points}")))?;
    let d = prob.dim();
    let est = Estimator::new(prob, *cfg)?;
    let mut rng = RngStream::new(seed, POINT_STREAM);
    let points: Vec<Vec<f64>> = (0..n).map(|_| uniform_in_ball(d, sampling_radius, &mut rng)).collect();
    let values: Vec<f64> = points
        .par_iter()
        .enumerate()
        .map(|(k, x)| est.estimate(x, seed, k as u32).map(|e| e.value))
        .collect::<Result<_>>()?;
    let flat: Vec<f64> = points.into_iter().flatten().collect();
    let points = Array2::from_shape_vec((values.len(), d), flat).expect("every point has d coordinates");
    TrainingSet::new(points, Array1::from(values))
}
