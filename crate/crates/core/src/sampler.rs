//! Random variates for the Walk-on-Spheres estimator.
//!
//! Two radial laws are needed: the radius `|Y|` of the point where an
//! isotropic α-stable process started at the origin first leaves the unit
//! ball, and the radius of the normalized occupation measure of that ball.
//! The first has a closed-form inverse CDF through the inverse incomplete
//! beta function; the second is inverted by safeguarded Newton iteration.
//! Directions are drawn separately and multiplied by the radius.
//!
//! # Reproducibility
//!
//! All randomness flows through [`RngStream`], a ChaCha8 generator keyed by
//! `(seed, stream id)`. The estimator uses stream id
//! `point_index * 2^32 + path_index` so that results do not depend on how
//! work is scheduled across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{inv_reg_inc_beta_pair, ln_beta, reg_inc_beta_pair, BetaPair};

/// Dimension `d >= 2` and stability index `alpha` in the open interval (0, 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalParams {
    dim: usize,
    alpha: f64,
}

impl FractionalParams {
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain(format!("dimension must be at least 2, got {dim}")));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 2), got {alpha}")));
        }
        Ok(Self { dim, alpha })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Deterministic random stream keyed by `(seed, stream id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, seed, stream }
    }

    /// Stream for Monte Carlo path `path` of training point `point`.
    pub fn for_path(seed: u64, point: u32, path: u32) -> Self {
        Self::new(seed, path_stream_id(point, path))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub fn path_stream_id(point: u32, path: u32) -> u64 {
    ((point as u64) << 32) | path as u64
}

/// How unit directions are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionMode {
    /// Polar-angle recursion with every angle uniform. Not the uniform
    /// surface measure for `d >= 3`.
    PaperAngles,
    /// Normalized standard normal vector; uniform on the sphere.
    #[default]
    Isotropic,
}

pub fn sample_unit_direction(d: usize, mode: DirectionMode, rng: &mut RngStream) -> Result<Vec<f64>> {
    if d < 2 {
        return Err(Error::Domain(format!(
            "direction dimension must be at least 2, got {d}"
        )));
    }
    let mut w = vec![0.0; d];
    fill_unit_direction(&mut w, mode, rng);
    Ok(w)
}

pub(crate) fn fill_unit_direction(w: &mut [f64], mode: DirectionMode, rng: &mut RngStream) {
    let d = w.len();
    match mode {
        DirectionMode::Isotropic => loop {
            let mut norm2 = 0.0;
            for wi in w.iter_mut() {
                *wi = rng.normal();
                norm2 += *wi * *wi;
            }
            if norm2 > 0.0 {
                let inv = 1.0 / norm2.sqrt();
                w.iter_mut().for_each(|wi| *wi *= inv);
                return;
            }
        },
        DirectionMode::PaperAngles => {
            // theta_1..theta_{d-2} on (0, pi), theta_{d-1} on (0, 2 pi)
            let mut sin_prod = 1.0;
            for (i, wi) in w.iter_mut().enumerate().take(d - 1) {
                let span = if i == d - 2 {
                    2.0 * std::f64::consts::PI
                } else {
                    std::f64::consts::PI
                };
                let theta = span * rng.uniform();
                *wi = theta.cos() * sin_prod;
                sin_prod *= theta.sin();
            }
            w[d - 1] = sin_prod;
        }
    }
}

/// Law of the exit radius `|Y| > 1` from the unit ball.
///
/// `F(r) = 1 - I(1/r^2; alpha/2, 1 - alpha/2) = I(1 - 1/r^2; 1 - alpha/2, alpha/2)`.
/// The law does not depend on the dimension.
///
/// For `alpha` close to 2 most of the mass sits within 1e-10 of `r = 1`,
/// below the resolution of `f64` around one. The `*_excess` functions use
/// `e = r - 1` as coordinate, which stays exact there.
#[derive(Debug, Clone, Copy)]
pub struct ExitRadiusLaw {
    shape: BetaPair,
}

impl ExitRadiusLaw {
    pub fn new(p: &FractionalParams) -> Self {
        let half = 0.5 * p.alpha;
        Self {
            shape: BetaPair::new(1.0 - half, half).expect("alpha in (0, 2)"),
        }
    }

    pub fn cdf_excess(&self, excess: f64) -> Result<f64> {
        if !(excess >= 0.0) {
            return Err(Error::Domain(format!("exit radius excess must be >= 0, got {excess}")));
        }
        if excess == f64::INFINITY {
            return Ok(1.0);
        }
        let r = 1.0 + excess;
        let (z, y) = if excess < 1.0 {
            // z = 1 - 1/r^2 without cancellation
            (excess * (2.0 + excess) / (r * r), 1.0 / (r * r))
        } else {
            let y = 1.0 / (r * r);
            (1.0 - y, y)
        };
        Ok(reg_inc_beta_pair(z, y, self.shape)?.0)
    }

    pub fn cdf(&self, r: f64) -> Result<f64> {
        if !(r > 1.0) {
            return Err(Error::Domain(format!("exit radius must exceed 1, got {r}")));
        }
        self.cdf_excess(r - 1.0)
    }

    /// `F^{-1}(u) - 1`.
    pub fn inverse_cdf_excess(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::Domain(format!(
                "exit radius quantile needs u in [0, 1), got {u}"
            )));
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        let (z, y) = inv_reg_inc_beta_pair(u, self.shape)?;
        if y <= 0.0 {
            return Err(Error::Numerical(format!("exit radius overflow at u = {u}")));
        }
        if z < 0.5 {
            // (1 - z)^{-1/2} - 1
            Ok((-0.5 * (-z).ln_1p()).exp_m1())
        } else {
            Ok(1.0 / y.sqrt() - 1.0)
        }
    }

    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        Ok(1.0 + self.inverse_cdf_excess(u)?)
    }

    /// Draws a radius strictly greater than one.
    pub fn sample(&self, rng: &mut RngStream) -> Result<f64> {
        let r = self.inverse_cdf(rng.uniform())?;
        // mass below the first float above one is rounded up to it
        Ok(r.max(1.0f64.next_up()))
    }
}

pub fn exit_radius_cdf(r: f64, p: &FractionalParams) -> Result<f64> {
    ExitRadiusLaw::new(p).cdf(r)
}

pub fn exit_radius_inverse_cdf(u: f64, p: &FractionalParams) -> Result<f64> {
    ExitRadiusLaw::new(p).inverse_cdf(u)
}

/// Point `Y = R w` where an α-stable process from the origin leaves the unit ball.
pub fn sample_exit_point(p: &FractionalParams, mode: DirectionMode, rng: &mut RngStream) -> Result<Vec<f64>> {
    let law = ExitRadiusLaw::new(p);
    let mut y = vec![0.0; p.dim];
    let r = law.sample(rng)?;
    fill_unit_direction(&mut y, mode, rng);
    y.iter_mut().for_each(|yi| *yi *= r);
    Ok(y)
}

/// Radial law of the normalized occupation measure of the unit ball.
///
/// With `c = B(d/2 - alpha/2, alpha/2) / B(d/2, alpha/2)`:
///
/// * density `alpha c r^{alpha-1} (1 - I(r^2; d/2 - alpha/2, alpha/2))`
/// * CDF `I(r^2; d/2, alpha/2) + c r^alpha (1 - I(r^2; d/2 - alpha/2, alpha/2))`
#[derive(Debug, Clone, Copy)]
pub struct InnerRadiusLaw {
    alpha: f64,
    outer: BetaPair,
    inner: BetaPair,
    ratio: f64,
}

impl InnerRadiusLaw {
    pub fn new(p: &FractionalParams) -> Self {
        let half_d = 0.5 * p.dim as f64;
        let half_a = 0.5 * p.alpha;
        let outer = BetaPair::new(half_d, half_a).expect("valid params");
        let inner = BetaPair::new(half_d - half_a, half_a).expect("valid params");
        Self {
            alpha: p.alpha,
            outer,
            inner,
            ratio: (ln_beta(inner) - ln_beta(outer)).exp(),
        }
    }

    /// `(F(r), f(r))` for `r` in `[0, 1]`; shares the incomplete beta term.
    pub fn cdf_and_pdf(&self, r: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Domain(format!("inner radius must lie in [0, 1], got {r}")));
        }
        if r == 0.0 {
            let pdf = if self.alpha < 1.0 {
                f64::INFINITY
            } else if self.alpha == 1.0 {
                self.ratio
            } else {
                0.0
            };
            return Ok((0.0, pdf));
        }
        if r == 1.0 {
            return Ok((1.0, 0.0));
        }
        let x = r * r;
        let y = (1.0 - r) * (1.0 + r);
        let (_, tail) = reg_inc_beta_pair(x, y, self.inner)?;
        let (lower, _) = reg_inc_beta_pair(x, y, self.outer)?;
        let r_pow = r.powf(self.alpha);
        let cdf = (lower + r_pow * self.ratio * tail).min(1.0);
        let pdf = self.alpha * self.ratio * (r_pow / r) * tail;
        Ok((cdf, pdf))
    }

    pub fn cdf(&self, r: f64) -> Result<f64> {
        Ok(self.cdf_and_pdf(r)?.0)
    }

    pub fn pdf(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Domain(format!(
                "inner radius density needs r in (0, 1), got {r}"
            )));
        }
        Ok(self.cdf_and_pdf(r)?.1)
    }
}

pub fn inner_radius_pdf(r: f64, p: &FractionalParams) -> Result<f64> {
    InnerRadiusLaw::new(p).pdf(r)
}

pub fn inner_radius_cdf(r: f64, p: &FractionalParams) -> Result<f64> {
    InnerRadiusLaw::new(p).cdf(r)
}

/// Outcome of one inner-radius draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerRadiusDraw {
    pub radius: f64,
    /// Newton iterations spent, including those before a bisection fallback.
    pub newton_iterations: usize,
    pub bisection_iterations: usize,
}

/// Newton-Raphson inversion of the inner-radius CDF.
#[derive(Debug, Clone, Copy)]
pub struct InnerRadiusSampler {
    law: InnerRadiusLaw,
    start: f64,
    delta: f64,
    max_newton: usize,
}

pub const DEFAULT_NEWTON_START: f64 = 0.5;
pub const DEFAULT_NEWTON_DELTA: f64 = 1e-3;
pub const DEFAULT_MAX_NEWTON: usize = 100;
const MAX_BISECTION: usize = 200;

impl InnerRadiusSampler {
    pub fn new(p: &FractionalParams, start: f64, delta: f64) -> Result<Self> {
        if !(start > 0.0 && start < 1.0) {
            return Err(Error::Domain(format!("Newton start must lie in (0, 1), got {start}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!(
                "Newton tolerance must lie in (0, 1), got {delta}"
            )));
        }
        Ok(Self {
            law: InnerRadiusLaw::new(p),
            start,
            delta,
            max_newton: DEFAULT_MAX_NEWTON,
        })
    }

    pub fn with_max_newton(mut self, max_newton: usize) -> Self {
        self.max_newton = max_newton;
        self
    }

    pub fn law(&self) -> &InnerRadiusLaw {
        &self.law
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<InnerRadiusDraw> {
        self.invert(rng.uniform())
    }

    /// Solves `|F(R) - u| < delta` for a given uniform `u`.
    pub fn invert(&self, u: f64) -> Result<InnerRadiusDraw> {
        let mut r = self.start;
        let mut newton_iterations = 0;
        while newton_iterations < self.max_newton {
            let (f, density) = self.law.cdf_and_pdf(r)?;
            let residual = f - u;
            if residual.abs() < self.delta {
                return Ok(InnerRadiusDraw {
                    radius: r,
                    newton_iterations,
                    bisection_iterations: 0,
                });
            }
            newton_iterations += 1;
            let next = r - residual / density;
            if !(next > 0.0 && next < 1.0) {
                break;
            }
            r = next;
        }

        let (mut lo, mut hi) = (0.0, 1.0);
        for i in 1..=MAX_BISECTION {
            let mid = 0.5 * (lo + hi);
            let residual = self.law.cdf(mid)? - u;
            if residual.abs() < self.delta {
                return Ok(InnerRadiusDraw {
                    radius: mid,
                    newton_iterations,
                    bisection_iterations: i,
                });
            }
            if residual < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::Numerical(format!(
            "inner radius inversion failed for u = {u} (bracket [{lo}, {hi}])"
        )))
    }
}

pub fn sample_inner_radius(p: &FractionalParams, r0: f64, delta: f64, rng: &mut RngStream) -> Result<f64> {
    Ok(InnerRadiusSampler::new(p, r0, delta)?.sample(rng)?.radius)
}

/// Point `v = R w` inside the unit ball with the normalized occupation law.
pub fn sample_inner_point(p: &FractionalParams, mode: DirectionMode, rng: &mut RngStream) -> Result<Vec<f64>> {
    let sampler = InnerRadiusSampler::new(p, DEFAULT_NEWTON_START, DEFAULT_NEWTON_DELTA)?;
    let mut v = vec![0.0; p.dim];
    fill_inner_point(&mut v, &sampler, mode, rng)?;
    Ok(v)
}

pub(crate) fn fill_inner_point(
    v: &mut [f64],
    sampler: &InnerRadiusSampler,
    mode: DirectionMode,
    rng: &mut RngStream,
) -> Result<()> {
    let r = sampler.sample(rng)?.radius;
    fill_unit_direction(v, mode, rng);
    v.iter_mut().for_each(|vi| *vi *= r);
    Ok(())
}

/// Uniform point in the origin-centred ball of radius `radius`.
pub fn uniform_in_ball(d: usize, radius: f64, rng: &mut RngStream) -> Vec<f64> {
    let mut x = vec![0.0; d];
    fill_unit_direction(&mut x, DirectionMode::Isotropic, rng);
    let r = radius * rng.uniform().powf(1.0 / d as f64);
    x.iter_mut().for_each(|xi| *xi *= r);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::stats::ks_distance;
    use std::f64::consts::PI;

    fn params(d: usize, alpha: f64) -> FractionalParams {
        FractionalParams::new(d, alpha).unwrap()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn params_validation() {
        assert!(FractionalParams::new(1, 1.0).is_err());
        assert!(FractionalParams::new(2, 0.0).is_err());
        assert!(FractionalParams::new(2, 2.0).is_err());
        assert!(FractionalParams::new(2, f64::NAN).is_err());
        assert!(FractionalParams::new(15, 1.99).is_ok());
    }

    #[test]
    fn streams_replay_and_differ() {
        let a: Vec<f64> = {
            let mut r = RngStream::new(7, 3);
            (0..10).map(|_| r.uniform()).collect()
        };
        let b: Vec<f64> = {
            let mut r = RngStream::new(7, 3);
            (0..10).map(|_| r.uniform()).collect()
        };
        let c: Vec<f64> = {
            let mut r = RngStream::new(7, 4);
            (0..10).map(|_| r.uniform()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(path_stream_id(3, 5), (3u64 << 32) + 5);
    }

    #[test]
    fn directions_have_unit_norm() {
        let mut rng = RngStream::new(1, 0);
        for d in 2..=15 {
            for mode in [DirectionMode::Isotropic, DirectionMode::PaperAngles] {
                for _ in 0..100 {
                    let w = sample_unit_direction(d, mode, &mut rng).unwrap();
                    assert!((norm(&w) - 1.0).abs() < 1e-12);
                }
            }
        }
        assert!(sample_unit_direction(1, DirectionMode::Isotropic, &mut rng).is_err());
    }

    #[test]
    fn isotropic_moments() {
        let mut rng = RngStream::new(11, 0);
        let n = 100_000;
        let mut mean3 = [0.0; 3];
        for _ in 0..n {
            let w = sample_unit_direction(3, DirectionMode::Isotropic, &mut rng).unwrap();
            for i in 0..3 {
                mean3[i] += w[i] / n as f64;
            }
        }
        assert!(mean3.iter().all(|m| m.abs() < 0.02), "{mean3:?}");

        let mut sq5 = [0.0; 5];
        for _ in 0..n {
            let w = sample_unit_direction(5, DirectionMode::Isotropic, &mut rng).unwrap();
            for i in 0..5 {
                sq5[i] += w[i] * w[i] / n as f64;
            }
        }
        assert!(sq5.iter().all(|m| (m - 0.2).abs() < 0.01), "{sq5:?}");
    }

    #[test]
    fn isotropic_moments_survive_rotation() {
        // fixed rotation in the (x1, x2) and (x2, x3) planes
        let (c1, s1) = (0.6f64, 0.8f64);
        let (c2, s2) = ((0.3f64).cos(), (0.3f64).sin());
        let rotate = |w: &[f64]| {
            let a = [c1 * w[0] - s1 * w[1], s1 * w[0] + c1 * w[1], w[2]];
            [a[0], c2 * a[1] - s2 * a[2], s2 * a[1] + c2 * a[2]]
        };
        let mut rng = RngStream::new(12, 0);
        let n = 100_000;
        let mut mean = [0.0; 3];
        let mut sq = [0.0; 3];
        for _ in 0..n {
            let w = rotate(&sample_unit_direction(3, DirectionMode::Isotropic, &mut rng).unwrap());
            for i in 0..3 {
                mean[i] += w[i] / n as f64;
                sq[i] += w[i] * w[i] / n as f64;
            }
        }
        assert!(mean.iter().all(|m| m.abs() < 0.02));
        assert!(sq.iter().all(|m| (m - 1.0 / 3.0).abs() < 0.01));
    }

    #[test]
    fn paper_angles_d3_is_not_uniform() {
        // w_1 = cos(theta_1) with theta_1 uniform: E[w_1^2] = 1/2, not 1/3
        let mut rng = RngStream::new(13, 0);
        let n = 50_000;
        let m: f64 = (0..n)
            .map(|_| sample_unit_direction(3, DirectionMode::PaperAngles, &mut rng).unwrap()[0].powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((m - 0.5).abs() < 0.01, "{m}");
    }

    #[test]
    fn exit_cdf_values() {
        let p = params(2, 1.0);
        assert!((exit_radius_cdf(2f64.sqrt(), &p).unwrap() - 0.5).abs() < 1e-12);
        let want = 1.0 - 2.0 / PI * (0.5f64).asin();
        assert!((exit_radius_cdf(2.0, &p).unwrap() - want).abs() < 1e-12);
        assert!(exit_radius_cdf(1.0 + 1e-12, &p).unwrap() < 1e-5);
        assert!(exit_radius_cdf(1e12, &p).unwrap() > 1.0 - 1e-11);
        assert!(exit_radius_cdf(1.0, &p).is_err());
        assert!(exit_radius_cdf(0.5, &p).is_err());
    }

    #[test]
    fn exit_cdf_ignores_dimension() {
        for alpha in [0.1, 0.5, 1.0, 1.5, 1.9] {
            for r in [1.001, 1.3, 2.0, 10.0, 1e4] {
                let a = exit_radius_cdf(r, &params(2, alpha)).unwrap();
                let b = exit_radius_cdf(r, &params(15, alpha)).unwrap();
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn exit_cdf_matches_density_quadrature() {
        // F(r) = (2/π) sin(πα/2) ∫_1^r (s^2-1)^{-α/2} s^{-1} ds
        for alpha in [0.5, 1.0, 1.5] {
            let p = params(3, alpha);
            for r in [1.1, 1.5, 3.0] {
                let c = 2.0 / PI * (PI * alpha / 2.0).sin();
                // substitute s = 1 + t^k to remove the endpoint singularity
                let k = 2.0 / (2.0 - alpha);
                let upper = (r - 1.0f64).powf(1.0 / k);
                let integral = oracle::tanh_sinh(
                    |t| {
                        // s^2 - 1 = t^k (2 + t^k) and k (1 - alpha/2) = 1
                        let tk = t.powf(k);
                        k * (2.0 + tk).powf(-alpha / 2.0) / (1.0 + tk)
                    },
                    0.0,
                    upper,
                );
                let got = exit_radius_cdf(r, &p).unwrap();
                assert!(
                    (got - c * integral).abs() < 1e-9,
                    "alpha={alpha} r={r}: {got} vs {}",
                    c * integral
                );
            }
        }
    }

    #[test]
    fn exit_inverse_values() {
        let p = params(2, 1.0);
        assert_eq!(exit_radius_inverse_cdf(0.0, &p).unwrap(), 1.0);
        assert!((exit_radius_inverse_cdf(0.5, &p).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!(exit_radius_inverse_cdf(1.0, &p).is_err());
        assert!(exit_radius_inverse_cdf(-0.1, &p).is_err());
        for i in 1..100 {
            let u = i as f64 / 100.0;
            let r = exit_radius_inverse_cdf(u, &p).unwrap();
            assert!((exit_radius_cdf(r, &p).unwrap() - u).abs() < 1e-9);
        }
    }

    #[test]
    fn exit_roundtrip_in_excess_coordinate() {
        for alpha in [0.1, 0.5, 1.0, 1.5, 1.9] {
            let law = ExitRadiusLaw::new(&params(2, alpha));
            for i in 0..=999 {
                let u = i as f64 / 1000.0;
                let e = law.inverse_cdf_excess(u).unwrap();
                let back = law.cdf_excess(e).unwrap();
                assert!((back - u).abs() < 1e-9, "alpha={alpha} u={u} e={e} back={back}");
            }
        }
    }

    #[test]
    fn exit_samples_leave_ball_and_fit_law() {
        let p = params(2, 1.0);
        let law = ExitRadiusLaw::new(&p);
        let mut rng = RngStream::new(5, 0);
        let n = 100_000;
        let mut radii = Vec::with_capacity(n);
        for _ in 0..n {
            let y = sample_exit_point(&p, DirectionMode::Isotropic, &mut rng).unwrap();
            let r = norm(&y);
            assert!(r > 1.0 - 1e-15);
            radii.push(r);
        }
        let ks = ks_distance(&mut radii, |r| if r <= 1.0 { 0.0 } else { law.cdf(r).unwrap() });
        assert!(ks < 0.01, "ks = {ks}");
    }

    #[test]
    fn exit_radius_draws_exceed_one_even_near_alpha_two() {
        let law = ExitRadiusLaw::new(&params(2, 1.9));
        let mut rng = RngStream::new(6, 0);
        for _ in 0..10_000 {
            assert!(law.sample(&mut rng).unwrap() > 1.0);
        }
    }

    #[test]
    fn exit_median_alpha_1_9() {
        let p = params(2, 1.9);
        let mut rng = RngStream::new(8, 0);
        let n = 100_000;
        let mut radii: Vec<f64> = (0..n)
            .map(|_| norm(&sample_exit_point(&p, DirectionMode::Isotropic, &mut rng).unwrap()))
            .collect();
        radii.sort_by(f64::total_cmp);
        let median = 0.5 * (radii[n / 2 - 1] + radii[n / 2]);
        let want = exit_radius_inverse_cdf(0.5, &p).unwrap();
        assert!((median - want).abs() < 0.01, "{median} vs {want}");
    }

    #[test]
    fn inner_pdf_integrates_to_one() {
        for d in [2, 5, 15] {
            for alpha in [0.5, 1.0, 1.5, 1.9] {
                let law = InnerRadiusLaw::new(&params(d, alpha));
                // r = s^{1/alpha} absorbs the r^{alpha-1} factor
                let total = oracle::tanh_sinh(
                    |s| {
                        let r = s.powf(1.0 / alpha);
                        if r <= 0.0 || r >= 1.0 {
                            return 0.0;
                        }
                        law.pdf(r).unwrap() * r.powf(1.0 - alpha) / alpha
                    },
                    0.0,
                    1.0,
                );
                assert!((total - 1.0).abs() < 1e-8, "d={d} alpha={alpha}: {total}");
            }
        }
    }

    #[test]
    fn inner_closed_forms_d2_alpha1() {
        let p = params(2, 1.0);
        for i in 1..100 {
            let r = i as f64 / 100.0;
            let pdf = inner_radius_pdf(r, &p).unwrap();
            let want = PI / 2.0 * (1.0 - 2.0 / PI * r.asin());
            assert!((pdf - want).abs() < 1e-12, "r={r}");
            let cdf = inner_radius_cdf(r, &p).unwrap();
            let want = 1.0 - (1.0 - r * r).sqrt() + r * (PI / 2.0 - r.asin());
            assert!((cdf - want).abs() < 1e-12, "r={r}");
        }
        assert!((inner_radius_cdf(0.5, &p).unwrap() - 0.657_573_2).abs() < 1e-6);
        assert!(inner_radius_pdf(1.0 - 1e-12, &p).unwrap() < 1e-5);
    }

    #[test]
    fn inner_cdf_endpoints_and_domain() {
        for d in [2, 5, 15] {
            for alpha in [0.1, 1.0, 1.9] {
                let p = params(d, alpha);
                assert_eq!(inner_radius_cdf(0.0, &p).unwrap(), 0.0);
                assert_eq!(inner_radius_cdf(1.0, &p).unwrap(), 1.0);
                assert!(inner_radius_cdf(1.5, &p).is_err());
                assert!(inner_radius_pdf(0.0, &p).is_err());
                assert!(inner_radius_pdf(1.0, &p).is_err());
            }
        }
    }

    #[test]
    fn inner_cdf_is_antiderivative_of_pdf() {
        let h = 1e-5;
        for d in [2, 5, 15] {
            for alpha in [0.5, 1.0, 1.5, 1.9] {
                let law = InnerRadiusLaw::new(&params(d, alpha));
                let mut prev = 0.0;
                for i in 0..=90 {
                    let r = 0.05 + i as f64 * 0.01;
                    let fd = (law.cdf(r + h).unwrap() - law.cdf(r - h).unwrap()) / (2.0 * h);
                    let pdf = law.pdf(r).unwrap();
                    assert!((fd - pdf).abs() < 1e-6, "d={d} alpha={alpha} r={r}: {fd} vs {pdf}");
                    let f = law.cdf(r).unwrap();
                    assert!(f >= prev);
                    prev = f;
                }
            }
        }
    }

    #[test]
    fn planted_uniform_inverts() {
        for (d, alpha) in [(2, 1.0), (5, 0.5), (15, 1.9)] {
            let p = params(d, alpha);
            let sampler = InnerRadiusSampler::new(&p, 0.5, 1e-3).unwrap();
            let u = sampler.law().cdf(0.3).unwrap();
            let draw = sampler.invert(u).unwrap();
            assert!((sampler.law().cdf(draw.radius).unwrap() - u).abs() < 1e-3);
            // delta in probability space maps to delta / f(0.3) in radius
            let slack = 1e-3 / sampler.law().pdf(0.3).unwrap();
            assert!(
                (draw.radius - 0.3).abs() <= slack,
                "d={d} alpha={alpha}: {}",
                draw.radius
            );
        }
    }

    #[test]
    fn inner_sampler_rejects_bad_config() {
        let p = params(2, 1.0);
        assert!(InnerRadiusSampler::new(&p, 0.0, 1e-3).is_err());
        assert!(InnerRadiusSampler::new(&p, 0.5, 1.0).is_err());
    }

    #[test]
    fn inner_sampler_falls_back_to_bisection() {
        let p = params(2, 0.5);
        let sampler = InnerRadiusSampler::new(&p, 0.5, 1e-3).unwrap().with_max_newton(0);
        let draw = sampler.invert(0.9).unwrap();
        assert!(draw.bisection_iterations > 0);
        assert!((sampler.law().cdf(draw.radius).unwrap() - 0.9).abs() < 1e-3);
    }

    #[test]
    fn inner_newton_iteration_profile() {
        let p = params(2, 1.0);
        let sampler = InnerRadiusSampler::new(&p, 0.5, 1e-3).unwrap();
        let mut rng = RngStream::new(21, 0);
        let n = 10_000;
        let total: usize = (0..n)
            .map(|_| {
                let d = sampler.sample(&mut rng).unwrap();
                d.newton_iterations + d.bisection_iterations
            })
            .sum();
        assert!((total as f64 / n as f64) < 30.0);
    }

    #[test]
    fn inner_samples_fit_law() {
        let p = params(2, 1.0);
        let law = InnerRadiusLaw::new(&p);
        let mut rng = RngStream::new(9, 0);
        let mut radii: Vec<f64> = (0..100_000)
            .map(|_| {
                let v = sample_inner_point(&p, DirectionMode::Isotropic, &mut rng).unwrap();
                let r = norm(&v);
                assert!(r < 1.0);
                r
            })
            .collect();
        let ks = ks_distance(&mut radii, |r| law.cdf(r.min(1.0)).unwrap());
        assert!(ks < 0.01, "ks = {ks}");
    }

    #[test]
    fn inner_points_are_centered() {
        let p = params(5, 1.5);
        let mut rng = RngStream::new(10, 0);
        let n = 100_000;
        let mut sum = [0.0; 5];
        let mut sum_sq = [0.0; 5];
        for _ in 0..n {
            let v = sample_inner_point(&p, DirectionMode::Isotropic, &mut rng).unwrap();
            for i in 0..5 {
                sum[i] += v[i];
                sum_sq[i] += v[i] * v[i];
            }
        }
        for i in 0..5 {
            let mean = sum[i] / n as f64;
            let sd = (sum_sq[i] / n as f64 - mean * mean).sqrt();
            assert!(mean.abs() < 3.0 * sd / (n as f64).sqrt() + 1e-12, "coord {i}: {mean}");
        }
    }

    #[test]
    fn sampling_replays_bit_for_bit() {
        let p = params(5, 1.3);
        let run = || {
            let mut rng = RngStream::new(99, 17);
            let mut out = sample_exit_point(&p, DirectionMode::PaperAngles, &mut rng).unwrap();
            out.extend(sample_inner_point(&p, DirectionMode::Isotropic, &mut rng).unwrap());
            out.into_iter().map(f64::to_bits).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
