//! Domain geometry and Walk-on-Spheres paths.
//!
//! From `rho_{n-1}` the walk jumps to `rho_n = rho_{n-1} + r_n Y_n`, where
//! `r_n` is the distance from `rho_{n-1}` to the boundary and `Y_n` is an
//! independent exit point of the unit ball. The walk stops at the first
//! `rho_N` outside the domain.

use std::io::Write;

use crate::error::{Error, Result};
use crate::sampler::{fill_unit_direction, DirectionMode, ExitRadiusLaw, FractionalParams, RngStream};

pub const DEFAULT_STEP_CAP: usize = 1_000_000;

/// A convex bounded domain known through membership and boundary distance.
pub trait Domain: Send + Sync + std::fmt::Debug {
    fn dim(&self) -> usize;

    /// Strict membership: boundary points are outside.
    fn contains(&self, x: &[f64]) -> bool;

    /// Distance from `x` to the boundary set.
    fn boundary_distance(&self, x: &[f64]) -> f64;

    /// Radius of the smallest origin-centred ball enclosing the domain.
    fn circumradius(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    center: Vec<f64>,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::Domain("ball centre must have at least one coordinate".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Domain(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            center: vec![0.0; dim],
            radius: 1.0,
        }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn dist_to_center(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            .sqrt()
    }
}

impl Domain for Ball {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn contains(&self, x: &[f64]) -> bool {
        self.dist_to_center(x) < self.radius
    }

    fn boundary_distance(&self, x: &[f64]) -> f64 {
        (self.radius - self.dist_to_center(x)).abs()
    }

    fn circumradius(&self) -> f64 {
        self.center.iter().map(|c| c * c).sum::<f64>().sqrt() + self.radius
    }
}

/// One simulated walk: points `rho_0..rho_N` and radii `r_1..r_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WosPath {
    pub points: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
}

impl WosPath {
    /// `N`, the index of the first point outside the domain.
    pub fn exit_step(&self) -> usize {
        self.radii.len()
    }

    pub fn exit_point(&self) -> &[f64] {
        self.points.last().expect("a path holds its start point")
    }

    /// CSV dump with columns `step,x_1..x_d,r`; `r` is empty for step 0.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.points.first().map_or(0, Vec::len);
        let mut header = vec!["step".to_string()];
        header.extend((1..=d).map(|i| format!("x_{i}")));
        header.push("r".into());
        writeln!(out, "{}", header.join(","))?;
        for (step, point) in self.points.iter().enumerate() {
            write!(out, "{step}")?;
            for x in point {
                write!(out, ",{x}")?;
            }
            match step.checked_sub(1).map(|i| self.radii[i]) {
                Some(r) => writeln!(out, ",{r}")?,
                None => writeln!(out, ",")?,
            }
        }
        Ok(())
    }
}

/// Summary of a walk that was not recorded point by point.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct WalkEnd {
    pub exit_point: Vec<f64>,
    pub steps: usize,
}

/// Runs one walk, calling `on_step(rho_{n-1}, r_n, rng)` before each jump.
pub(crate) fn walk<D, F>(
    dom: &D,
    x0: &[f64],
    law: &ExitRadiusLaw,
    mode: DirectionMode,
    rng: &mut RngStream,
    step_cap: usize,
    mut on_step: F,
) -> Result<WalkEnd>
where
    D: Domain + ?Sized,
    F: FnMut(&[f64], f64, &mut RngStream) -> Result<()>,
{
    if !dom.contains(x0) {
        return Err(Error::Domain(format!("walk start {x0:?} is not inside the domain")));
    }
    let mut rho = x0.to_vec();
    let mut dir = vec![0.0; x0.len()];
    let mut steps = 0;
    loop {
        if steps == step_cap {
            return Err(Error::StepCap {
                cap: step_cap,
                partial: Some(Box::new(WosPath {
                    points: vec![rho],
                    radii: Vec::new(),
                })),
            });
        }
        steps += 1;
        let r = dom.boundary_distance(&rho);
        on_step(&rho, r, rng)?;
        let radius = law.sample(rng)?;
        fill_unit_direction(&mut dir, mode, rng);
        let scale = r * radius;
        rho.iter_mut().zip(&dir).for_each(|(x, w)| *x += scale * w);
        if !dom.contains(&rho) {
            return Ok(WalkEnd { exit_point: rho, steps });
        }
    }
}

pub fn simulate_wos_path<D: Domain + ?Sized>(
    dom: &D,
    x0: &[f64],
    p: &FractionalParams,
    mode: DirectionMode,
    rng: &mut RngStream,
) -> Result<WosPath> {
    simulate_wos_path_capped(dom, x0, p, mode, rng, DEFAULT_STEP_CAP)
}

pub fn simulate_wos_path_capped<D: Domain + ?Sized>(
    dom: &D,
    x0: &[f64],
    p: &FractionalParams,
    mode: DirectionMode,
    rng: &mut RngStream,
    step_cap: usize,
) -> Result<WosPath> {
    if x0.len() != p.dim() || dom.dim() != p.dim() {
        return Err(Error::Domain(format!(
            "dimension mismatch: start has {}, domain {}, params {}",
            x0.len(),
            dom.dim(),
            p.dim()
        )));
    }
    let law = ExitRadiusLaw::new(p);
    let mut path = WosPath {
        points: vec![x0.to_vec()],
        radii: Vec::new(),
    };
    let outcome = walk(dom, x0, &law, mode, rng, step_cap, |rho, r, _| {
        if !path.radii.is_empty() {
            path.points.push(rho.to_vec());
        }
        path.radii.push(r);
        Ok(())
    });
    match outcome {
        Ok(end) => {
            path.points.push(end.exit_point);
            Ok(path)
        }
        Err(Error::StepCap { cap, partial }) => {
            if !path.radii.is_empty() {
                path.points.extend(partial.into_iter().flat_map(|p| p.points));
            }
            Err(Error::StepCap {
                cap,
                partial: Some(Box::new(path)),
            })
        }
        Err(e) => Err(e),
    }
}
