//! Metric measure spaces as sampler + distance oracle pairs, with built-in
//! homogeneous and non-homogeneous instances for simulation.
//!
//! Samplers take an explicit RNG handle owned by the caller, so parallel
//! replication uses independent per-worker streams. The `homogeneous_hint`
//! is documentation only and is never consulted by any computation — in
//! particular the symmetry test cannot cheat with it.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde_json::Value;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("density must be nonnegative and bounded by its stated sup; violated at x = {x} (f = {value}, sup = {sup})")]
    BadDensity { x: f64, value: f64, sup: f64 },
    #[error("density parameter eps must lie in [0, 1), got {0}")]
    EpsRange(f64),
    #[error("weights must be nonnegative with a positive sum")]
    BadWeights,
    #[error("finite space is not metric: {0}")]
    NotMetric(MetricViolation),
    #[error("unknown space spec {0:?}")]
    UnknownSpace(String),
    #[error("invalid finite-space JSON: {0}")]
    Json(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricViolation {
    #[error("distance matrix is not square")]
    NotSquare,
    #[error("negative entry at ({i}, {j})")]
    Negative { i: usize, j: usize },
    #[error("d({i},{i}) != 0")]
    NonzeroDiagonal { i: usize },
    #[error("d({i},{j}) != d({j},{i})")]
    Asymmetric { i: usize, j: usize },
    #[error("triangle inequality fails on witness ({i}, {j}, {k})")]
    Triangle { i: usize, j: usize, k: usize },
}

/// A sampled point; coordinates are specific to the space that produced it.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Circle(f64),
    Torus(f64, f64),
    Sphere([f64; 3]),
    Interval(f64),
    Finite(usize),
}

/// A metric measure space: a named sampler with a distance oracle and a
/// diameter bound.
pub trait MmSpace: Send + Sync {
    fn name(&self) -> &str;
    fn sample(&self, rng: &mut dyn RngCore) -> Point;
    fn distance(&self, a: &Point, b: &Point) -> f64;
    fn diameter_bound(&self) -> f64;
    /// Documentation only; no computation may read this.
    fn homogeneous_hint(&self) -> Option<bool> {
        None
    }
}

pub fn circle_distance(x: f64, y: f64) -> f64 {
    let u = (x - y).abs();
    u.min(1.0 - u)
}

/// The circle ℝ/ℤ with geodesic distance and uniform measure.
pub struct Circle;

impl MmSpace for Circle {
    fn name(&self) -> &str {
        "circle"
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Point {
        Point::Circle(rng.gen::<f64>())
    }
    fn distance(&self, a: &Point, b: &Point) -> f64 {
        match (a, b) {
            (Point::Circle(x), Point::Circle(y)) => circle_distance(*x, *y),
            _ => panic!("circle distance on foreign points"),
        }
    }
    fn diameter_bound(&self) -> f64 {
        0.5
    }
    fn homogeneous_hint(&self) -> Option<bool> {
        Some(true)
    }
}

/// The circle with measure `f(x) dx`, sampled by rejection against the
/// stated sup of the density.
pub struct DensityCircle {
    name: String,
    density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    sup: f64,
}

impl DensityCircle {
    pub fn new(
        name: impl Into<String>,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sup: f64,
    ) -> Result<Self, SpaceError> {
        if !(sup.is_finite() && sup > 0.0) {
            return Err(SpaceError::BadDensity {
                x: f64::NAN,
                value: f64::NAN,
                sup,
            });
        }
        // probe on a grid; sampling keeps checking opportunistically
        for i in 0..=2048 {
            let x = i as f64 / 2048.0;
            let v = density(x);
            if !(v.is_finite() && v >= 0.0 && v <= sup * (1.0 + 1e-12)) {
                return Err(SpaceError::BadDensity { x, value: v, sup });
            }
        }
        Ok(Self {
            name: name.into(),
            density: Arc::new(density),
            sup,
        })
    }
}

/// The reference non-homogeneous space: density `1 + eps·cos(2πx)` on the
/// circle, `eps` in `[0, 1)`. `eps = 0` is the uniform circle.
pub fn density_circle(eps: f64) -> Result<DensityCircle, SpaceError> {
    if !(0.0..1.0).contains(&eps) {
        return Err(SpaceError::EpsRange(eps));
    }
    DensityCircle::new(
        format!("density_circle({})", eps),
        move |x| 1.0 + eps * (2.0 * std::f64::consts::PI * x).cos(),
        1.0 + eps,
    )
}

impl MmSpace for DensityCircle {
    fn name(&self) -> &str {
        &self.name
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Point {
        loop {
            let x = rng.gen::<f64>();
            let u: f64 = rng.gen::<f64>() * self.sup;
            let f = (self.density)(x);
            debug_assert!(f.is_finite() && f >= 0.0 && f <= self.sup * (1.0 + 1e-12));
            if u <= f {
                return Point::Circle(x);
            }
        }
    }
    fn distance(&self, a: &Point, b: &Point) -> f64 {
        match (a, b) {
            (Point::Circle(x), Point::Circle(y)) => circle_distance(*x, *y),
            _ => panic!("circle distance on foreign points"),
        }
    }
    fn diameter_bound(&self) -> f64 {
        0.5
    }
}

/// The flat torus 𝕋² with the product geodesic metric and uniform measure.
pub struct Torus;

impl MmSpace for Torus {
    fn name(&self) -> &str {
        "torus"
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Point {
        Point::Torus(rng.gen::<f64>(), rng.gen::<f64>())
    }
    fn distance(&self, a: &Point, b: &Point) -> f64 {
        match (a, b) {
            (Point::Torus(x1, y1), Point::Torus(x2, y2)) => {
                let dx = circle_distance(*x1, *x2);
                let dy = circle_distance(*y1, *y2);
                dx.hypot(dy)
            }
            _ => panic!("torus distance on foreign points"),
        }
    }
    fn diameter_bound(&self) -> f64 {
        0.5f64.hypot(0.5)
    }
    fn homogeneous_hint(&self) -> Option<bool> {
        Some(true)
    }
}

/// The unit sphere S² with great-circle distance and uniform area measure.
pub struct Sphere;

impl MmSpace for Sphere {
    fn name(&self) -> &str {
        "sphere"
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Point {
        loop {
            let v = [
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ];
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if norm > 1e-12 {
                return Point::Sphere([v[0] / norm, v[1] / norm, v[2] / norm]);
            }
        }
    }
    fn distance(&self, a: &Point, b: &Point) -> f64 {
        match (a, b) {
            (Point::Sphere(u), Point::Sphere(v)) => {
                let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
                dot.clamp(-1.0, 1.0).acos()
            }
            _ => panic!("sphere distance on foreign points"),
        }
    }
    fn diameter_bound(&self) -> f64 {
        std::f64::consts::PI
    }
    fn homogeneous_hint(&self) -> Option<bool> {
        Some(true)
    }
}

/// The interval [0, 1] with Lebesgue measure.
pub struct Interval;

impl MmSpace for Interval {
    fn name(&self) -> &str {
        "interval"
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Point {
        Point::Interval(rng.gen::<f64>())
    }
    fn distance(&self, a: &Point, b: &Point) -> f64 {
        match (a, b) {
            (Point::Interval(x), Point::Interval(y)) => (x - y).abs(),
            _ => panic!("interval distance on foreign points"),
        }
    }
    fn diameter_bound(&self) -> f64 {
        1.0
    }
    fn homogeneous_hint(&self) -> Option<bool> {
        Some(false)
    }
}

/// Exhaustive metric axioms check for a finite distance matrix; returns the
/// first violation found as a witness.
pub fn validate_metric(d: &[Vec<f64>]) -> Result<(), MetricViolation> {
    let n = d.len();
    if d.iter().any(|row| row.len() != n) {
        return Err(MetricViolation::NotSquare);
    }
    for i in 0..n {
        if d[i][i] != 0.0 {
            return Err(MetricViolation::NonzeroDiagonal { i });
        }
        for j in 0..n {
            if d[i][j] < 0.0 || !d[i][j].is_finite() {
                return Err(MetricViolation::Negative { i, j });
            }
            if d[i][j] != d[j][i] {
                return Err(MetricViolation::Asymmetric { i, j });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if d[i][k] > d[i][j] + d[j][k] {
                    return Err(MetricViolation::Triangle { i, j, k });
                }
            }
        }
    }
    Ok(())
}

/// A finite metric space with weighted atoms; weights are normalized at
/// construction.
pub struct FiniteSpace {
    name: String,
    dist: Vec<Vec<f64>>,
    cumulative: Vec<f64>,
    diameter: f64,
}

impl FiniteSpace {
    pub fn new(dist: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, SpaceError> {
        validate_metric(&dist).map_err(SpaceError::NotMetric)?;
        if weights.len() != dist.len()
            || weights.iter().any(|&w| !(w.is_finite() && w >= 0.0))
        {
            return Err(SpaceError::BadWeights);
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(SpaceError::BadWeights);
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w / total;
            cumulative.push(acc);
        }
        let diameter = dist
            .iter()
            .flatten()
            .copied()
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        Ok(Self {
            name: format!("finite({})", dist.len()),
            dist,
            cumulative,
            diameter,
        })
    }

    /// Loads `{"distances": [[...]], "weights": [...]}`.
    pub fn from_json(v: &Value) -> Result<Self, SpaceError> {
        let obj = v
            .as_object()
            .ok_or_else(|| SpaceError::Json("expected an object".into()))?;
        let parse_row = |row: &Value| -> Result<Vec<f64>, SpaceError> {
            row.as_array()
                .ok_or_else(|| SpaceError::Json("distances must be a matrix".into()))?
                .iter()
                .map(|x| {
                    x.as_f64()
                        .ok_or_else(|| SpaceError::Json("non-numeric distance".into()))
                })
                .collect()
        };
        let dist = obj
            .get("distances")
            .and_then(Value::as_array)
            .ok_or_else(|| SpaceError::Json("missing \"distances\"".into()))?
            .iter()
            .map(parse_row)
            .collect::<Result<Vec<_>, _>>()?;
        let weights = match obj.get("weights") {
            Some(w) => w
                .as_array()
                .ok_or_else(|| SpaceError::Json("weights must be an array".into()))?
                .iter()
                .map(|x| {
                    x.as_f64()
                        .ok_or_else(|| SpaceError::Json("non-numeric weight".into()))
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => vec![1.0; dist.len()],
        };
        Self::new(dist, weights)
    }
}

impl MmSpace for FiniteSpace {
    fn name(&self) -> &str {
        &self.name
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Point {
        let u = rng.gen::<f64>();
        let idx = self
            .cumulative
            .iter()
            .position(|&c| u <= c)
            .unwrap_or(self.cumulative.len() - 1);
        Point::Finite(idx)
    }
    fn distance(&self, a: &Point, b: &Point) -> f64 {
        match (a, b) {
            (Point::Finite(i), Point::Finite(j)) => self.dist[*i][*j],
            _ => panic!("finite-space distance on foreign points"),
        }
    }
    fn diameter_bound(&self) -> f64 {
        self.diameter
    }
}

/// Builds a space from a textual spec: `circle`, `torus`, `sphere`,
/// `interval`, or `density-circle:EPS`.
pub fn by_name(spec: &str) -> Result<Box<dyn MmSpace>, SpaceError> {
    let spec = spec.trim();
    match spec {
        "circle" => return Ok(Box::new(Circle)),
        "torus" => return Ok(Box::new(Torus)),
        "sphere" => return Ok(Box::new(Sphere)),
        "interval" => return Ok(Box::new(Interval)),
        _ => {}
    }
    for prefix in ["density-circle:", "density_circle:"] {
        if let Some(arg) = spec.strip_prefix(prefix) {
            let eps: f64 = arg
                .parse()
                .map_err(|_| SpaceError::UnknownSpace(spec.to_string()))?;
            return Ok(Box::new(density_circle(eps)?));
        }
    }
    Err(SpaceError::UnknownSpace(spec.to_string()))
}
