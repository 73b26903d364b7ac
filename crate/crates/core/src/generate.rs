//! Synthetic instances, the two-sensor fixture, and starting points.
//!
//! Sensors and anchors are drawn uniformly from `[0, 1]^d`. A distance is
//! measured iff the true distance is strictly below the radio range `ρ`, and
//! the measured value is `max(1 + σε, 0.1) · ‖x − y‖` with `ε ~ N(0, 1)`.
//!
//! Randomness comes from ChaCha8 with one stream per purpose, so changing `σ`
//! keeps the geometry (stream 0) and redraws only the noise (stream 1).
//! Normal variates use `rand_distr`'s ziggurat sampler.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::problem::{AnchorEdge, FactorPair, Network, Points, ProblemInstance, SensorEdge};

const POSITION_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const START_STREAM: u64 = 2;

/// Lower clamp on the multiplicative noise factor.
const NOISE_FLOOR: f64 = 0.1;

/// Parameters of a random instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub m: usize,
    pub n: usize,
    pub dim: usize,
    pub rho: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.dim == 0 {
            return Err(Error::Config("m, n and dim must all be at least 1".into()));
        }
        if self.rho <= 0.0 || !self.rho.is_finite() {
            return Err(Error::Config(format!("radio range must be positive, got {}", self.rho)));
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(Error::Config(format!("noise factor must be non-negative, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Radio range as given on the command line or in a grid file: a literal
/// number, `sqrt(c/m)` or `cbrt(c/m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RangeExpr {
    Literal(f64),
    Sqrt(f64),
    Cbrt(f64),
}

impl RangeExpr {
    pub fn resolve(&self, m: usize) -> f64 {
        match *self {
            RangeExpr::Literal(r) => r,
            RangeExpr::Sqrt(c) => (c / m as f64).sqrt(),
            RangeExpr::Cbrt(c) => (c / m as f64).cbrt(),
        }
    }
}

impl FromStr for RangeExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("invalid radio range {s:?}; expected a number, sqrt(c/m) or cbrt(c/m)"));
        let positive = |t: &str| -> Result<f64> {
            let v: f64 = t.trim().parse().map_err(|_| bad())?;
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(bad())
            }
        };
        for (name, ctor) in [("sqrt", RangeExpr::Sqrt as fn(f64) -> RangeExpr), ("cbrt", RangeExpr::Cbrt)] {
            if let Some(rest) = s.strip_prefix(name) {
                let inner = rest
                    .trim_start()
                    .strip_prefix('(')
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(bad)?;
                let (num, den) = inner.split_once('/').ok_or_else(bad)?;
                if den.trim() != "m" {
                    return Err(bad());
                }
                return Ok(ctor(positive(num)?));
            }
        }
        positive(s).map(RangeExpr::Literal)
    }
}

impl fmt::Display for RangeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RangeExpr::Literal(r) => write!(f, "{r}"),
            RangeExpr::Sqrt(c) => write!(f, "sqrt({c}/m)"),
            RangeExpr::Cbrt(c) => write!(f, "cbrt({c}/m)"),
        }
    }
}

/// Outcome of [`generate`]: the instance, flagged by whether every sensor
/// can reach an anchor.
#[derive(Debug, Clone, PartialEq)]
pub enum Generated {
    Connected(ProblemInstance),
    Disconnected(ProblemInstance),
}

impl Generated {
    pub fn is_connected(&self) -> bool {
        matches!(self, Generated::Connected(_))
    }

    pub fn instance(&self) -> &ProblemInstance {
        match self {
            Generated::Connected(i) | Generated::Disconnected(i) => i,
        }
    }

    pub fn into_instance(self) -> ProblemInstance {
        match self {
            Generated::Connected(i) | Generated::Disconnected(i) => i,
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Draws a random instance. Disconnected draws are returned as
/// [`Generated::Disconnected`] rather than resampled.
pub fn generate(spec: &GenSpec) -> Result<Generated> {
    spec.validate()?;
    let GenSpec { m, n, dim, rho, sigma, seed } = *spec;

    let mut pos = stream_rng(seed, POSITION_STREAM);
    let truth: Vec<f64> = (0..m * dim).map(|_| pos.random::<f64>()).collect();
    let anchors: Vec<f64> = (0..n * dim).map(|_| pos.random::<f64>()).collect();
    let truth = Points::from_flat(dim, truth)?;
    let anchors = Points::from_flat(dim, anchors)?;

    let mut noise = stream_rng(seed, NOISE_STREAM);
    let mut measure = |true_dist: f64| -> f64 {
        let eps: f64 = noise.sample(StandardNormal);
        (1.0 + sigma * eps).max(NOISE_FLOOR) * true_dist
    };

    // Coincident pairs (probability zero) are skipped so every stored distance is positive.
    let mut ss_edges = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let dist = euclidean(truth.column(i), truth.column(j));
            if dist < rho && dist > 0.0 {
                ss_edges.push(SensorEdge { i, j, dist: measure(dist) });
            }
        }
    }
    let mut sa_edges = Vec::new();
    for i in 0..m {
        for k in 0..n {
            let dist = euclidean(truth.column(i), anchors.column(k));
            if dist < rho && dist > 0.0 {
                sa_edges.push(AnchorEdge {
                    sensor: i,
                    anchor: k,
                    dist: measure(dist),
                });
            }
        }
    }

    let network = Network::new(m, anchors, ss_edges, sa_edges)?;
    let connected = network.check_connectivity();
    let instance = ProblemInstance::new(network, Some(truth), Some(*spec))?;
    Ok(if connected {
        Generated::Connected(instance)
    } else {
        Generated::Disconnected(instance)
    })
}

/// Two sensors, three anchors: locatable but not uniquely localizable.
///
/// Anchors are stored in file order, so `(0, 1.4)`, `(−1, 0)`, `(1, 0)` carry
/// 1-based labels 3, 4, 5. True sensor positions are `(0, 0.5)` and `(0.6, 0.7)`.
pub fn two_sensor_fixture() -> ProblemInstance {
    let anchors = Points::from_columns(2, &[[0.0, 1.4], [-1.0, 0.0], [1.0, 0.0]]).expect("static anchors");
    let ss = vec![SensorEdge {
        i: 0,
        j: 1,
        dist: 10f64.sqrt() / 5.0,
    }];
    let sa = vec![
        AnchorEdge { sensor: 0, anchor: 1, dist: 5f64.sqrt() / 2.0 },
        AnchorEdge { sensor: 0, anchor: 2, dist: 5f64.sqrt() / 2.0 },
        AnchorEdge { sensor: 1, anchor: 0, dist: 85f64.sqrt() / 10.0 },
        AnchorEdge { sensor: 1, anchor: 2, dist: 65f64.sqrt() / 10.0 },
    ];
    let network = Network::new(2, anchors, ss, sa).expect("static fixture is well formed");
    let truth = Points::from_columns(2, &[[0.0, 0.5], [0.6, 0.7]]).expect("static truth");
    ProblemInstance::new(network, Some(truth), None).expect("static fixture is well formed")
}

/// Componentwise midpoint of the anchors' bounding box.
pub fn anchor_box_midpoint(network: &Network) -> Result<Vec<f64>> {
    let anchors = network.anchors();
    if anchors.is_empty() {
        return Err(Error::Malformed("instance has no anchors".into()));
    }
    let d = anchors.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for a in anchors.columns() {
        for l in 0..d {
            lo[l] = lo[l].min(a[l]);
            hi[l] = hi[l].max(a[l]);
        }
    }
    Ok(lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect())
}

/// Starting point with `U = V`: each sensor sits on its directly measured
/// anchor with the smallest measured distance (ties go to the lower anchor
/// index), or on the anchors' bounding-box midpoint if it measures none.
pub fn nearest_anchor_start(network: &Network) -> Result<FactorPair> {
    let midpoint = anchor_box_midpoint(network)?;
    let anchors = network.anchors();
    let mut start = Points::zeros(network.dim(), network.num_sensors());
    for (i, adj) in network.neighbors().sa.iter().enumerate() {
        let nearest = adj
            .iter()
            .fold(None::<(usize, f64)>, |best, &(k, d)| match best {
                Some((bk, bd)) if bd < d || (bd == d && bk < k) => Some((bk, bd)),
                _ => Some((k, d)),
            });
        let col = match nearest {
            Some((k, _)) => anchors.column(k),
            None => &midpoint,
        };
        start.column_mut(i).copy_from_slice(col);
    }
    Ok(FactorPair::coincident(start))
}

/// Counter-clockwise convex hull of planar points (monotone chain), without
/// collinear vertices.
fn convex_hull_2d(points: &Points) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.columns().map(|c| [c[0], c[1]]).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite anchors"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in pts.iter().chain(pts.iter().rev().skip(1)) {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// True iff `p` lies strictly inside the counter-clockwise polygon `hull`.
pub fn strictly_inside(hull: &[[f64; 2]], p: [f64; 2]) -> bool {
    hull.len() >= 3
        && (0..hull.len()).all(|e| {
            let a = hull[e];
            let b = hull[(e + 1) % hull.len()];
            (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) > 0.0
        })
}

/// Convex hull of the anchors of a planar network.
pub fn anchor_hull(network: &Network) -> Result<Vec<[f64; 2]>> {
    if network.dim() != 2 {
        return Err(Error::Config("convex hull sampling needs dimension 2".into()));
    }
    let hull = convex_hull_2d(network.anchors());
    if hull.len() < 3 {
        return Err(Error::Config("anchors are collinear; their convex hull has no interior".into()));
    }
    Ok(hull)
}

/// Starting point with `U = V` whose columns are uniform in the interior of
/// the anchors' convex hull (planar networks only).
pub fn random_hull_start(network: &Network, seed: u64) -> Result<FactorPair> {
    let hull = anchor_hull(network)?;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &hull {
        for l in 0..2 {
            lo[l] = lo[l].min(p[l]);
            hi[l] = hi[l].max(p[l]);
        }
    }
    let mut rng = stream_rng(seed, START_STREAM);
    let mut start = Points::zeros(2, network.num_sensors());
    for i in 0..network.num_sensors() {
        let p = loop {
            let p = [
                lo[0] + (hi[0] - lo[0]) * rng.random::<f64>(),
                lo[1] + (hi[1] - lo[1]) * rng.random::<f64>(),
            ];
            if strictly_inside(&hull, p) {
                break p;
            }
        };
        start.column_mut(i).copy_from_slice(&p);
    }
    Ok(FactorPair::coincident(start))
}
