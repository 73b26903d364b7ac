//! Problem data, neighbor structure, and the factorized objective.
//!
//! Sensor positions are estimated through two factor matrices `U` and `V`
//! (both `d×m`). For a sensor–sensor edge `(i, j)` the residual is
//! `(u_i − u_j)ᵀ(v_i − v_j) − d_ij²`; for a sensor–anchor edge `(i, k)` it is
//! `(u_i − a_k)ᵀ(v_i − a_k) − d_ik²`. The least-squares objective is
//! `f(U, V) = ½ Σ r²` and the penalized objective adds `γ/2 ‖U − V‖²_F`.
//!
//! Indices are 0-based everywhere in this crate. File formats use the 1-based
//! convention (anchors numbered after sensors) and convert at the boundary.

use std::collections::{HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::generate::GenSpec;

/// A `dim × len` column-major matrix of points.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn zeros(dim: usize, len: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * len],
        }
    }

    /// Wraps column-major data; `data.len()` must be a multiple of `dim`.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Malformed("dimension must be at least 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch {
                expected: format!("a multiple of {dim} coordinates"),
                found: data.len().to_string(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_columns<C: AsRef<[f64]>>(dim: usize, columns: &[C]) -> Result<Self> {
        let mut data = Vec::with_capacity(dim * columns.len());
        for (idx, col) in columns.iter().enumerate() {
            let col = col.as_ref();
            if col.len() != dim {
                return Err(Error::ShapeMismatch {
                    expected: format!("point {idx} with {dim} coordinates"),
                    found: col.len().to_string(),
                });
            }
            data.extend_from_slice(col);
        }
        Self::from_flat(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn column_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `‖self − other‖_F`; shapes must match.
    pub fn distance_frobenius(&self, other: &Points) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn same_shape(&self, other: &Points) -> bool {
        self.dim == other.dim && self.data.len() == other.data.len()
    }
}

/// Measured distance between sensors `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorEdge {
    pub i: usize,
    pub j: usize,
    pub dist: f64,
}

/// Measured distance between a sensor and an anchor (index into the anchor list).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorEdge {
    pub sensor: usize,
    pub anchor: usize,
    pub dist: f64,
}

/// Per-sensor adjacency lists derived from the edge lists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborTable {
    /// `ss[i]` holds `(j, d_ij)` for every sensor neighbor `j` of sensor `i`.
    pub ss: Vec<Vec<(usize, f64)>>,
    /// `sa[i]` holds `(k, d_ik)` for every anchor neighbor `k` of sensor `i`.
    pub sa: Vec<Vec<(usize, f64)>>,
}

impl NeighborTable {
    /// Materializes the neighbor sets, validating indices, ordering,
    /// duplicates, and distances along the way.
    pub fn build(
        num_sensors: usize,
        num_anchors: usize,
        ss_edges: &[SensorEdge],
        sa_edges: &[AnchorEdge],
    ) -> Result<Self> {
        let mut ss = vec![Vec::new(); num_sensors];
        let mut sa = vec![Vec::new(); num_sensors];
        let mut seen = HashSet::with_capacity(ss_edges.len());
        for e in ss_edges {
            if e.i >= e.j {
                return Err(Error::Malformed(format!(
                    "sensor edge ({}, {}) must satisfy i < j",
                    e.i, e.j
                )));
            }
            if e.j >= num_sensors {
                return Err(Error::Malformed(format!(
                    "sensor index {} out of range (m = {num_sensors})",
                    e.j
                )));
            }
            check_distance(e.dist)?;
            if !seen.insert((e.i, e.j)) {
                return Err(Error::DuplicateEdge(e.i, e.j));
            }
            ss[e.i].push((e.j, e.dist));
            ss[e.j].push((e.i, e.dist));
        }
        seen.clear();
        for e in sa_edges {
            if e.sensor >= num_sensors {
                return Err(Error::Malformed(format!(
                    "sensor index {} out of range (m = {num_sensors})",
                    e.sensor
                )));
            }
            if e.anchor >= num_anchors {
                return Err(Error::Malformed(format!(
                    "anchor index {} out of range (n = {num_anchors})",
                    e.anchor
                )));
            }
            check_distance(e.dist)?;
            if !seen.insert((e.sensor, e.anchor)) {
                return Err(Error::DuplicateEdge(e.sensor, num_sensors + e.anchor));
            }
            sa[e.sensor].push((e.anchor, e.dist));
        }
        Ok(Self { ss, sa })
    }

    /// `max_i √(4|E_ss[i]| + |E_sa[i]|)`.
    pub fn degree_factor(&self) -> f64 {
        self.ss
            .iter()
            .zip(&self.sa)
            .map(|(s, a)| ((4 * s.len() + a.len()) as f64).sqrt())
            .fold(0.0, f64::max)
    }
}

fn check_distance(d: f64) -> Result<()> {
    if d.is_finite() && d > 0.0 {
        Ok(())
    } else {
        Err(Error::Malformed(format!(
            "measured distance {d} must be finite and strictly positive"
        )))
    }
}

/// The solver-visible part of a problem: geometry of anchors and measured
/// distances. It never carries ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    num_sensors: usize,
    anchors: Points,
    ss_edges: Vec<SensorEdge>,
    sa_edges: Vec<AnchorEdge>,
    neighbors: NeighborTable,
}

impl Network {
    pub fn new(
        num_sensors: usize,
        anchors: Points,
        ss_edges: Vec<SensorEdge>,
        sa_edges: Vec<AnchorEdge>,
    ) -> Result<Self> {
        if num_sensors == 0 {
            return Err(Error::Malformed("at least one sensor is required".into()));
        }
        if !anchors.is_finite() {
            return Err(Error::Malformed("anchor coordinates must be finite".into()));
        }
        let neighbors = NeighborTable::build(num_sensors, anchors.len(), &ss_edges, &sa_edges)?;
        Ok(Self {
            num_sensors,
            anchors,
            ss_edges,
            sa_edges,
            neighbors,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.anchors.dim()
    }

    #[inline]
    pub fn num_sensors(&self) -> usize {
        self.num_sensors
    }

    #[inline]
    pub fn num_anchors(&self) -> usize {
        self.anchors.len()
    }

    pub fn anchors(&self) -> &Points {
        &self.anchors
    }

    pub fn ss_edges(&self) -> &[SensorEdge] {
        &self.ss_edges
    }

    pub fn sa_edges(&self) -> &[AnchorEdge] {
        &self.sa_edges
    }

    pub fn neighbors(&self) -> &NeighborTable {
        &self.neighbors
    }

    /// Sensors with no path (through sensor–sensor edges) to a sensor that
    /// measures an anchor, in ascending order.
    pub fn unreachable_sensors(&self) -> Vec<usize> {
        let m = self.num_sensors;
        let mut reached = vec![false; m];
        let mut queue = VecDeque::new();
        for (i, anchors) in self.neighbors.sa.iter().enumerate() {
            if !anchors.is_empty() {
                reached[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            for &(j, _) in &self.neighbors.ss[i] {
                if !reached[j] {
                    reached[j] = true;
                    queue.push_back(j);
                }
            }
        }
        (0..m).filter(|&i| !reached[i]).collect()
    }

    /// True iff every sensor is connected to an anchor, directly or through
    /// other sensors.
    pub fn check_connectivity(&self) -> bool {
        self.unreachable_sensors().is_empty()
    }

    /// Fails with [`Error::Disconnected`] naming the first unreachable sensor.
    pub fn require_connected(&self) -> Result<()> {
        match self.unreachable_sensors().first() {
            None => Ok(()),
            Some(&sensor) => Err(Error::Disconnected { sensor }),
        }
    }

    pub(crate) fn check_factors(&self, factors: &FactorPair) -> Result<()> {
        let (d, m) = (self.dim(), self.num_sensors);
        for (name, p) in [("U", &factors.u), ("V", &factors.v)] {
            if p.dim() != d || p.len() != m {
                return Err(Error::ShapeMismatch {
                    expected: format!("{name} of shape {d}x{m}"),
                    found: format!("{}x{}", p.dim(), p.len()),
                });
            }
        }
        Ok(())
    }
}

/// A problem together with its (optional) ground truth and generation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    network: Network,
    truth: Option<Points>,
    generation: Option<GenSpec>,
}

impl ProblemInstance {
    pub fn new(network: Network, truth: Option<Points>, generation: Option<GenSpec>) -> Result<Self> {
        if let Some(t) = &truth {
            if t.dim() != network.dim() || t.len() != network.num_sensors() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} true positions in dimension {}", network.num_sensors(), network.dim()),
                    found: format!("{} in dimension {}", t.len(), t.dim()),
                });
            }
        }
        Ok(Self {
            network,
            truth,
            generation,
        })
    }

    /// What the solver is allowed to see.
    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn truth(&self) -> Option<&Points> {
        self.truth.as_ref()
    }

    pub fn generation(&self) -> Option<&GenSpec> {
        self.generation.as_ref()
    }

    pub fn into_parts(self) -> (Network, Option<Points>, Option<GenSpec>) {
        (self.network, self.truth, self.generation)
    }
}

/// The two `d×m` factors iterated by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub u: Points,
    pub v: Points,
}

impl FactorPair {
    pub fn new(u: Points, v: Points) -> Result<Self> {
        if !u.same_shape(&v) {
            return Err(Error::ShapeMismatch {
                expected: format!("V of shape {}x{}", u.dim(), u.len()),
                found: format!("{}x{}", v.dim(), v.len()),
            });
        }
        Ok(Self { u, v })
    }

    /// `U = V = points`.
    pub fn coincident(points: Points) -> Self {
        Self {
            u: points.clone(),
            v: points,
        }
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    /// `(U + V) / 2`, the reported position estimate.
    pub fn average(&self) -> Points {
        let data = self
            .u
            .as_slice()
            .iter()
            .zip(self.v.as_slice())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        Points {
            dim: self.u.dim(),
            data,
        }
    }

    /// `‖U − V‖_F`.
    pub fn gap(&self) -> f64 {
        self.u.distance_frobenius(&self.v)
    }

    /// `‖(U, V)‖_F`.
    pub fn norm(&self) -> f64 {
        self.u.frobenius_norm().hypot(self.v.frobenius_norm())
    }

    pub fn max_abs(&self) -> f64 {
        self.u.max_abs().max(self.v.max_abs())
    }
}

/// `(u_i − u_j)ᵀ(v_i − v_j) − d_ij²`.
#[inline]
pub fn residual_ss(ui: &[f64], uj: &[f64], vi: &[f64], vj: &[f64], dist: f64) -> f64 {
    let mut s = 0.0;
    for l in 0..ui.len() {
        s += (ui[l] - uj[l]) * (vi[l] - vj[l]);
    }
    s - dist * dist
}

/// `(u_i − a_k)ᵀ(v_i − a_k) − d_ik²`.
#[inline]
pub fn residual_sa(ui: &[f64], vi: &[f64], ak: &[f64], dist: f64) -> f64 {
    let mut s = 0.0;
    for l in 0..ui.len() {
        s += (ui[l] - ak[l]) * (vi[l] - ak[l]);
    }
    s - dist * dist
}

/// The least-squares objective `f(U, V)`.
pub fn objective(network: &Network, factors: &FactorPair) -> f64 {
    let (u, v) = (&factors.u, &factors.v);
    let ss: f64 = network
        .ss_edges
        .iter()
        .map(|e| {
            let r = residual_ss(u.column(e.i), u.column(e.j), v.column(e.i), v.column(e.j), e.dist);
            r * r
        })
        .sum();
    let sa: f64 = network
        .sa_edges
        .iter()
        .map(|e| {
            let r = residual_sa(u.column(e.sensor), v.column(e.sensor), network.anchors.column(e.anchor), e.dist);
            r * r
        })
        .sum();
    0.5 * (ss + sa)
}

/// The penalized objective `F(U, V; γ) = γ/2 ‖U − V‖²_F + f(U, V)`.
pub fn penalized_objective(network: &Network, factors: &FactorPair, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let gap = factors.gap();
    Ok(0.5 * gamma * gap * gap + objective(network, factors))
}

/// Analytic gradient of the penalized objective, `(∂F/∂U, ∂F/∂V)`.
pub fn penalized_gradient(network: &Network, factors: &FactorPair, gamma: f64) -> Result<(Points, Points)> {
    check_gamma(gamma)?;
    network.check_factors(factors)?;
    let (u, v) = (&factors.u, &factors.v);
    let d = u.dim();
    let mut gu = Points::zeros(d, u.len());
    let mut gv = Points::zeros(d, u.len());
    for i in 0..u.len() {
        let (ui, vi) = (u.column(i), v.column(i));
        let gui = gu.column_mut(i);
        for l in 0..d {
            gui[l] = gamma * (ui[l] - vi[l]);
        }
        let gvi = gv.column_mut(i);
        for l in 0..d {
            gvi[l] = gamma * (vi[l] - ui[l]);
        }
    }
    for e in &network.ss_edges {
        let (ui, uj, vi, vj) = (u.column(e.i), u.column(e.j), v.column(e.i), v.column(e.j));
        let r = residual_ss(ui, uj, vi, vj, e.dist);
        for l in 0..d {
            let dv = vi[l] - vj[l];
            let du = ui[l] - uj[l];
            gu.column_mut(e.i)[l] += r * dv;
            gu.column_mut(e.j)[l] -= r * dv;
            gv.column_mut(e.i)[l] += r * du;
            gv.column_mut(e.j)[l] -= r * du;
        }
    }
    for e in &network.sa_edges {
        let ak = network.anchors.column(e.anchor);
        let (ui, vi) = (u.column(e.sensor), v.column(e.sensor));
        let r = residual_sa(ui, vi, ak, e.dist);
        for l in 0..d {
            gu.column_mut(e.sensor)[l] += r * (vi[l] - ak[l]);
            gv.column_mut(e.sensor)[l] += r * (ui[l] - ak[l]);
        }
    }
    Ok((gu, gv))
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("penalty parameter must be positive, got {gamma}")))
    }
}

/// Largest absolute edge residual at the coincident point `U = V = points`.
pub fn max_abs_residual(network: &Network, points: &Points) -> f64 {
    let ss = network.ss_edges.iter().map(|e| {
        let (pi, pj) = (points.column(e.i), points.column(e.j));
        residual_ss(pi, pj, pi, pj, e.dist).abs()
    });
    let sa = network.sa_edges.iter().map(|e| {
        let p = points.column(e.sensor);
        residual_sa(p, p, network.anchors.column(e.anchor), e.dist).abs()
    });
    ss.chain(sa).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::two_sensor_fixture;

    fn single_sensor(anchor: [f64; 2], dist: f64) -> Network {
        let anchors = Points::from_columns(2, &[anchor]).unwrap();
        Network::new(
            1,
            anchors,
            vec![],
            vec![AnchorEdge {
                sensor: 0,
                anchor: 0,
                dist,
            }],
        )
        .unwrap()
    }

    #[test]
    fn fixture_neighbor_sets() {
        let inst = two_sensor_fixture();
        let nb = inst.network().neighbors();
        // anchors are stored as a3 -> 0, a4 -> 1, a5 -> 2
        let ss: Vec<Vec<usize>> = nb.ss.iter().map(|l| l.iter().map(|p| p.0).collect()).collect();
        let sa: Vec<Vec<usize>> = nb.sa.iter().map(|l| l.iter().map(|p| p.0).collect()).collect();
        assert_eq!(ss, vec![vec![1], vec![0]]);
        assert_eq!(sa, vec![vec![1, 2], vec![0, 2]]);
    }

    #[test]
    fn empty_edge_lists() {
        let anchors = Points::from_columns(2, &[[0.0, 0.0]]).unwrap();
        let net = Network::new(1, anchors, vec![], vec![]).unwrap();
        assert!(net.neighbors().ss[0].is_empty());
        assert!(net.neighbors().sa[0].is_empty());
        assert!(!net.check_connectivity());
    }

    #[test]
    fn rejects_duplicates_and_bad_indices() {
        let anchors = Points::from_columns(2, &[[0.0, 0.0]]).unwrap();
        let e = SensorEdge { i: 0, j: 1, dist: 1.0 };
        assert_eq!(
            Network::new(2, anchors.clone(), vec![e, e], vec![]).unwrap_err(),
            Error::DuplicateEdge(0, 1)
        );
        let bad = SensorEdge { i: 0, j: 2, dist: 1.0 };
        assert!(Network::new(2, anchors.clone(), vec![bad], vec![]).is_err());
        let rev = SensorEdge { i: 1, j: 0, dist: 1.0 };
        assert!(Network::new(2, anchors.clone(), vec![rev], vec![]).is_err());
        let neg = SensorEdge { i: 0, j: 1, dist: 0.0 };
        assert!(Network::new(2, anchors.clone(), vec![neg], vec![]).is_err());
        let a = AnchorEdge { sensor: 0, anchor: 1, dist: 1.0 };
        assert!(Network::new(2, anchors, vec![], vec![a]).is_err());
    }

    #[test]
    fn connectivity_cases() {
        let anchors = Points::from_columns(2, &[[0.0, 0.0]]).unwrap();
        let e = SensorEdge { i: 0, j: 1, dist: 1.0 };
        let isolated = Network::new(2, anchors.clone(), vec![e], vec![]).unwrap();
        assert!(!isolated.check_connectivity());
        assert_eq!(isolated.require_connected(), Err(Error::Disconnected { sensor: 0 }));
        let chain = Network::new(
            2,
            anchors,
            vec![e],
            vec![AnchorEdge { sensor: 0, anchor: 0, dist: 1.0 }],
        )
        .unwrap();
        assert!(chain.check_connectivity());
        assert!(two_sensor_fixture().network().check_connectivity());
    }

    #[test]
    fn residual_examples() {
        assert_eq!(residual_ss(&[1.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], &[0.0, 0.0], 1.0), 0.0);
        assert_eq!(residual_ss(&[0.0; 2], &[0.0; 2], &[0.0; 2], &[0.0; 2], 1.0), -1.0);
        assert_eq!(residual_ss(&[1.0, 0.0], &[0.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], 1.0), -1.0);
        let d = 5f64.sqrt() / 2.0;
        assert!(residual_sa(&[0.0, 0.5], &[0.0, 0.5], &[-1.0, 0.0], d).abs() < 1e-15);
        assert_eq!(residual_sa(&[0.3, 0.1], &[0.3, 0.1], &[0.3, 0.1], 2.0), -4.0);
    }

    #[test]
    fn objective_zero_at_fixture_truth() {
        let inst = two_sensor_fixture();
        let truth = inst.truth().unwrap().clone();
        let f = objective(inst.network(), &FactorPair::coincident(truth.clone()));
        assert!(f < 1e-30, "f = {f}");
        let (gu, gv) = penalized_gradient(inst.network(), &FactorPair::coincident(truth), 1.0).unwrap();
        assert!(gu.max_abs() < 1e-15 && gv.max_abs() < 1e-15);
    }

    #[test]
    fn penalized_examples() {
        let net = single_sensor([0.0, 0.0], 1.0);
        let pair = FactorPair::coincident(Points::from_columns(2, &[[1.0, 0.0]]).unwrap());
        assert_eq!(objective(&net, &pair), 0.0);
        assert_eq!(penalized_objective(&net, &pair, 1.0).unwrap(), 0.0);
        let (gu, gv) = penalized_gradient(&net, &pair, 1.0).unwrap();
        assert_eq!(gu.as_slice(), &[0.0, 0.0]);
        assert_eq!(gv.as_slice(), &[0.0, 0.0]);

        // f = 0 (no edges) with ‖U − V‖_F = 2
        let anchors = Points::from_columns(2, &[[0.0, 0.0]]).unwrap();
        let bare = Network::new(1, anchors, vec![], vec![]).unwrap();
        let pair = FactorPair::new(
            Points::from_columns(2, &[[1.0, 0.0]]).unwrap(),
            Points::from_columns(2, &[[-1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(objective(&bare, &pair), 0.0);
        assert_eq!(penalized_objective(&bare, &pair, 1.0).unwrap(), 2.0);

        // uᵀv = 0 against an anchor at the origin: residual −1, f = 0.5, gap² = 4
        let pair = FactorPair::new(
            Points::from_columns(2, &[[1.0, 1.0]]).unwrap(),
            Points::from_columns(2, &[[1.0, -1.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(objective(&net, &pair), 0.5);
        assert_eq!(penalized_objective(&net, &pair, 1.0).unwrap(), 2.5);
        assert!(penalized_objective(&net, &pair, 0.0).is_err());
        assert!(penalized_objective(&net, &pair, -1.0).is_err());
    }
}
