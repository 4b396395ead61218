//! Part-type supervision from clustered overlap patterns.
//!
//! For part `i` of one annotated person, each other part `j` contributes
//! `Δ_j = exp(-‖δ_j‖/σ) · δ_j` where `δ_j` is the torso-normalized offset from `i`
//! to `j`. In rotation-normalized mode the offsets are first rotated by `-θ_i`
//! and only the parts of `i`'s occluding set take part.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PoseError, Result};
use crate::geometry::Point;
use crate::graph::PartGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhraseletMode {
    Plain,
    RotationNormalized,
}

/// `((x_j - x_i)/s, (y_j - y_i)/s)`; `None` if either point is missing.
pub fn relative_displacement(positions: &[Point], i: usize, j: usize, scale: f64) -> Result<Option<Point>> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(PoseError::InvalidArgument(format!("normalizing scale {scale}")));
    }
    let (a, b) = (positions[i], positions[j]);
    if !a.is_finite() || !b.is_finite() {
        return Ok(None);
    }
    Ok(Some(b.sub(a).scale(1.0 / scale)))
}

/// Weighted (and in rotation-normalized mode, rotated) displacement.
pub fn weighted_offset(delta: Point, theta: Option<f64>, sigma: f64) -> Point {
    let w = (-delta.norm() / sigma).exp();
    let d = match theta {
        Some(t) => delta.rotate(-t),
        None => delta,
    };
    d.scale(w)
}

/// Overlap pattern of part `i` for one person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapPattern {
    pub part: usize,
    pub delta: Vec<f64>,
    /// `(image index, person index)`.
    pub source: (usize, usize),
    pub theta: Option<f64>,
}

/// Pattern of part `i` over the parts `others`, in the given order. Positions
/// must already be divided by the normalizing scale. Returns `None` if any
/// involved part is missing.
pub fn pattern_vector(
    positions: &[Point],
    i: usize,
    others: &[usize],
    mode: PhraseletMode,
    theta: Option<f64>,
    sigma: f64,
) -> Result<Option<Vec<f64>>> {
    let theta = match mode {
        PhraseletMode::Plain => None,
        PhraseletMode::RotationNormalized => Some(theta.ok_or_else(|| {
            PoseError::InvalidArgument("rotation-normalized pattern needs the part orientation".into())
        })?),
    };
    let mut v = Vec::with_capacity(2 * others.len());
    for &j in others {
        let Some(d) = relative_displacement(positions, i, j, 1.0)? else {
            return Ok(None);
        };
        let w = weighted_offset(d, theta, sigma);
        v.push(w.x);
        v.push(w.y);
    }
    Ok(Some(v))
}

/// Parts `j != i` that come within `radius` of `i` in at least `m` instances.
/// Instances are torso-normalized node positions; missing points never count.
pub fn occluding_set(instances: &[Vec<Point>], i: usize, m: usize, radius: f64) -> Vec<usize> {
    let n = instances.first().map_or(0, |p| p.len());
    (0..n)
        .filter(|&j| j != i)
        .filter(|&j| {
            let hits = instances
                .iter()
                .filter(|p| {
                    let (a, b) = (p[i], p[j]);
                    a.is_finite() && b.is_finite() && a.distance(b) < radius
                })
                .count();
            hits >= m
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid by Euclidean distance, ties to the lowest index.
pub fn assign_type(pattern: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (c, cen) in centroids.iter().enumerate() {
        let d = sq_dist(pattern, cen);
        if d < best.0 {
            best = (d, c);
        }
    }
    best.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Labels after every assignment step, the last equal to `labels`.
    pub trace: Vec<Vec<usize>>,
    pub converged: bool,
}

/// Farthest-point seeding: a random first point, then repeatedly the point
/// farthest from every chosen centroid (ties to the lowest index).
pub fn seed_centroids(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.gen_range(0..points.len());
    let mut centroids = vec![points[first].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    while centroids.len() < k {
        let mut far = (f64::NEG_INFINITY, 0);
        for (i, &d) in nearest.iter().enumerate() {
            if d > far.0 {
                far = (d, i);
            }
        }
        let c = points[far.1].clone();
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

const MAX_LLOYD_ITERATIONS: usize = 300;

/// Lloyd's algorithm from farthest-point seeds, until no label changes. An
/// emptied cluster is re-seeded at the point farthest from its own centroid.
pub fn cluster(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Clustering> {
    if k == 0 {
        return Err(PoseError::Clustering("k must be positive".into()));
    }
    if points.len() < k {
        return Err(PoseError::Clustering(format!("{} patterns for {k} clusters", points.len())));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(PoseError::Clustering("patterns differ in dimension".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(PoseError::Clustering("non-finite pattern".into()));
    }
    let mut centroids = seed_centroids(points, k, seed);
    let mut labels: Vec<usize> = points.iter().map(|p| assign_type(p, &centroids)).collect();
    let mut trace = vec![labels.clone()];
    let mut converged = false;
    for _ in 0..MAX_LLOYD_ITERATIONS {
        // update
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let mut far = (f64::NEG_INFINITY, 0);
                for (i, p) in points.iter().enumerate() {
                    let d = sq_dist(p, &centroids[labels[i]]);
                    if d > far.0 {
                        far = (d, i);
                    }
                }
                centroids[c] = points[far.1].clone();
                labels[far.1] = c;
            }
        }
        // assign
        let next: Vec<usize> = points.iter().map(|p| assign_type(p, &centroids)).collect();
        let changed = next != labels;
        labels = next;
        trace.push(labels.clone());
        if !changed {
            converged = true;
            break;
        }
    }
    Ok(Clustering {
        centroids,
        labels,
        trace,
        converged,
    })
}

/// Settings for [`build_book`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhraseletConfig {
    pub k: usize,
    pub mode: PhraseletMode,
    /// Occluding-set count threshold; `None` scales 100 per 1000 instances.
    pub m: Option<usize>,
    /// Occluding-set radius in torso diameters.
    pub overlap_radius: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for PhraseletConfig {
    fn default() -> Self {
        PhraseletConfig {
            k: 7,
            mode: PhraseletMode::RotationNormalized,
            m: None,
            overlap_radius: 0.25,
            sigma: 1.0,
            seed: 0,
        }
    }
}

/// `max(2, round(100·N/1000))`.
pub fn scaled_m(instances: usize) -> usize {
    ((100.0 * instances as f64 / 1000.0).round() as usize).max(2)
}

/// One person's graph-node geometry for clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInstance {
    /// Node positions divided by the person's torso diameter; non-finite when missing.
    pub positions: Vec<Point>,
    /// Node orientations in radians.
    pub thetas: Vec<f64>,
    pub source: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartPhraselets {
    pub occluding: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Per instance; `None` for instances with missing parts.
    pub labels: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseletBook {
    pub mode: PhraseletMode,
    pub k: usize,
    pub sigma: f64,
    pub parts: Vec<PartPhraselets>,
}

impl PhraseletBook {
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.parts.iter().enumerate() {
            if p.occluding.contains(&i) {
                return Err(PoseError::InvalidModel(format!("part {i} occludes itself")));
            }
            if p.centroids.len() != self.k || p.labels.iter().flatten().any(|&l| l >= self.k) {
                return Err(PoseError::InvalidModel(format!("part {i}: labels exceed k = {}", self.k)));
            }
            let dim = 2 * p.occluding.len();
            if p.centroids.iter().any(|c| c.len() != dim) {
                return Err(PoseError::InvalidModel(format!("part {i}: centroid dimension")));
            }
        }
        Ok(())
    }

    /// Type of part `i` for an instance outside the clustered set.
    pub fn assign(&self, i: usize, inst: &NodeInstance) -> Result<Option<usize>> {
        let p = &self.parts[i];
        let theta = Some(inst.thetas[i]);
        Ok(pattern_vector(&inst.positions, i, &p.occluding, self.mode, theta, self.sigma)?
            .map(|v| assign_type(&v, &p.centroids)))
    }
}

/// Occluding sets, clusters and instance labels for every part of `graph`.
pub fn build_book(graph: &PartGraph, instances: &[NodeInstance], config: &PhraseletConfig) -> Result<PhraseletBook> {
    let n = graph.len();
    if instances.iter().any(|s| s.positions.len() != n || s.thetas.len() != n) {
        return Err(PoseError::InvalidArgument("instance node count differs from the graph".into()));
    }
    let m = config.m.unwrap_or_else(|| scaled_m(instances.len()));
    let positions: Vec<Vec<Point>> = instances.iter().map(|s| s.positions.clone()).collect();
    let parts: Vec<Result<PartPhraselets>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let occluding = match config.mode {
                PhraseletMode::Plain => (0..n).filter(|&j| j != i).collect(),
                PhraseletMode::RotationNormalized => {
                    let o = occluding_set(&positions, i, m, config.overlap_radius);
                    if o.is_empty() {
                        graph.neighbors(i).into_iter().take(2).collect()
                    } else {
                        o
                    }
                }
            };
            let mut rows = Vec::new();
            let mut which = Vec::new();
            for (s, inst) in instances.iter().enumerate() {
                let v = pattern_vector(&inst.positions, i, &occluding, config.mode, Some(inst.thetas[i]), config.sigma)?;
                if let Some(v) = v {
                    rows.push(v);
                    which.push(s);
                }
            }
            let c = cluster(&rows, config.k, config.seed.wrapping_add(i as u64))?;
            let mut labels = vec![None; instances.len()];
            for (s, l) in which.into_iter().zip(c.labels) {
                labels[s] = Some(l);
            }
            Ok(PartPhraselets {
                occluding,
                centroids: c.centroids,
                labels,
            })
        })
        .collect();
    Ok(PhraseletBook {
        mode: config.mode,
        k: config.k,
        sigma: config.sigma,
        parts: parts.into_iter().collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn weighting_examples() {
        let w = weighted_offset(Point::new(3.0, 4.0), None, 1.0);
        assert!((w.x - 3.0 * (-5f64).exp()).abs() < 1e-15);
        assert!((w.x - 0.020214).abs() < 1e-6 && (w.y - 0.026952).abs() < 1e-6);
        let r = weighted_offset(Point::new(0.0, 2.0), Some(PI / 2.0), 1.0);
        assert!((r.x - 0.27067).abs() < 1e-5 && r.y.abs() < 1e-12);
        assert_eq!(weighted_offset(Point::default(), Some(1.0), 1.0), Point::default());
    }

    #[test]
    fn occluding_set_thresholds_counts() {
        // part 1 close in 150 instances, part 2 close in 20
        let mut inst = Vec::new();
        for s in 0..200 {
            let near1 = s < 150;
            let near2 = s < 20;
            inst.push(vec![
                Point::new(0.0, 0.0),
                Point::new(if near1 { 0.1 } else { 1.0 }, 0.0),
                Point::new(0.0, if near2 { 0.1 } else { 1.0 }),
            ]);
        }
        assert_eq!(occluding_set(&inst, 0, 100, 0.25), vec![1]);
        assert_eq!(occluding_set(&inst, 0, 1, 0.25), vec![1, 2]);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = vec![vec![1.0, 2.0], vec![3.0, 6.0], vec![5.0, 1.0]];
        let c = cluster(&pts, 1, 4).unwrap();
        assert_eq!(c.centroids, vec![vec![3.0, 3.0]]);
        assert_eq!(c.labels, vec![0, 0, 0]);
    }

    #[test]
    fn ties_go_to_lowest_centroid() {
        let cs = vec![vec![-1.0, 0.0], vec![1.0, 0.0], vec![0.0, 5.0]];
        assert_eq!(assign_type(&[0.0, 0.0], &cs), 0);
        for (c, cen) in cs.iter().enumerate() {
            assert_eq!(assign_type(cen, &cs), c);
        }
    }

    #[test]
    fn too_few_patterns_is_an_error() {
        assert!(matches!(cluster(&[vec![0.0]], 2, 0), Err(PoseError::Clustering(_))));
    }
}
