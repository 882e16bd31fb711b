//! PAM-style K-medoids over a precomputed distance matrix.
//!
//! Medoids are initialised by a seeded draw of `k` distinct points. Each round
//! evaluates every (medoid, non-medoid) swap and applies the one with the lowest
//! resulting cost, stopping once no swap lowers the cost.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ROUNDS: usize = 10_000;
/// Random initialisations per clustering.
pub const STARTS: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    #[default]
    Euclidean,
    Manhattan,
}

impl Distance {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Distance::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Distance::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

/// Symmetric pairwise distances, row-major.
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_points(points: &[Vec<f64>], distance: Distance) -> Self {
        let n = points.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = distance.eval(&points[i], &points[j]);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        DistanceMatrix { n, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Total distance of every point to its nearest medoid.
    pub fn cost(&self, medoids: &[usize]) -> f64 {
        (0..self.n)
            .map(|i| {
                medoids
                    .iter()
                    .map(|&m| self.get(i, m))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PamResult {
    /// Point index of each community's medoid, ascending.
    pub medoids: Vec<usize>,
    /// Community index per point.
    pub assignment: Vec<usize>,
    pub cost: f64,
    /// Cost after initialisation and after every accepted swap.
    pub cost_trace: Vec<f64>,
}

/// Nearest medoid per point; ties go to the lower community index.
pub fn assign_nearest(dm: &DistanceMatrix, medoids: &[usize]) -> Vec<usize> {
    (0..dm.len())
        .map(|i| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, &m) in medoids.iter().enumerate() {
                let d = dm.get(i, m);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Best-swap PAM from `STARTS` seeded random medoid sets; the lowest final cost
/// wins, ties going to the earlier start.
pub fn pam(dm: &DistanceMatrix, k: usize, seed: u64) -> Result<PamResult> {
    let n = dm.len();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the number of points ({n})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<PamResult> = None;
    for _ in 0..STARTS {
        let init = rand::seq::index::sample(&mut rng, n, k).into_vec();
        let r = pam_from(dm, k, init);
        if best.as_ref().is_none_or(|b| r.cost < b.cost - 1e-12 * b.cost.max(1.0)) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one start"))
}

fn pam_from(dm: &DistanceMatrix, k: usize, mut medoids: Vec<usize>) -> PamResult {
    let n = dm.len();
    let mut is_medoid = vec![false; n];
    for &m in &medoids {
        is_medoid[m] = true;
    }

    let mut cost = dm.cost(&medoids);
    let mut cost_trace = vec![cost];
    let mut nearest = vec![0.0; n];
    let mut second = vec![0.0; n];
    let mut nearest_slot = vec![0usize; n];

    for _ in 0..MAX_ROUNDS {
        for i in 0..n {
            let (mut d1, mut d2, mut s1) = (f64::INFINITY, f64::INFINITY, 0);
            for (slot, &m) in medoids.iter().enumerate() {
                let d = dm.get(i, m);
                if d < d1 {
                    d2 = d1;
                    d1 = d;
                    s1 = slot;
                } else if d < d2 {
                    d2 = d;
                }
            }
            nearest[i] = d1;
            second[i] = d2;
            nearest_slot[i] = s1;
        }

        let mut best: Option<(f64, usize, usize)> = None;
        for slot in 0..k {
            for h in 0..n {
                if is_medoid[h] {
                    continue;
                }
                let swapped: f64 = (0..n)
                    .map(|i| {
                        let dh = dm.get(i, h);
                        let keep = if nearest_slot[i] == slot {
                            second[i]
                        } else {
                            nearest[i]
                        };
                        dh.min(keep)
                    })
                    .sum();
                if best.is_none_or(|(c, _, _)| swapped < c) {
                    best = Some((swapped, slot, h));
                }
            }
        }

        match best {
            Some((new_cost, slot, h)) if new_cost < cost - 1e-12 * cost.max(1.0) => {
                is_medoid[medoids[slot]] = false;
                is_medoid[h] = true;
                medoids[slot] = h;
                cost = dm.cost(&medoids);
                cost_trace.push(cost);
            }
            _ => break,
        }
    }

    medoids.sort_unstable();
    let assignment = assign_nearest(dm, &medoids);
    PamResult {
        medoids,
        assignment,
        cost,
        cost_trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points_1d(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    fn best_cost_exhaustive(dm: &DistanceMatrix, k: usize) -> f64 {
        fn rec(dm: &DistanceMatrix, k: usize, start: usize, cur: &mut Vec<usize>, best: &mut f64) {
            if cur.len() == k {
                *best = best.min(dm.cost(cur));
                return;
            }
            for i in start..dm.len() {
                cur.push(i);
                rec(dm, k, i + 1, cur, best);
                cur.pop();
            }
        }
        let mut best = f64::INFINITY;
        rec(dm, k, 0, &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn k1_picks_cost_minimizing_medoid() {
        let pts = points_1d(&[0.0, 1.0, 2.0, 7.0, 3.0]);
        let dm = DistanceMatrix::from_points(&pts, Distance::Euclidean);
        let scan = (0..5)
            .min_by(|&a, &b| dm.cost(&[a]).total_cmp(&dm.cost(&[b])))
            .unwrap();
        let r = pam(&dm, 1, 9).unwrap();
        assert_eq!(r.medoids, vec![scan]);
        assert_eq!(r.assignment, vec![0; 5]);
    }

    #[test]
    fn k_equals_n_has_zero_cost() {
        let pts = points_1d(&[0.0, 1.0, 2.0, 2.0]);
        let dm = DistanceMatrix::from_points(&pts, Distance::Euclidean);
        let r = pam(&dm, 4, 1).unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.medoids, vec![0, 1, 2, 3]);
    }

    #[test]
    fn three_triples() {
        let pts = points_1d(&[0.0, 0.1, 0.2, 10.0, 10.1, 10.2, 20.0, 20.1, 20.2]);
        let dm = DistanceMatrix::from_points(&pts, Distance::Euclidean);
        let optimum = best_cost_exhaustive(&dm, 3);
        for seed in 0..10 {
            let r = pam(&dm, 3, seed).unwrap();
            assert!((r.cost - optimum).abs() < 1e-12);
            assert_eq!(r.medoids, vec![1, 4, 7]);
            assert_eq!(r.assignment, vec![0, 0, 0, 1, 1, 1, 2, 2, 2]);
        }
    }

    #[test]
    fn invalid_k() {
        let dm = DistanceMatrix::from_points(&points_1d(&[0.0, 1.0]), Distance::Euclidean);
        assert!(pam(&dm, 3, 0).is_err());
        assert!(pam(&dm, 0, 0).is_err());
    }

    #[test]
    fn cost_trace_strictly_decreases() {
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![((i * 37) % 11) as f64, ((i * 17) % 7) as f64])
            .collect();
        let dm = DistanceMatrix::from_points(&pts, Distance::Euclidean);
        let r = pam(&dm, 4, 3).unwrap();
        assert!(r.cost_trace.windows(2).all(|w| w[1] < w[0]));
        // no single improving swap remains
        for slot in 0..4 {
            for h in 0..30 {
                if r.medoids.contains(&h) {
                    continue;
                }
                let mut m = r.medoids.clone();
                m[slot] = h;
                assert!(dm.cost(&m) >= r.cost - 1e-9);
            }
        }
    }

    #[test]
    fn manhattan_distance() {
        assert_eq!(Distance::Manhattan.eval(&[0.0, 0.0], &[3.0, 4.0]), 7.0);
        assert_eq!(Distance::Euclidean.eval(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
    }
}
