//! Lloyd's k-means with k-means++ seeding, restarts, and empty-cluster
//! repair. Deterministic given the seed; restarts use forked sub-generators
//! and the best run is chosen by inertia, ties going to the earlier restart.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RandomSource;

#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    coords: DMatrix<f64>,
}

impl PointSet {
    pub fn new(coords: DMatrix<f64>) -> Result<Self> {
        if coords.nrows() == 0 || coords.ncols() == 0 {
            return Err(Error::InvalidParameter("empty point set".into()));
        }
        if !coords.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter("point set has non-finite entries".into()));
        }
        Ok(Self { coords })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParameter("ragged point rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(n, d, &flat))
    }

    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    fn dist2(&self, i: usize, center: &[f64]) -> f64 {
        (0..self.dim())
            .map(|j| {
                let d = self.coords[(i, j)] - center[j];
                d * d
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// K x d center matrix.
    pub centers: DMatrix<f64>,
    /// Zero-based cluster label per point.
    pub labels: Vec<usize>,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
}

/// Label each point by its nearest center (Euclidean); ties break to the
/// lowest center index.
pub fn assign(points: &PointSet, centers: &DMatrix<f64>) -> Result<Vec<usize>> {
    if centers.ncols() != points.dim() {
        return Err(Error::InvalidParameter(format!(
            "center dimension {} does not match points dimension {}",
            centers.ncols(),
            points.dim()
        )));
    }
    let k = centers.nrows();
    let mut labels = vec![0usize; points.n()];
    for i in 0..points.n() {
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for c in 0..k {
            let center: Vec<f64> = (0..points.dim()).map(|j| centers[(c, j)]).collect();
            let d = points.dist2(i, &center);
            if d < best {
                best = d;
                arg = c;
            }
        }
        labels[i] = arg;
    }
    Ok(labels)
}

fn wcss(points: &PointSet, centers: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let d = points.dim();
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            (0..d)
                .map(|j| {
                    let diff = points.coords[(i, j)] - centers[(c, j)];
                    diff * diff
                })
                .sum::<f64>()
        })
        .sum()
}

fn kmeanspp_seed(points: &PointSet, k: usize, rng: &mut RandomSource) -> DMatrix<f64> {
    let n = points.n();
    let d = points.dim();
    let mut centers: DMatrix<f64> = DMatrix::zeros(k, d);
    let first = rng.random_range(0..n);
    for j in 0..d {
        centers[(0, j)] = points.coords[(first, j)];
    }
    let mut mindist = vec![f64::INFINITY; n];
    for c in 1..k {
        let prev: Vec<f64> = (0..d).map(|j| centers[(c - 1, j)]).collect();
        let mut total = 0.0;
        for i in 0..n {
            let di = points.dist2(i, &prev);
            if di < mindist[i] {
                mindist[i] = di;
            }
            total += mindist[i];
        }
        let pick = if total > 0.0 {
            let u: f64 = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &w) in mindist.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // All remaining mass at the chosen centers; fall back to uniform.
            rng.random_range(0..n)
        };
        for j in 0..d {
            centers[(c, j)] = points.coords[(pick, j)];
        }
    }
    centers
}

fn lloyd_once(
    points: &PointSet,
    k: usize,
    max_iter: usize,
    rng: &mut RandomSource,
) -> Result<KMeansResult> {
    let n = points.n();
    let d = points.dim();
    let mut centers = kmeanspp_seed(points, k, rng);
    let mut labels = assign(points, &centers)?;
    for _ in 0..max_iter {
        // Recompute centers.
        let mut counts = vec![0usize; k];
        let mut sums: DMatrix<f64> = DMatrix::zeros(k, d);
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for j in 0..d {
                sums[(c, j)] += points.coords[(i, j)];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    centers[(c, j)] = sums[(c, j)] / counts[c] as f64;
                }
            }
        }
        // Repair empty clusters: reseed at the point farthest from its
        // current center.
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let ca: Vec<f64> = (0..d).map(|j| centers[(labels[a], j)]).collect();
                        let cb: Vec<f64> = (0..d).map(|j| centers[(labels[b], j)]).collect();
                        points
                            .dist2(a, &ca)
                            .partial_cmp(&points.dist2(b, &cb))
                            .unwrap()
                    })
                    .unwrap();
                for j in 0..d {
                    centers[(c, j)] = points.coords[(far, j)];
                }
                counts[c] = 1; // prevents double-reseeding to the same point
                labels[far] = c;
            }
        }
        let new_labels = assign(points, &centers)?;
        if new_labels == labels {
            break;
        }
        labels = new_labels;
    }
    let inertia = wcss(points, &centers, &labels);
    Ok(KMeansResult {
        centers,
        labels,
        inertia,
    })
}

/// Best of `restarts` Lloyd runs from k-means++ seeds.
pub fn kmeans_fit(
    points: &PointSet,
    k: usize,
    restarts: usize,
    max_iter: usize,
    rng: &mut RandomSource,
) -> Result<KMeansResult> {
    if k == 0 || restarts == 0 || max_iter == 0 {
        return Err(Error::InvalidParameter("k, restarts, and max_iter must be positive".into()));
    }
    if points.n() < k {
        return Err(Error::InvalidParameter(format!(
            "cannot fit {k} clusters to {} points",
            points.n()
        )));
    }
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts {
        let mut sub = rng.fork();
        let run = lloyd_once(points, k, max_iter, &mut sub)?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> RandomSource {
        RandomSource::new(seed)
    }

    /// Partitions induced by two labelings are equal (label-permutation
    /// independent co-assignment comparison).
    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        assert_eq!(a.len(), b.len());
        for i in 0..a.len() {
            for j in (i + 1)..a.len() {
                if (a[i] == a[j]) != (b[i] == b[j]) {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn k1_is_centroid() {
        let points = PointSet::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 3.0]]).unwrap();
        let fit = kmeans_fit(&points, 1, 1, 100, &mut rng(1)).unwrap();
        assert!((fit.centers[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((fit.centers[(0, 1)] - 1.0).abs() < 1e-12);
        let total: f64 = (0..3)
            .map(|i| points.dist2(i, &[1.0, 1.0]))
            .sum();
        assert!((fit.inertia - total).abs() < 1e-8 * total);
    }

    #[test]
    fn unit_square_corners_exact_fit() {
        let points = PointSet::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ])
        .unwrap();
        let fit = kmeans_fit(&points, 4, 5, 100, &mut rng(2)).unwrap();
        assert!(fit.inertia < 1e-12);
        let mut sorted = fit.labels.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }

    #[test]
    fn well_separated_blobs_recovered() {
        let mut r = rng(3);
        let centers = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)];
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (k, &(cx, cy)) in centers.iter().enumerate() {
            for _ in 0..100 {
                let dx: f64 = r.sample::<f64, _>(rand_distr::StandardNormal) * 0.1;
                let dy: f64 = r.sample::<f64, _>(rand_distr::StandardNormal) * 0.1;
                rows.push(vec![cx + dx, cy + dy]);
                truth.push(k);
            }
        }
        let points = PointSet::from_rows(&rows).unwrap();
        let fit = kmeans_fit(&points, 3, 10, 100, &mut rng(4)).unwrap();
        assert!(same_partition(&fit.labels, &truth));
    }

    #[test]
    fn assign_tie_breaks_to_lowest_index() {
        let points = PointSet::from_rows(&[vec![0.5]]).unwrap();
        let centers = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert_eq!(assign(&points, &centers).unwrap(), vec![0]);
        let points2 = PointSet::from_rows(&[vec![1.0]]).unwrap();
        assert_eq!(assign(&points2, &centers).unwrap(), vec![1]);
    }

    #[test]
    fn partition_invariant_to_point_order() {
        let mut r = rng(5);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let base = (i % 3) as f64 * 8.0;
                vec![base + r.sample::<f64, _>(rand_distr::StandardNormal) * 0.2]
            })
            .collect();
        let points = PointSet::from_rows(&rows).unwrap();
        let fit = kmeans_fit(&points, 3, 10, 100, &mut rng(6)).unwrap();

        let perm: Vec<usize> = (0..60).rev().collect();
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let points2 = PointSet::from_rows(&shuffled).unwrap();
        let fit2 = kmeans_fit(&points2, 3, 10, 100, &mut rng(6)).unwrap();
        let unshuffled: Vec<usize> = {
            let mut v = vec![0; 60];
            for (pos, &orig) in perm.iter().enumerate() {
                v[orig] = fit2.labels[pos];
            }
            v
        };
        assert!(same_partition(&fit.labels, &unshuffled));
    }

    #[test]
    fn deterministic_given_seed_and_n_lt_k_rejected() {
        let points = PointSet::from_rows(&[vec![0.0], vec![1.0], vec![5.0], vec![6.0]]).unwrap();
        let a = kmeans_fit(&points, 2, 3, 100, &mut rng(7)).unwrap();
        let b = kmeans_fit(&points, 2, 3, 100, &mut rng(7)).unwrap();
        assert_eq!(a, b);
        assert!(kmeans_fit(&points, 5, 1, 100, &mut rng(7)).is_err());
    }
}
