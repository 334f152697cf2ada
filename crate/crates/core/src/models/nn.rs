use super::{Fitter, Hypothesis, LossKind};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Training points and labels of a 1-nearest-neighbour rule.
///
/// Points keep the order of the training rows; one-dimensional sets also carry a
/// sorted index for logarithmic lookups.
#[derive(Debug, Clone, PartialEq)]
pub struct NnReference {
    dim: usize,
    points: Vec<f64>,
    labels: Vec<u8>,
    // (value, position) sorted, only for dim == 1
    sorted: Vec<(f64, usize)>,
}

impl NnReference {
    pub fn new(dim: usize, points: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if dim == 0 || labels.is_empty() || points.len() != dim * labels.len() {
            return Err(Error::invalid("reference set shape mismatch"));
        }
        let sorted = if dim == 1 {
            let mut s: Vec<(f64, usize)> = points.iter().copied().zip(0..).collect();
            // keys are unique, so the unstable sort is deterministic
            s.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            s
        } else {
            Vec::new()
        };
        Ok(Self { dim, points, labels, sorted })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn label(&self, j: usize) -> u8 {
        self.labels[j]
    }

    /// Position of the nearest reference point; distance ties go to the lowest position.
    pub fn nearest(&self, z: &[f64]) -> usize {
        if self.dim == 1 {
            self.nearest_sorted(z[0])
        } else {
            self.nearest_brute(z)
        }
    }

    pub fn predict(&self, z: &[f64]) -> u8 {
        self.labels[self.nearest(z)]
    }

    fn nearest_brute(&self, z: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for j in 0..self.len() {
            let d: f64 = self.point(j).iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best.0 {
                best = (d, j);
            }
        }
        best.1
    }

    fn nearest_sorted(&self, z: f64) -> usize {
        let s = &self.sorted;
        let k = s.partition_point(|p| p.0 < z);
        let mut best = (f64::INFINITY, usize::MAX);
        let mut consider = |v: f64, pos: usize| {
            let d = (v - z).abs();
            if d < best.0 || (d == best.0 && pos < best.1) {
                best = (d, pos);
            }
        };
        // Left side: the run of equal values ending at k-1, lowest position is its first element.
        if k > 0 {
            let v = s[k - 1].0;
            let first = if k < 2 || s[k - 2].0 != v { k - 1 } else { s[..k].partition_point(|p| p.0 < v) };
            consider(v, s[first].1);
        }
        // Right side: the first element at k already has the lowest position within its run.
        if k < s.len() {
            consider(s[k].0, s[k].1);
        }
        best.1
    }
}

/// 1-nearest-neighbour classifier.
#[derive(Debug, Clone, Copy)]
pub struct NnFitter {
    pub loss: LossKind,
}

impl NnFitter {
    pub fn new(loss: LossKind) -> Self {
        Self { loss }
    }
}

impl Fitter for NnFitter {
    fn fit(&self, data: &Dataset, rows: &[usize]) -> Result<Hypothesis> {
        let dim = data.dim();
        let mut points = Vec::with_capacity(rows.len() * dim);
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            let obs = data.row(i);
            points.extend_from_slice(obs.features);
            labels.push(obs.label().ok_or_else(|| Error::invalid("1-NN needs class labels"))?);
        }
        Ok(Hypothesis::NearestNeighbor(NnReference::new(dim, points, labels)?))
    }

    fn evaluation_loss(&self) -> LossKind {
        self.loss
    }

    fn training_loss(&self) -> &'static str {
        "none"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_go_to_lowest_position() {
        let r = NnReference::new(1, vec![2.0, 0.0, 2.0, 0.0], vec![1, 0, 0, 1]).unwrap();
        assert_eq!(r.nearest(&[1.0]), 0);
        assert_eq!(r.nearest(&[0.0]), 1);
        assert_eq!(r.nearest(&[5.0]), 0);
        assert_eq!(r.nearest(&[-5.0]), 1);
    }

    proptest! {
        #[test]
        fn sorted_lookup_matches_brute_force(
            pts in prop::collection::vec(-3i32..3, 1..25),
            z in -40i32..40,
        ) {
            // Coarse grid forces plenty of exact ties.
            let points: Vec<f64> = pts.iter().map(|&p| p as f64).collect();
            let labels = vec![0u8; points.len()];
            let r = NnReference::new(1, points, labels).unwrap();
            let zf = z as f64 / 8.0;
            prop_assert_eq!(r.nearest(&[zf]), r.nearest_brute(&[zf]));
        }
    }
}
