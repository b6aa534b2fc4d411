//! Axis-aligned regions and the switching machinery built on them.
//!
//! A [`Region`] models both the true interaction region around the hole and
//! its perception-derived over-approximation. Membership is a closed box test.

use crate::geometry::Vec3;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("region half extents must be positive and finite, got {0:?}")]
    InvalidExtents([f64; 3]),
    #[error("region set has {regions} regions but {weights} weights")]
    LengthMismatch { regions: usize, weights: usize },
    #[error("region weights must be non-negative and sum to 1 (sum = {0})")]
    InvalidWeights(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub center: Vec3,
    pub half_extents: Vec3,
}

impl Region {
    pub fn new(center: Vec3, half_extents: Vec3) -> Result<Self, RegionError> {
        if half_extents.iter().all(|h| *h > 0.0 && h.is_finite()) && center.iter().all(|c| c.is_finite()) {
            Ok(Self {
                center,
                half_extents,
            })
        } else {
            Err(RegionError::InvalidExtents(half_extents.into()))
        }
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    pub fn min(&self) -> Vec3 {
        self.center - self.half_extents
    }

    pub fn max(&self) -> Vec3 {
        self.center + self.half_extents
    }

    /// Region with every half extent multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Region, RegionError> {
        Region::new(self.center, self.half_extents * factor)
    }

    /// Euclidean distance from `s` to the box; zero inside.
    pub fn distance(&self, s: &Vec3) -> f64 {
        let d = (s - self.center).abs() - self.half_extents;
        d.map(|v| v.max(0.0)).norm()
    }

    pub fn is_superset_of(&self, other: &Region) -> bool {
        (0..3).all(|i| self.min()[i] <= other.min()[i] && self.max()[i] >= other.max()[i])
    }
}

/// Closed-box membership: `|s - center| <= half_extents` on every axis.
pub fn contains(region: &Region, s: &Vec3) -> bool {
    let (lo, hi) = (region.min(), region.max());
    (0..3).all(|i| s[i] >= lo[i] && s[i] <= hi[i])
}

/// Weighted set of candidate interaction regions, one per pose hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct NonparametricRegionSet {
    regions: Vec<Region>,
    weights: Vec<f64>,
}

impl NonparametricRegionSet {
    pub fn new(regions: Vec<Region>, weights: Vec<f64>) -> Result<Self, RegionError> {
        if regions.len() != weights.len() {
            return Err(RegionError::LengthMismatch {
                regions: regions.len(),
                weights: weights.len(),
            });
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(RegionError::InvalidWeights(sum));
        }
        Ok(Self { regions, weights })
    }

    pub fn uniform(regions: Vec<Region>) -> Result<Self, RegionError> {
        let n = regions.len();
        Self::new(regions, vec![1.0 / n as f64; n])
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Probability that `s` lies in the true interaction region, given the
/// weighted hypotheses: the sum of weights of regions containing `s`.
pub fn membership_likelihood(s: &Vec3, set: &NonparametricRegionSet) -> f64 {
    let p: f64 = set
        .regions
        .iter()
        .zip(&set.weights)
        .filter(|(r, _)| contains(r, s))
        .map(|(_, w)| *w)
        .sum();
    p.min(1.0)
}

/// Switch indicator: 1 inside the uncertain region (learned policy acts),
/// 0 outside (model-based policy acts).
pub fn alpha(s: &Vec3, shat: &Region) -> u8 {
    u8::from(contains(shat, s))
}

/// Interaction region recovered from a successful insertion.
///
/// The opening sits `inserted_depth` above the peg tip, directly over it, so
/// the region is the un-inflated template centered there.
pub fn shrink_on_success(s_success: &Vec3, inserted_depth: f64, template_half_extents: &Vec3) -> Result<Region, RegionError> {
    let opening = Vec3::new(s_success.x, s_success.y, s_success.z + inserted_depth);
    Region::new(opening, *template_half_extents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_region() -> Region {
        Region::new(Vec3::new(0.1, -0.2, 0.3), Vec3::new(0.02, 0.03, 0.04)).unwrap()
    }

    #[test]
    fn closed_boundary() {
        let r = unit_region();
        assert!(contains(&r, &r.center));
        assert!(contains(&r, &(r.center + r.half_extents)));
        assert!(contains(&r, &(r.center - r.half_extents)));
        assert!(!contains(&r, &(r.center + r.half_extents + Vec3::new(1e-9, 0.0, 0.0))));
    }

    #[test]
    fn alpha_extremes() {
        let r = unit_region();
        assert_eq!(alpha(&r.center, &r), 1);
        assert_eq!(alpha(&Vec3::new(0.5, 0.5, 0.8), &r), 0);
    }

    #[test]
    fn alpha_agrees_with_contains() {
        let r = unit_region();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let s = r.center + Vec3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
            assert_eq!(alpha(&s, &r) == 1, contains(&r, &s));
        }
    }

    #[test]
    fn likelihood_extremes() {
        let regions = vec![unit_region(); 4];
        let set = NonparametricRegionSet::uniform(regions).unwrap();
        assert_eq!(membership_likelihood(&unit_region().center, &set), 1.0);
        assert_eq!(membership_likelihood(&Vec3::new(5.0, 5.0, 5.0), &set), 0.0);
    }

    #[test]
    fn set_validation() {
        assert!(matches!(
            NonparametricRegionSet::new(vec![unit_region()], vec![0.5, 0.5]),
            Err(RegionError::LengthMismatch { .. })
        ));
        assert!(matches!(
            NonparametricRegionSet::new(vec![unit_region(); 2], vec![0.7, 0.7]),
            Err(RegionError::InvalidWeights(_))
        ));
        assert!(Region::new(Vec3::zeros(), Vec3::new(1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn shrink_recovers_opening() {
        let tip = Vec3::new(0.05, -0.03, 0.08);
        let template = Vec3::new(0.025, 0.025, 0.025);
        let r = shrink_on_success(&tip, 0.02, &template).unwrap();
        assert_eq!(r.half_extents, template);
        assert!((r.center - Vec3::new(0.05, -0.03, 0.10)).norm() < 1e-15);
    }

    fn arb_region() -> impl Strategy<Value = Region> {
        (
            prop::array::uniform3(-1.0f64..1.0),
            prop::array::uniform3(0.01f64..0.5),
        )
            .prop_map(|(c, h)| Region::new(Vec3::from(c), Vec3::from(h)).unwrap())
    }

    proptest! {
        #[test]
        fn likelihood_is_a_probability(regions in prop::collection::vec(arb_region(), 1..20),
                                       s in prop::array::uniform3(-1.5f64..1.5)) {
            let set = NonparametricRegionSet::uniform(regions).unwrap();
            let p = membership_likelihood(&Vec3::from(s), &set);
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn enlarging_regions_never_lowers_likelihood(regions in prop::collection::vec(arb_region(), 1..20),
                                                     s in prop::array::uniform3(-1.5f64..1.5),
                                                     scale in 1.0f64..3.0) {
            let s = Vec3::from(s);
            let small = NonparametricRegionSet::uniform(regions.clone()).unwrap();
            let big = NonparametricRegionSet::uniform(
                regions.iter().map(|r| r.scaled(scale).unwrap()).collect()).unwrap();
            prop_assert!(membership_likelihood(&s, &big) >= membership_likelihood(&s, &small));
        }
    }
}
