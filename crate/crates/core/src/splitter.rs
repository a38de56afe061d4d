//! Balanced train/validation/test partitioning.
//!
//! Images are grouped by their dominant defect class and every group is cut
//! to the requested fractions independently, so rare classes keep the same
//! proportions as common ones.

use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data_model::{DatasetIndex, DefectClass, ImageRecord};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            train_fraction: train,
            val_fraction: val,
            test_fraction: test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.fractions();
        if f.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::config(format!(
                "split fractions must be non-negative, got {f:?}"
            )));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "split fractions must sum to 1 (train + val + test = {sum})"
            )));
        }
        Ok(())
    }

    fn fractions(&self) -> [f64; 3] {
        [self.train_fraction, self.val_fraction, self.test_fraction]
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            val_fraction: 0.15,
            test_fraction: 0.15,
            seed: 0,
        }
    }
}

/// The grouping key of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SplitGroup {
    Dominant(DefectClass),
    DefectFree,
}

impl fmt::Display for SplitGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitGroup::Dominant(c) => f.write_str(c.as_str()),
            SplitGroup::DefectFree => f.write_str("defect_free"),
        }
    }
}

impl Serialize for SplitGroup {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Per-group allocation row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupAllocation {
    pub group: SplitGroup,
    pub images: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub train: DatasetIndex,
    pub val: DatasetIndex,
    pub test: DatasetIndex,
    pub allocation: Vec<GroupAllocation>,
}

/// The class with the most instances in the image; ties go to the earlier
/// class in canonical order. `DefectFree` for images without objects.
pub fn dominant_group(image: &ImageRecord) -> SplitGroup {
    let mut counts = [0usize; DefectClass::COUNT];
    for o in &image.objects {
        counts[o.class.index()] += 1;
    }
    let mut best: Option<(DefectClass, usize)> = None;
    for c in DefectClass::ALL {
        let n = counts[c.index()];
        if n > 0 && best.is_none_or(|(_, b)| n > b) {
            best = Some((c, n));
        }
    }
    best.map_or(SplitGroup::DefectFree, |(c, _)| SplitGroup::Dominant(c))
}

/// Largest-remainder apportionment of `n` items to `fractions`. Equal
/// remainders favour the earlier slot (train before val before test).
pub fn largest_remainder(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let quotas = fractions.map(|f| f * n as f64);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut slots = [0usize, 1, 2];
    slots.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &s in slots.iter().take(n.saturating_sub(assigned)) {
        counts[s] += 1;
    }
    counts
}

/// Partitions `dataset` per `spec`. Deterministic in `(dataset, spec)`;
/// within each partition images keep their original relative order.
pub fn balanced_split(dataset: &DatasetIndex, spec: &SplitSpec) -> Result<SplitResult> {
    spec.validate()?;
    let fractions = spec.fractions();

    let mut groups: Vec<(SplitGroup, Vec<usize>)> = Vec::new();
    for (i, img) in dataset.images().iter().enumerate() {
        let g = dominant_group(img);
        match groups.iter_mut().find(|(k, _)| *k == g) {
            Some((_, members)) => members.push(i),
            None => groups.push((g, vec![i])),
        }
    }
    groups.sort_by_key(|(g, _)| *g);

    // 0 = train, 1 = val, 2 = test
    let mut assignment = vec![0u8; dataset.len()];
    let mut allocation = Vec::with_capacity(groups.len());
    for (group, mut members) in groups {
        let key = match group {
            SplitGroup::Dominant(c) => c.index() as u64,
            SplitGroup::DefectFree => DefectClass::COUNT as u64,
        };
        let mut r = rng::stream(spec.seed, rng::DOMAIN_SPLIT, key, 0);
        members.shuffle(&mut r);
        let counts = largest_remainder(members.len(), &fractions);
        let mut cursor = members.iter();
        for (part, &n) in counts.iter().enumerate() {
            for &i in cursor.by_ref().take(n) {
                assignment[i] = part as u8;
            }
        }
        allocation.push(GroupAllocation {
            group,
            images: members.len(),
            train: counts[0],
            val: counts[1],
            test: counts[2],
        });
    }

    let mut parts: [Vec<ImageRecord>; 3] = Default::default();
    for (img, &part) in dataset.images().iter().zip(&assignment) {
        parts[part as usize].push(img.clone());
    }
    let [train, val, test] = parts;
    Ok(SplitResult {
        train: DatasetIndex::new(train)?,
        val: DatasetIndex::new(val)?,
        test: DatasetIndex::new(test)?,
        allocation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::GroundTruthObject;
    use proptest::prelude::*;

    fn image(id: usize, classes: &[DefectClass]) -> ImageRecord {
        ImageRecord {
            id: format!("img{id:04}"),
            path: format!("img{id:04}.png"),
            width: 100,
            height: 100,
            objects: classes
                .iter()
                .map(|&class| GroundTruthObject {
                    class,
                    bbox: [1.0, 1.0, 5.0, 5.0].try_into().unwrap(),
                })
                .collect(),
        }
    }

    fn single_class(counts: &[(DefectClass, usize)]) -> DatasetIndex {
        let mut images = Vec::new();
        for &(c, n) in counts {
            for _ in 0..n {
                images.push(image(images.len(), &[c]));
            }
        }
        DatasetIndex::new(images).unwrap()
    }

    #[test]
    fn hundred_images_split_exactly() {
        let ds = single_class(&[(DefectClass::Spur, 100)]);
        let r = balanced_split(&ds, &SplitSpec::default()).unwrap();
        assert_eq!((r.train.len(), r.val.len(), r.test.len()), (70, 15, 15));
    }

    #[test]
    fn bad_fractions_are_rejected() {
        let err = SplitSpec::new(0.5, 0.5, 0.1, 0).unwrap_err();
        assert!(err.to_string().contains("sum to 1"));
        assert!(SplitSpec::new(1.2, -0.1, -0.1, 0).is_err());
    }

    #[test]
    fn groups_split_independently() {
        let ds = single_class(&[(DefectClass::Short, 40), (DefectClass::Pinhole, 60)]);
        let r = balanced_split(&ds, &SplitSpec::default()).unwrap();
        let train_of = |g| r.allocation.iter().find(|a| a.group == g).unwrap().train;
        assert_eq!(train_of(SplitGroup::Dominant(DefectClass::Short)), 28);
        assert_eq!(train_of(SplitGroup::Dominant(DefectClass::Pinhole)), 42);
    }

    #[test]
    fn dominant_class_rules() {
        use DefectClass::*;
        assert_eq!(dominant_group(&image(0, &[])), SplitGroup::DefectFree);
        assert_eq!(
            dominant_group(&image(0, &[Spur, Short, Spur])),
            SplitGroup::Dominant(Spur)
        );
        assert_eq!(
            dominant_group(&image(0, &[Scratch, MouseBite])),
            SplitGroup::Dominant(MouseBite)
        );
    }

    #[test]
    fn remainders_favour_train() {
        assert_eq!(largest_remainder(1, &[0.7, 0.15, 0.15]), [1, 0, 0]);
        assert_eq!(largest_remainder(2, &[0.5, 0.25, 0.25]), [1, 1, 0]);
        assert_eq!(largest_remainder(7, &[0.7, 0.15, 0.15]), [5, 1, 1]);
        assert_eq!(largest_remainder(0, &[0.7, 0.15, 0.15]), [0, 0, 0]);
    }

    proptest! {
        #[test]
        fn partition_and_balance(
            sizes in prop::collection::vec(0usize..40, 8),
            free in 0usize..20,
            seed in any::<u64>(),
            a in 0.0..1.0f64,
            b in 0.0..1.0f64,
        ) {
            let (lo, hi) = (a.min(b), a.max(b));
            let spec = SplitSpec::new(lo, hi - lo, 1.0 - hi, seed).unwrap();
            let mut counts: Vec<(DefectClass, usize)> = DefectClass::ALL.into_iter().zip(sizes).collect();
            counts.sort();
            let mut ds = single_class(&counts).into_images();
            let base = ds.len();
            ds.extend((0..free).map(|i| image(base + i, &[])));
            let ds = DatasetIndex::new(ds).unwrap();

            let r = balanced_split(&ds, &spec).unwrap();
            let mut ids: Vec<&str> = [&r.train, &r.val, &r.test]
                .iter()
                .flat_map(|p| p.images().iter().map(|i| i.id.as_str()))
                .collect();
            ids.sort_unstable();
            let mut expected: Vec<&str> = ds.images().iter().map(|i| i.id.as_str()).collect();
            expected.sort_unstable();
            prop_assert_eq!(ids, expected);

            for g in &r.allocation {
                for (n, f) in [(g.train, spec.train_fraction), (g.val, spec.val_fraction), (g.test, spec.test_fraction)] {
                    prop_assert!((n as f64 - f * g.images as f64).abs() <= 1.0);
                }
            }
            prop_assert_eq!(balanced_split(&ds, &spec).unwrap(), r.clone());

            let other = balanced_split(&ds, &SplitSpec { seed: seed.wrapping_add(1), ..spec }).unwrap();
            prop_assert_eq!(other.allocation, r.allocation);
        }
    }
}
