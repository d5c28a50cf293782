use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::data::Sample;
use crate::rng::fnv1a64;

/// Partition of a mini-batch into groups of samples with identical feature
/// tuples. Labels play no part in the grouping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicationGroups {
    group_of: Vec<usize>,
    group_count: usize,
}

impl DuplicationGroups {
    /// Every sample in its own group.
    pub fn singletons(n: usize) -> Self {
        DuplicationGroups {
            group_of: (0..n).collect(),
            group_count: n,
        }
    }

    /// Builds groups from explicit per-sample ids (renumbered by first
    /// appearance).
    pub fn from_ids(ids: &[usize]) -> Self {
        let mut seen = BTreeMap::new();
        let group_of = ids
            .iter()
            .map(|id| {
                let next = seen.len();
                *seen.entry(*id).or_insert(next)
            })
            .collect();
        DuplicationGroups {
            group_of,
            group_count: seen.len(),
        }
    }

    pub fn group_of(&self, sample: usize) -> usize {
        self.group_of[sample]
    }

    pub fn group_count(&self) -> usize {
        self.group_count
    }

    pub fn len(&self) -> usize {
        self.group_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group_of.is_empty()
    }

    /// The duplication indicator between two originals.
    pub fn same(&self, a: usize, b: usize) -> bool {
        self.group_of[a] == self.group_of[b]
    }
}

fn feature_hash(features: &[u32]) -> u64 {
    let mut bytes = Vec::with_capacity(features.len() * 4);
    for f in features {
        bytes.extend_from_slice(&f.to_le_bytes());
    }
    fnv1a64(&bytes)
}

/// Exact grouping by feature-tuple equality. Hash buckets are confirmed by a
/// direct comparison so collisions never merge distinct tuples.
pub fn detect_duplicates(batch: &[Sample]) -> DuplicationGroups {
    let mut buckets: BTreeMap<u64, Vec<(usize, usize)>> = BTreeMap::new();
    let mut group_of = Vec::with_capacity(batch.len());
    let mut group_count = 0;
    for (i, s) in batch.iter().enumerate() {
        let bucket = buckets.entry(feature_hash(s.features())).or_default();
        let found = bucket
            .iter()
            .find(|&&(rep, _)| batch[rep].features() == s.features())
            .map(|&(_, g)| g);
        let g = found.unwrap_or_else(|| {
            bucket.push((i, group_count));
            group_count += 1;
            group_count - 1
        });
        group_of.push(g);
    }
    DuplicationGroups { group_of, group_count }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn s(f: &[u32], y: u8, z: u8) -> Sample {
        Sample::new(f.to_vec(), y, z).unwrap()
    }

    #[test]
    fn distinct_batch_gives_singletons() {
        let b = [s(&[1, 2], 0, 0), s(&[2, 1], 0, 0), s(&[1, 3], 1, 0)];
        let g = detect_duplicates(&b);
        assert_eq!(g.group_count(), 3);
        assert_eq!(g, DuplicationGroups::singletons(3));
    }

    #[test]
    fn labels_are_ignored() {
        let b = [s(&[4, 4], 1, 1), s(&[5, 4], 0, 0), s(&[4, 4], 1, 0)];
        let g = detect_duplicates(&b);
        assert!(g.same(0, 2));
        assert!(!g.same(0, 1));
        assert_eq!(g.group_count(), 2);
    }

    #[test]
    fn permutation_invariant_up_to_relabel() {
        let b = vec![s(&[1], 0, 0), s(&[2], 0, 0), s(&[1], 1, 0), s(&[3], 0, 0), s(&[2], 1, 1)];
        let g = detect_duplicates(&b);
        let perm = [4, 2, 0, 3, 1];
        let pb: Vec<Sample> = perm.iter().map(|&i| b[i].clone()).collect();
        let pg = detect_duplicates(&pb);
        for x in 0..5 {
            for y in 0..5 {
                assert_eq!(pg.same(x, y), g.same(perm[x], perm[y]));
            }
        }
    }

    #[test]
    fn from_ids_renumbers() {
        let g = DuplicationGroups::from_ids(&[7, 3, 7, 9]);
        assert_eq!(g.group_count(), 3);
        assert!(g.same(0, 2));
        assert_eq!(g.group_of(1), 1);
    }
}
