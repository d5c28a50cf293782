use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::DuplicationGroups;
use crate::{Error, Result};

/// The positive partner of view `i`.
#[inline]
pub fn partner(view: usize) -> usize {
    view ^ 1
}

/// Denominator set `M(i)`: the partner `j` plus every view whose original is
/// not a duplicate of the anchor's original.
pub fn build_fne_set(anchor: usize, groups: &DuplicationGroups, origin: &[usize]) -> Vec<usize> {
    let j = partner(anchor);
    let own = origin[anchor];
    (0..origin.len())
        .filter(|&k| k == j || !groups.same(own, origin[k]))
        .collect()
}

/// Positive set `S(i)`: the partner `j`, plus, when the anchor converted,
/// every other view that converted.
pub fn build_spi_set(anchor: usize, labels_z: &[u8]) -> Vec<usize> {
    let j = partner(anchor);
    if labels_z[anchor] != 1 {
        return alloc::vec![j];
    }
    (0..labels_z.len())
        .filter(|&k| k == j || (k != anchor && labels_z[k] == 1))
        .collect()
}

/// Which components shape the index sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SetRules {
    /// False negative elimination; otherwise `M(i)` is every view but `i`.
    pub fne: bool,
    /// Supervised positive inclusion; otherwise `S(i) = {j}`.
    pub spi: bool,
}

/// Per-anchor sorted index sets `M`, `S` and `Q = S ∩ M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSets {
    pub m: Vec<Vec<usize>>,
    pub s: Vec<Vec<usize>>,
    pub q: Vec<Vec<usize>>,
}

impl PairSets {
    pub fn build(rules: SetRules, groups: &DuplicationGroups, origin: &[usize], labels_z: &[u8]) -> Result<Self> {
        let views = origin.len();
        if views % 2 != 0 || labels_z.len() != views {
            return Err(Error::dim("PairSets::build", (views, 1), (labels_z.len(), 1)));
        }
        if let Some(&bad) = origin.iter().find(|&&o| o >= groups.len()) {
            return Err(Error::Usage(alloc::format!(
                "view origin {bad} outside a batch of {} originals",
                groups.len()
            )));
        }
        let mut m = Vec::with_capacity(views);
        let mut s = Vec::with_capacity(views);
        let mut q = Vec::with_capacity(views);
        for i in 0..views {
            let mi = if rules.fne {
                build_fne_set(i, groups, origin)
            } else {
                (0..views).filter(|&k| k != i).collect()
            };
            let si = if rules.spi {
                build_spi_set(i, labels_z)
            } else {
                alloc::vec![partner(i)]
            };
            let qi = intersect_sorted(&si, &mi);
            m.push(mi);
            s.push(si);
            q.push(qi);
        }
        Ok(PairSets { m, s, q })
    }

    /// Sets of the plain two-view loss: one positive, every other view in the
    /// denominator.
    pub fn traditional(views: usize) -> Self {
        let m: Vec<Vec<usize>> = (0..views).map(|i| (0..views).filter(|&k| k != i).collect()).collect();
        let s: Vec<Vec<usize>> = (0..views).map(|i| alloc::vec![partner(i)]).collect();
        PairSets { q: s.clone(), m, s }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            core::cmp::Ordering::Less => x += 1,
            core::cmp::Ordering::Greater => y += 1,
            core::cmp::Ordering::Equal => {
                out.push(a[x]);
                x += 1;
                y += 1;
            }
        }
    }
    out
}
