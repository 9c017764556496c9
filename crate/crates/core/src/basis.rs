//! Fixed-particle-number occupation basis encoded as bit masks.
//!
//! Bit `i` of a [`SpinMask`] is set when site `i` holds an electron of that
//! spin channel. A basis state is a pair of masks `(up, down)`; states are
//! ordered ascending by `(up, down)` integer value.

use crate::{Error, Result};

/// Occupation pattern of one spin channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SpinMask(pub u64);

impl SpinMask {
    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_occupied(self, site: usize) -> bool {
        (self.0 >> site) & 1 == 1
    }

    /// Moves an electron from `from` to `to`, i.e. applies `c†_to c_from`.
    ///
    /// Returns `None` when the operator annihilates the state (source empty
    /// or target occupied). The sign is `(-1)^k` with `k` the number of
    /// occupied sites strictly between the two positions.
    pub fn hop(self, from: usize, to: usize) -> Option<(SpinMask, f64)> {
        debug_assert!(from != to && from < 64 && to < 64);
        if !self.is_occupied(from) || self.is_occupied(to) {
            return None;
        }
        let (lo, hi) = if from < to { (from, to) } else { (to, from) };
        let between = self.0 & between_mask(lo, hi);
        let sign = if between.count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        Some((SpinMask(self.0 ^ (1 << from) ^ (1 << to)), sign))
    }
}

fn between_mask(lo: usize, hi: usize) -> u64 {
    // bits lo+1 ..= hi-1
    let below_hi = if hi >= 64 { u64::MAX } else { (1u64 << hi) - 1 };
    let upto_lo = if lo + 1 >= 64 { u64::MAX } else { (1u64 << (lo + 1)) - 1 };
    below_hi & !upto_lo
}

/// Checked version of [`SpinMask::hop`] for callers with untrusted indices.
pub fn apply_hop(
    mask: SpinMask,
    from: usize,
    to: usize,
    n_sites: usize,
) -> Result<Option<(SpinMask, f64)>> {
    if from == to || from >= n_sites || to >= n_sites {
        return Err(Error::Parameter(format!(
            "hop {from}->{to} invalid on {n_sites} sites"
        )));
    }
    Ok(mask.hop(from, to))
}

/// Number of doubly occupied sites.
pub fn doublon_count(up: SpinMask, down: SpinMask) -> u32 {
    (up.0 & down.0).count_ones()
}

/// All masks of `n_sites` bits with exactly `count` bits set, ascending.
pub fn masks_with_count(n_sites: usize, count: usize) -> Vec<SpinMask> {
    if count > n_sites {
        return Vec::new();
    }
    if count == 0 {
        return vec![SpinMask(0)];
    }
    let mut out = Vec::with_capacity(binomial(n_sites, count) as usize);
    let limit: u128 = 1u128 << n_sites;
    let mut v: u128 = (1u128 << count) - 1;
    while v < limit {
        out.push(SpinMask(v as u64));
        // Gosper's hack: next integer with the same popcount
        let c = v & v.wrapping_neg();
        let r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
    out
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Occupation basis with fixed electron numbers per spin channel.
#[derive(Debug, Clone)]
pub struct Basis {
    n_sites: usize,
    n_up: usize,
    n_down: usize,
    up_masks: Vec<SpinMask>,
    down_masks: Vec<SpinMask>,
}

/// Upper bound on the basis dimension accepted by [`Basis::enumerate`].
pub const MAX_DIM: u128 = 1 << 31;

impl Basis {
    pub fn enumerate(n_sites: usize, n_up: usize, n_down: usize) -> Result<Self> {
        if n_sites == 0 || n_sites > 64 {
            return Err(Error::Parameter(format!(
                "number of sites must be in 1..=64, got {n_sites}"
            )));
        }
        if n_up > n_sites || n_down > n_sites {
            return Err(Error::Parameter(format!(
                "electron counts ({n_up}, {n_down}) exceed {n_sites} sites"
            )));
        }
        let dim = binomial(n_sites, n_up) * binomial(n_sites, n_down);
        if dim > MAX_DIM {
            return Err(Error::Parameter(format!("basis dimension {dim} too large")));
        }
        Ok(Basis {
            n_sites,
            n_up,
            n_down,
            up_masks: masks_with_count(n_sites, n_up),
            down_masks: masks_with_count(n_sites, n_down),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn n_down(&self) -> usize {
        self.n_down
    }

    /// Dimension of the basis.
    pub fn len(&self) -> usize {
        self.up_masks.len() * self.down_masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state(&self, index: usize) -> (SpinMask, SpinMask) {
        let nd = self.down_masks.len();
        (self.up_masks[index / nd], self.down_masks[index % nd])
    }

    pub fn index_of(&self, up: SpinMask, down: SpinMask) -> Option<usize> {
        let iu = self.up_masks.binary_search(&up).ok()?;
        let id = self.down_masks.binary_search(&down).ok()?;
        Some(iu * self.down_masks.len() + id)
    }

    pub fn up_masks(&self) -> &[SpinMask] {
        &self.up_masks
    }

    pub fn down_masks(&self) -> &[SpinMask] {
        &self.down_masks
    }

    pub fn states(&self) -> impl Iterator<Item = (SpinMask, SpinMask)> + '_ {
        self.up_masks
            .iter()
            .flat_map(move |&u| self.down_masks.iter().map(move |&d| (u, d)))
    }
}
