//! One-slot kernels over absolute chain lengths.

use std::collections::BTreeMap;

use crate::netmodel::NetworkScenario;

/// Distribution over length vectors.
pub type LengthDistribution = Vec<(Vec<u32>, f64)>;

/// Outcomes of the synchronization phase for miner `i` alone, as
/// `(length after sync, probability)`.
///
/// The miner adopts the longest chain it successfully receives when that is
/// strictly longer than its own; with no longer chain received it keeps its
/// own. Self links are ignored.
pub fn miner_sync_outcomes(b: &[u32], scenario: &NetworkScenario, i: usize) -> Vec<(u32, f64)> {
    let own = b[i];
    let mut longer: BTreeMap<u32, f64> = BTreeMap::new();
    for (j, &len) in b.iter().enumerate() {
        if j != i && len > own {
            // Probability that every sender at this length fails.
            *longer.entry(len).or_insert(1.0) *= 1.0 - scenario.link(j, i);
        }
    }
    let mut out = Vec::with_capacity(longer.len() + 1);
    let mut all_longer_fail = 1.0;
    for (&len, &fail) in longer.iter().rev() {
        let p = (1.0 - fail) * all_longer_fail;
        if p > 0.0 {
            out.push((len, p));
        }
        all_longer_fail *= fail;
    }
    if all_longer_fail > 0.0 {
        out.push((own, all_longer_fail));
    }
    out
}

/// Probability that miner `i` holds the longest chain after synchronization.
pub(crate) fn holds_max_after_sync(b: &[u32], scenario: &NetworkScenario, i: usize) -> f64 {
    let top = b.iter().copied().max().unwrap_or(0);
    if b[i] == top {
        return 1.0;
    }
    let fail: f64 = b
        .iter()
        .enumerate()
        .filter(|&(j, &len)| j != i && len == top)
        .map(|(j, _)| 1.0 - scenario.link(j, i))
        .product();
    1.0 - fail
}

fn product<F>(n: usize, per_miner: F) -> LengthDistribution
where
    F: Fn(usize) -> Vec<(u32, f64)>,
{
    let mut acc: LengthDistribution = vec![(Vec::with_capacity(n), 1.0)];
    for i in 0..n {
        let options = per_miner(i);
        let mut next = Vec::with_capacity(acc.len() * options.len());
        for (prefix, p) in &acc {
            for &(len, q) in &options {
                let mut v = prefix.clone();
                v.push(len);
                next.push((v, p * q));
            }
        }
        acc = next;
    }
    acc
}

/// Joint distribution of lengths after synchronization. Miners update
/// independently, so this is the product of [`miner_sync_outcomes`].
pub fn sync_kernel(b: &[u32], scenario: &NetworkScenario) -> LengthDistribution {
    product(b.len(), |i| miner_sync_outcomes(b, scenario, i))
}

/// Joint distribution of lengths after every miner independently extends its
/// chain by one block with probability `c_i`.
pub fn mine_kernel(b: &[u32], scenario: &NetworkScenario) -> LengthDistribution {
    product(b.len(), |i| {
        let c = scenario.rate(i);
        let mut v = Vec::with_capacity(2);
        if c < 1.0 {
            v.push((b[i], 1.0 - c));
        }
        if c > 0.0 {
            v.push((b[i] + 1, c));
        }
        v
    })
}

/// `b - min(b)`.
pub fn relative(b: &[u32]) -> Vec<u32> {
    let m = b.iter().copied().min().unwrap_or(0);
    b.iter().map(|&x| x - m).collect()
}

/// Sync followed by mining from `b`, reported over relative states.
pub fn one_step_relative(b: &[u32], scenario: &NetworkScenario) -> BTreeMap<Vec<u32>, f64> {
    let mut out = BTreeMap::new();
    for (mid, p) in sync_kernel(b, scenario) {
        for (end, q) in mine_kernel(&mid, scenario) {
            *out.entry(relative(&end)).or_insert(0.0) += p * q;
        }
    }
    out
}
