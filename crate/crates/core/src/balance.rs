//! Filling label-histogram gaps with samples from a synthetic pool.
//!
//! Adaptive balancing adds `max(h) - h_k` samples to bin `k`, the fewest
//! additions that make the histogram uniform. Random balancing spreads the
//! same number of additions uniformly over the bins.

use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, ManifestRow};
use crate::seed::{shuffle, stage_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BalanceMethod {
    Adaptive,
    Random,
}

impl FromStr for BalanceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(Self::Adaptive),
            "random" => Ok(Self::Random),
            _ => Err(Error::input(format!("unknown balance method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalancePlan {
    pub method: BalanceMethod,
    pub budget: Option<usize>,
    pub additions_per_bin: Vec<usize>,
}

impl BalancePlan {
    pub fn k(&self) -> usize {
        self.additions_per_bin.len()
    }

    pub fn total(&self) -> usize {
        self.additions_per_bin.iter().sum()
    }
}

/// Per-bin counts of a manifest's `azimuth_bin` column.
pub fn bin_counts(manifest: &DatasetManifest, k: usize) -> Result<Vec<usize>> {
    let mut h = vec![0; k];
    for row in &manifest.rows {
        *h.get_mut(row.azimuth_bin).ok_or_else(|| {
            Error::input(format!("bin {} out of range for K={k}", row.azimuth_bin))
        })? += 1;
    }
    Ok(h)
}

/// Deficits `max(h) - h_k`; with a smaller budget, scaled down by the
/// largest-remainder method so the total is exactly the budget. Remainder
/// ties go to the bin with the larger deficit, then the lower index.
pub fn plan_adaptive(histogram: &[usize], budget: Option<usize>) -> Result<BalancePlan> {
    let max = *histogram
        .iter()
        .max()
        .ok_or_else(|| Error::input("histogram needs at least one bin"))?;
    let deficits: Vec<usize> = histogram.iter().map(|&h| max - h).collect();
    let total: usize = deficits.iter().sum();
    let additions = match budget {
        Some(b) if b < total => largest_remainder(&deficits, total, b),
        _ => deficits,
    };
    Ok(BalancePlan {
        method: BalanceMethod::Adaptive,
        budget,
        additions_per_bin: additions,
    })
}

fn largest_remainder(deficits: &[usize], total: usize, budget: usize) -> Vec<usize> {
    // Exact integer arithmetic: share_k = d_k * B / T.
    let (t, b) = (total as u128, budget as u128);
    let mut out: Vec<usize> = deficits
        .iter()
        .map(|&d| (d as u128 * b / t) as usize)
        .collect();
    let rem: Vec<u128> = deficits.iter().map(|&d| d as u128 * b % t).collect();
    let mut order: Vec<usize> = (0..deficits.len()).collect();
    order.sort_by(|&i, &j| {
        rem[j]
            .cmp(&rem[i])
            .then(deficits[j].cmp(&deficits[i]))
            .then(i.cmp(&j))
    });
    let short = budget - out.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        out[i] += 1;
    }
    out
}

/// `n` additions, each bin drawn uniformly.
pub fn plan_random(n: usize, k: usize, seed: u64) -> Result<BalancePlan> {
    if k == 0 {
        return Err(Error::input("K must be at least 1"));
    }
    let mut rng = stage_rng(seed, "balance/random");
    let mut additions = vec![0; k];
    for _ in 0..n {
        additions[rng.gen_range(0..k as u32) as usize] += 1;
    }
    Ok(BalancePlan {
        method: BalanceMethod::Random,
        budget: Some(n),
        additions_per_bin: additions,
    })
}

/// Real rows followed by the drawn pool rows (in pool order). Pool rows are
/// drawn without replacement; a bin without enough pool samples is an error.
/// Relative pool image paths are rewritten against the pool's directory.
pub fn apply_plan(
    real: &DatasetManifest,
    pool: &DatasetManifest,
    plan: &BalancePlan,
    seed: u64,
) -> Result<DatasetManifest> {
    let k = plan.k();
    let mut by_bin: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, row) in pool.rows.iter().enumerate() {
        by_bin
            .get_mut(row.azimuth_bin)
            .ok_or_else(|| {
                Error::input(format!(
                    "pool bin {} out of range for K={k}",
                    row.azimuth_bin
                ))
            })?
            .push(i);
    }
    let mut chosen = Vec::with_capacity(plan.total());
    for (bin, (&need, candidates)) in plan.additions_per_bin.iter().zip(&by_bin).enumerate() {
        if need == 0 {
            continue;
        }
        if candidates.len() < need {
            return Err(Error::PoolShortfall {
                bin,
                needed: need,
                available: candidates.len(),
            });
        }
        let mut idx = candidates.clone();
        shuffle(
            &mut idx,
            &mut stage_rng(seed, &format!("balance/apply/{bin}")),
        );
        chosen.extend_from_slice(&idx[..need]);
    }
    chosen.sort_unstable();

    let mut rows = real.rows.clone();
    rows.extend(chosen.into_iter().map(|i| relocate(pool, &pool.rows[i])));
    let out = DatasetManifest {
        rows,
        base_dir: real.base_dir.clone(),
    };
    let mut seen = std::collections::HashSet::new();
    for row in &out.rows {
        if !seen.insert(row.sample_id.as_str()) {
            return Err(Error::input(format!(
                "sample id {:?} occurs in both the manifest and the pool",
                row.sample_id
            )));
        }
    }
    Ok(out)
}

fn relocate(pool: &DatasetManifest, row: &ManifestRow) -> ManifestRow {
    let mut row = row.clone();
    if !row.is_rendered_glyph() && pool.base_dir.is_some() {
        row.path_or_theta = pool.resolve_path(&row).to_string_lossy().into_owned();
    }
    row
}

/// One plan per line.
pub fn write_plans<W: Write>(plans: &[BalancePlan], mut out: W) -> Result<()> {
    for p in plans {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("writing balance plan", e))?;
    }
    Ok(())
}

pub fn read_plans<R: BufRead>(input: R) -> Result<Vec<BalancePlan>> {
    let mut plans = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("reading balance plan", e))?;
        if !line.trim().is_empty() {
            plans.push(serde_json::from_str(&line)?);
        }
    }
    Ok(plans)
}
