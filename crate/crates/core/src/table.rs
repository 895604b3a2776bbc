//! The frame-count grid over decimation factors, error bounds and blur,
//! with a cell-by-cell comparison against a fixed set of reference counts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::{alias_summary, nd_min_approx, BoundsConfig, NdBound};
use crate::error::Result;
use crate::scene::Psf;

pub const EPSILONS: [f64; 3] = [0.01, 0.001, 0.0001];
pub const RS: [usize; 7] = [2, 3, 4, 5, 6, 7, 8];
pub const REFERENCE_PSF: Psf = Psf::Gaussian { width: 0.5 };

/// Reference cell: `None` where the value is not listed because it matches
/// the unblurred row.
type RefPair = (Option<NdBound>, NdBound);

const fn f(n: u64) -> NdBound {
    NdBound::Frames(n)
}
const NR: NdBound = NdBound::NotReachable;

/// Reference `(approx, alias)` counts for `p = 0.05`, `P = 0.95`, `eta = 0`,
/// indexed `[r - 2][blurred][epsilon]`.
const REFERENCE: [[[RefPair; 3]; 2]; 7] = [
    [[(Some(f(157)), f(64)), (Some(f(2)), f(1)), (Some(f(1)), f(1))], [(Some(f(157)), f(6108)), (Some(f(2)), f(23)), (Some(f(1)), f(1))]],
    [[(Some(f(267)), NR), (Some(f(2)), f(13)), (Some(f(1)), f(1))], [(Some(f(267)), NR), (Some(f(2)), f(540)), (Some(f(1)), f(5))]],
    [[(Some(f(817)), NR), (Some(f(2)), f(43)), (Some(f(1)), f(1))], [(Some(f(817)), NR), (Some(f(2)), f(2228)), (Some(f(1)), f(13))]],
    [[(Some(f(651162)), NR), (Some(f(2)), f(168)), (Some(f(1)), f(2))], [(Some(f(651162)), NR), (Some(f(2)), f(73025)), (Some(f(1)), f(43))]],
    [[(Some(NR), NR), (Some(f(2)), f(516)), (Some(f(1)), f(3))], [(None, NR), (Some(f(2)), NR), (Some(f(1)), f(82))]],
    [[(Some(NR), NR), (Some(f(2)), f(3486)), (Some(f(1)), f(6))], [(None, NR), (Some(f(2)), NR), (Some(f(1)), f(189))]],
    [[(Some(NR), NR), (Some(f(2)), NR), (Some(f(1)), f(9))], [(None, NR), (Some(f(2)), NR), (Some(f(1)), f(311))]],
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableCell {
    pub r: usize,
    pub blurred: bool,
    pub epsilon: f64,
    pub approx: NdBound,
    pub alias: NdBound,
    pub ref_approx: NdBound,
    pub ref_alias: NdBound,
    /// `alias / ref_alias` when both are reachable.
    pub alias_ratio: Option<f64>,
    pub approx_match: bool,
    pub verdict_match: bool,
}

impl TableCell {
    /// Both sides agree on reachability, approx is exact, alias within `factor`.
    pub fn agrees(&self, factor: f64) -> bool {
        self.approx_match && self.verdict_match && self.alias_ratio.is_none_or(|q| q <= factor && q >= 1.0 / factor)
    }
}

pub fn reference(r: usize, blurred: bool, eps_index: usize) -> (NdBound, NdBound) {
    let (a, b) = REFERENCE[r - 2][blurred as usize][eps_index];
    let a = a.unwrap_or_else(|| REFERENCE[r - 2][0][eps_index].0.expect("unblurred rows are complete"));
    (a, b)
}

/// Computes every cell at LR side `n` for `p = 0.05`, `P = 0.95`.
pub fn table1(n: usize, psf: Psf) -> Result<Vec<TableCell>> {
    let mut out = Vec::new();
    for &r in &RS {
        for blurred in [false, true] {
            for (ei, &eps) in EPSILONS.iter().enumerate() {
                let mut cfg = BoundsConfig::power_law(r, eps, 0.05, 0.95, 0.0);
                cfg.n = n;
                if blurred {
                    cfg.psf = psf;
                }
                let approx = nd_min_approx(&cfg)?;
                let alias = alias_summary(&cfg)?.nd;
                let (ref_approx, ref_alias) = reference(r, blurred, ei);
                let alias_ratio = match (alias, ref_alias) {
                    (NdBound::Frames(a), NdBound::Frames(b)) => Some(a as f64 / b as f64),
                    _ => None,
                };
                out.push(TableCell {
                    r,
                    blurred,
                    epsilon: eps,
                    approx,
                    alias,
                    ref_approx,
                    ref_alias,
                    alias_ratio,
                    approx_match: approx == ref_approx,
                    verdict_match: alias.is_reachable() == ref_alias.is_reachable()
                        && approx.is_reachable() == ref_approx.is_reachable(),
                });
            }
        }
    }
    Ok(out)
}

/// Counts must not decrease with `r` nor as `epsilon` grows, per blur
/// setting. `NR` ranks above every count.
pub fn is_monotone(cells: &[TableCell]) -> bool {
    let get = |r: usize, b: bool, e: usize| cells.iter().find(|c| c.r == r && c.blurred == b && c.epsilon == EPSILONS[e]);
    for b in [false, true] {
        for e in 0..EPSILONS.len() {
            for w in RS.windows(2) {
                if let (Some(x), Some(y)) = (get(w[0], b, e), get(w[1], b, e)) {
                    if y.approx < x.approx || y.alias < x.alias {
                        return false;
                    }
                }
            }
        }
        for &r in &RS {
            for e in 1..EPSILONS.len() {
                if let (Some(big), Some(small)) = (get(r, b, e - 1), get(r, b, e)) {
                    if small.approx > big.approx || small.alias > big.alias {
                        return false;
                    }
                }
            }
        }
    }
    true
}

pub fn write_table_csv(cells: &[TableCell], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["r", "psf", "epsilon", "approx", "alias", "ref_approx", "ref_alias", "alias_ratio", "approx_match", "verdict_match"])?;
    for c in cells {
        w.write_record([
            c.r.to_string(),
            if c.blurred { "gaussian".into() } else { "dirac".into() },
            c.epsilon.to_string(),
            c.approx.to_string(),
            c.alias.to_string(),
            c.ref_approx.to_string(),
            c.ref_alias.to_string(),
            c.alias_ratio.map(|v| format!("{v:.4}")).unwrap_or_default(),
            c.approx_match.to_string(),
            c.verdict_match.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text grid, one row per `(r, blur)`.
pub fn render_text(cells: &[TableCell]) -> String {
    let mut s = String::from("r  psf       eps=0.01          eps=0.001         eps=0.0001\n");
    for &r in &RS {
        for b in [false, true] {
            s.push_str(&format!("{r}  {:<8}", if b { "gaussian" } else { "dirac" }));
            for &e in &EPSILONS {
                if let Some(c) = cells.iter().find(|c| c.r == r && c.blurred == b && c.epsilon == e) {
                    s.push_str(&format!("  {:>7} / {:<7}", c.approx.to_string(), c.alias.to_string()));
                }
            }
            s.push('\n');
        }
    }
    s
}
