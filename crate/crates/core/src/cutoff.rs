//! Cutoff-ratio search on a small problem and its transfer to a large one.

use std::fmt::Write as _;

use thiserror::Error;

use crate::hamiltonian::{round_half_up, HamiltonianError, QubitHamiltonian};

#[derive(Debug, Error)]
pub enum CutoffError {
    #[error("energy tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("retained fraction must lie in (0, 1], got {0}")]
    FractionOutOfRange(f64),
    #[error("fraction {fraction} keeps no terms of {terms}")]
    NothingRetained { fraction: f64, terms: usize },
    #[error("fraction not realizable exactly: terms {k} and {} share |w| = {magnitude}", k + 1)]
    Degenerate { k: usize, magnitude: f64 },
    #[error("relative error undefined for a zero reference energy")]
    ZeroReference,
    #[error("VQE failed at retained fraction {fraction}: {message}")]
    Run { fraction: f64, message: String, partial: Box<CutoffScanReport> },
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub retained_fraction: f64,
    /// `1 - retained_fraction`: the share of terms removed.
    pub cutoff_ratio: f64,
    pub terms: usize,
    pub energy: f64,
    pub abs_error: f64,
    /// `None` when the full energy is exactly zero.
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CutoffScanReport {
    pub rows: Vec<ScanRow>,
    pub recommended_fraction: f64,
    /// Threshold realizing `recommended_fraction` on a transfer target.
    pub recommended_th1: Option<f64>,
    /// Terms the transfer target keeps under `recommended_th1`.
    pub transferred_terms: Option<usize>,
}

/// `(|e_cut - e_full|, |e_cut - e_full| / |e_full|)`.
pub fn error_report(e_cut: f64, e_full: f64) -> Result<(f64, f64), CutoffError> {
    let abs = (e_cut - e_full).abs();
    if e_full == 0.0 {
        return Err(CutoffError::ZeroReference);
    }
    Ok((abs, abs / e_full.abs()))
}

/// Runs `runner` on `retain_fraction(h, f)` for `f = 1.0, 0.9, …` and stops at
/// the first fraction whose energy differs from the full one by at least
/// `delta_e`, recommending the fraction one step above it. If no fraction
/// fails, the recommendation is `0.1`.
pub fn cutoff_scan<F>(
    h_small: &QubitHamiltonian,
    mut runner: F,
    delta_e: f64,
) -> Result<CutoffScanReport, CutoffError>
where
    F: FnMut(&QubitHamiltonian) -> Result<f64, String>,
{
    if !(delta_e > 0.0) {
        return Err(CutoffError::BadTolerance(delta_e));
    }
    let mut report = CutoffScanReport {
        rows: Vec::new(),
        recommended_fraction: 0.1,
        recommended_th1: None,
        transferred_terms: None,
    };
    let mut e_full = None;
    for i in (1..=10u32).rev() {
        let fraction = i as f64 / 10.0;
        let h = h_small.retain_fraction(fraction)?;
        let energy = match runner(&h) {
            Ok(e) => e,
            Err(message) => {
                return Err(CutoffError::Run { fraction, message, partial: Box::new(report) });
            }
        };
        let reference = *e_full.get_or_insert(energy);
        let abs_error = (energy - reference).abs();
        report.rows.push(ScanRow {
            retained_fraction: fraction,
            cutoff_ratio: (10 - i) as f64 / 10.0,
            terms: h.len(),
            energy,
            abs_error,
            rel_error: error_report(energy, reference).ok().map(|(_, r)| r),
        });
        if abs_error >= delta_e {
            report.recommended_fraction = (i + 1) as f64 / 10.0;
            return Ok(report);
        }
    }
    Ok(report)
}

impl CutoffScanReport {
    /// Fills `recommended_th1` for `h_large`, keeping extra terms when the
    /// exact count falls inside a run of equal magnitudes.
    pub fn transfer_to(&mut self, h_large: &QubitHamiltonian) -> Result<f64, CutoffError> {
        let (th1, kept) = realizable_threshold(h_large, self.recommended_fraction)?;
        self.recommended_th1 = Some(th1);
        self.transferred_terms = Some(kept);
        Ok(th1)
    }

    /// CSV: `retained_fraction,cutoff_ratio,terms,energy,abs_error,rel_error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("retained_fraction,cutoff_ratio,terms,energy,abs_error,rel_error\n");
        for r in &self.rows {
            let rel = r.rel_error.map(|v| format!("{v:?}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{:.1},{:.1},{},{:?},{:?},{}",
                r.retained_fraction, r.cutoff_ratio, r.terms, r.energy, r.abs_error, rel
            );
        }
        out
    }
}

/// Threshold halfway between the `k`-th and `(k+1)`-th largest magnitudes,
/// `k = round_half_up(N · fraction)`, so that `cutoff_by_threshold` keeps
/// exactly `k` terms.
pub fn threshold_for_fraction(h_large: &QubitHamiltonian, fraction: f64) -> Result<f64, CutoffError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CutoffError::FractionOutOfRange(fraction));
    }
    let n = h_large.len();
    let k = round_half_up(n as f64 * fraction).min(n);
    if k == 0 {
        return Err(CutoffError::NothingRetained { fraction, terms: n });
    }
    if k == n {
        return Ok(0.0);
    }
    let mut mags: Vec<f64> = h_large.terms().iter().map(|t| t.weight.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    if mags[k - 1] == mags[k] {
        return Err(CutoffError::Degenerate { k, magnitude: mags[k] });
    }
    Ok(0.5 * (mags[k - 1] + mags[k]))
}

/// Like [`threshold_for_fraction`], but when the `k`-th and `(k+1)`-th
/// magnitudes tie, moves `k` up to the end of the tie. Returns the threshold
/// and the number of terms it keeps.
pub fn realizable_threshold(h_large: &QubitHamiltonian, fraction: f64) -> Result<(f64, usize), CutoffError> {
    match threshold_for_fraction(h_large, fraction) {
        Ok(th1) => Ok((th1, h_large.cutoff_by_threshold(th1)?.len())),
        Err(CutoffError::Degenerate { k, .. }) => {
            let mut mags: Vec<f64> = h_large.terms().iter().map(|t| t.weight.abs()).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            let mut k = k;
            while k < mags.len() && mags[k - 1] == mags[k] {
                k += 1;
            }
            let th1 = if k == mags.len() { 0.0 } else { 0.5 * (mags[k - 1] + mags[k]) };
            Ok((th1, k))
        }
        Err(e) => Err(e),
    }
}
