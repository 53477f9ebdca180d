//! Optimal share pattern versus transmit SNR for fixed paired-path strengths.
//!
//! With equal power on every paired path the effective coefficients are
//! `m~_s = m_s * 10^(SNR/10)`; each SNR is solved exactly by the prefix-pattern
//! search.

use std::io::Write;

use rispart::solver::solve_p32;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RegionRow {
    pub snr_db: f64,
    /// `exists[k-1]`: the all-plus pattern on the `k` strongest paths exists.
    pub exists: Vec<bool>,
    /// Number of paths sharing the surface at the optimum.
    pub optimal_k: usize,
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionTable {
    pub rows: Vec<RegionRow>,
    /// First SNR at which the all-plus pattern over every path exists.
    pub existence_threshold: Option<f64>,
    /// First SNR at which that pattern is optimal.
    pub optimality_threshold: Option<f64>,
    /// `(snr, k)` wherever the optimal prefix length changes, starting with the first row.
    pub transitions: Vec<(f64, usize)>,
}

/// Scans `lo..=hi` in steps of `step` dB.
pub fn fig3_regions(m: &[f64], lo: f64, hi: f64, step: f64) -> Result<RegionTable> {
    if m.is_empty() || m.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(HarnessError::Config("path strengths must be positive".into()));
    }
    if m.windows(2).any(|w| w[1] > w[0]) {
        return Err(HarnessError::Config(
            "path strengths must be sorted non-increasing".into(),
        ));
    }
    if !(step > 0.0) || !(hi >= lo) {
        return Err(HarnessError::Config(format!("bad SNR range {lo}:{hi}:{step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let s = m.len();
    let mut rows = Vec::with_capacity(count);
    for i in 0..count {
        let snr_db = lo + i as f64 * step;
        let scale = 10f64.powf(snr_db / 10.0);
        let m_tilde: Vec<f64> = m.iter().map(|x| x * scale).collect();
        let sol = solve_p32(&m_tilde);
        let mut exists = vec![false; s];
        for c in &sol.candidates {
            exists[c.k - 1] = true;
        }
        rows.push(RegionRow {
            snr_db,
            exists,
            optimal_k: sol.k,
            t: sol.t,
        });
    }
    let existence_threshold = rows.iter().find(|r| r.exists[s - 1]).map(|r| r.snr_db);
    let optimality_threshold = rows.iter().find(|r| r.optimal_k == s).map(|r| r.snr_db);
    let mut transitions: Vec<(f64, usize)> = Vec::new();
    for r in &rows {
        if transitions.last().is_none_or(|&(_, k)| k != r.optimal_k) {
            transitions.push((r.snr_db, r.optimal_k));
        }
    }
    Ok(RegionTable {
        rows,
        existence_threshold,
        optimality_threshold,
        transitions,
    })
}

/// Prefix pattern label, e.g. `t^{+,+,0,0}`.
pub fn prefix_label(k: usize, s: usize) -> String {
    let labels: Vec<&str> = (0..s).map(|i| if i < k { "+" } else { "0" }).collect();
    format!("t^{{{}}}", labels.join(","))
}

pub fn write_regions<W: Write>(table: &RegionTable, out: W) -> Result<()> {
    let s = table.rows.first().map_or(0, |r| r.t.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["snr_db".to_string()];
    header.extend((1..=s).map(|k| format!("exists_k{k}")));
    header.push("optimal".into());
    header.extend((1..=s).map(|k| format!("t{k}")));
    w.write_record(&header)?;
    for r in &table.rows {
        let mut rec = vec![format!("{:.4}", r.snr_db)];
        rec.extend(r.exists.iter().map(|&e| u8::from(e).to_string()));
        rec.push(prefix_label(r.optimal_k, s));
        rec.extend(r.t.iter().map(|t| format!("{t:.9}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| HarnessError::io("<regions>", e))?;
    Ok(())
}
