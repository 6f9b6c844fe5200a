//! CSV and report formats.
//!
//! Numbers are written with 17 significant digits so identical runs give
//! identical bytes. Lines starting with `#` are comments (outputs carry a
//! `# config_hash=...` line) and are skipped when reading.

use std::fmt::Write as _;

use csv::{ReaderBuilder, StringRecord, Trim};

use crate::analysis::{EnsembleStats, ExternalFit, LogFit, Regime, Summary, VmCurve};
use crate::error::{Error, Result};

pub const DATASET_HEADER: [&str; 2] = ["d_m", "vm_V"];
pub const CURVE_HEADER: [&str; 5] = ["d_m", "vm_energy_V", "vm_force_V", "vm_analytic_V", "regime"];
pub const ENSEMBLE_HEADER: [&str; 10] = [
    "d_m",
    "n",
    "energy_mean_V",
    "energy_std_V",
    "force_mean_V",
    "force_std_V",
    "diff_mean_V",
    "diff_std_V",
    "diff_stderr_V",
    "in_window",
];
pub const ENSEMBLE_FITS_HEADER: [&str; 7] =
    ["index", "seed", "a_V", "b_V_per_efold", "b_stderr_V_per_efold", "residual_rms_V", "r_squared"];

/// Formats `v` with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// One parsed row of a curve CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub d: f64,
    pub vm_energy: f64,
    pub vm_force: f64,
    pub vm_analytic: f64,
    pub regime: Regime,
}

fn comment_line(config_hash: Option<&str>) -> String {
    config_hash.map_or_else(String::new, |h| format!("# config_hash={h}\n"))
}

pub fn curve_to_csv(curve: &VmCurve, config_hash: Option<&str>) -> String {
    let mut s = comment_line(config_hash);
    s += &CURVE_HEADER.join(",");
    s.push('\n');
    for e in &curve.entries {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            num(e.d),
            num(e.vm_energy),
            num(e.vm_force),
            num(e.vm_analytic),
            e.regime
        );
    }
    s
}

/// Records of a headed CSV with their 1-based line numbers.
fn records(text: &str, expected: &[&str]) -> Result<Vec<(u64, StringRecord)>> {
    let mut rdr = ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    let mut header_seen = false;
    for rec in rdr.records() {
        let rec =
            rec.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), msg: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line());
        if !header_seen {
            let got: Vec<&str> = rec.iter().collect();
            if got != expected {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected header '{}', found '{}'", expected.join(","), got.join(",")),
                });
            }
            header_seen = true;
            continue;
        }
        if rec.len() != expected.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", expected.len(), rec.len()),
            });
        }
        out.push((line, rec));
    }
    if !header_seen {
        return Err(Error::Parse { line: 1, msg: "missing header".into() });
    }
    Ok(out)
}

fn field(rec: &StringRecord, i: usize, line: u64, name: &str) -> Result<f64> {
    let raw = &rec[i];
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse { line, msg: format!("{name}: '{raw}' is not a finite number") })
}

/// Parses the external dataset format (`d_m,vm_V`).
pub fn read_dataset_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    records(text, &DATASET_HEADER)?
        .into_iter()
        .map(|(line, rec)| Ok((field(&rec, 0, line, "d_m")?, field(&rec, 1, line, "vm_V")?)))
        .collect()
}

pub fn dataset_to_csv(points: &[(f64, f64)]) -> String {
    let mut s = DATASET_HEADER.join(",");
    s.push('\n');
    for (d, v) in points {
        let _ = writeln!(s, "{},{}", num(*d), num(*v));
    }
    s
}

pub fn read_curve_csv(text: &str) -> Result<Vec<CurveRow>> {
    records(text, &CURVE_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(CurveRow {
                d: field(&rec, 0, line, "d_m")?,
                vm_energy: field(&rec, 1, line, "vm_energy_V")?,
                vm_force: field(&rec, 2, line, "vm_force_V")?,
                vm_analytic: field(&rec, 3, line, "vm_analytic_V")?,
                regime: rec[4]
                    .parse()
                    .map_err(|_| Error::Parse { line, msg: format!("unknown regime '{}'", &rec[4]) })?,
            })
        })
        .collect()
}

/// Empty when undefined.
fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

/// Per-distance ensemble statistics; `in_window` marks the fit window.
pub fn ensemble_to_csv(stats: &EnsembleStats, config_hash: Option<&str>) -> String {
    let mut s = comment_line(config_hash);
    s += &ENSEMBLE_HEADER.join(",");
    s.push('\n');
    let (lo, hi) = stats.window;
    for p in &stats.per_d {
        let inside = p.d >= lo * (1.0 - 1e-12) && p.d <= hi * (1.0 + 1e-12);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            num(p.d),
            p.energy.n,
            num(p.energy.mean),
            opt_num(p.energy.std),
            num(p.force.mean),
            opt_num(p.force.std),
            num(p.diff.mean),
            opt_num(p.diff.std),
            opt_num(p.diff.stderr),
            u8::from(inside)
        );
    }
    s
}

/// One row per realization; fit columns are empty when the window held too
/// few distances.
pub fn ensemble_fits_to_csv(stats: &EnsembleStats, config_hash: Option<&str>) -> String {
    let mut s = comment_line(config_hash);
    s += &ENSEMBLE_FITS_HEADER.join(",");
    s.push('\n');
    for r in &stats.realizations {
        let f = r.fit.as_ref();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.index,
            r.seed,
            opt_num(f.map(|f| f.a)),
            opt_num(f.map(|f| f.b)),
            opt_num(f.map(|f| f.b_stderr)),
            opt_num(f.map(|f| f.residual_rms)),
            opt_num(f.map(|f| f.r_squared)),
        );
    }
    s
}

/// `key = value` ensemble summary: window, fitted-`b` distribution and the
/// paired force-vs-energy test.
pub fn ensemble_summary(stats: &EnsembleStats, config_hash: Option<&str>) -> String {
    let mut s = comment_line(config_hash);
    let summary = |s: &mut String, key: &str, v: &Summary| {
        let _ = writeln!(s, "{key}_n = {}", v.n);
        let _ = writeln!(s, "{key}_mean = {}", if v.n == 0 { String::new() } else { num(v.mean) });
        let _ = writeln!(s, "{key}_std = {}", opt_num(v.std));
        let _ = writeln!(s, "{key}_stderr = {}", opt_num(v.stderr));
    };
    let _ = writeln!(s, "n_real = {}", stats.realizations.len());
    let _ = writeln!(s, "window = [{}, {}]", num(stats.window.0), num(stats.window.1));
    summary(&mut s, "b_V_per_efold", &stats.b);
    summary(&mut s, "window_diff_V", &stats.window_diff);
    let _ = writeln!(s, "force_energy_consistent_2sigma = {}", stats.window_diff.consistent_with_zero(2.0));
    s
}

/// `key = value` fit report.
pub fn fit_report(fit: &LogFit, caveat: Option<&str>, config_hash: Option<&str>) -> String {
    let mut s = comment_line(config_hash);
    let _ = writeln!(s, "a_V = {}", num(fit.a));
    let _ = writeln!(s, "b_V_per_efold = {}", num(fit.b));
    let _ = writeln!(s, "b_V_per_decade = {}", num(fit.b_per_decade()));
    let _ = writeln!(s, "b_stderr_V_per_efold = {}", num(fit.b_stderr));
    let _ = writeln!(s, "window = [{}, {}]", num(fit.window.0), num(fit.window.1));
    let _ = writeln!(s, "residual_rms_V = {}", num(fit.residual_rms));
    let _ = writeln!(s, "r_squared = {}", num(fit.r_squared));
    let _ = writeln!(s, "n_points = {}", fit.n_points);
    if let Some(c) = caveat {
        let _ = writeln!(s, "caveat = \"{c}\"");
    }
    s
}

pub fn external_fit_report(fit: &ExternalFit, config_hash: Option<&str>) -> String {
    fit_report(&fit.fit, Some(fit.caveat), config_hash)
}
