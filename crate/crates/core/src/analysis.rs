//! Distance sweeps, `a + b ln d` fits, regime labels and ensembles.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::electrostatics::{compute_q, PolarField, QuadratureSpec, VmResult};
use crate::error::{config, domain, Error, Result};
use crate::geometry::{Geometry, Validity};
use crate::patches::{HomogeneousParams, PatchMap, RadialProfile};
use crate::seed::realization_seed;

/// Log-spaced distances from `d_min` to `d_max` inclusive.
pub fn log_grid(d_min: f64, d_max: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(d_min > 0.0 && d_min.is_finite()) {
        return Err(domain(format!("d_min must be positive, got {d_min}")));
    }
    if !(d_max > d_min && d_max.is_finite()) {
        return Err(config(format!("d_max ({d_max}) must exceed d_min ({d_min})")));
    }
    if per_decade == 0 {
        return Err(config("points per decade must be positive"));
    }
    let decades = (d_max / d_min).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(1);
    let mut grid: Vec<f64> = (0..=n).map(|i| d_min * 10f64.powf(decades * i as f64 / n as f64)).collect();
    grid[0] = d_min;
    grid[n] = d_max;
    Ok(grid)
}

/// Regime of the minimizing voltage at one distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// A central patch dominates; `Vm -> V̄(0)`.
    Close,
    /// `Vm ≈ a + b ln d`.
    Intermediate,
    /// `Vm ->` surface average.
    Far,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Close => "close",
            Regime::Intermediate => "intermediate",
            Regime::Far => "far",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "close" => Ok(Regime::Close),
            "intermediate" => Ok(Regime::Intermediate),
            "far" => Ok(Regime::Far),
            other => Err(config(format!("unknown regime '{other}'"))),
        }
    }
}

/// `close` if `d < r0²/2R` and `|ln d| > |ln(Rm²/2R)|`, `far` if
/// `d > Rm²/2R`, `intermediate` otherwise. Lengths in meters, so the
/// logarithm comparison depends on that unit choice.
pub fn classify_regime(geom: &Geometry, r0: f64, d: f64) -> Regime {
    let d1 = geom.sag(r0);
    let d2 = geom.plate_sag();
    if d < d1 && d.ln().abs() > d2.ln().abs() {
        Regime::Close
    } else if d > d2 {
        Regime::Far
    } else {
        Regime::Intermediate
    }
}

/// Default fit window `[10 r0²/2R, (Rm²/2R) / 10]`.
pub fn default_window(geom: &Geometry, r0: f64) -> (f64, f64) {
    (10.0 * geom.sag(r0), geom.plate_sag() / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveEntry {
    pub d: f64,
    pub vm_energy: f64,
    pub vm_force: f64,
    pub vm_analytic: f64,
    pub q: f64,
    pub validity: Validity,
    pub regime: Regime,
}

impl CurveEntry {
    pub fn value(&self, variant: Variant) -> f64 {
        match variant {
            Variant::Energy => self.vm_energy,
            Variant::Force => self.vm_force,
            Variant::Analytic => self.vm_analytic,
        }
    }

    fn from_result(r: VmResult, regime: Regime) -> Self {
        Self {
            d: r.d,
            vm_energy: r.vm_energy,
            vm_force: r.vm_force,
            vm_analytic: r.vm_analytic,
            q: r.q,
            validity: r.validity,
            regime,
        }
    }
}

/// Minimizing voltage sampled over a distance sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct VmCurve {
    pub entries: Vec<CurveEntry>,
    pub geometry: Geometry,
    pub r0: f64,
    pub seed: Option<u64>,
}

impl VmCurve {
    pub fn points(&self, variant: Variant) -> Vec<(f64, f64)> {
        self.entries.iter().map(|e| (e.d, e.value(variant))).collect()
    }
}

/// Which minimizer a fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Energy,
    Force,
    Analytic,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy" => Ok(Variant::Energy),
            "force" => Ok(Variant::Force),
            "analytic" => Ok(Variant::Analytic),
            other => Err(config(format!("unknown variant '{other}'"))),
        }
    }
}

fn check_distance_grid(d_grid: &[f64]) -> Result<()> {
    if d_grid.is_empty() {
        return Err(config("distance grid is empty"));
    }
    if let Some(bad) = d_grid.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(domain(format!("distance must be positive, got {bad}")));
    }
    if d_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(config("distance grid must be strictly increasing"));
    }
    if d_grid.len() > 1 {
        let decades = (d_grid[d_grid.len() - 1] / d_grid[0]).log10();
        let density = (d_grid.len() - 1) as f64 / decades;
        if density < 8.0 - 1e-9 {
            return Err(config(format!("distance grid has {density:.2} points per decade (minimum 8)")));
        }
    }
    Ok(())
}

/// Evaluates all three minimizers at every distance of `d_grid`.
pub fn sweep(map: &PatchMap, d_grid: &[f64], quad: &QuadratureSpec) -> Result<VmCurve> {
    check_distance_grid(d_grid)?;
    let field = PolarField::sample(map, &quad.grid_for(map, d_grid[0])?)?;
    sweep_field(&field, map, d_grid)
}

fn sweep_field(field: &PolarField, map: &PatchMap, d_grid: &[f64]) -> Result<VmCurve> {
    let geom = *map.geometry();
    let r0 = map.r0_nominal();
    let entries = d_grid
        .par_iter()
        .map(|&d| {
            let r = field.evaluate(d, r0)?;
            Ok(CurveEntry::from_result(r, classify_regime(&geom, r0, d)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VmCurve { entries, geometry: geom, r0, seed: map.seed() })
}

/// Ordinary least squares of `Vm` against `ln d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    /// Intercept at `d = 1 m`, volts.
    pub a: f64,
    /// Slope, volts per e-fold of distance.
    pub b: f64,
    /// Standard error of `b`; zero with two points.
    pub b_stderr: f64,
    pub window: (f64, f64),
    pub residual_rms: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

impl LogFit {
    /// Slope per decade of distance.
    pub fn b_per_decade(&self) -> f64 {
        self.b * std::f64::consts::LN_10
    }
}

/// Fits `a + b ln d` to the points whose `d` lies in `window`.
pub fn fit_points(points: &[(f64, f64)], window: (f64, f64)) -> Result<LogFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Fit(format!("invalid window [{lo}, {hi}]")));
    }
    let slack = 1e-12;
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(d, _)| *d >= lo * (1.0 - slack) && *d <= hi * (1.0 + slack))
        .map(|&(d, v)| (d.ln(), v))
        .collect();
    if pts.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::Fit("non-finite voltage in window".into()));
    }
    let n = pts.len();
    if n < 6 {
        return Err(Error::Fit(format!("window [{lo}, {hi}] holds {n} points; at least 6 required")));
    }
    let nf = n as f64;
    // voltages relative to the first point; exact for flat data
    let y0 = pts[0].1;
    let pts: Vec<(f64, f64)> = pts.into_iter().map(|(x, y)| (x, y - y0)).collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("fewer than two distinct distances in window".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - a - b * p.0).powi(2)).sum();
    let sst: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r_squared = if sst == 0.0 { 1.0 } else { (1.0 - sse / sst).clamp(0.0, 1.0) };
    let b_stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LogFit { a: a + y0, b, b_stderr, window, residual_rms: (sse / nf).sqrt(), r_squared, n_points: n })
}

pub fn fit_log(curve: &VmCurve, window: (f64, f64), variant: Variant) -> Result<LogFit> {
    fit_points(&curve.points(variant), window)
}

/// A fit of externally supplied `(d, Vm)` data.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalFit {
    pub fit: LogFit,
    pub caveat: &'static str,
}

/// External-circuit contact potentials add to the intercept.
pub const CONTACT_POTENTIAL_CAVEAT: &str =
    "intercept a may include an additive contribution from external-circuit contact potentials";

pub fn fit_external(dataset: &[(f64, f64)], window: (f64, f64)) -> Result<ExternalFit> {
    if let Some((d, _)) = dataset.iter().find(|(d, _)| !(*d > 0.0)) {
        return Err(domain(format!("distance must be positive, got {d}")));
    }
    Ok(ExternalFit { fit: fit_points(dataset, window)?, caveat: CONTACT_POTENTIAL_CAVEAT })
}

/// First-order prediction of `a` and `b` between the patch and plate
/// scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimePrediction {
    /// `r0² / 2R`.
    pub d1: f64,
    /// `Rm² / 2R`.
    pub d2: f64,
    /// `ln(Rm² / 2R)`.
    pub l: f64,
    /// `Q(d_ref) / L` at `d_ref = sqrt(d1 d2)`.
    pub q0: f64,
    pub a_pred: f64,
    pub b_pred: f64,
    /// Spread of `Q(d)/L` over `{10 d1, d_ref, d2/10}`: how far `Q` is
    /// from constant across the window.
    pub q0_spread: f64,
}

pub fn predict_intermediate(profile: &RadialProfile, geom: &Geometry, r0: f64) -> Result<RegimePrediction> {
    if !(r0 > 0.0 && r0 < geom.r_plate()) {
        return Err(config(format!("r0 must lie in (0, Rm), got {r0}")));
    }
    let d1 = geom.sag(r0);
    let d2 = geom.plate_sag();
    if (d2 - 1.0).abs() < 0.01 {
        return Err(Error::IllConditioned(format!(
            "Rm²/2R = {d2} m is within 1% of 1 m; ln(Rm²/2R) vanishes"
        )));
    }
    let l = d2.ln();
    let d_ref = (d1 * d2).sqrt();
    let q0 = compute_q(profile, geom, d_ref)? / l;
    let probes = [10.0 * d1, d_ref, d2 / 10.0]
        .iter()
        .map(|&d| compute_q(profile, geom, d).map(|q| q / l))
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) =
        probes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let rim = profile.at_rim();
    Ok(RegimePrediction {
        d1,
        d2,
        l,
        q0,
        a_pred: rim + q0,
        b_pred: (rim + q0 - profile.at_center()) / l,
        q0_spread: hi - lo,
    })
}

/// Mean, sample standard deviation and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// `None` below two samples.
    pub std: Option<f64>,
    pub stderr: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, std: None, stderr: None };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Self { n, mean, std: None, stderr: None };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        Self { n, mean, std: Some(std), stderr: Some(std / (n as f64).sqrt()) }
    }

    /// `|mean| <= k * stderr`; a zero-variance sample must have zero mean.
    pub fn consistent_with_zero(&self, k: f64) -> bool {
        match self.stderr {
            Some(se) if se > 0.0 => self.mean.abs() <= k * se,
            _ => self.mean == 0.0,
        }
    }
}

/// Ensemble statistics at one distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceStats {
    pub d: f64,
    pub energy: Summary,
    pub force: Summary,
    /// Paired `vm_force - vm_energy`.
    pub diff: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationFit {
    pub index: u64,
    pub seed: u64,
    /// Energy-variant fit over the ensemble window; `None` when the window
    /// holds too few distances.
    pub fit: Option<LogFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub per_d: Vec<DistanceStats>,
    pub realizations: Vec<RealizationFit>,
    pub window: (f64, f64),
    /// Distribution of the fitted `b` over realizations with a fit.
    pub b: Summary,
    /// Per-realization window mean of `vm_force - vm_energy`, summarized.
    pub window_diff: Summary,
}

/// Homogeneous-patch ensemble. Realization `i` uses seed
/// `realization_seed(master_seed, i)`; results do not depend on the number
/// of worker threads.
pub fn ensemble_vm(
    geom: &Geometry,
    params: HomogeneousParams,
    n_real: usize,
    master_seed: u64,
    d_grid: &[f64],
    quad: &QuadratureSpec,
) -> Result<EnsembleStats> {
    if n_real == 0 {
        return Err(config("ensemble needs at least one realization"));
    }
    check_distance_grid(d_grid)?;
    quad.validate()?;
    let window = default_window(geom, params.r0);

    let curves: Vec<(u64, VmCurve)> = (0..n_real as u64)
        .into_par_iter()
        .map(|i| {
            let seed = realization_seed(master_seed, i);
            let map = params.realize(geom, seed)?;
            Ok((seed, sweep(&map, d_grid, quad)?))
        })
        .collect::<Result<_>>()?;

    let per_d = (0..d_grid.len())
        .map(|k| {
            let col = |f: fn(&CurveEntry) -> f64| -> Vec<f64> {
                curves.iter().map(|(_, c)| f(&c.entries[k])).collect()
            };
            DistanceStats {
                d: d_grid[k],
                energy: Summary::of(&col(|e| e.vm_energy)),
                force: Summary::of(&col(|e| e.vm_force)),
                diff: Summary::of(&col(|e| e.vm_force - e.vm_energy)),
            }
        })
        .collect();

    let realizations: Vec<RealizationFit> = curves
        .iter()
        .enumerate()
        .map(|(i, (seed, c))| RealizationFit {
            index: i as u64,
            seed: *seed,
            fit: fit_log(c, window, Variant::Energy).ok(),
        })
        .collect();
    let bs: Vec<f64> = realizations.iter().filter_map(|r| r.fit.map(|f| f.b)).collect();

    let in_window = |d: f64| d >= window.0 * (1.0 - 1e-12) && d <= window.1 * (1.0 + 1e-12);
    let diffs: Vec<f64> = curves
        .iter()
        .filter_map(|(_, c)| {
            let sel: Vec<f64> =
                c.entries.iter().filter(|e| in_window(e.d)).map(|e| e.vm_force - e.vm_energy).collect();
            (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
        })
        .collect();

    Ok(EnsembleStats { per_d, realizations, window, b: Summary::of(&bs), window_diff: Summary::of(&diffs) })
}
