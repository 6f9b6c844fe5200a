use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context};
use patchvm::formats::{
    curve_to_csv, ensemble_fits_to_csv, ensemble_summary, ensemble_to_csv, external_fit_report, fit_report,
    num, read_curve_csv, read_dataset_csv, CURVE_HEADER, DATASET_HEADER,
};
use patchvm::{
    classify_regime, default_window, ensemble_vm, fit_external, fit_points, sweep, PatchMap, Variant,
};
use serde_json::json;

use crate::config::{Layout, RunConfig};

pub const TOOL: &str = "patchvm";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn out_file(cfg: &RunConfig, name: &str) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok(cfg.out.join(name))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |t| t.as_secs())
}

fn manifest(cfg: &RunConfig, command: &str, extra: serde_json::Value) -> String {
    let mut m = json!({
        "tool": TOOL,
        "version": VERSION,
        "command": command,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "config": cfg,
        "timestamp_unix": timestamp(),
    });
    if let (Some(obj), serde_json::Value::Object(more)) = (m.as_object_mut(), extra) {
        obj.extend(more);
    }
    serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n"
}

pub fn gen(cfg: &RunConfig) -> anyhow::Result<()> {
    let map = cfg.build_map()?;
    let path = out_file(cfg, "patches.json")?;
    map.write_to(&path)?;
    let geom = cfg.geometry()?;
    let grid = cfg.distances()?;
    let mut pfa = 0;
    let mut image = 0;
    for &d in &grid {
        let v = geom.validity(d, cfg.patches.r0)?;
        pfa += usize::from(v.pfa_ok);
        image += usize::from(v.patch_image_ok);
    }
    println!("wrote {} disks to {}", map.disks().len(), path.display());
    println!("config_hash = {}", cfg.hash());
    println!("pfa_ok at {pfa}/{} distances", grid.len());
    println!("patch_image_ok at {image}/{} distances", grid.len());
    Ok(())
}

pub fn sweep_cmd(cfg: &RunConfig, map_path: Option<&Path>) -> anyhow::Result<()> {
    let map = match map_path {
        Some(p) => PatchMap::read_from(p).with_context(|| format!("reading map {}", p.display()))?,
        None => cfg.build_map()?,
    };
    let grid = cfg.distances()?;
    let curve = sweep(&map, &grid, &cfg.quadrature)?;
    let hash = cfg.hash();
    let csv_path = out_file(cfg, "curve.csv")?;
    write(&csv_path, &curve_to_csv(&curve, Some(&hash)))?;
    let validity: Vec<_> = curve
        .entries
        .iter()
        .map(|e| {
            json!({
                "d_m": e.d,
                "pfa_ok": e.validity.pfa_ok,
                "patch_image_ok": e.validity.patch_image_ok,
                "regime": e.regime,
            })
        })
        .collect();
    let extra = json!({
        "map": {
            "source": map_path.map_or_else(|| "generated".to_string(), |p| p.display().to_string()),
            "n_disks": map.disks().len(),
            "seed": map.seed(),
            "r0_nominal": map.r0_nominal(),
            "v0_nominal": map.v0_nominal(),
        },
        "validity": validity,
    });
    write(&out_file(cfg, "manifest.json")?, &manifest(cfg, "sweep", extra))?;
    println!("wrote {} distances to {}", curve.entries.len(), csv_path.display());
    Ok(())
}

pub fn ensemble(cfg: &RunConfig) -> anyhow::Result<()> {
    if cfg.patches.layout != Layout::Homogeneous {
        bail!(patchvm::Error::Config("ensemble requires patches.layout = \"homogeneous\"".into()));
    }
    let geom = cfg.geometry()?;
    let grid = cfg.distances()?;
    let stats = ensemble_vm(&geom, cfg.homogeneous(), cfg.n_real, cfg.seed, &grid, &cfg.quadrature)?;
    let hash = cfg.hash();
    write(&out_file(cfg, "ensemble.csv")?, &ensemble_to_csv(&stats, Some(&hash)))?;
    write(&out_file(cfg, "ensemble_fits.csv")?, &ensemble_fits_to_csv(&stats, Some(&hash)))?;
    let summary = ensemble_summary(&stats, Some(&hash));
    write(&out_file(cfg, "ensemble_summary.txt")?, &summary)?;
    write(&out_file(cfg, "manifest.json")?, &manifest(cfg, "ensemble", json!({ "n_real": cfg.n_real })))?;
    print!("{summary}");
    Ok(())
}

/// Window and variant options of `fit`.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub variant: Variant,
    pub d_lo: Option<f64>,
    pub d_hi: Option<f64>,
}

fn header_of(text: &str) -> Option<&str> {
    text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'))
}

pub fn fit(cfg: &RunConfig, input: &Path, opts: FitOptions) -> anyhow::Result<()> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let header: String =
        header_of(&text).unwrap_or("").split(',').map(str::trim).collect::<Vec<_>>().join(",");
    let hash = cfg.hash();
    let report = if header == CURVE_HEADER.join(",") {
        let rows = read_curve_csv(&text)?;
        let (lo, hi) = default_window(&cfg.geometry()?, cfg.patches.r0);
        let window = (opts.d_lo.unwrap_or(lo), opts.d_hi.unwrap_or(hi));
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| {
                let v = match opts.variant {
                    Variant::Energy => r.vm_energy,
                    Variant::Force => r.vm_force,
                    Variant::Analytic => r.vm_analytic,
                };
                (r.d, v)
            })
            .collect();
        fit_report(&fit_points(&pts, window)?, None, Some(&hash))
    } else if header == DATASET_HEADER.join(",") {
        let pts = read_dataset_csv(&text)?;
        let (lo, hi) =
            pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
        let window = (opts.d_lo.unwrap_or(lo), opts.d_hi.unwrap_or(hi));
        external_fit_report(&fit_external(&pts, window)?, Some(&hash))
    } else {
        return Err(anyhow!(patchvm::Error::Parse {
            line: 1,
            msg: format!(
                "unrecognized header '{header}'; expected '{}' or '{}'",
                CURVE_HEADER.join(","),
                DATASET_HEADER.join(",")
            ),
        }))
        .with_context(|| format!("reading {}", input.display()));
    };
    write(&out_file(cfg, "fit.txt")?, &report)?;
    print!("{report}");
    Ok(())
}

pub fn validate(cfg: &RunConfig) -> anyhow::Result<()> {
    let geom = cfg.geometry()?;
    let r0 = cfg.patches.r0;
    let mut s = format!("# config_hash={}\nd_m,pfa_ok,patch_image_ok,regime\n", cfg.hash());
    for d in cfg.distances()? {
        let v = geom.validity(d, r0)?;
        let _ = writeln!(s, "{},{},{},{}", num(d), v.pfa_ok, v.patch_image_ok, classify_regime(&geom, r0, d));
    }
    let path = out_file(cfg, "validity.csv")?;
    write(&path, &s)?;
    println!("wrote {}", path.display());
    Ok(())
}
