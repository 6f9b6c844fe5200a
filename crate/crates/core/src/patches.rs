//! Surface potential maps built from circular patches.
//!
//! A [`PatchMap`] is a uniform background potential with a list of disks
//! laid on the plate. Where disks overlap, the disk whose center is nearest
//! to the query point wins (ties go to the lower list index). Everything the
//! minimizing voltage depends on is reachable through the ring average
//! `V̄p(r)`, which [`radial_profile`] tabulates on a log-graded radial grid.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::geometry::Geometry;
use crate::seed::realization_seed;

/// A circular patch on the plate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub potential: f64,
}

impl Disk {
    pub fn new(cx: f64, cy: f64, radius: f64, potential: f64) -> Self {
        Self { cx, cy, radius, potential }
    }

    #[inline]
    fn dist2(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.cx;
        let dy = y - self.cy;
        dx * dx + dy * dy
    }

    fn center_distance(&self) -> f64 {
        self.cx.hypot(self.cy)
    }

    /// Centered disks produce a jump in the ring average at their radius.
    fn is_centered(&self) -> bool {
        self.center_distance() <= 1e-9 * self.radius
    }

    fn validate(&self, r_plate: f64) -> Result<()> {
        let finite = [self.cx, self.cy, self.radius, self.potential].iter().all(|v| v.is_finite());
        if !finite {
            return Err(config("disk fields must be finite"));
        }
        if self.radius <= 0.0 {
            return Err(config(format!("disk radius must be positive, got {}", self.radius)));
        }
        if self.center_distance() > r_plate + self.radius {
            return Err(config(format!(
                "disk at ({}, {}) with radius {} does not intersect the plate",
                self.cx, self.cy, self.radius
            )));
        }
        Ok(())
    }
}

/// Uniform bucket grid over the plate used to find covering disks quickly.
#[derive(Debug, Clone, Default)]
struct DiskIndex {
    origin: f64,
    cell: f64,
    side: usize,
    buckets: Vec<Vec<u32>>,
}

impl DiskIndex {
    const LINEAR_SCAN_MAX: usize = 8;
    const MAX_SIDE: usize = 256;

    fn build(disks: &[Disk], r_plate: f64) -> Self {
        if disks.len() <= Self::LINEAR_SCAN_MAX {
            return Self::default();
        }
        let max_r = disks.iter().map(|d| d.radius).fold(0.0, f64::max);
        let extent = r_plate + max_r;
        let cell = max_r.max(2.0 * extent / Self::MAX_SIDE as f64);
        let side = ((2.0 * extent / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); side * side];
        let origin = -extent;
        let to_cell = |v: f64| (((v - origin) / cell).floor().max(0.0) as usize).min(side - 1);
        for (i, d) in disks.iter().enumerate() {
            let (x0, x1) = (to_cell(d.cx - d.radius), to_cell(d.cx + d.radius));
            let (y0, y1) = (to_cell(d.cy - d.radius), to_cell(d.cy + d.radius));
            for iy in y0..=y1 {
                for ix in x0..=x1 {
                    buckets[iy * side + ix].push(i as u32);
                }
            }
        }
        Self { origin, cell, side, buckets }
    }

    fn candidates(&self, x: f64, y: f64) -> Option<&[u32]> {
        if self.side == 0 {
            return None;
        }
        let to_cell = |v: f64| (((v - self.origin) / self.cell).floor().max(0.0) as usize).min(self.side - 1);
        Some(&self.buckets[to_cell(y) * self.side + to_cell(x)])
    }
}

/// Background potential plus circular patches: one realization of `Vp(r, φ)`.
#[derive(Debug, Clone)]
pub struct PatchMap {
    geometry: Geometry,
    background: f64,
    disks: Vec<Disk>,
    r0_nominal: f64,
    v0_nominal: f64,
    seed: Option<u64>,
    index: DiskIndex,
}

impl PartialEq for PatchMap {
    fn eq(&self, other: &Self) -> bool {
        self.geometry == other.geometry
            && self.background == other.background
            && self.disks == other.disks
            && self.r0_nominal == other.r0_nominal
            && self.v0_nominal == other.v0_nominal
            && self.seed == other.seed
    }
}

impl PatchMap {
    pub fn new(
        geometry: Geometry,
        background: f64,
        disks: Vec<Disk>,
        r0_nominal: f64,
        v0_nominal: f64,
        seed: Option<u64>,
    ) -> Result<Self> {
        if !background.is_finite() || !v0_nominal.is_finite() {
            return Err(config("background and v0_nominal must be finite"));
        }
        if !(r0_nominal.is_finite() && r0_nominal > 0.0) {
            return Err(config(format!("r0_nominal must be positive, got {r0_nominal}")));
        }
        for d in &disks {
            d.validate(geometry.r_plate())?;
        }
        let index = DiskIndex::build(&disks, geometry.r_plate());
        Ok(Self { geometry, background, disks, r0_nominal, v0_nominal, seed, index })
    }

    /// A plate at constant potential `value` with no patches.
    pub fn uniform(geometry: Geometry, value: f64) -> Result<Self> {
        Self::new(geometry, value, Vec::new(), geometry.r_plate(), value.abs(), None)
    }

    /// `inner` for `r < a`, `outer` elsewhere.
    pub fn two_zone(geometry: Geometry, a: f64, inner: f64, outer: f64) -> Result<Self> {
        if !(a > 0.0 && a <= geometry.r_plate()) {
            return Err(config(format!("zone radius must lie in (0, Rm], got {a}")));
        }
        let v0 = inner.abs().max(outer.abs());
        Self::new(geometry, outer, vec![Disk::new(0.0, 0.0, a, inner)], a, v0, None)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn background(&self) -> f64 {
        self.background
    }

    pub fn disks(&self) -> &[Disk] {
        &self.disks
    }

    pub fn r0_nominal(&self) -> f64 {
        self.r0_nominal
    }

    pub fn v0_nominal(&self) -> f64 {
        self.v0_nominal
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Smallest and largest value `Vp` can take anywhere on the map.
    pub fn potential_range(&self) -> (f64, f64) {
        self.disks
            .iter()
            .map(|d| d.potential)
            .fold((self.background, self.background), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    /// Copy with every potential (background and disks) multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.background *= factor;
        out.v0_nominal *= factor.abs();
        for d in &mut out.disks {
            d.potential *= factor;
        }
        out
    }

    /// Potential at a plate point; errors if the point is off the plate.
    pub fn potential_at(&self, x: f64, y: f64) -> Result<f64> {
        let rp = self.geometry.r_plate();
        if !(x.is_finite() && y.is_finite()) || x * x + y * y > rp * rp {
            return Err(domain(format!("point ({x}, {y}) lies outside the plate")));
        }
        Ok(self.value_at(x, y))
    }

    /// Unchecked point evaluation with the nearest-center precedence rule.
    #[inline]
    pub(crate) fn value_at(&self, x: f64, y: f64) -> f64 {
        let mut best: Option<(f64, usize)> = None;
        let mut consider = |i: usize| {
            let disk = &self.disks[i];
            let d2 = disk.dist2(x, y);
            if d2 <= disk.radius * disk.radius && best.is_none_or(|(b, _)| d2 < b) {
                best = Some((d2, i));
            }
        };
        match self.index.candidates(x, y) {
            Some(ids) => ids.iter().for_each(|&i| consider(i as usize)),
            None => (0..self.disks.len()).for_each(&mut consider),
        }
        best.map_or(self.background, |(_, i)| self.disks[i].potential)
    }

    /// Radii at which the ring average jumps (edges of centered disks).
    fn ring_breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.disks.iter().filter(|d| d.is_centered()).map(|d| d.radius).collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Closed-form area average, exact when disks do not overlap and lie
    /// fully inside the plate.
    pub fn area_average_analytic(&self) -> f64 {
        let rp2 = self.geometry.r_plate().powi(2);
        self.background
            + self
                .disks
                .iter()
                .map(|d| (d.potential - self.background) * d.radius * d.radius / rp2)
                .sum::<f64>()
    }

    pub fn to_json(&self) -> String {
        let num = |v: f64| serde_json::to_string(&v).expect("finite float");
        let mut s = String::from("{\n");
        s += &format!(
            "  \"geometry\": {{\"R\": {}, \"Rm\": {}}},\n",
            num(self.geometry.r_sphere()),
            num(self.geometry.r_plate())
        );
        s += &format!("  \"background\": {},\n", num(self.background));
        s += &format!("  \"r0_nominal\": {},\n", num(self.r0_nominal));
        s += &format!("  \"v0_nominal\": {},\n", num(self.v0_nominal));
        s += &format!("  \"seed\": {},\n", self.seed.map_or("null".to_string(), |v| v.to_string()));
        s += "  \"disks\": [";
        for (i, d) in self.disks.iter().enumerate() {
            s += if i == 0 { "\n" } else { ",\n" };
            s += &format!("    [{}, {}, {}, {}]", num(d.cx), num(d.cy), num(d.radius), num(d.potential));
        }
        s += if self.disks.is_empty() { "]\n}\n" } else { "\n  ]\n}\n" };
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MapFile = serde_json::from_str(text)?;
        let geometry = Geometry::new(file.geometry.r_sphere, file.geometry.r_plate)?;
        let disks = file
            .disks
            .into_iter()
            .map(|[cx, cy, radius, potential]| Disk { cx, cy, radius, potential })
            .collect();
        Self::new(geometry, file.background, disks, file.r0_nominal, file.v0_nominal, file.seed)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Deserialize)]
struct MapFile {
    geometry: GeometryFields,
    background: f64,
    r0_nominal: f64,
    v0_nominal: f64,
    seed: Option<u64>,
    disks: Vec<[f64; 4]>,
}

#[derive(Deserialize)]
struct GeometryFields {
    #[serde(rename = "R")]
    r_sphere: f64,
    #[serde(rename = "Rm")]
    r_plate: f64,
}

/// Homogeneous random patches: disks of radius `r0` on a hexagonal lattice
/// of pitch `2 r0`, each center shifted by a uniform random offset of length
/// at most `jitter * 2 r0`, each potential `+v0` or `-v0` with equal odds.
pub fn generate_homogeneous(geom: &Geometry, r0: f64, v0: f64, jitter: f64, seed: u64) -> Result<PatchMap> {
    let rp = geom.r_plate();
    if !(r0 > 0.0 && r0 < rp) {
        return Err(config(format!("r0 must lie in (0, Rm={rp}), got {r0}")));
    }
    if !(v0.is_finite() && v0 >= 0.0) {
        return Err(config(format!("v0 must be non-negative, got {v0}")));
    }
    if !(0.0..=0.5).contains(&jitter) {
        return Err(config(format!("jitter must lie in [0, 0.5], got {jitter}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pitch = 2.0 * r0;
    let row = 3f64.sqrt() * r0;
    let max_shift = jitter * pitch;
    let reach = rp + r0;
    let nrows = ((reach + max_shift) / row).ceil() as i64;
    let ncols = ((reach + max_shift) / pitch).ceil() as i64 + 1;
    let mut disks = Vec::new();
    for j in -nrows..=nrows {
        let y = j as f64 * row;
        let x_off = if j.rem_euclid(2) == 1 { r0 } else { 0.0 };
        for i in -ncols..=ncols {
            let x = i as f64 * pitch + x_off;
            // Draws happen for every lattice site so the stream layout does
            // not depend on which sites survive the plate filter.
            let rho = max_shift * rng.gen::<f64>().sqrt();
            let theta = 2.0 * PI * rng.gen::<f64>();
            let potential = if rng.gen_bool(0.5) { v0 } else { -v0 };
            let (cx, cy) = (x + rho * theta.cos(), y + rho * theta.sin());
            if cx.hypot(cy) <= reach {
                disks.push(Disk::new(cx, cy, r0, potential));
            }
        }
    }
    PatchMap::new(*geom, 0.0, disks, r0, v0, Some(seed))
}

/// One patch of radius `r0` and potential `v0` at the plate center.
pub fn generate_single_patch(geom: &Geometry, r0: f64, v0: f64) -> Result<PatchMap> {
    generate_single_patch_at(geom, r0, v0, 0.0, 0.0)
}

/// One patch at `(cx, cy)`; models an isolated feature such as a charged
/// dust grain.
pub fn generate_single_patch_at(geom: &Geometry, r0: f64, v0: f64, cx: f64, cy: f64) -> Result<PatchMap> {
    if !(r0 > 0.0 && r0 <= geom.r_plate()) {
        return Err(config(format!("r0 must lie in (0, Rm], got {r0}")));
    }
    PatchMap::new(*geom, 0.0, vec![Disk::new(cx, cy, r0, v0)], r0, v0.abs(), None)
}

/// How many angles to sample on a ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngularRule {
    /// `max(64, ceil(8 * 2πr / 2r0))`: at least eight samples per patch.
    Auto,
    Fixed(usize),
}

impl AngularRule {
    pub fn samples(&self, r: f64, r0: f64) -> usize {
        match *self {
            AngularRule::Fixed(n) => n,
            AngularRule::Auto => {
                let per_patch = (8.0 * 2.0 * PI * r / (2.0 * r0)).ceil();
                (per_patch as usize).max(64)
            }
        }
    }
}

#[inline]
pub(crate) fn ring_angle(k: usize, n_phi: usize) -> f64 {
    2.0 * PI * (k as f64 + 0.5) / n_phi as f64
}

/// Mean of `Vp` over `n_phi` equally spaced angles on the circle of radius
/// `r`; the plate center itself at `r = 0`.
pub fn ring_average(map: &PatchMap, r: f64, n_phi: usize) -> Result<f64> {
    if n_phi < 8 {
        return Err(config(format!("need at least 8 angular samples, got {n_phi}")));
    }
    if !(0.0..=map.geometry.r_plate()).contains(&r) {
        return Err(domain(format!("ring radius {r} outside the plate")));
    }
    Ok(ring_mean(map, r, n_phi))
}

pub(crate) fn ring_mean(map: &PatchMap, r: f64, n_phi: usize) -> f64 {
    if r == 0.0 {
        return map.value_at(0.0, 0.0);
    }
    mean_exact_on_constants((0..n_phi).map(|k| {
        let (s, c) = ring_angle(k, n_phi).sin_cos();
        map.value_at(r * c, r * s)
    }))
}

/// Mean accumulated as deviations from the first value, so a constant
/// sequence averages to exactly that constant.
pub(crate) fn mean_exact_on_constants(mut values: impl Iterator<Item = f64>) -> f64 {
    let Some(first) = values.next() else {
        return f64::NAN;
    };
    let (sum, n) = values.fold((0.0, 1usize), |(s, n), v| (s + (v - first), n + 1));
    first + sum / n as f64
}

/// Radial grid: node 0, then log-spaced nodes from `r_min` to `Rm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_min: f64,
    pub nodes_per_decade: usize,
    pub angular: AngularRule,
}

impl GridSpec {
    /// Relative half-width of the node pair straddling a ring-average jump.
    const JUMP_HALF_WIDTH: f64 = 1e-7;

    /// `r_min = min(sqrt(2 R d_min), r0) / 10`, resolving both the kernel
    /// scale at the smallest distance served and the patch scale.
    pub fn for_distance(map: &PatchMap, d_min: f64, nodes_per_decade: usize, angular: AngularRule) -> Self {
        let kernel_scale = (2.0 * map.geometry.r_sphere() * d_min).sqrt();
        Self { r_min: kernel_scale.min(map.r0_nominal) / 10.0, nodes_per_decade, angular }
    }

    fn validate(&self, r_plate: f64) -> Result<()> {
        if self.nodes_per_decade < 4 {
            return Err(config(format!(
                "radial grid too coarse: {} nodes per decade (minimum 4)",
                self.nodes_per_decade
            )));
        }
        if !(self.r_min > 0.0 && self.r_min < r_plate) {
            return Err(config(format!("r_min must lie in (0, Rm), got {}", self.r_min)));
        }
        if let AngularRule::Fixed(n) = self.angular {
            if n < 8 {
                return Err(config(format!("need at least 8 angular samples, got {n}")));
            }
        }
        Ok(())
    }

    /// Node radii for `map`. Every jump of the ring average (edge of a
    /// centered disk) is straddled by a node pair whose midpoint is the jump.
    pub fn nodes(&self, map: &PatchMap) -> Result<Vec<f64>> {
        let rp = map.geometry.r_plate();
        self.validate(rp)?;
        let decades = (rp / self.r_min).log10();
        let cells = ((decades * self.nodes_per_decade as f64).ceil() as usize).max(1);
        let ratio = rp / self.r_min;
        let mut nodes: Vec<f64> =
            (0..=cells).map(|i| self.r_min * ratio.powf(i as f64 / cells as f64)).collect();
        *nodes.last_mut().expect("non-empty") = rp;

        let eta = Self::JUMP_HALF_WIDTH;
        for b in map.ring_breakpoints() {
            if b >= rp * (1.0 - 2.0 * eta) {
                continue;
            }
            let (lo, hi) = (b * (1.0 - eta), b * (1.0 + eta));
            nodes.retain(|&r| r <= lo || r >= hi);
            nodes.push(lo);
            nodes.push(hi);
        }
        nodes.push(0.0);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        Ok(nodes)
    }
}

/// Ring-averaged potential on a radial grid.
///
/// The profile is read as piecewise constant: node `k` owns the cell between
/// the midpoints to its neighbours (node 0 owns `[0, r1/2]`, the last node
/// owns the final half-cell up to `Rm`).
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    r_nodes: Vec<f64>,
    values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(r_nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if r_nodes.len() != values.len() {
            return Err(config("profile nodes and values differ in length"));
        }
        if r_nodes.len() < 2 {
            return Err(config("profile needs at least two nodes"));
        }
        if r_nodes[0] < 0.0 || r_nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(config("profile nodes must be non-negative and strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(config("profile values must be finite"));
        }
        Ok(Self { r_nodes, values })
    }

    pub fn r_nodes(&self) -> &[f64] {
        &self.r_nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.r_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_nodes.is_empty()
    }

    /// `V̄p(0)`.
    pub fn at_center(&self) -> f64 {
        self.values[0]
    }

    /// `V̄p(Rm)`.
    pub fn at_rim(&self) -> f64 {
        *self.values.last().expect("non-empty")
    }

    /// Cell boundaries, `len() + 1` of them, starting at the first node and
    /// ending at the last.
    pub fn cell_edges(&self) -> Vec<f64> {
        let n = self.r_nodes.len();
        let mut edges = Vec::with_capacity(n + 1);
        edges.push(self.r_nodes[0]);
        edges.extend(self.r_nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        edges.push(self.r_nodes[n - 1]);
        edges
    }

    /// Checks that the profile spans `[0, Rm]`.
    pub fn check_spans(&self, geom: &Geometry) -> Result<()> {
        let last = *self.r_nodes.last().expect("non-empty");
        let rp = geom.r_plate();
        if self.r_nodes[0] != 0.0 {
            return Err(domain("profile does not start at r = 0"));
        }
        if (last - rp).abs() > 1e-12 * rp {
            return Err(domain(format!("profile ends at {last}, not at Rm = {rp}")));
        }
        Ok(())
    }

    /// Area-weighted mean over the disk spanned by the profile.
    pub fn area_average(&self) -> f64 {
        let edges = self.cell_edges();
        let rp2 = edges.last().expect("non-empty").powi(2);
        self.values.iter().zip(edges.windows(2)).map(|(v, e)| v * (e[1] * e[1] - e[0] * e[0])).sum::<f64>()
            / rp2
    }
}

/// Ring averages of `map` at the nodes of `spec`.
pub fn radial_profile(map: &PatchMap, spec: &GridSpec) -> Result<RadialProfile> {
    let nodes = spec.nodes(map)?;
    let r0 = map.r0_nominal;
    let values = nodes.iter().map(|&r| ring_mean(map, r, spec.angular.samples(r, r0))).collect();
    RadialProfile::new(nodes, values)
}

/// Surface average `(1/πRm²) ∫∫ Vp r dr dφ` on the polar grid of `spec`.
pub fn area_average(map: &PatchMap, spec: &GridSpec) -> Result<f64> {
    Ok(radial_profile(map, spec)?.area_average())
}

/// RMS of the ring average across an ensemble of homogeneous maps.
#[derive(Debug, Clone, PartialEq)]
pub struct RingRmsTable {
    /// `(r, S(r))` rows.
    pub rows: Vec<(f64, f64)>,
    /// Slope of `ln S` against `ln r` over `[5 r0, Rm]`; `None` when any
    /// `S` there vanishes or fewer than two nodes fall in the range.
    pub slope: Option<f64>,
}

/// Parameters of [`generate_homogeneous`], shared by ensemble drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousParams {
    pub r0: f64,
    pub v0: f64,
    pub jitter: f64,
}

impl HomogeneousParams {
    pub fn realize(&self, geom: &Geometry, seed: u64) -> Result<PatchMap> {
        generate_homogeneous(geom, self.r0, self.v0, self.jitter, seed)
    }
}

/// `S(r) = sqrt(mean_i ringavg_i(r)^2)` over `n_real` homogeneous maps.
pub fn ring_rms_ensemble(
    geom: &Geometry,
    params: HomogeneousParams,
    n_real: usize,
    r_nodes: &[f64],
    master_seed: u64,
) -> Result<RingRmsTable> {
    if n_real < 50 {
        return Err(config(format!("ring RMS ensemble needs at least 50 realizations, got {n_real}")));
    }
    let r0 = params.r0;
    let lo = 2.0 * r0 * (1.0 - 1e-12);
    let hi = geom.r_plate() * (1.0 + 1e-12);
    if r_nodes.is_empty() || r_nodes.iter().any(|&r| !(r >= lo && r <= hi)) {
        return Err(domain(format!(
            "ring radii must lie within [2 r0, Rm] = [{}, {}]",
            2.0 * r0,
            geom.r_plate()
        )));
    }
    let rule = AngularRule::Auto;
    let per_real: Vec<Vec<f64>> = (0..n_real as u64)
        .into_par_iter()
        .map(|i| {
            let map = params.realize(geom, realization_seed(master_seed, i))?;
            Ok(r_nodes.iter().map(|&r| ring_mean(&map, r.min(geom.r_plate()), rule.samples(r, r0))).collect())
        })
        .collect::<Result<_, Error>>()?;

    let rows: Vec<(f64, f64)> = r_nodes
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let ms = per_real.iter().map(|v| v[k] * v[k]).sum::<f64>() / n_real as f64;
            (r, ms.sqrt())
        })
        .collect();

    let fit_pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(r, _)| *r >= 5.0 * r0 * (1.0 - 1e-12))
        .map(|&(r, s)| (r.ln(), if s > 0.0 { s.ln() } else { f64::NAN }))
        .collect();
    let slope = if fit_pts.len() >= 2 && fit_pts.iter().all(|p| p.1.is_finite()) {
        Some(ols_slope(&fit_pts))
    } else {
        None
    };
    Ok(RingRmsTable { rows, slope })
}

fn ols_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
