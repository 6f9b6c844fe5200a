//! Free energy, force and minimizing voltage in the PFA sphere-plane gap.
//!
//! With the applied voltage `Va` and the patch map `Vp(r, φ)`,
//!
//! ```text
//! U  = (ε0/2) ∫∫ (Va - Vp)^2 w(r; d)  dφ dr
//! F  = (ε0/2) ∫∫ (Va - Vp)^2 w2(r; d) dφ dr      (= -dU/dd)
//! ```
//!
//! `U` is quadratic in `Va`, so the minimizing voltage is the `w`-weighted
//! mean of `Vp` (and the `w2`-weighted mean for the force). Integrating the
//! stationarity condition by parts gives a second route through the ring
//! profile,
//!
//! ```text
//! Vm = [V̄(Rm) ln(d + Rm²/2R) - V̄(0) ln d + Q(d)] / [ln(d + Rm²/2R) - ln d]
//! Q(d) = -∫ ln(d + r²/2R) dV̄(r)
//! ```
//!
//! which [`vm_analytic`] evaluates. Both routes share one discretization: the
//! profile is piecewise constant on cells whose boundaries are the midpoints
//! between radial nodes, and the kernels are integrated exactly on each cell.

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::geometry::{Geometry, Validity};
use crate::patches::{mean_exact_on_constants, ring_angle, AngularRule, GridSpec, PatchMap, RadialProfile};

/// Vacuum permittivity, F/m (CODATA 2018).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Discretization of the polar integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes_per_decade: usize,
    pub angular: AngularRule,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { nodes_per_decade: 24, angular: AngularRule::Auto }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_decade < 24 {
            return Err(config(format!(
                "quadrature needs at least 24 radial nodes per decade, got {}",
                self.nodes_per_decade
            )));
        }
        if let AngularRule::Fixed(n) = self.angular {
            if n < 64 {
                return Err(config(format!("quadrature needs at least 64 angular samples, got {n}")));
            }
        }
        Ok(())
    }

    /// Radial grid able to serve every distance `>= d_min` on `map`.
    pub fn grid_for(&self, map: &PatchMap, d_min: f64) -> Result<GridSpec> {
        self.validate()?;
        map.geometry().check_d(d_min)?;
        Ok(GridSpec::for_distance(map, d_min, self.nodes_per_decade, self.angular))
    }
}

/// Point samples of `Vp` on the polar grid, grouped by ring.
#[derive(Debug, Clone)]
pub struct PolarField {
    geometry: Geometry,
    nodes: Vec<f64>,
    edges: Vec<f64>,
    rings: Vec<Vec<f64>>,
}

impl PolarField {
    pub fn sample(map: &PatchMap, grid: &GridSpec) -> Result<Self> {
        let nodes = grid.nodes(map)?;
        let r0 = map.r0_nominal();
        let rings = nodes
            .iter()
            .map(|&r| {
                if r == 0.0 {
                    return vec![map.value_at(0.0, 0.0)];
                }
                let n = grid.angular.samples(r, r0);
                (0..n)
                    .map(|k| {
                        let (s, c) = ring_angle(k, n).sin_cos();
                        map.value_at(r * c, r * s)
                    })
                    .collect()
            })
            .collect();
        let mut edges = Vec::with_capacity(nodes.len() + 1);
        edges.push(0.0);
        edges.extend(nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        edges.push(*nodes.last().expect("non-empty"));
        Ok(Self { geometry: *map.geometry(), nodes, edges, rings })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Ring means of the samples.
    pub fn profile(&self) -> RadialProfile {
        let values = self.rings.iter().map(|s| mean_exact_on_constants(s.iter().copied())).collect();
        RadialProfile::new(self.nodes.clone(), values).expect("grid nodes are valid")
    }

    fn energy_weights(&self, d: f64) -> impl Iterator<Item = f64> + '_ {
        self.edges.windows(2).map(move |e| self.geometry.energy_weight_between(d, e[0], e[1]))
    }

    fn force_weights(&self, d: f64) -> impl Iterator<Item = f64> + '_ {
        self.edges.windows(2).map(move |e| self.geometry.force_weight_between(d, e[0], e[1]))
    }

    fn quadratic_form(&self, weights: impl Iterator<Item = f64>, va: f64) -> f64 {
        let total: f64 = self
            .rings
            .iter()
            .zip(weights)
            .map(|(samples, w)| {
                let dphi = 2.0 * std::f64::consts::PI / samples.len() as f64;
                w * dphi * samples.iter().map(|v| (va - v) * (va - v)).sum::<f64>()
            })
            .sum();
        0.5 * EPSILON_0 * total
    }

    fn weighted_mean(&self, weights: impl Iterator<Item = f64>) -> f64 {
        // deviations from a reference keep constant fields exact
        let reference = self.rings[0][0];
        let (num, den) = self.rings.iter().zip(weights).fold((0.0, 0.0), |(n, dsum), (s, w)| {
            let per_sample = w / s.len() as f64;
            let dev: f64 = s.iter().map(|v| v - reference).sum();
            (n + per_sample * dev, dsum + w)
        });
        reference + num / den
    }

    /// Free energy in joules.
    pub fn free_energy(&self, d: f64, va: f64) -> Result<f64> {
        self.geometry.check_d(d)?;
        Ok(self.quadratic_form(self.energy_weights(d), va))
    }

    /// Attractive force magnitude in newtons.
    pub fn force(&self, d: f64, va: f64) -> Result<f64> {
        self.geometry.check_d(d)?;
        Ok(self.quadratic_form(self.force_weights(d), va))
    }

    pub fn vm_energy(&self, d: f64) -> Result<f64> {
        self.geometry.check_d(d)?;
        Ok(self.weighted_mean(self.energy_weights(d)))
    }

    pub fn vm_force(&self, d: f64) -> Result<f64> {
        self.geometry.check_d(d)?;
        Ok(self.weighted_mean(self.force_weights(d)))
    }

    /// All minimizers at `d`, with validity flags for patch scale `r0`.
    pub fn evaluate(&self, d: f64, r0: f64) -> Result<VmResult> {
        let profile = self.profile();
        Ok(VmResult {
            d,
            vm_energy: self.vm_energy(d)?,
            vm_force: self.vm_force(d)?,
            vm_analytic: vm_analytic(&profile, &self.geometry, d)?,
            q: compute_q(&profile, &self.geometry, d)?,
            validity: self.geometry.validity(d, r0)?,
        })
    }
}

/// Minimizing voltages at one distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmResult {
    pub d: f64,
    pub vm_energy: f64,
    pub vm_force: f64,
    pub vm_analytic: f64,
    /// `Q(d)`, volts times log units.
    pub q: f64,
    pub validity: Validity,
}

fn field_for(map: &PatchMap, d: f64, quad: &QuadratureSpec) -> Result<PolarField> {
    PolarField::sample(map, &quad.grid_for(map, d)?)
}

pub fn free_energy(map: &PatchMap, d: f64, va: f64, quad: &QuadratureSpec) -> Result<f64> {
    field_for(map, d, quad)?.free_energy(d, va)
}

pub fn force(map: &PatchMap, d: f64, va: f64, quad: &QuadratureSpec) -> Result<f64> {
    field_for(map, d, quad)?.force(d, va)
}

/// Closed-form minimizer of the free energy.
pub fn vm_energy(map: &PatchMap, d: f64, quad: &QuadratureSpec) -> Result<f64> {
    field_for(map, d, quad)?.vm_energy(d)
}

/// Closed-form minimizer of the force.
pub fn vm_force(map: &PatchMap, d: f64, quad: &QuadratureSpec) -> Result<f64> {
    field_for(map, d, quad)?.vm_force(d)
}

pub fn evaluate(map: &PatchMap, d: f64, quad: &QuadratureSpec) -> Result<VmResult> {
    field_for(map, d, quad)?.evaluate(d, map.r0_nominal())
}

/// Brute-force minimizer: scans the free energy on `steps + 1` evenly
/// spaced voltages in `window` and refines the best one with a parabola
/// through its neighbours.
pub fn vm_scan(
    map: &PatchMap,
    d: f64,
    quad: &QuadratureSpec,
    window: (f64, f64),
    steps: usize,
) -> Result<f64> {
    let field = field_for(map, d, quad)?;
    scan_minimum(|va| field.free_energy(d, va), window, steps)
}

pub(crate) fn scan_minimum(
    f: impl Fn(f64) -> Result<f64>,
    (lo, hi): (f64, f64),
    steps: usize,
) -> Result<f64> {
    if steps < 1000 {
        return Err(config(format!("voltage scan needs at least 1000 steps, got {steps}")));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(config(format!("invalid voltage window [{lo}, {hi}]")));
    }
    let h = (hi - lo) / steps as f64;
    let at = |i: usize| lo + i as f64 * h;
    let values = (0..=steps).map(|i| f(at(i))).collect::<Result<Vec<_>>>()?;
    let best =
        values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).expect("non-empty");
    if best == 0 || best == steps {
        return Err(Error::Scan(format!("minimum at window edge {}; widen [{lo}, {hi}]", at(best))));
    }
    let (um, u0, up) = (values[best - 1], values[best], values[best + 1]);
    let curvature = um - 2.0 * u0 + up;
    if curvature <= 0.0 {
        return Ok(at(best));
    }
    Ok(at(best) + 0.5 * h * (um - up) / curvature)
}

/// Integration-by-parts remainder
/// `Q(d) = -Σ ln(d + r̄k²/2R) (V̄(r_{k+1}) - V̄(r_k))`, with `r̄k` the midpoint
/// between consecutive nodes.
pub fn compute_q(profile: &RadialProfile, geom: &Geometry, d: f64) -> Result<f64> {
    geom.check_d(d)?;
    profile.check_spans(geom)?;
    let v = profile.values();
    let r = profile.r_nodes();
    Ok(-(0..v.len() - 1)
        .map(|k| {
            let mid = 0.5 * (r[k] + r[k + 1]);
            (d + geom.sag(mid)).ln() * (v[k + 1] - v[k])
        })
        .sum::<f64>())
}

/// Minimizing voltage from the boundary terms and `Q(d)`.
pub fn vm_analytic(profile: &RadialProfile, geom: &Geometry, d: f64) -> Result<f64> {
    let q = compute_q(profile, geom, d)?;
    // ln g(Rm) = ln d + ln1p(s/d); expanded to avoid cancellation when s << d.
    let denom = (geom.plate_sag() / d).ln_1p();
    let rim = profile.at_rim();
    Ok(rim + ((rim - profile.at_center()) * d.ln() + q) / denom)
}

/// Energy minimizer computed directly from a ring profile.
pub fn vm_energy_from_profile(profile: &RadialProfile, geom: &Geometry, d: f64) -> Result<f64> {
    geom.check_d(d)?;
    profile.check_spans(geom)?;
    Ok(profile_weighted_mean(profile, |a, b| geom.energy_weight_between(d, a, b)))
}

/// Force minimizer computed directly from a ring profile.
pub fn vm_force_from_profile(profile: &RadialProfile, geom: &Geometry, d: f64) -> Result<f64> {
    geom.check_d(d)?;
    profile.check_spans(geom)?;
    Ok(profile_weighted_mean(profile, |a, b| geom.force_weight_between(d, a, b)))
}

fn profile_weighted_mean(profile: &RadialProfile, weight: impl Fn(f64, f64) -> f64) -> f64 {
    let edges = profile.cell_edges();
    let reference = profile.at_center();
    let (num, den) = profile.values().iter().zip(edges.windows(2)).fold((0.0, 0.0), |(n, s), (v, e)| {
        let w = weight(e[0], e[1]);
        (n + (v - reference) * w, s + w)
    });
    reference + num / den
}
