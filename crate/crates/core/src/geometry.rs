//! Sphere-plane geometry under the proximity force approximation.
//!
//! A spherically curved plate of curvature radius `R` faces a flat plate;
//! both have radius `Rm`. At radial position `r` the local gap is
//!
//! ```text
//! g(r; d) = d + r^2 / 2R
//! ```
//!
//! and the free energy and force reduce to radial integrals against
//!
//! ```text
//! w(r; d)  = r / g(r; d)        (energy weight)
//! w2(r; d) = r / g(r; d)^2      (force weight, = -dw/dd)
//! ```
//!
//! Lengths are meters; logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};

/// Curvature radius of the sphere and radius of both plates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    #[serde(rename = "R")]
    r_sphere: f64,
    #[serde(rename = "Rm")]
    r_plate: f64,
}

/// Closed-form radial integrals of the two weights over `[0, Rm]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelNorms {
    /// `R ln(1 + Rm^2 / 2Rd)`, in meters.
    pub energy_norm: f64,
    /// `R (Rm^2/2R) / (d (d + Rm^2/2R))`, in 1/m.
    pub force_norm: f64,
}

/// Advisory applicability flags for a distance and patch scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validity {
    /// `d < Rm^2 / 2R`.
    pub pfa_ok: bool,
    /// `r0 > sqrt(2 R d)`: each patch sees only its own image.
    pub patch_image_ok: bool,
}

impl Geometry {
    pub fn new(r_sphere: f64, r_plate: f64) -> Result<Self> {
        if !(r_sphere.is_finite() && r_sphere > 0.0) {
            return Err(config(format!("R must be positive, got {r_sphere}")));
        }
        if !(r_plate.is_finite() && r_plate > 0.0) {
            return Err(config(format!("Rm must be positive, got {r_plate}")));
        }
        if r_plate > r_sphere {
            return Err(config(format!("Rm ({r_plate}) must not exceed R ({r_sphere})")));
        }
        Ok(Self { r_sphere, r_plate })
    }

    /// Sphere curvature radius `R`.
    pub fn r_sphere(&self) -> f64 {
        self.r_sphere
    }

    /// Plate radius `Rm`.
    pub fn r_plate(&self) -> f64 {
        self.r_plate
    }

    /// Sag of the sphere at radius `r`, `r^2 / 2R`.
    #[inline]
    pub fn sag(&self, r: f64) -> f64 {
        r * r / (2.0 * self.r_sphere)
    }

    /// `Rm^2 / 2R`: the distance beyond which the curvature no longer
    /// dominates the gap.
    pub fn plate_sag(&self) -> f64 {
        self.sag(self.r_plate)
    }

    pub(crate) fn check_d(&self, d: f64) -> Result<()> {
        if d.is_finite() && d > 0.0 {
            Ok(())
        } else {
            Err(domain(format!("distance must be positive, got {d}")))
        }
    }

    fn check_r(&self, r: f64) -> Result<()> {
        if (0.0..=self.r_plate).contains(&r) {
            Ok(())
        } else {
            Err(domain(format!("radius {r} outside the plate [0, {}]", self.r_plate)))
        }
    }

    /// Local gap `d + r^2/2R`.
    pub fn gap(&self, d: f64, r: f64) -> Result<f64> {
        self.check_d(d)?;
        self.check_r(r)?;
        Ok(d + self.sag(r))
    }

    /// Energy weight `r / (d + r^2/2R)`. Peaks at `r = sqrt(2Rd)`.
    pub fn energy_kernel(&self, d: f64, r: f64) -> Result<f64> {
        Ok(r / self.gap(d, r)?)
    }

    /// Force weight `r / (d + r^2/2R)^2`.
    pub fn force_kernel(&self, d: f64, r: f64) -> Result<f64> {
        let g = self.gap(d, r)?;
        Ok(r / (g * g))
    }

    pub fn kernel_norms(&self, d: f64) -> Result<KernelNorms> {
        self.check_d(d)?;
        let s = self.plate_sag();
        Ok(KernelNorms {
            energy_norm: self.r_sphere * (s / d).ln_1p(),
            force_norm: self.r_sphere * s / (d * (d + s)),
        })
    }

    /// Exact integral of the energy weight over `[a, b]`.
    pub(crate) fn energy_weight_between(&self, d: f64, a: f64, b: f64) -> f64 {
        let ga = d + self.sag(a);
        // ln(g_b / g_a) without cancellation for thin cells
        self.r_sphere * ((b * b - a * a) / (2.0 * self.r_sphere * ga)).ln_1p()
    }

    /// Exact integral of the force weight over `[a, b]`.
    pub(crate) fn force_weight_between(&self, d: f64, a: f64, b: f64) -> f64 {
        let ga = d + self.sag(a);
        let gb = d + self.sag(b);
        (b * b - a * a) / (2.0 * ga * gb)
    }

    /// Strict-inequality applicability checks. Never fails on a violated
    /// criterion; the result is advisory.
    pub fn validity(&self, d: f64, r0: f64) -> Result<Validity> {
        self.check_d(d)?;
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(domain(format!("patch radius must be positive, got {r0}")));
        }
        Ok(Validity { pfa_ok: d < self.plate_sag(), patch_image_ok: r0 > (2.0 * self.r_sphere * d).sqrt() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> Geometry {
        Geometry::new(0.15, 0.015).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Geometry::new(0.0, 0.01).is_err());
        assert!(Geometry::new(0.1, -1.0).is_err());
        assert!(Geometry::new(0.01, 0.1).is_err());
        assert!(Geometry::new(0.1, 0.1).is_ok());
    }

    #[test]
    fn gap_examples() {
        let g = reference();
        assert_eq!(g.gap(1e-6, 0.0).unwrap(), 1e-6);
        assert!(rel(g.gap(1e-6, 1e-3).unwrap(), 1e-6 + 1e-6 / 0.3) < 1e-12);
        assert!(rel(g.gap(1e-6, 1e-3).unwrap(), 4.3333e-6) < 1e-4);
        assert!(rel(g.gap(7.5e-4, 0.015).unwrap(), 1.5e-3) < 1e-12);
    }

    #[test]
    fn gap_domain_errors() {
        let g = reference();
        assert!(g.gap(0.0, 0.0).is_err());
        assert!(g.gap(-1e-6, 0.0).is_err());
        assert!(g.gap(1e-6, -1e-9).is_err());
        assert!(g.gap(1e-6, 0.0151).is_err());
        assert!(g.energy_kernel(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn kernel_examples() {
        let g = reference();
        assert_eq!(g.energy_kernel(1e-6, 0.0).unwrap(), 0.0);
        assert_eq!(g.force_kernel(1e-6, 0.0).unwrap(), 0.0);
        assert!(rel(g.energy_kernel(1e-6, 1e-3).unwrap(), 230.77) < 1e-4);
        assert!(rel(g.force_kernel(1e-6, 1e-3).unwrap(), 5.3254e7) < 1e-4);
    }

    #[test]
    fn energy_kernel_peak_at_kernel_scale() {
        let g = reference();
        let d = 1e-6;
        let n = 200_000;
        let (mut best_r, mut best_w) = (0.0, 0.0);
        for i in 0..=n {
            let r = g.r_plate() * i as f64 / n as f64;
            let w = g.energy_kernel(d, r).unwrap();
            if w > best_w {
                best_w = w;
                best_r = r;
            }
        }
        let expected = (2.0 * g.r_sphere() * d).sqrt();
        assert!((best_r - expected).abs() <= g.r_plate() / n as f64);
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    // Composite Simpson on a log-graded partition so the sqrt(2Rd) peak is
    // resolved at every distance.
    fn graded_quad(f: impl Fn(f64) -> f64, g: &Geometry, d: f64) -> f64 {
        let scale = (2.0 * g.r_sphere() * d).sqrt();
        let mut edges = vec![0.0];
        let mut r = scale * 1e-3;
        while r < g.r_plate() {
            edges.push(r);
            r *= 1.25;
        }
        edges.push(g.r_plate());
        edges.windows(2).map(|w| simpson(&f, w[0], w[1], 64)).sum()
    }

    #[test]
    fn norms_match_quadrature() {
        let g = reference();
        for &d in &[1e-8, 1e-6, 7.5e-4, 1e-2, 1.0] {
            let n = g.kernel_norms(d).unwrap();
            let e = graded_quad(|r| g.energy_kernel(d, r).unwrap(), &g, d);
            let f = graded_quad(|r| g.force_kernel(d, r).unwrap(), &g, d);
            assert!(rel(e, n.energy_norm) < 1e-8, "d={d}: {e} vs {}", n.energy_norm);
            assert!(rel(f, n.force_norm) < 1e-8, "d={d}: {f} vs {}", n.force_norm);
            let closed = g.r_sphere() * (1.0 / d - 1.0 / (d + g.plate_sag()));
            assert!(rel(closed, n.force_norm) < 1e-12);
        }
    }

    #[test]
    fn norm_examples() {
        let g = reference();
        let n = g.kernel_norms(7.5e-4).unwrap();
        assert!(rel(n.energy_norm, 0.15 * 2f64.ln()) < 1e-12);
        assert!(rel(n.energy_norm, 0.103972) < 1e-5);
        // ln(1+x) ~ x far away
        let far = g.kernel_norms(1e3).unwrap();
        assert!(rel(far.energy_norm, 0.015f64.powi(2) / 2e3) < 1e-6);
        assert!(g.kernel_norms(0.0).is_err());
    }

    #[test]
    fn cell_weights_sum_to_norms() {
        let g = reference();
        let d = 3e-6;
        let edges: Vec<f64> = (0..=50).map(|i| g.r_plate() * (i as f64 / 50.0).powi(2)).collect();
        let e: f64 = edges.windows(2).map(|w| g.energy_weight_between(d, w[0], w[1])).sum();
        let f: f64 = edges.windows(2).map(|w| g.force_weight_between(d, w[0], w[1])).sum();
        let n = g.kernel_norms(d).unwrap();
        assert!(rel(e, n.energy_norm) < 1e-13);
        assert!(rel(f, n.force_norm) < 1e-13);
    }

    #[test]
    fn force_kernel_is_minus_d_derivative() {
        let g = reference();
        for &d in &[1e-7, 1e-5, 1e-3] {
            for &r in &[1e-4, 1e-3, 1e-2] {
                let h = d * 1e-4;
                let fd =
                    -(g.energy_kernel(d + h, r).unwrap() - g.energy_kernel(d - h, r).unwrap()) / (2.0 * h);
                assert!(rel(fd, g.force_kernel(d, r).unwrap()) < 1e-6);
            }
        }
    }

    #[test]
    fn dimensional_scaling() {
        let g = reference();
        let lambda = 3.7;
        let gs = Geometry::new(0.15 * lambda, 0.015 * lambda).unwrap();
        let (d, r) = (2e-6, 4e-3);
        let w = g.energy_kernel(d, r).unwrap();
        let ws = gs.energy_kernel(d * lambda, r * lambda).unwrap();
        assert!(rel(ws, w) < 1e-13);
        let gap = g.gap(d, r).unwrap();
        assert!(rel(gs.gap(d * lambda, r * lambda).unwrap(), gap * lambda) < 1e-13);
    }

    #[test]
    fn validity_examples() {
        let g = reference();
        let v = g.validity(1e-6, 1e-3).unwrap();
        assert!(v.pfa_ok && v.patch_image_ok);
        let v = g.validity(1e-3, 1e-3).unwrap();
        assert!(!v.pfa_ok && !v.patch_image_ok);
        let v = g.validity(g.plate_sag(), 1e-3).unwrap();
        assert!(!v.pfa_ok);
        assert!(g.validity(1e-6, 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gap_bounded_below_by_d(d in 1e-9f64..1e-2, t in 0.0f64..=1.0) {
                let g = reference();
                let r = t * g.r_plate();
                let gap = g.gap(d, r).unwrap();
                prop_assert!(gap >= d);
                if r > 0.0 { prop_assert!(gap > d); } else { prop_assert_eq!(gap, d); }
            }

            #[test]
            fn kernels_positive_off_axis(d in 1e-9f64..1e-2, t in 1e-6f64..=1.0) {
                let g = reference();
                let r = t * g.r_plate();
                prop_assert!(g.energy_kernel(d, r).unwrap() > 0.0);
                prop_assert!(g.force_kernel(d, r).unwrap() > 0.0);
            }
        }
    }
}
