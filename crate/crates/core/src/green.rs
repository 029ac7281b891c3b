//! Green function of `L` in the meridional half plane.
//!
//! `G1(x, y) = (x1 y1 / 4π) ∫_{-π}^{π} cos θ / sqrt(d² + x1² + y1² - 2 x1 y1 cos θ) dθ`
//! with `d = x2 - y2`. Writing `ρ = |x - y|² / (x1 y1)`, the integral reduces to
//! `G1 = sqrt(x1 y1) J(ρ) / 4π` with the one-variable function
//! `J(ρ) = ∫ cos θ / sqrt(ρ + 4 sin²(θ/2)) dθ`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{self, GaussLegendre};

/// `2 ln 8 - 4`, the constant of the near-diagonal expansion.
pub const NEAR_CONSTANT: f64 = 2.0 * 2.079_441_541_679_835_9 - 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlanePoint {
    pub x1: f64,
    pub x2: f64,
}

impl HalfPlanePoint {
    pub fn new(x1: f64, x2: f64) -> Result<Self> {
        if !(x1 > 0.0) || !x1.is_finite() || !x2.is_finite() {
            return Err(Error::Domain(format!("half-plane point needs x1 > 0, got ({x1}, {x2})")));
        }
        Ok(Self { x1, x2 })
    }

    /// Constructor for callers that already guarantee `x1 > 0`.
    pub const fn new_unchecked(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GreenConfig {
    /// Gauss–Legendre nodes per panel of the θ-integral.
    pub quad_order: usize,
    /// Below this `ρ` the near expansion is the reference in asymptotic tables.
    pub rho_switch_near: f64,
    /// Above this `ρ` the far expansion is the reference in asymptotic tables.
    pub rho_switch_far: f64,
}

impl Default for GreenConfig {
    fn default() -> Self {
        Self { quad_order: 16, rho_switch_near: 1e-2, rho_switch_far: 10.0 }
    }
}

impl GreenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.quad_order < 2 {
            return Err(Error::Domain("quad_order must be at least 2".into()));
        }
        if !(self.rho_switch_near > 0.0 && self.rho_switch_near < self.rho_switch_far) {
            return Err(Error::Domain("need 0 < rho_switch_near < rho_switch_far".into()));
        }
        Ok(())
    }
}

/// `|x - y|² / (x1 y1)`.
pub fn rho(x: HalfPlanePoint, y: HalfPlanePoint) -> f64 {
    let d1 = x.x1 - y.x1;
    let d2 = x.x2 - y.x2;
    (d1 * d1 + d2 * d2) / (x.x1 * y.x1)
}

fn check_pair(x: HalfPlanePoint, y: HalfPlanePoint) -> Result<()> {
    if !(x.x1 > 0.0 && y.x1 > 0.0) {
        return Err(Error::Domain("Green function needs x1, y1 > 0".into()));
    }
    if x == y {
        return Err(Error::Singular(format!("coincident points ({}, {})", x.x1, x.x2)));
    }
    Ok(())
}

fn rule_cache(n: usize) -> std::sync::Arc<GaussLegendre> {
    static CACHE: OnceLock<Mutex<HashMap<usize, std::sync::Arc<GaussLegendre>>>> = OnceLock::new();
    let map = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().unwrap();
    guard.entry(n).or_insert_with(|| std::sync::Arc::new(GaussLegendre::new(n))).clone()
}

/// `J(ρ)` by adaptive quadrature of the cancellation-free integrand
/// `2 cos²θ / (sqrt(A) sqrt(D) (sqrt(A) + sqrt(D)))`, `A = ρ + 2`, `D = ρ + 4 sin²(θ/2)`.
///
/// For `ρ < 1` the peak at `θ = 0` is resolved by `sin(θ/2) = (sqrt(ρ)/2) sinh u` on
/// `θ ∈ [0, π/2]`.
pub fn j_quadrature(rho: f64, quad_order: usize) -> f64 {
    let rule = rule_cache(quad_order);
    let a = rho + 2.0;
    let sa = a.sqrt();
    let tol = 1e-15;
    let plain = |theta: f64| {
        let s = (0.5 * theta).sin();
        let d = rho + 4.0 * s * s;
        let sd = d.sqrt();
        let c = theta.cos();
        2.0 * c * c / (sa * sd * (sa + sd))
    };
    let half = if rho < 1.0 {
        let sr = rho.sqrt();
        let u_max = (2.0 * (PI / 4.0).sin() / sr).asinh();
        let sub = |u: f64| {
            let sphi = 0.5 * sr * u.sinh();
            let cphi = (1.0 - sphi * sphi).max(0.0).sqrt();
            let c = 1.0 - 2.0 * sphi * sphi;
            let sd = sr * u.cosh();
            // dθ / sqrt(D) = du / cos φ
            2.0 * c * c / (sa * (sa + sd)) / cphi
        };
        special::adaptive(&rule, &sub, 0.0, u_max, tol, 40) + special::adaptive(&rule, &plain, PI / 2.0, PI, tol, 40)
    } else {
        special::adaptive(&rule, &plain, 0.0, PI, tol, 40)
    };
    2.0 * half
}

/// `J(ρ)` through complete elliptic integrals (Landen form, Carlson `R_D`).
pub fn j_elliptic(rho: f64) -> f64 {
    let sr = rho.sqrt();
    let sr4 = (rho + 4.0).sqrt();
    let sum = sr + sr4;
    let lam = 4.0 / (sum * sum);
    let m = lam * lam;
    let m1 = 4.0 * sr * sr4 / (sum * sum);
    2.0 * sum * special::ellip_k_minus_e(m, m1)
}

/// Green function by the normative quadrature path.
pub fn g1(x: HalfPlanePoint, y: HalfPlanePoint, cfg: &GreenConfig) -> Result<f64> {
    check_pair(x, y)?;
    let r = rho(x, y);
    Ok((x.x1 * y.x1).sqrt() * j_quadrature(r, cfg.quad_order) / (4.0 * PI))
}

/// Green function through the elliptic-integral reduction; used on grids.
#[inline]
pub fn g1_fast(x1: f64, x2: f64, y1: f64, y2: f64) -> f64 {
    let d1 = x1 - y1;
    let d2 = x2 - y2;
    let p = x1 * y1;
    let r = (d1 * d1 + d2 * d2) / p;
    p.sqrt() * j_elliptic(r) / (4.0 * PI)
}

/// Leading near-diagonal expression `sqrt(x1 y1)/(4π) (ln(1/ρ) + 2 ln 8 - 4)`.
pub fn g1_near(x: HalfPlanePoint, y: HalfPlanePoint) -> f64 {
    let r = rho(x, y);
    (x.x1 * y.x1).sqrt() / (4.0 * PI) * (-r.ln() + NEAR_CONSTANT)
}

/// Leading far-field expression `sqrt(x1 y1)/4 ρ^{-3/2}`.
pub fn g1_far(x: HalfPlanePoint, y: HalfPlanePoint) -> f64 {
    let r = rho(x, y);
    (x.x1 * y.x1).sqrt() / 4.0 * r.powf(-1.5)
}

/// Expansion selected by the configured switches, or the quadrature value between them.
pub fn g1_reference(x: HalfPlanePoint, y: HalfPlanePoint, cfg: &GreenConfig) -> Result<f64> {
    let r = rho(x, y);
    if r < cfg.rho_switch_near {
        Ok(g1_near(x, y))
    } else if r > cfg.rho_switch_far {
        Ok(g1_far(x, y))
    } else {
        g1(x, y, cfg)
    }
}

/// Green function of the Laplacian in the half plane with zero data on `x1 = 0`:
/// `(1/4π) ln(((x1+y1)² + d²) / ((x1-y1)² + d²))`.
pub fn g_half_plane(x: HalfPlanePoint, y: HalfPlanePoint) -> Result<f64> {
    if x == y {
        return Err(Error::Singular("coincident points in half-plane Green function".into()));
    }
    Ok(g_half_plane_raw(x.x1, x.x2, y.x1, y.x2))
}

#[inline]
pub fn g_half_plane_raw(x1: f64, x2: f64, y1: f64, y2: f64) -> f64 {
    let d2 = (x2 - y2) * (x2 - y2);
    let plus = (x1 + y1) * (x1 + y1) + d2;
    let minus = (x1 - y1) * (x1 - y1) + d2;
    (plus / minus).ln() / (4.0 * PI)
}

/// Gradient of [`g_half_plane_raw`] with respect to `x`.
#[inline]
pub fn grad_g_half_plane(x1: f64, x2: f64, y1: f64, y2: f64) -> (f64, f64) {
    let d = x2 - y2;
    let plus = (x1 + y1) * (x1 + y1) + d * d;
    let minus = (x1 - y1) * (x1 - y1) + d * d;
    let g1 = ((x1 + y1) / plus - (x1 - y1) / minus) / (2.0 * PI);
    let g2 = (d / plus - d / minus) / (2.0 * PI);
    (g1, g2)
}

/// Regular part `H(x, y) = y1 G1(x, y) - anchor² G(x, y)`.
///
/// With `anchor = x1` the logarithmic singularities cancel; at `x = y` the limit
/// `x1² (4 ln 2 - 4) / 4π` is returned.
pub fn decompose_h(x: HalfPlanePoint, y: HalfPlanePoint, anchor_x1: f64, cfg: &GreenConfig) -> Result<f64> {
    if x == y {
        if (anchor_x1 - x.x1).abs() <= 1e-14 * x.x1 {
            return Ok(x.x1 * x.x1 * (4.0 * std::f64::consts::LN_2 - 4.0) / (4.0 * PI));
        }
        return Err(Error::Singular("coincident points with mismatched anchor".into()));
    }
    let g1v = g1(x, y, cfg)?;
    let g = g_half_plane(x, y)?;
    Ok(y.x1 * g1v - anchor_x1 * anchor_x1 * g)
}

/// `J(ρ) ρ^δ / 4π`, the ratio bounded by `C_δ` in the power-law bound.
fn bound_ratio(rho: f64, delta: f64) -> f64 {
    j_elliptic(rho) * rho.powf(delta) / (4.0 * PI)
}

/// Constant `C_δ` of `G1 ≤ C_δ (x1 y1)^{δ+1/2} / |x-y|^{2δ}`.
///
/// The ratio depends on `ρ` only, so the constant is its supremum over `ρ > 0`,
/// located by a log-spaced reference scan and a golden-section refinement.
pub fn bound_constant(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.5) {
        return Err(Error::Domain(format!("delta = {delta} must lie in (0, 3/2)")));
    }
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let map = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(c) = map.lock().unwrap().get(&delta.to_bits()) {
        return Ok(*c);
    }
    let n = 2401;
    let (lo, hi) = (-12.0f64, 12.0f64);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = (0usize, f64::MIN);
    for k in 0..n {
        let v = bound_ratio(10f64.powf(lo + k as f64 * step), delta);
        if v > best.1 {
            best = (k, v);
        }
    }
    let (mut a, mut b) = (lo + (best.0 as f64 - 1.0) * step, lo + (best.0 as f64 + 1.0) * step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let f = |t: f64| bound_ratio(10f64.powf(t), delta);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let c = best.1.max(f(0.5 * (a + b))) * (1.0 + 1e-9);
    map.lock().unwrap().insert(delta.to_bits(), c);
    Ok(c)
}

/// True when the power-law bound holds at the pair `(x, y)`.
pub fn bound_check(x: HalfPlanePoint, y: HalfPlanePoint, delta: f64, cfg: &GreenConfig) -> Result<bool> {
    let c = bound_constant(delta)?;
    let g = g1(x, y, cfg)?;
    let d2 = (x.x1 - y.x1).powi(2) + (x.x2 - y.x2).powi(2);
    let bound = c * (x.x1 * y.x1).powf(delta + 0.5) / d2.powf(delta);
    Ok(g <= bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(a: f64, b: f64) -> HalfPlanePoint {
        HalfPlanePoint::new(a, b).unwrap()
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho(pt(1.0, 0.0), pt(1.0, 0.0)), 0.0);
        assert_eq!(rho(pt(1.0, 0.0), pt(1.0, 1.0)), 1.0);
        assert_eq!(rho(pt(2.0, 0.0), pt(1.0, 3.0)), 5.0);
    }

    #[test]
    fn near_expansion_at_unit_rho() {
        let v = g1_near(pt(2.0, 0.0), pt(2.0, 2.0));
        assert!((v - 2.0 * NEAR_CONSTANT / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn half_plane_green_at_unit_separation() {
        let v = g_half_plane(pt(1.0, 0.0), pt(1.0, 1.0)).unwrap();
        assert!((v - 5f64.ln() / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn quadrature_and_elliptic_paths_agree() {
        for &r in &[1e-12, 1e-8, 1e-5, 1e-3, 0.1, 0.9, 1.0, 3.0, 50.0, 1e4, 1e8] {
            let a = j_quadrature(r, 16);
            let b = j_elliptic(r);
            assert!((a - b).abs() <= 2e-13 * a.abs(), "rho={r}: {a} vs {b}");
        }
    }

    #[test]
    fn errors_on_coincident_and_nonpositive() {
        let cfg = GreenConfig::default();
        assert!(matches!(g1(pt(1.0, 0.0), pt(1.0, 0.0), &cfg), Err(Error::Singular(_))));
        assert!(HalfPlanePoint::new(0.0, 1.0).is_err());
        assert!(matches!(
            decompose_h(pt(1.0, 0.0), pt(1.0, 0.0), 2.0, &cfg),
            Err(Error::Singular(_))
        ));
    }
}
