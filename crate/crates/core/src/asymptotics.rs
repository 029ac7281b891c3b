//! Thin-core asymptotics: the ring-parameter system, the approximate solution built from the
//! ground state, and measurements that compare solved rings against it.
//!
//! Throughout, `L = ln(1/ε)` and `K = z1^{-2/(p-1)} (ε/s)^{2/(p-1)}` is the amplitude that
//! rescales `U` to the core of radius `s` centred at `z`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{AxisymGrid, FieldKind, ScalarField};
use crate::ground_state::GroundStateProfile;
use crate::operator::{FarField, LSolver};
use crate::steady::{RingSpec, SteadyRing};

const NEWTON_STEPS: usize = 50;

/// Solution `(r*, s*)` of the ring-parameter system with the derived constants `a*`, `μ*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingParameters {
    pub kappa: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub eps: f64,
    pub p: f64,
    pub r_star: f64,
    pub s_star: f64,
    pub a_star: f64,
    pub mu_star: f64,
    pub lambda_p: f64,
    pub u_prime_1: f64,
    /// Relative residual of the speed equation.
    pub residual_speed: f64,
    /// Relative residual of the circulation equation.
    pub residual_circulation: f64,
    pub newton_iterations: usize,
}

impl RingParameters {
    pub fn spec(&self) -> RingSpec {
        RingSpec { kappa: self.kappa, w: self.w, eps: self.eps, p: self.p }
    }

    #[inline]
    pub fn ln_inv_eps(&self) -> f64 {
        (1.0 / self.eps).ln()
    }

    /// Core amplitude `K` at ring radius `z1`.
    pub fn amplitude_at(&self, z1: f64) -> f64 {
        let e = 2.0 / (self.p - 1.0);
        z1.powf(-e) * (self.eps / self.s_star).powf(e)
    }

    pub fn residual(&self) -> f64 {
        self.residual_speed.max(self.residual_circulation)
    }
}

/// Limit of `s*/ε` as `ε → 0`: `Λ_p^{(p-1)/2} κ^{-p} (4πW)^{(p+1)/2}`.
pub fn core_ratio_limit(kappa: f64, w: f64, p: f64, lambda_p: f64) -> f64 {
    lambda_p.powf(0.5 * (p - 1.0)) * kappa.powf(-p) * (4.0 * PI * w).powf(0.5 * (p + 1.0))
}

struct System {
    kappa: f64,
    w: f64,
    eps: f64,
    p: f64,
    lambda: f64,
    l: f64,
}

impl System {
    fn new(spec: &RingSpec, gs: &GroundStateProfile) -> Result<Self> {
        spec.validate()?;
        if (gs.p - spec.p).abs() > 1e-12 {
            return Err(Error::Precondition(format!("ground state has p = {}, ring has p = {}", gs.p, spec.p)));
        }
        Ok(Self { kappa: spec.kappa, w: spec.w, eps: spec.eps, p: spec.p, lambda: gs.lambda_p, l: spec.ln_inv_eps() })
    }

    /// `ln s` from the circulation equation at `u = ln r`.
    fn log_s(&self, u: f64) -> f64 {
        let p = self.p;
        self.eps.ln() + 0.5 * (p - 1.0) * (self.lambda / self.kappa).ln() - 0.5 * (p + 1.0) * u
    }

    fn bracket(&self, u: f64, v: f64) -> f64 {
        (8.0f64).ln() + u - v + 0.25 * (self.p - 1.0)
    }

    /// Speed equation with `s` eliminated; convex in `u`.
    fn reduced(&self, u: f64) -> (f64, f64) {
        let c = self.kappa / (4.0 * PI);
        let f = self.w * self.l * u.exp() - c * self.bracket(u, self.log_s(u));
        let df = self.w * self.l * u.exp() - c * 0.5 * (self.p + 3.0);
        (f, df)
    }

    /// Residuals of both equations in `(u, v) = (ln r, ln s)`, the second in log form.
    fn residuals(&self, u: f64, v: f64) -> (f64, f64) {
        let p = self.p;
        let f1 = self.w * self.l * u.exp() - self.kappa / (4.0 * PI) * self.bracket(u, v);
        let f2 = self.lambda.ln() - (p + 1.0) / (p - 1.0) * u + 2.0 / (p - 1.0) * (self.eps.ln() - v) - self.kappa.ln();
        (f1, f2)
    }

    fn newton2(&self, u: f64, v: f64) -> (f64, f64) {
        let p = self.p;
        let c = self.kappa / (4.0 * PI);
        let (f1, f2) = self.residuals(u, v);
        let (a11, a12) = (self.w * self.l * u.exp() - c, c);
        let (a21, a22) = (-(p + 1.0) / (p - 1.0), -2.0 / (p - 1.0));
        let det = a11 * a22 - a12 * a21;
        let du = (f1 * a22 - a12 * f2) / det;
        let dv = (a11 * f2 - a21 * f1) / det;
        (u - du, v - dv)
    }

    fn relative_residuals(&self, r: f64, s: f64) -> (f64, f64) {
        let p = self.p;
        let speed = self.w * r * self.l;
        let f1 = speed - self.kappa / (4.0 * PI) * ((8.0 * r / s).ln() + 0.25 * (p - 1.0));
        let circ = self.lambda * r.powf(-(p + 1.0) / (p - 1.0)) * (self.eps / s).powf(2.0 / (p - 1.0));
        ((f1 / speed).abs(), ((circ - self.kappa) / self.kappa).abs())
    }

    fn finish(&self, gs: &GroundStateProfile, u: f64, v: f64, iterations: usize) -> RingParameters {
        let (r, s) = (u.exp(), v.exp());
        let (res1, res2) = self.relative_residuals(r, s);
        let p = self.p;
        let e = 2.0 / (p - 1.0);
        let k = r.powf(-e) * (self.eps / s).powf(e);
        let a = -(s.ln() / self.eps.ln()) * k * gs.u_prime_1;
        let mu = a * self.l - 0.5 * self.w * r * r * self.l + k / (2.0 * PI) * self.lambda * ((8.0 * r).ln() - 2.0);
        RingParameters {
            kappa: self.kappa,
            w: self.w,
            eps: self.eps,
            p,
            r_star: r,
            s_star: s,
            a_star: a,
            mu_star: mu,
            lambda_p: self.lambda,
            u_prime_1: gs.u_prime_1,
            residual_speed: res1,
            residual_circulation: res2,
            newton_iterations: iterations,
        }
    }

    fn polish(&self, mut u: f64, mut v: f64, mut steps: usize, budget: usize) -> Result<(f64, f64, usize)> {
        for _ in 0..budget {
            let (r1, r2) = self.relative_residuals(u.exp(), v.exp());
            if r1.max(r2) <= 1e-13 {
                return Ok((u, v, steps));
            }
            (u, v) = self.newton2(u, v);
            steps += 1;
            if !(u.is_finite() && v.is_finite()) {
                break;
            }
        }
        let (r1, r2) = self.relative_residuals(u.exp(), v.exp());
        if r1.max(r2) <= 1e-12 {
            return Ok((u, v, steps));
        }
        Err(Error::RingParameters(format!(
            "Newton did not converge at eps = {} (residuals {r1:.2e}, {r2:.2e}); try a smaller eps",
            self.eps
        )))
    }
}

/// Solves the ring-parameter system for `(r*, s*)`.
///
/// Newton starts from `r = κ/4πW` on the speed equation with `s` eliminated. That reduced
/// equation is convex in `ln r`, so the physical (larger) root is reached monotonically from its
/// right. A few two-dimensional Newton steps then polish both residuals.
pub fn solve_ring_parameters(spec: &RingSpec, gs: &GroundStateProfile) -> Result<RingParameters> {
    let sys = System::new(spec, gs)?;
    let u_min = ((sys.p + 3.0) * sys.kappa / (8.0 * PI * sys.w * sys.l)).ln();
    let (f_min, _) = sys.reduced(u_min);
    if f_min >= 0.0 {
        return Err(Error::RingParameters(format!(
            "no ring radius exists at eps = {} (speed equation stays positive); try a smaller eps",
            sys.eps
        )));
    }
    let mut u = (sys.kappa / (4.0 * PI * sys.w)).ln();
    if u <= u_min {
        u = u_min + std::f64::consts::LN_2;
    }
    let mut steps = 0;
    let mut converged = false;
    while steps < NEWTON_STEPS {
        let (f, df) = sys.reduced(u);
        let next = u - f / df;
        steps += 1;
        if !next.is_finite() || next <= u_min {
            break;
        }
        let done = (next - u).abs() <= 1e-15 * u.abs().max(1.0);
        u = next;
        if done {
            converged = true;
            break;
        }
    }
    if !converged && sys.reduced(u).0.abs() > 1e-10 * sys.kappa {
        return Err(Error::RingParameters(format!(
            "Newton left the physical branch at eps = {}; try a smaller eps",
            sys.eps
        )));
    }
    let (u, v, steps) = sys.polish(u, sys.log_s(u), steps, 5)?;
    Ok(sys.finish(gs, u, v, steps))
}

/// Re-solves from a nearby solution with two-dimensional Newton only.
pub fn continue_ring_parameters(spec: &RingSpec, gs: &GroundStateProfile, from: &RingParameters) -> Result<RingParameters> {
    let sys = System::new(spec, gs)?;
    let (u, v, steps) = sys.polish(from.r_star.ln(), from.s_star.ln(), 0, NEWTON_STEPS)?;
    Ok(sys.finish(gs, u, v, steps))
}

/// Kelvin–Hicks translation speed `(κ/4πR)[ln(8R/c) - 1/4]` of a ring with core radius `c`.
pub fn kelvin_hicks_speed(kappa: f64, ring_radius: f64, core_radius: f64) -> f64 {
    kappa / (4.0 * PI * ring_radius) * ((8.0 * ring_radius / core_radius).ln() - 0.25)
}

/// `W x1 ln(1/ε) - (κ/4π)[ln(8x1/s) + (p-1)/4]`.
pub fn kelvin_hicks_residual(spec: &RingSpec, x1: f64, s: f64) -> f64 {
    spec.w * x1 * spec.ln_inv_eps() - spec.kappa / (4.0 * PI) * ((8.0 * x1 / s).ln() + 0.25 * (spec.p - 1.0))
}

/// `Γ1(t) = κt/2π - Wt²`.
pub fn gamma1(t: f64, kappa: f64, w: f64) -> f64 {
    kappa * t / (2.0 * PI) - w * t * t
}

pub fn gamma1_argmax(kappa: f64, w: f64) -> f64 {
    kappa / (4.0 * PI * w)
}

/// Cumulative radial moments of `U^p` on the unit disc.
#[derive(Debug, Clone)]
struct MomentTable {
    h: f64,
    /// `∫_0^t τ³ U^p dτ`.
    inner: Vec<f64>,
    /// `∫_t^1 τ U^p dτ`.
    outer: Vec<f64>,
}

impl MomentTable {
    fn new(gs: &GroundStateProfile) -> Self {
        let n = gs.unit_index;
        let h = gs.h();
        let up: Vec<f64> = (0..=n).map(|i| gs.values[i].max(0.0).powf(gs.p)).collect();
        let mut inner = vec![0.0; n + 1];
        let mut outer = vec![0.0; n + 1];
        for i in 1..=n {
            let (a, b) = (gs.radii[i - 1], gs.radii[i]);
            inner[i] = inner[i - 1] + 0.5 * h * (a.powi(3) * up[i - 1] + b.powi(3) * up[i]);
        }
        for i in (0..n).rev() {
            let (a, b) = (gs.radii[i], gs.radii[i + 1]);
            outer[i] = outer[i + 1] + 0.5 * h * (a * up[i] + b * up[i + 1]);
        }
        Self { h, inner, outer }
    }

    fn lerp(table: &[f64], h: f64, t: f64) -> f64 {
        let n = table.len() - 1;
        let x = (t / h).clamp(0.0, n as f64);
        let i = (x as usize).min(n - 1);
        let w = x - i as f64;
        table[i] * (1.0 - w) + table[i + 1] * w
    }

    fn inner_at(&self, t: f64) -> f64 {
        Self::lerp(&self.inner, self.h, t.min(1.0))
    }

    fn outer_at(&self, t: f64) -> f64 {
        if t >= 1.0 {
            0.0
        } else {
            Self::lerp(&self.outer, self.h, t)
        }
    }
}

/// The approximate solution `U_{ε,z,a}` and the objects derived from it.
#[derive(Debug, Clone)]
pub struct Approximation<'a> {
    pub gs: &'a GroundStateProfile,
    pub params: RingParameters,
    pub center: (f64, f64),
    moments: MomentTable,
}

impl<'a> Approximation<'a> {
    /// Core centred at `(r*, 0)` with radius `s*` and flux coefficient `a*`.
    pub fn new(gs: &'a GroundStateProfile, params: RingParameters) -> Result<Self> {
        if (gs.p - params.p).abs() > 1e-12 {
            return Err(Error::Precondition(format!("ground state has p = {}, parameters have p = {}", gs.p, params.p)));
        }
        Ok(Self { gs, params, center: (params.r_star, 0.0), moments: MomentTable::new(gs) })
    }

    pub fn translated(&self, dz: f64) -> Self {
        let mut out = self.clone();
        out.center.1 += dz;
        out
    }

    #[inline]
    pub fn core_radius(&self) -> f64 {
        self.params.s_star
    }

    #[inline]
    pub fn amplitude(&self) -> f64 {
        self.params.amplitude_at(self.center.0)
    }

    #[inline]
    fn dist(&self, x1: f64, x2: f64) -> f64 {
        (x1 - self.center.0).hypot(x2 - self.center.1)
    }

    /// `U_{ε,z,a}(x)`.
    pub fn value(&self, x1: f64, x2: f64) -> f64 {
        let pr = &self.params;
        let (s, l) = (pr.s_star, pr.ln_inv_eps());
        let rho = self.dist(x1, x2);
        if rho < s {
            pr.a_star * l + self.amplitude() * self.gs.evaluate(rho / s)
        } else {
            pr.a_star * (pr.eps.ln() / s.ln()) * (1.0 / rho).ln()
        }
    }

    /// Radial derivative `∂ρ U_{ε,z,a}` on either side of the core circle.
    pub fn radial_derivative(&self, rho: f64, inside: bool) -> f64 {
        let pr = &self.params;
        let s = pr.s_star;
        if inside {
            self.amplitude() * self.gs.derivative(rho / s) / s
        } else {
            -pr.a_star * (pr.eps.ln() / s.ln()) / rho
        }
    }

    /// `U_{ε,z,a} - a ln(1/ε)`, equal to `K U((x - z)/s)` with the harmonic extension outside.
    pub fn core_phi(&self, x1: f64, x2: f64) -> f64 {
        self.amplitude() * self.gs.evaluate(self.dist(x1, x2) / self.core_radius())
    }

    /// `(U_{ε,z,a} - a ln(1/ε))₊ᵖ / ε²`.
    pub fn vorticity(&self, x1: f64, x2: f64) -> f64 {
        self.core_phi(x1, x2).max(0.0).powf(self.params.p) / (self.params.eps * self.params.eps)
    }

    fn check_resolution(&self, grid: &AxisymGrid) -> Result<()> {
        let across = 2.0 * self.core_radius() / grid.hr().max(grid.hz());
        if across < 8.0 {
            return Err(Error::Resolution(format!(
                "core of radius {:.3e} spans {across:.1} cells; at least 8 are needed",
                self.core_radius()
            )));
        }
        Ok(())
    }

    /// `U_{ε,z,a}` sampled at cell centres.
    pub fn field(&self, grid: AxisymGrid) -> Result<ScalarField> {
        self.check_resolution(&grid)?;
        Ok(ScalarField::from_fn(grid, FieldKind::Stream, |r, z| self.value(r, z)))
    }

    pub fn phi_field(&self, grid: AxisymGrid) -> Result<ScalarField> {
        self.check_resolution(&grid)?;
        Ok(ScalarField::from_fn(grid, FieldKind::Stream, |r, z| self.core_phi(r, z)))
    }

    pub fn vorticity_field(&self, grid: AxisymGrid) -> Result<ScalarField> {
        self.check_resolution(&grid)?;
        Ok(ScalarField::from_fn(grid, FieldKind::Vorticity, |r, z| self.vorticity(r, z)))
    }

    /// `Ψ = 𝒢1 ζ_a` with exact Green-sum boundary data.
    pub fn stream(&self, grid: AxisymGrid) -> Result<ScalarField> {
        let zeta = self.vorticity_field(grid)?;
        LSolver::new(grid).solve(&zeta, FarField::GreenSum)
    }

    /// `∫ (y1 - z1) ln(s/|x - y|) (U_{ε,z,a}(y) - a ln(1/ε))₊ᵖ dy`, from the dipole mode of the
    /// log kernel applied to the radial core.
    pub fn log_moment(&self, x1: f64, x2: f64) -> f64 {
        let s = self.core_radius();
        let (d1, d2) = (x1 - self.center.0, x2 - self.center.1);
        let r = d1.hypot(d2);
        if r == 0.0 {
            return 0.0;
        }
        let t = r / s;
        let kp = self.amplitude().powf(self.params.p);
        let inner = s.powi(4) * kp * self.moments.inner_at(t);
        let outer = s * s * kp * self.moments.outer_at(t);
        PI * d1 * (inner / (r * r) + outer)
    }

    /// First-order correction `𝓕(x)`.
    pub fn correction(&self, x1: f64, x2: f64) -> f64 {
        let pr = &self.params;
        let (z1, p, eps) = (self.center.0, pr.p, pr.eps);
        let l = pr.ln_inv_eps();
        let e = 2.0 / (p - 1.0);
        let tail = z1 / (4.0 * PI) * ((8.0 * z1).ln() - 1.0) * z1.powf(-2.0 * p / (p - 1.0))
            * (eps / pr.s_star).powf(e)
            * pr.lambda_p;
        let bracket = self.value(x1, x2) / (2.0 * z1) - pr.w * z1 * l + tail;
        (x1 - z1) * bracket + 3.0 * z1 / (4.0 * PI * eps * eps) * self.log_moment(x1, x2)
    }

    /// Cells whose centres lie in the closed core disc.
    pub fn core_cells(&self, grid: &AxisymGrid) -> Vec<(usize, usize)> {
        let s = self.core_radius();
        let mut out = Vec::new();
        for i in 0..grid.nr {
            for j in 0..grid.nz {
                if self.dist(grid.r(i), grid.z(j)) <= s {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// `U_{ε,z,a}` at the cell centres of `grid`.
pub fn build_approximate(gs: &GroundStateProfile, params: &RingParameters, grid: AxisymGrid) -> Result<ScalarField> {
    Approximation::new(gs, *params)?.field(grid)
}

/// `Ψ` induced by the approximate core.
pub fn approx_stream(gs: &GroundStateProfile, params: &RingParameters, grid: AxisymGrid) -> Result<ScalarField> {
    Approximation::new(gs, *params)?.stream(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub eps: f64,
    /// `sup |Ψ - (W/2)x1² ln(1/ε) - μ - (U_{ε,z,a} - a ln(1/ε)) - 𝓕|` over the core.
    pub defect: f64,
    /// `defect / (ε² ln(1/ε))`.
    pub ratio: f64,
    /// `sup |𝓕|` over the core.
    pub correction_sup: f64,
    pub core_cells: usize,
}

pub fn expansion_defect_of(approx: &Approximation, grid: AxisymGrid) -> Result<ExpansionReport> {
    let psi = approx.stream(grid)?;
    let pr = &approx.params;
    let l = pr.ln_inv_eps();
    let cells = approx.core_cells(&grid);
    let (mut defect, mut fsup) = (0.0f64, 0.0f64);
    for &(i, j) in &cells {
        let (x1, x2) = (grid.r(i), grid.z(j));
        let f = approx.correction(x1, x2);
        let d = psi.at(i, j) - 0.5 * pr.w * x1 * x1 * l - pr.mu_star - approx.core_phi(x1, x2) - f;
        defect = defect.max(d.abs());
        fsup = fsup.max(f.abs());
    }
    Ok(ExpansionReport {
        eps: pr.eps,
        defect,
        ratio: defect / (pr.eps * pr.eps * l),
        correction_sup: fsup,
        core_cells: cells.len(),
    })
}

pub fn expansion_defect(gs: &GroundStateProfile, params: &RingParameters, grid: AxisymGrid) -> Result<ExpansionReport> {
    expansion_defect_of(&Approximation::new(gs, *params)?, grid)
}

/// Polar description of the level set `{Φ = 0}` about a fitted centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeBoundary {
    pub center: (f64, f64),
    pub mean_radius: f64,
    /// Half the largest distance between two sampled boundary points.
    pub half_diameter: f64,
    /// `sup_θ |R(θ)/R0 - 1|`.
    pub deviation: f64,
    /// `R(θ_k)` at `θ_k = 2πk/n`, measured from `center`.
    pub radii: Vec<f64>,
}

fn ray_crossing(phi: &ScalarField, c: (f64, f64), theta: f64, step: f64) -> Result<f64> {
    let (ct, st) = (theta.cos(), theta.sin());
    let at = |r: f64| phi.bilinear(c.0 + r * ct, c.1 + r * st);
    let mut prev = 0.0;
    let mut k = 1;
    let crossing = loop {
        let r = k as f64 * step;
        match at(r) {
            None => return Err(Error::Topology(format!("level set is open along the ray at angle {theta:.3}"))),
            Some(v) if v <= 0.0 => break (prev, r),
            Some(_) => prev = r,
        }
        k += 1;
    };
    let (mut lo, mut hi) = crossing;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if at(mid).is_some_and(|v| v > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r0 = 0.5 * (lo + hi);
    // The level set must be crossed once: Φ stays nonpositive out to three times the radius.
    let mut r = hi + step;
    while r <= 3.0 * r0 {
        match at(r) {
            Some(v) if v > 0.0 => {
                return Err(Error::Topology(format!("ray at angle {theta:.3} re-enters the positive set at r = {r:.3e}")))
            }
            Some(_) => {}
            None => break,
        }
        r += step;
    }
    Ok(r0)
}

/// Extracts `{Φ = 0}` along `rays` rays from a centre, recentred by the first Fourier mode.
pub fn level_set(phi: &ScalarField, start: (f64, f64), rays: usize) -> Result<FreeBoundary> {
    let g = &phi.grid;
    let step = 0.25 * g.hr().min(g.hz());
    let mut c = start;
    let angles: Vec<f64> = (0..rays).map(|k| 2.0 * PI * k as f64 / rays as f64).collect();
    for _ in 0..12 {
        if !phi.bilinear(c.0, c.1).is_some_and(|v| v > 0.0) {
            return Err(Error::Topology(format!("Φ is not positive at the centre ({:.4}, {:.4})", c.0, c.1)));
        }
        let radii = angles.iter().map(|&t| ray_crossing(phi, c, t, step)).collect::<Result<Vec<f64>>>()?;
        let n = rays as f64;
        let a1 = 2.0 / n * angles.iter().zip(&radii).map(|(t, r)| r * t.cos()).sum::<f64>();
        let b1 = 2.0 / n * angles.iter().zip(&radii).map(|(t, r)| r * t.sin()).sum::<f64>();
        let mean = radii.iter().sum::<f64>() / n;
        c = (c.0 + a1, c.1 + b1);
        if a1.hypot(b1) <= 1e-12 * mean {
            break;
        }
    }
    let radii = angles.iter().map(|&t| ray_crossing(phi, c, t, step)).collect::<Result<Vec<f64>>>()?;
    let mean = radii.iter().sum::<f64>() / rays as f64;
    let deviation = radii.iter().fold(0.0f64, |m, r| m.max((r / mean - 1.0).abs()));
    let pts: Vec<(f64, f64)> = angles.iter().zip(&radii).map(|(t, r)| (c.0 + r * t.cos(), c.1 + r * t.sin())).collect();
    let mut d2: f64 = 0.0;
    for (k, a) in pts.iter().enumerate() {
        for b in &pts[k + 1..] {
            d2 = d2.max((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2));
        }
    }
    Ok(FreeBoundary { center: c, mean_radius: mean, half_diameter: 0.5 * d2.sqrt(), deviation, radii })
}

/// Level set of `Φ` for a solved ring, started at its maximum point.
pub fn free_boundary(ring: &SteadyRing) -> Result<FreeBoundary> {
    level_set(&ring.phi(), ring.center, 256)
}

/// `sup_θ |t_ε(θ)|` of a solved ring.
pub fn free_boundary_deviation(ring: &SteadyRing) -> Result<f64> {
    Ok(free_boundary(ring)?.deviation)
}

/// Measured ring geometry: ν-weighted vorticity centroid and mean level-set radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredRing {
    pub centroid: (f64, f64),
    pub core_radius: f64,
    pub half_diameter: f64,
    pub deviation: f64,
}

pub fn measure_ring(ring: &SteadyRing) -> Result<MeasuredRing> {
    let fb = free_boundary(ring)?;
    let centroid = ring.zeta.centroid().ok_or_else(|| Error::Topology("ring has no vorticity".into()))?;
    Ok(MeasuredRing { centroid, core_radius: fb.mean_radius, half_diameter: fb.half_diameter, deviation: fb.deviation })
}

/// Kelvin–Hicks residual at the measured centroid and core radius.
pub fn kelvin_hicks_residual_ring(ring: &SteadyRing) -> Result<f64> {
    let m = measure_ring(ring)?;
    Ok(kelvin_hicks_residual(&ring.spec, m.centroid.0, m.core_radius))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    /// Measured `r_ε`.
    pub radius: f64,
    /// Measured `z_ε`.
    pub center: (f64, f64),
    /// `κ (r_ε/ε)^{2/(p-1)} z1^{(p+1)/(p-1)}`.
    pub limit_value: f64,
    /// `-2π U'(1)`.
    pub target: f64,
    /// `|limit_value - target| / target`.
    pub limit_defect: f64,
    /// `sup_{|y| ≤ 2} |w_ε(y) - U(y)|` over cell centres.
    pub profile_defect: f64,
    /// `profile_defect / U(0)`.
    pub profile_defect_rel: f64,
}

/// Compares the rescaled `Φ` about `center` at scale `radius` with the ground state.
pub fn blowup_check_phi(
    phi: &ScalarField,
    spec: &RingSpec,
    center: (f64, f64),
    radius: f64,
    gs: &GroundStateProfile,
) -> BlowupReport {
    let p = spec.p;
    let e = 2.0 / (p - 1.0);
    let z1 = center.0;
    let scale = z1.powf(e) * (radius / spec.eps).powf(e);
    let g = &phi.grid;
    let mut worst: f64 = 0.0;
    for i in 0..g.nr {
        for j in 0..g.nz {
            let y = ((g.r(i) - center.0) / radius, (g.z(j) - center.1) / radius);
            let ry = y.0.hypot(y.1);
            if ry <= 2.0 {
                worst = worst.max((scale * phi.at(i, j) - gs.evaluate(ry)).abs());
            }
        }
    }
    let limit_value = spec.kappa * (radius / spec.eps).powf(e) * z1.powf((p + 1.0) / (p - 1.0));
    let target = -2.0 * PI * gs.u_prime_1;
    BlowupReport {
        radius,
        center,
        limit_value,
        target,
        limit_defect: ((limit_value - target) / target).abs(),
        profile_defect: worst,
        profile_defect_rel: worst / gs.center_value,
    }
}

/// Blow-up checks for a solved ring, with `r_ε` from the interpolated level set and `z_ε` the
/// maximum point of `ψ`.
pub fn blowup_profile_check(ring: &SteadyRing, gs: &GroundStateProfile) -> Result<BlowupReport> {
    if (gs.p - ring.spec.p).abs() > 1e-12 {
        return Err(Error::Precondition(format!("ground state has p = {}, ring has p = {}", gs.p, ring.spec.p)));
    }
    let phi = ring.phi();
    let fb = level_set(&phi, ring.center, 256)?;
    Ok(blowup_check_phi(&phi, &ring.spec, ring.center, fb.half_diameter, gs))
}

/// Same check applied to the approximate core.
pub fn blowup_check_approximation(approx: &Approximation, grid: AxisymGrid) -> Result<BlowupReport> {
    let phi = approx.phi_field(grid)?;
    let fb = level_set(&phi, approx.center, 256)?;
    Ok(blowup_check_phi(&phi, &approx.params.spec(), approx.center, fb.half_diameter, approx.gs))
}

/// Steady seed vorticity from the approximate core, scaled to circulation `κ`.
pub fn asymptotic_seed(gs: &GroundStateProfile, params: &RingParameters, grid: AxisymGrid) -> Result<ScalarField> {
    let mut zeta = Approximation::new(gs, *params)?.vorticity_field(grid)?;
    let c = crate::fields::circulation(&zeta);
    if !(c > 0.0) {
        return Err(Error::Resolution("approximate core misses every cell".into()));
    }
    zeta.values.iter_mut().for_each(|v| *v *= params.kappa / c);
    Ok(zeta)
}

/// Header and rows of the ring-parameter table.
pub fn parameter_table(rows: &[RingParameters]) -> (Vec<&'static str>, Vec<Vec<f64>>) {
    let header = vec!["eps", "r_star", "s_star", "a_star", "mu_star", "residual_speed", "residual_circulation"];
    let body = rows
        .iter()
        .map(|r| vec![r.eps, r.r_star, r.s_star, r.a_star, r.mu_star, r.residual_speed, r.residual_circulation])
        .collect();
    (header, body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::solve_ground_state;

    fn canonical(eps: f64) -> RingSpec {
        RingSpec::new(1.0, 1.0 / (4.0 * PI), eps, 2.0).unwrap()
    }

    #[test]
    fn parameters_solve_both_equations() {
        let gs = solve_ground_state(2.0, 1e-10).unwrap();
        for eps in [0.1, 0.05, 0.025, 1e-3] {
            let pr = solve_ring_parameters(&canonical(eps), &gs).unwrap();
            assert!(pr.residual() <= 1e-12, "{pr:?}");
            assert!(kelvin_hicks_residual(&pr.spec(), pr.r_star, pr.s_star).abs() <= 1e-12 * pr.r_star);
        }
    }

    #[test]
    fn canonical_values_match_hand_computation() {
        let gs = solve_ground_state(2.0, 1e-10).unwrap();
        let pr = solve_ring_parameters(&canonical(0.025), &gs).unwrap();
        assert!((pr.r_star - 1.258).abs() < 5e-3, "{pr:?}");
        assert!((pr.s_star - 0.125).abs() < 5e-3, "{pr:?}");
    }

    #[test]
    fn no_root_is_reported() {
        let gs = solve_ground_state(2.0, 1e-10).unwrap();
        let spec = RingSpec::new(1.0, 1.0, 0.05, 2.0).unwrap();
        assert!(matches!(solve_ring_parameters(&spec, &gs), Err(Error::RingParameters(_))));
    }

    #[test]
    fn continuation_takes_few_steps() {
        let gs = solve_ground_state(2.0, 1e-10).unwrap();
        let a = solve_ring_parameters(&canonical(0.01), &gs).unwrap();
        let b = continue_ring_parameters(&canonical(0.01 * 1.001), &gs, &a).unwrap();
        assert!(b.newton_iterations <= 3 && b.residual() <= 1e-12, "{b:?}");
    }

    #[test]
    fn speed_formula_zero_and_linearity() {
        let c = 8.0 * (-0.25f64).exp();
        assert!(kelvin_hicks_speed(4.0 * PI, 1.0, c).abs() < 1e-15);
        let (a, b) = (kelvin_hicks_speed(1.0, 1.3, 0.01), kelvin_hicks_speed(2.0, 1.3, 0.01));
        assert!((b - 2.0 * a).abs() <= 1e-15 * b);
    }

    #[test]
    fn perturbed_core_shifts_residual_by_log() {
        let spec = canonical(0.05);
        let (x, s) = (1.4, 0.3);
        let jump = kelvin_hicks_residual(&spec, x, 1.1 * s) - kelvin_hicks_residual(&spec, x, s);
        assert!((jump - 1.1f64.ln() / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn gamma_peak() {
        let t = gamma1_argmax(1.3, 0.2);
        let d = (gamma1(t + 1e-5, 1.3, 0.2) - gamma1(t - 1e-5, 1.3, 0.2)) / 2e-5;
        assert!(d.abs() < 1e-9);
    }

    #[test]
    fn approximation_is_c1_on_the_core_circle() {
        let gs = solve_ground_state(2.0, 1e-10).unwrap();
        let pr = solve_ring_parameters(&canonical(0.05), &gs).unwrap();
        let ap = Approximation::new(&gs, pr).unwrap();
        let s = pr.s_star;
        let l = pr.ln_inv_eps();
        for k in 0..16 {
            let t = 2.0 * PI * k as f64 / 16.0;
            let (x1, x2) = (pr.r_star + s * t.cos(), s * t.sin());
            let (inn, out) = (ap.value(x1 - 1e-12 * t.cos(), x2 - 1e-12 * t.sin()), ap.value(x1, x2));
            assert!((inn - pr.a_star * l).abs() < 1e-9 && (out - pr.a_star * l).abs() < 1e-9);
            let (di, dout) = (ap.radial_derivative(s, true), ap.radial_derivative(s, false));
            assert!((di - dout).abs() <= 1e-9 * dout.abs());
        }
    }

    #[test]
    fn log_moment_vanishes_at_centre_and_matches_quadrature() {
        let gs = solve_ground_state(2.0, 1e-10).unwrap();
        let pr = solve_ring_parameters(&canonical(0.1), &gs).unwrap();
        let ap = Approximation::new(&gs, pr).unwrap();
        assert_eq!(ap.log_moment(pr.r_star, 0.0), 0.0);
        let s = pr.s_star;
        let x = (pr.r_star + 0.4 * s, 0.3 * s);
        let n = 600;
        let mut direct = 0.0;
        for a in 0..n {
            for b in 0..n {
                let (y1, y2) = (pr.r_star - s + (a as f64 + 0.5) * 2.0 * s / n as f64, -s + (b as f64 + 0.5) * 2.0 * s / n as f64);
                let d = (x.0 - y1).hypot(x.1 - y2);
                let rho = ap.core_phi(y1, y2).max(0.0).powf(pr.p);
                if rho > 0.0 {
                    direct += (y1 - pr.r_star) * (s / d).ln() * rho * (2.0 * s / n as f64).powi(2);
                }
            }
        }
        let m = ap.log_moment(x.0, x.1);
        assert!((m - direct).abs() <= 2e-3 * m.abs(), "{m} {direct}");
    }

    #[test]
    fn coarse_core_is_rejected() {
        let gs = solve_ground_state(2.0, 1e-10).unwrap();
        let pr = solve_ring_parameters(&canonical(0.025), &gs).unwrap();
        let g = AxisymGrid::around_ring(1.0, 32, 32).unwrap();
        assert!(matches!(build_approximate(&gs, &pr, g), Err(Error::Resolution(_))));
    }

    #[test]
    fn approximate_core_carries_the_circulation() {
        let gs = solve_ground_state(2.0, 1e-10).unwrap();
        let pr = solve_ring_parameters(&canonical(0.05), &gs).unwrap();
        let g = AxisymGrid::around_ring(1.0, 256, 256).unwrap();
        let ap = Approximation::new(&gs, pr).unwrap();
        let c = crate::fields::circulation(&ap.vorticity_field(g).unwrap());
        assert!((c - 1.0).abs() < 0.05 * pr.eps * pr.eps * pr.ln_inv_eps().max(1.0) + 2e-3, "{c}");
    }

    #[test]
    fn circle_level_set_has_no_deviation() {
        let g = AxisymGrid::new(0.0, 2.0, -1.0, 1.0, 200, 200).unwrap();
        let phi = ScalarField::from_fn(g, FieldKind::Stream, |r, z| 0.3 - (r - 1.02).hypot(z - 0.01));
        let fb = level_set(&phi, (1.0, 0.0), 128).unwrap();
        assert!(fb.deviation < 1e-3, "{fb:?}");
        assert!((fb.center.0 - 1.02).abs() < 1e-4 && (fb.center.1 - 0.01).abs() < 1e-4);
        assert!((fb.mean_radius - 0.3).abs() < 1e-4);
    }

    #[test]
    fn two_blobs_are_a_topology_error() {
        let g = AxisymGrid::new(0.0, 2.0, -1.0, 1.0, 100, 100).unwrap();
        let phi = ScalarField::from_fn(g, FieldKind::Stream, |r, z| {
            (0.2 - (r - 1.0).hypot(z - 0.3)).max(0.2 - (r - 1.0).hypot(z + 0.3))
        });
        assert!(matches!(level_set(&phi, (1.0, 0.3), 64), Err(Error::Topology(_))));
    }

    #[test]
    fn blowup_of_the_approximation_is_exact_up_to_grid() {
        let gs = solve_ground_state(2.0, 1e-10).unwrap();
        let pr = solve_ring_parameters(&canonical(0.05), &gs).unwrap();
        let g = AxisymGrid::around_ring(1.0, 256, 256).unwrap();
        let rep = blowup_check_approximation(&Approximation::new(&gs, pr).unwrap(), g).unwrap();
        assert!(rep.limit_defect < 5e-3 && rep.profile_defect_rel < 5e-3, "{rep:?}");
    }
}
