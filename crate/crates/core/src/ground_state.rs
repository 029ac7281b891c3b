//! Radial ground state of `-Δu = u^p` on the unit disc with `u = 0` on the circle.
//!
//! The profile is obtained by shooting the normalised problem `v(0) = 1`, locating the
//! first zero `r0`, and rescaling `U(r) = r0^{2/(p-1)} v(r0 r)`. Outside the disc the
//! profile is continued harmonically as `-U'(1) ln(1/r)`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample count on `[0, 1]` used by [`solve_ground_state`].
pub const DEFAULT_SAMPLES: usize = 8192;

#[derive(Debug, Clone, Copy)]
pub struct GroundStateOptions {
    /// Number of uniform intervals on `[0, 1]`; at least 2048.
    pub samples: usize,
    /// Outer end of the sample grid (harmonic extension beyond `r = 1`).
    pub r_max: f64,
    /// Iteration budget of the zero-location step.
    pub max_iter: usize,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        Self { samples: DEFAULT_SAMPLES, r_max: 2.0, max_iter: 60 }
    }
}

/// Ground-state profile sampled on a uniform grid, with derived constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundStateProfile {
    pub p: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// `U'` at each sample.
    pub slopes: Vec<f64>,
    pub u_prime_1: f64,
    pub lambda_p: f64,
    /// `∫_{B1} U^{p+1}`.
    pub energy_integral: f64,
    pub center_value: f64,
    /// First zero of the normalised solution `v(0) = 1`.
    pub first_zero: f64,
    pub tol: f64,
    /// Sample index of `r = 1`.
    pub unit_index: usize,
}

/// Solves the ground state with the default sample grid.
pub fn solve_ground_state(p: f64, tol: f64) -> Result<GroundStateProfile> {
    solve_ground_state_with(p, tol, GroundStateOptions::default())
}

pub fn solve_ground_state_with(p: f64, tol: f64, opts: GroundStateOptions) -> Result<GroundStateProfile> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::Domain(format!("exponent p = {p} must be at least 2")));
    }
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(Error::Domain(format!("tolerance {tol} must lie in (0, 1e-4]")));
    }
    if opts.samples < 2048 || opts.r_max < 1.0 {
        return Err(Error::Domain("need at least 2048 samples on [0, 1] and r_max >= 1".into()));
    }

    let r0 = first_zero(p, opts.max_iter)?;
    let alpha = r0.powf(2.0 / (p - 1.0));
    let n = opts.samples;
    let h = 1.0 / n as f64;
    let n_total = (opts.r_max * n as f64).round() as usize;

    let mut radii = Vec::with_capacity(n_total + 1);
    let mut values = Vec::with_capacity(n_total + 1);
    let mut slopes = Vec::with_capacity(n_total + 1);
    radii.push(0.0);
    values.push(alpha);
    slopes.push(0.0);

    let (u1, du1) = series(p, alpha, h);
    radii.push(h);
    values.push(u1);
    slopes.push(du1);
    let substeps = 4;
    let mut y = [u1, du1];
    for i in 1..n {
        let r = i as f64 * h;
        let dt = h / substeps as f64;
        for k in 0..substeps {
            y = rk4(p, r + k as f64 * dt, y, dt);
        }
        radii.push((i + 1) as f64 * h);
        values.push(y[0]);
        slopes.push(y[1]);
    }
    // U(1) is zero up to the shooting error; pin it.
    values[n] = 0.0;
    let u_prime_1 = slopes[n];
    for i in (n + 1)..=n_total {
        let r = i as f64 * h;
        radii.push(r);
        values.push(-u_prime_1 * (1.0 / r).ln());
        slopes.push(u_prime_1 / r);
    }

    let lambda_p = 2.0 * PI * simpson(h, |i| values[i].max(0.0).powf(p) * radii[i], n);
    let energy_integral = 2.0 * PI * simpson(h, |i| values[i].max(0.0).powf(p + 1.0) * radii[i], n);

    let profile = GroundStateProfile {
        p,
        radii,
        values,
        slopes,
        u_prime_1,
        lambda_p,
        energy_integral,
        center_value: alpha,
        first_zero: r0,
        tol,
        unit_index: n,
    };
    let res = profile.ode_residual();
    if res > tol {
        return Err(Error::Resolution(format!(
            "ground-state ODE residual {res:e} exceeds tolerance {tol:e}"
        )));
    }
    Ok(profile)
}

/// Power series of `U` at small `r` for `U(0) = alpha`.
fn series(p: f64, alpha: f64, r: f64) -> (f64, f64) {
    let t = alpha.powf((p - 1.0) / 2.0) * r;
    let c2 = -0.25;
    let c4 = p / 64.0;
    let c6 = -p * (3.0 * p - 2.0) / 2304.0;
    let t2 = t * t;
    let v = 1.0 + t2 * (c2 + t2 * (c4 + t2 * c6));
    let dv = t * (2.0 * c2 + t2 * (4.0 * c4 + t2 * 6.0 * c6));
    (alpha * v, alpha * alpha.powf((p - 1.0) / 2.0) * dv)
}

fn rhs(p: f64, r: f64, y: [f64; 2]) -> [f64; 2] {
    [y[1], -y[1] / r - y[0].max(0.0).powf(p)]
}

fn rk4(p: f64, r: f64, y: [f64; 2], h: f64) -> [f64; 2] {
    let k1 = rhs(p, r, y);
    let k2 = rhs(p, r + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
    let k3 = rhs(p, r + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
    let k4 = rhs(p, r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// First zero of the normalised solution `v(0) = 1`.
fn first_zero(p: f64, max_iter: usize) -> Result<f64> {
    let h = 1.0 / 4096.0;
    let (v, dv) = series(p, 1.0, h);
    let mut y = [v, dv];
    let mut r = h;
    let mut prev = y;
    let mut prev_r = r;
    while y[0] > 0.0 {
        prev = y;
        prev_r = r;
        y = rk4(p, r, y, h);
        r += h;
        if r > 1e3 {
            return Err(Error::Shooting { iterations: 0, lo: prev_r, hi: r });
        }
    }
    // Newton on t ↦ v(t), each evaluation one RK4 step from the last positive node.
    let (mut lo, mut hi) = (prev_r, r);
    let mut t = prev_r - prev[0] / prev[1];
    if !(t > lo && t < hi) {
        t = 0.5 * (lo + hi);
    }
    for it in 0..max_iter {
        let yt = rk4(p, prev_r, prev, t - prev_r);
        if yt[0] > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - yt[0] / yt[1];
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 4.0 * f64::EPSILON * t || hi - lo <= 4.0 * f64::EPSILON * t {
            return Ok(next);
        }
        t = next;
        if it + 1 == max_iter {
            break;
        }
    }
    Err(Error::Shooting { iterations: max_iter, lo, hi })
}

fn simpson<F: Fn(usize) -> f64>(h: f64, f: F, n: usize) -> f64 {
    debug_assert!(n.is_multiple_of(2));
    let mut s = f(0) + f(n);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 * f(i) } else { 2.0 * f(i) };
    }
    s * h / 3.0
}

/// Sixth-order first derivative of uniformly sampled data at index `i`, one-sided
/// near the ends of `[lo, hi]`.
fn d6(f: &[f64], i: usize, lo: usize, hi: usize, h: f64) -> f64 {
    // Seven-point stencils, offset by the start index s.
    const COEF: [[f64; 7]; 7] = [
        [-147.0, 360.0, -450.0, 400.0, -225.0, 72.0, -10.0],
        [-10.0, -77.0, 150.0, -100.0, 50.0, -15.0, 2.0],
        [2.0, -24.0, -35.0, 80.0, -30.0, 8.0, -1.0],
        [-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0],
        [1.0, -8.0, 30.0, -80.0, 35.0, 24.0, -2.0],
        [-2.0, 15.0, -50.0, 100.0, -150.0, 77.0, 10.0],
        [10.0, -72.0, 225.0, -400.0, 450.0, -360.0, 147.0],
    ];
    let s = if i < lo + 3 {
        lo
    } else if i + 3 > hi {
        hi - 6
    } else {
        i - 3
    };
    let row = &COEF[i - s];
    let mut acc = 0.0;
    for k in 0..7 {
        acc += row[k] * (f[s + k] - f[i]);
    }
    acc / (60.0 * h)
}

impl GroundStateProfile {
    /// Sample spacing.
    pub fn h(&self) -> f64 {
        1.0 / self.unit_index as f64
    }

    /// Maximum sample radius.
    pub fn r_max(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    /// Value of the extended profile at radius `r >= 0`.
    pub fn evaluate(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= 1.0 {
            return -self.u_prime_1 * (1.0 / r).ln();
        }
        let (i, t, h) = self.locate(r);
        let (y0, y1, d0, d1) = (self.values[i], self.values[i + 1], self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1
    }

    /// Radial derivative of the extended profile.
    pub fn derivative(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= 1.0 {
            return self.u_prime_1 / r;
        }
        let (i, t, h) = self.locate(r);
        let (y0, y1, d0, d1) = (self.values[i], self.values[i + 1], self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (-6.0 * t2 + 6.0 * t) * y1 + (3.0 * t2 - 2.0 * t) * d1)
            / h
    }

    fn locate(&self, r: f64) -> (usize, f64, f64) {
        let h = self.h();
        let i = ((r / h) as usize).min(self.unit_index - 1);
        (i, (r - i as f64 * h) / h, h)
    }

    /// Residual of the first-order system `(U, rU')` on the interior samples.
    pub fn ode_residual(&self) -> f64 {
        let n = self.unit_index;
        let h = self.h();
        let q: Vec<f64> = (0..=n).map(|i| self.radii[i] * self.slopes[i]).collect();
        let u = &self.values[..=n];
        let mut worst: f64 = 0.0;
        for i in 1..n {
            let r = self.radii[i];
            let e1 = d6(u, i, 0, n, h) - self.slopes[i];
            let e2 = d6(&q, i, 0, n, h) / r + u[i].max(0.0).powf(self.p);
            worst = worst.max(e1.abs()).max(e2.abs());
        }
        worst
    }

    /// Sup-norm residual of the mode-1 linearised operator on `v = U'` over `(0, 1)`.
    pub fn kernel_mode_residual(&self) -> f64 {
        let n = self.unit_index;
        let h = self.h();
        let p = self.p;
        // r v' with v' = U'' taken from the profile equation; one numerical derivative.
        let q: Vec<f64> = (0..=n)
            .map(|i| {
                let r = self.radii[i];
                let u = self.values[i].max(0.0);
                if i == 0 {
                    0.0
                } else {
                    r * (-self.slopes[i] / r - u.powf(p))
                }
            })
            .collect();
        let mut worst: f64 = 0.0;
        for i in 1..n {
            let r = self.radii[i];
            let v = self.slopes[i];
            let u = self.values[i].max(0.0);
            let res = -d6(&q, i, 0, n, h) / r + v / (r * r) - p * u.powf(p - 1.0) * v;
            worst = worst.max(res.abs());
        }
        worst
    }

    /// Relative defects of the two integral identities `Λ_p = -2πU'(1)` and
    /// `∫U^{p+1} = π(p+1)/2 U'(1)²`.
    pub fn pohozaev_defects(&self) -> (f64, f64) {
        let d1 = (self.lambda_p + 2.0 * PI * self.u_prime_1).abs() / self.lambda_p;
        let target = PI * (self.p + 1.0) / 2.0 * self.u_prime_1 * self.u_prime_1;
        let d2 = (self.energy_integral - target).abs() / self.energy_integral;
        (d1, d2)
    }

    /// Copy with all samples multiplied by `c` (constants left untouched).
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out.slopes.iter_mut().for_each(|v| *v *= c);
        out.u_prime_1 *= c;
        out.center_value *= c;
        out
    }

    /// Writes `(r, U)` samples as CSV and a JSON sidecar next to it.
    pub fn write_csv(&self, csv_path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(csv_path)?);
        writeln!(f, "r,U")?;
        for (r, u) in self.radii.iter().zip(&self.values) {
            writeln!(f, "{r:.17e},{u:.17e}")?;
        }
        f.flush()?;
        let sidecar = serde_json::json!({
            "p": self.p,
            "u_prime_1": self.u_prime_1,
            "lambda_p": self.lambda_p,
            "tol": self.tol,
        });
        std::fs::write(csv_path.with_extension("json"), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_values_and_sign() {
        let gs = solve_ground_state(2.0, 1e-10).unwrap();
        assert_eq!(gs.evaluate(1.0), 0.0);
        assert!(gs.u_prime_1 < 0.0);
        assert!(gs.center_value > 0.0);
        assert!((gs.evaluate(std::f64::consts::E) - gs.u_prime_1).abs() < 1e-15);
    }

    #[test]
    fn rejects_subquadratic_exponent_and_bad_tolerance() {
        assert!(matches!(solve_ground_state(1.5, 1e-8), Err(Error::Domain(_))));
        assert!(matches!(solve_ground_state(2.0, 1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn harmonic_extension_is_exact_beyond_unit_radius() {
        let gs = solve_ground_state(3.0, 1e-10).unwrap();
        for (r, u) in gs.radii.iter().zip(&gs.values) {
            if *r > 1.0 {
                assert_eq!(*u, -gs.u_prime_1 * (1.0 / r).ln());
            }
        }
    }

    #[test]
    fn derivative_is_continuous_at_unit_radius() {
        let gs = solve_ground_state(2.5, 1e-10).unwrap();
        let left = gs.derivative(1.0 - 1e-12);
        let right = gs.derivative(1.0);
        assert!((left - right).abs() < 1e-9 * right.abs());
    }

    #[test]
    fn monotone_on_sample_grid() {
        let gs = solve_ground_state(4.0, 1e-10).unwrap();
        assert!(gs.values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn scaled_profile_breaks_kernel_identity() {
        let gs = solve_ground_state(2.0, 1e-10).unwrap();
        assert!(gs.kernel_mode_residual() <= 1e-9);
        assert!(gs.scaled(1.01).kernel_mode_residual() > 1e-2);
    }
}
