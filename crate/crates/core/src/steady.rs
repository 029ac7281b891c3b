//! Steady rings: `ℒψ = ε⁻²(ψ - (W/2)x1² ln(1/ε) - μ)₊ᵖ` with `∫ζ dν = κ`.
//!
//! The Picard map `T(ψ) = ℒ⁻¹ ζ(ψ)`, where `μ(ψ)` restores the circulation, is iterated with
//! Anderson mixing and a damped fallback. When mixing stalls on the slow radial mode of a thin
//! core, the radial centroid is held fixed with a free speed constant and a secant search over
//! the held radius recovers the requested `W`.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{circulation, AxisymGrid, FieldKind, ScalarField};
use crate::green::{grad_g_half_plane, g_half_plane_raw};
use crate::operator::{FarField, LSolver};
use crate::special::mean_log_rect;

/// Physical parameters `(κ, W, ε, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub kappa: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub eps: f64,
    pub p: f64,
}

impl RingSpec {
    pub fn new(kappa: f64, w: f64, eps: f64, p: f64) -> Result<Self> {
        let s = Self { kappa, w, eps, p };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) || !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::Domain(format!("kappa = {} and W = {} must be positive", self.kappa, self.w)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Domain(format!("eps = {} must lie in (0, 1)", self.eps)));
        }
        if !(self.p >= 2.0 && self.p.is_finite()) {
            return Err(Error::Domain(format!("p = {} must be at least 2", self.p)));
        }
        Ok(())
    }

    #[inline]
    pub fn ln_inv_eps(&self) -> f64 {
        (1.0 / self.eps).ln()
    }

    /// Travelling speed `𝒲 = W ln(1/ε)`.
    #[inline]
    pub fn speed(&self) -> f64 {
        self.w * self.ln_inv_eps()
    }

    /// Leading-order ring radius `κ / 4πW`.
    #[inline]
    pub fn r_star_limit(&self) -> f64 {
        self.kappa / (4.0 * PI * self.w)
    }

    /// `ψ - (W/2) x1² ln(1/ε)` at radius `x1`, without `μ`.
    #[inline]
    fn base(&self, psi: f64, x1: f64) -> f64 {
        psi - 0.5 * self.speed() * x1 * x1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyOptions {
    /// Stop when `‖T(ψ) - ψ‖∞ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Anderson history length; 0 gives damped Picard.
    pub anderson_depth: usize,
    /// Initial Picard damping factor in `(0, 1]`.
    pub damping: f64,
    pub far_field: FarField,
    /// Switch to the pinned-radius secant once mixing stops improving for this many iterations; 0 disables.
    pub pin_after: usize,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 400, anderson_depth: 6, damping: 1.0, far_field: FarField::SingleRing, pin_after: 8 }
    }
}

/// Converged solution `(ψ, ζ, μ)` of the steady problem.
#[derive(Debug, Clone)]
pub struct SteadyRing {
    pub psi: ScalarField,
    pub zeta: ScalarField,
    pub mu: f64,
    pub spec: RingSpec,
    /// `r_ε = ½ diam(supp ζ)` on cell centres.
    pub support_radius: f64,
    /// `z_ε`, the maximum point of `ψ` on the support (sub-cell refined).
    pub center: (f64, f64),
    /// Final fixed-point defect `‖T(ψ) - ψ‖∞`.
    pub defect: f64,
    pub iterations: usize,
    pub defect_history: Vec<f64>,
    pub far_field: FarField,
}

impl SteadyRing {
    /// `Φ = ψ - (W/2) x1² ln(1/ε) - μ` on the grid.
    pub fn phi(&self) -> ScalarField {
        phi_field(&self.psi, &self.spec, self.mu)
    }

    pub fn kappa(&self) -> f64 {
        self.spec.kappa
    }

    pub fn grid(&self) -> &AxisymGrid {
        &self.psi.grid
    }
}

/// `Φ = ψ - (W/2) x1² ln(1/ε) - μ`.
pub fn phi_field(psi: &ScalarField, spec: &RingSpec, mu: f64) -> ScalarField {
    let g = psi.grid;
    let mut out = psi.clone();
    for i in 0..g.nr {
        let x = g.r(i);
        for j in 0..g.nz {
            let k = g.idx(i, j);
            out.values[k] = spec.base(psi.values[k], x) - mu;
        }
    }
    out
}

/// `ζ = ε⁻² Φ₊ᵖ` for a given `μ`.
pub fn vorticity_for_mu(psi: &ScalarField, spec: &RingSpec, mu: f64) -> ScalarField {
    let g = psi.grid;
    let inv = 1.0 / (spec.eps * spec.eps);
    let mut values = vec![0.0; g.len()];
    values.par_chunks_mut(g.nz).enumerate().for_each(|(i, col)| {
        let x = g.r(i);
        for (j, v) in col.iter_mut().enumerate() {
            let s = spec.base(psi.values[i * g.nz + j], x) - mu;
            *v = if s > 0.0 { inv * s.powf(spec.p) } else { 0.0 };
        }
    });
    ScalarField { grid: g, values, kind: FieldKind::Vorticity }
}

/// Finds `μ` with `∫ ε⁻² Φ₊ᵖ dν = κ` and returns `(ζ, μ)`.
///
/// Fails with a seed error when the level needed to reach `κ` would put vorticity on the
/// truncation boundary.
pub fn vorticity_from_stream(psi: &ScalarField, spec: &RingSpec) -> Result<(ScalarField, f64)> {
    let g = psi.grid;
    let inv = 1.0 / (spec.eps * spec.eps);
    let base: Vec<f64> = (0..g.len()).map(|k| spec.base(psi.values[k], g.r(k / g.nz))).collect();
    let hi0 = base.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !hi0.is_finite() {
        return Err(Error::Seed("stream function is not finite".into()));
    }
    // highest boundary value: the support must stay strictly below it
    let mut edge = f64::NEG_INFINITY;
    for i in 0..g.nr {
        edge = edge.max(base[g.idx(i, 0)]).max(base[g.idx(i, g.nz - 1)]);
    }
    for j in 0..g.nz {
        edge = edge.max(base[g.idx(g.nr - 1, j)]);
        if g.r_min > 0.0 {
            edge = edge.max(base[g.idx(0, j)]);
        }
    }
    let p = spec.p;
    let circ_of = |cells: &[(f64, f64)], mu: f64| -> f64 {
        cells.iter().map(|&(b, nu)| if b > mu { (b - mu).powf(p) * nu } else { 0.0 }).sum::<f64>() * inv
    };
    let mut step = hi0.abs().max(1e-3) * 1e-3;
    let (mut lo, cells) = loop {
        let lo = (hi0 - step).max(edge);
        let cells: Vec<(f64, f64)> =
            base.iter().enumerate().filter(|(_, b)| **b > lo).map(|(k, b)| (*b, g.nu(k / g.nz))).collect();
        if circ_of(&cells, lo) >= spec.kappa {
            break (lo, cells);
        }
        if lo <= edge {
            return Err(Error::Seed(format!(
                "circulation {} cannot be reached without vorticity on the grid boundary",
                spec.kappa
            )));
        }
        step *= 2.0;
    };
    let mut hi = hi0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if circ_of(&cells, mid) > spec.kappa {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (clo, chi) = (circ_of(&cells, lo), circ_of(&cells, hi));
    let mu = if (clo - spec.kappa).abs() <= (chi - spec.kappa).abs() { lo } else { hi };
    Ok((vorticity_for_mu(psi, spec, mu), mu))
}

fn picard(solver: &LSolver, spec: &RingSpec, far: FarField, psi: &ScalarField) -> Result<(ScalarField, f64)> {
    let (zeta, mu) = vorticity_from_stream(psi, spec)?;
    Ok((solver.solve(&zeta, far)?, mu))
}

/// Solves the steady problem from an initial vorticity or stream field.
pub fn solve_steady(spec: RingSpec, init: &ScalarField, opts: &SteadyOptions) -> Result<SteadyRing> {
    let solver = LSolver::new(init.grid);
    solve_steady_with(&solver, spec, init, opts)
}

/// As [`solve_steady`], reusing a prepared solver.
pub fn solve_steady_with(solver: &LSolver, spec: RingSpec, init: &ScalarField, opts: &SteadyOptions) -> Result<SteadyRing> {
    spec.validate()?;
    if !(opts.tol > 0.0) || !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Domain("tolerance must be positive and damping in (0, 1]".into()));
    }
    let g = *solver.grid();
    if init.grid != g {
        return Err(Error::Domain("initial field grid does not match solver grid".into()));
    }
    let far = opts.far_field;
    let x = match init.kind {
        FieldKind::Stream => init.clone(),
        FieldKind::Vorticity => {
            let c = circulation(init);
            if !(c > 0.0) {
                return Err(Error::Seed("initial vorticity has no circulation".into()));
            }
            let mut z = init.clone();
            z.values.iter_mut().for_each(|v| *v *= spec.kappa / c);
            solver.solve(&z, far)?
        }
    };

    let mut history = Vec::new();
    let mut map = |psi: &ScalarField| picard(solver, &spec, far, psi).map(|v| v.0);
    let x = match accelerate(&mut map, x, opts, opts.max_iter, opts.pin_after, &mut history)? {
        Outcome::Converged(psi) => return conclude(psi, spec, history, far),
        Outcome::Stalled(x) => x,
    };
    let psi = pinned_solve(solver, spec, far, x, opts, &mut history)?;
    conclude(psi, spec, history, far)
}

fn conclude(psi: ScalarField, spec: RingSpec, history: Vec<f64>, far: FarField) -> Result<SteadyRing> {
    let (zeta, mu) = vorticity_from_stream(&psi, &spec)?;
    let d = history.last().copied().unwrap_or(0.0);
    let n = history.len();
    Ok(finish(psi, zeta, mu, spec, d, n, history, far))
}

enum Outcome {
    /// `T(x)` for the accepted iterate.
    Converged(ScalarField),
    /// Best iterate seen before progress stopped.
    Stalled(ScalarField),
}

/// Anderson-accelerated iteration of `map` until `‖map(x) - x‖∞ ≤ opts.tol`.
///
/// Returns early with the best iterate once `stall > 0` iterations pass without a 30% gain.
fn accelerate(
    map: &mut dyn FnMut(&ScalarField) -> Result<ScalarField>,
    mut x: ScalarField,
    opts: &SteadyOptions,
    max_iter: usize,
    stall: usize,
    history: &mut Vec<f64>,
) -> Result<Outcome> {
    let mut xs: VecDeque<Vec<f64>> = VecDeque::new();
    let mut fs: VecDeque<Vec<f64>> = VecDeque::new();
    let mut theta = opts.damping;
    let mut best: Option<(f64, ScalarField)> = None;
    let mut last_gain = 0;
    let first = history.len();

    for it in 0..max_iter {
        let tx = match map(&x) {
            Ok(v) => v,
            Err(Error::Seed(msg)) if history.len() == first => return Err(Error::Seed(msg)),
            Err(Error::Seed(_)) => {
                // extrapolated iterate left the admissible region; restart from the best one
                let (_, bx) = best.clone().ok_or_else(|| Error::Divergence { history: history.clone() })?;
                x = bx;
                xs.clear();
                fs.clear();
                theta *= 0.5;
                if theta < 1e-4 {
                    return Err(Error::Divergence { history: history.clone() });
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let f: Vec<f64> = tx.values.iter().zip(&x.values).map(|(a, b)| a - b).collect();
        let d = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        history.push(d);
        log::debug!("steady iteration {it}: defect {d:e}");
        if !d.is_finite() {
            return Err(Error::Divergence { history: history.clone() });
        }
        if d <= opts.tol {
            return Ok(Outcome::Converged(tx));
        }
        let best_d = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if d < 0.7 * best_d {
            last_gain = it;
        }
        if d < best_d {
            best = Some((d, x.clone()));
        }
        if stall > 0 && it >= last_gain + stall {
            return Ok(Outcome::Stalled(best.unwrap().1));
        }
        if d > 1e3 * best_d {
            let (_, bx) = best.clone().unwrap();
            x = bx;
            xs.clear();
            fs.clear();
            theta *= 0.5;
            if theta < 1e-4 {
                return Err(Error::Divergence { history: history.clone() });
            }
            continue;
        }

        if opts.anderson_depth == 0 {
            if history.len() >= first + 2 && d > history[history.len() - 2] {
                theta = (theta * 0.5).max(1e-4);
            }
            x.values.iter_mut().zip(&f).for_each(|(xv, fv)| *xv += theta * fv);
            continue;
        }

        xs.push_back(x.values.clone());
        fs.push_back(f.clone());
        if xs.len() > opts.anderson_depth + 1 {
            xs.pop_front();
            fs.pop_front();
        }
        let m = xs.len() - 1;
        if m == 0 {
            x.values.iter_mut().zip(&f).for_each(|(xv, fv)| *xv += theta * fv);
            continue;
        }
        let n = f.len();
        let mut df = DMatrix::<f64>::zeros(n, m);
        for c in 0..m {
            let (a, b) = (&fs[c + 1], &fs[c]);
            for r in 0..n {
                df[(r, c)] = a[r] - b[r];
            }
        }
        let gamma = match df.clone().svd(true, true).solve(&DVector::from_column_slice(&f), 1e-14) {
            Ok(g) => g,
            Err(_) => DVector::zeros(m),
        };
        let mut next = x.values.clone();
        for r in 0..n {
            let mut v = next[r] + theta * f[r];
            for c in 0..m {
                let dx = xs[c + 1][r] - xs[c][r];
                v -= (dx + theta * df[(r, c)]) * gamma[c];
            }
            next[r] = v;
        }
        x.values = next;
    }
    Err(Error::Divergence { history: history.clone() })
}

/// Vorticity with circulation `κ` and radial ν-centroid `rc`, adjusting the speed parameter.
///
/// Returns `(ζ, W')` with `W'` the speed constant that places the centroid at `rc`.
fn pinned_vorticity(psi: &ScalarField, spec: &RingSpec, rc: f64, w0: f64) -> Result<(ScalarField, f64)> {
    let gap = |w: f64| -> Result<(f64, ScalarField)> {
        let s = RingSpec { w, ..*spec };
        let (z, _) = vorticity_from_stream(psi, &s)?;
        let c = z.centroid().ok_or_else(|| Error::Seed("empty support".into()))?;
        Ok((c.0 - rc, z))
    };
    let (g0, z0) = gap(w0)?;
    if g0 == 0.0 {
        return Ok((z0, w0));
    }
    // the centroid moves inward as W' grows
    let mut step = 1e-4 * w0 * g0.signum();
    let (mut a, mut ga) = (w0, g0);
    let (mut b, mut gb);
    let mut tries = 0;
    loop {
        b = a + step;
        gb = gap(b)?.0;
        if gb.signum() != ga.signum() {
            break;
        }
        a = b;
        ga = gb;
        step *= 2.0;
        tries += 1;
        if tries > 60 || b <= 0.0 {
            return Err(Error::Seed(format!("no speed constant places the centroid at {rc}")));
        }
    }
    // Illinois regula falsi
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * gb - b * ga) / (gb - ga);
        let (gc, zc) = gap(c)?;
        if gc.abs() <= 1e-15 * rc || (b - a).abs() <= 4.0 * f64::EPSILON * c.abs() {
            return Ok((zc, c));
        }
        if gc.signum() == gb.signum() {
            b = c;
            gb = gc;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            ga = gc;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
    }
    let c = 0.5 * (a + b);
    Ok((gap(c)?.1, c))
}

/// Solution with the radial centroid held at `rc`; returns `(ψ, W')`.
fn pinned_ring(
    solver: &LSolver,
    spec: &RingSpec,
    far: FarField,
    x: ScalarField,
    rc: f64,
    opts: &SteadyOptions,
    history: &mut Vec<f64>,
) -> Result<(ScalarField, f64)> {
    let mut w = spec.w;
    let mut map = |psi: &ScalarField| -> Result<ScalarField> {
        let (z, wn) = pinned_vorticity(psi, spec, rc, w)?;
        w = wn;
        solver.solve(&z, far)
    };
    let left = opts.max_iter.saturating_sub(history.len()).max(1);
    match accelerate(&mut map, x, opts, left, 0, history)? {
        Outcome::Converged(psi) => {
            let (_, wn) = pinned_vorticity(&psi, spec, rc, w)?;
            Ok((psi, wn))
        }
        Outcome::Stalled(_) => unreachable!(),
    }
}

/// Secant search over the pinned radius for the one whose speed constant is `W`.
///
/// Used when plain mixing stalls on the slowly relaxing radial position of a thin core.
fn pinned_solve(
    solver: &LSolver,
    spec: RingSpec,
    far: FarField,
    x: ScalarField,
    opts: &SteadyOptions,
    history: &mut Vec<f64>,
) -> Result<ScalarField> {
    let (z, _) = vorticity_from_stream(&x, &spec)?;
    let r0 = z.centroid().ok_or_else(|| Error::Seed("empty support".into()))?.0;
    let (mut x0, w0) = pinned_ring(solver, &spec, far, x, r0, opts, history)?;
    let (mut r_prev, mut w_prev) = (r0, w0);
    // W' scales roughly like 1/r
    let mut r = r0 * (1.0 + (w0 - spec.w) / spec.w);
    let mut cuts = 0;
    while cuts < 40 && history.len() < opts.max_iter {
        let (xr, wr) = match pinned_ring(solver, &spec, far, x0.clone(), r, opts, history) {
            Ok(v) => v,
            Err(Error::Seed(_)) | Err(Error::Divergence { .. }) => {
                // too far for one pinned solve from the last state; shorten the step
                r = 0.5 * (r + r_prev);
                cuts += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        log::debug!("pinned radius {r}: W' - W = {:e}", wr - spec.w);
        x0 = xr;
        let tx = picard(solver, &spec, far, &x0)?.0;
        let d = tx.values.iter().zip(&x0.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        history.push(d);
        if d <= opts.tol {
            return Ok(tx);
        }
        if wr == w_prev {
            break;
        }
        let next = r - (wr - spec.w) * (r - r_prev) / (wr - w_prev);
        // limit growth of the step so the next pinned solve starts close
        let cap = 2.0 * (r - r_prev).abs();
        let next = r + (next - r).clamp(-cap, cap);
        r_prev = r;
        w_prev = wr;
        r = next;
    }
    Err(Error::Divergence { history: history.clone() })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    psi: ScalarField,
    zeta: ScalarField,
    mu: f64,
    spec: RingSpec,
    defect: f64,
    iterations: usize,
    history: Vec<f64>,
    far: FarField,
) -> SteadyRing {
    let support_radius = 0.5 * support_diameter(&zeta);
    let center = max_point(&psi, &zeta);
    SteadyRing { psi, zeta, mu, spec, support_radius, center, defect, iterations, defect_history: history, far_field: far }
}

/// Cells of the support that have a neighbour outside it.
fn support_boundary(zeta: &ScalarField) -> Vec<(usize, usize)> {
    let g = &zeta.grid;
    let on = |i: isize, j: isize| -> bool {
        i >= 0 && j >= 0 && (i as usize) < g.nr && (j as usize) < g.nz && zeta.at(i as usize, j as usize) > 0.0
    };
    zeta.support()
        .into_iter()
        .filter(|&(i, j)| {
            let (a, b) = (i as isize, j as isize);
            !(on(a + 1, b) && on(a - 1, b) && on(a, b + 1) && on(a, b - 1))
        })
        .collect()
}

/// Largest distance between support cell centres.
pub fn support_diameter(zeta: &ScalarField) -> f64 {
    let g = &zeta.grid;
    let pts: Vec<(f64, f64)> = support_boundary(zeta).into_iter().map(|(i, j)| (g.r(i), g.z(j))).collect();
    let mut d2: f64 = 0.0;
    for (k, a) in pts.iter().enumerate() {
        for b in &pts[k + 1..] {
            d2 = d2.max((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2));
        }
    }
    d2.sqrt()
}

/// Maximum point of `ψ` over the support, refined by a quadratic fit in each direction.
pub fn max_point(psi: &ScalarField, zeta: &ScalarField) -> (f64, f64) {
    let g = &psi.grid;
    let best = zeta
        .support()
        .into_iter()
        .max_by(|a, b| psi.at(a.0, a.1).total_cmp(&psi.at(b.0, b.1)));
    let Some((i, j)) = best else {
        return (f64::NAN, f64::NAN);
    };
    let vertex = |m: f64, c: f64, p: f64| -> f64 {
        let den = m - 2.0 * c + p;
        if den < 0.0 {
            (0.5 * (m - p) / den).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    let di = if i > 0 && i + 1 < g.nr { vertex(psi.at(i - 1, j), psi.at(i, j), psi.at(i + 1, j)) } else { 0.0 };
    let dj = if j > 0 && j + 1 < g.nz { vertex(psi.at(i, j - 1), psi.at(i, j), psi.at(i, j + 1)) } else { 0.0 };
    (g.r(i) + di * g.hr(), g.z(j) + dj * g.hz())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyDiagnostics {
    pub support_diameter: f64,
    /// `diam / ε`, the measured `C0`.
    pub c0: f64,
    pub center: (f64, f64),
    pub centroid: (f64, f64),
    /// `sup |ψ(x1, x2) - ψ(x1, 2c - x2)|` at the best reflection line `c`.
    pub symmetry_defect: f64,
    pub symmetry_line: f64,
    pub psi_sup: f64,
    /// `ε⁻² ∫ Φ₊^{p+1} dx`.
    pub core_energy: f64,
    pub circulation: f64,
    pub circulation_error: f64,
    pub support_cells: usize,
    pub touches_boundary: bool,
    pub mu: f64,
    pub defect: f64,
}

/// Smallest reflection defect over lines through cell centres and faces within a few cells
/// of `near`.
pub fn symmetry_defect(psi: &ScalarField, near: f64) -> (f64, f64) {
    let g = &psi.grid;
    // line c = z_min + k hz / 2; cell j maps to k - 1 - j
    let k0 = (2.0 * (near - g.z_min) / g.hz()).round() as isize;
    let mut best = (f64::INFINITY, near);
    for k in (k0 - 4).max(1)..=(k0 + 4).min(2 * g.nz as isize - 1) {
        let mut d: f64 = 0.0;
        for j in 0..g.nz {
            let jm = k - 1 - j as isize;
            if jm < 0 || jm >= g.nz as isize {
                continue;
            }
            for i in 0..g.nr {
                d = d.max((psi.at(i, j) - psi.at(i, jm as usize)).abs());
            }
        }
        if d < best.0 {
            best = (d, g.z_min + k as f64 * 0.5 * g.hz());
        }
    }
    best
}

pub fn diagnostics(ring: &SteadyRing) -> SteadyDiagnostics {
    let g = *ring.grid();
    let diam = 2.0 * ring.support_radius;
    let centroid = ring.zeta.centroid().unwrap_or((f64::NAN, f64::NAN));
    let (sym, line) = symmetry_defect(&ring.psi, if centroid.1.is_finite() { centroid.1 } else { 0.0 });
    let phi = ring.phi();
    let p = ring.spec.p;
    let core: f64 = phi.values.iter().filter(|v| **v > 0.0).map(|v| v.powf(p + 1.0)).sum::<f64>() * g.area()
        / (ring.spec.eps * ring.spec.eps);
    let circ = circulation(&ring.zeta);
    SteadyDiagnostics {
        support_diameter: diam,
        c0: diam / ring.spec.eps,
        center: ring.center,
        centroid,
        symmetry_defect: sym,
        symmetry_line: line,
        psi_sup: ring.psi.sup_norm(),
        core_energy: core,
        circulation: circ,
        circulation_error: (circ - ring.spec.kappa).abs(),
        support_cells: ring.zeta.support().len(),
        touches_boundary: ring.zeta.touches_boundary(),
        mu: ring.mu,
        defect: ring.defect,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevReport {
    pub delta: f64,
    pub anchor: f64,
    /// Boundary side: `-∮ ∂νψ1 ∂1ψ1 ds + ½ ∮ |∇ψ1|² ν1 ds`.
    pub lhs: f64,
    /// `-x_c² ε⁻² ∫ Φ₊ᵖ ∂1ψ2 dx`.
    pub r1: f64,
    /// `x_c² ε⁻² ∫ W x1 ln(1/ε) Φ₊ᵖ dx`.
    pub r2: f64,
    /// `|lhs - r1 - r2| / max(|lhs|, |r1|, |r2|)`.
    pub defect: f64,
}

/// Number of trapezoid nodes on the circle.
const CIRCLE_NODES: usize = 512;

/// Local Pohozaev identity on `B_δ(x_c)` for the split `ψ = ψ1 + ψ2` anchored at the
/// vorticity centroid `x_c`.
pub fn pohozaev_check(ring: &SteadyRing, delta: f64) -> Result<PohozaevReport> {
    let g = *ring.grid();
    let support = ring.zeta.support();
    let Some((c1, c2)) = ring.zeta.centroid() else {
        return Ok(PohozaevReport { delta, anchor: 0.0, lhs: 0.0, r1: 0.0, r2: 0.0, defect: 0.0 });
    };
    let half_diag = 0.5 * (g.hr() * g.hr() + g.hz() * g.hz()).sqrt();
    for &(i, j) in &support {
        if ((g.r(i) - c1).powi(2) + (g.z(j) - c2).powi(2)).sqrt() + half_diag > delta {
            return Err(Error::Precondition(format!("ball of radius {delta} does not contain the support")));
        }
    }
    if c1 - delta <= g.r_min || c1 + delta >= g.r_max || c2 - delta <= g.z_min || c2 + delta >= g.z_max {
        return Err(Error::Precondition(format!("ball of radius {delta} leaves the grid")));
    }
    let area = g.area();
    let anchor2 = c1 * c1;
    let src: Vec<(f64, f64, f64)> = support.iter().map(|&(i, j)| (g.r(i), g.z(j), ring.zeta.at(i, j) * area)).collect();

    // boundary integrals
    let lhs: f64 = (0..CIRCLE_NODES)
        .into_par_iter()
        .map(|k| {
            let th = 2.0 * PI * k as f64 / CIRCLE_NODES as f64;
            let (n1, n2) = (th.cos(), th.sin());
            let (x1, x2) = (c1 + delta * n1, c2 + delta * n2);
            let (mut d1, mut d2) = (0.0, 0.0);
            for &(y1, y2, q) in &src {
                let (a, b) = grad_g_half_plane(x1, x2, y1, y2);
                d1 += q * a;
                d2 += q * b;
            }
            d1 *= anchor2;
            d2 *= anchor2;
            let dn = d1 * n1 + d2 * n2;
            -dn * d1 + 0.5 * (d1 * d1 + d2 * d2) * n1
        })
        .sum::<f64>()
        * (2.0 * PI * delta / CIRCLE_NODES as f64);

    // ψ1 at support cells and their radial neighbours, self cell by log average
    let self_mean = mean_log_rect(g.hr(), g.hz());
    let psi1_at = |i: usize, j: usize| -> f64 {
        let (x1, x2) = (g.r(i), g.z(j));
        let mut s = 0.0;
        for &(y1, y2, q) in &src {
            if y1 == x1 && y2 == x2 {
                s += q * ((2.0 * x1).powi(2).ln() - 2.0 * self_mean) / (4.0 * PI);
            } else {
                s += q * g_half_plane_raw(x1, x2, y1, y2);
            }
        }
        anchor2 * s
    };
    let terms: Vec<(f64, f64)> = support
        .par_iter()
        .map(|&(i, j)| {
            if i == 0 || i + 1 >= g.nr {
                return (0.0, 0.0);
            }
            let d_psi = (ring.psi.at(i + 1, j) - ring.psi.at(i - 1, j)) / (2.0 * g.hr());
            let d_psi1 = (psi1_at(i + 1, j) - psi1_at(i - 1, j)) / (2.0 * g.hr());
            let z = ring.zeta.at(i, j);
            (-anchor2 * z * (d_psi - d_psi1) * area, anchor2 * ring.spec.speed() * g.r(i) * z * area)
        })
        .collect();
    let r1: f64 = terms.iter().map(|t| t.0).sum();
    let r2: f64 = terms.iter().map(|t| t.1).sum();
    let scale = lhs.abs().max(r1.abs()).max(r2.abs());
    let defect = if scale > 0.0 { (lhs - r1 - r2).abs() / scale } else { 0.0 };
    Ok(PohozaevReport { delta, anchor: c1, lhs, r1, r2, defect })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub same: bool,
    pub shift_cells: isize,
    /// Shift `c` with `ζ_A ≈ ζ_B(· + c e2)`.
    pub shift: f64,
    pub distance: f64,
}

/// `‖a - b(· + s hz e2)‖_{L¹(ν)}` for an integer cell shift `s`.
pub fn shifted_l1_distance(a: &ScalarField, b: &ScalarField, s: isize) -> f64 {
    let g = &a.grid;
    let mut d = 0.0;
    for i in 0..g.nr {
        let nu = g.nu(i);
        let mut col = 0.0;
        for j in 0..g.nz {
            let jj = j as isize + s;
            let bv = if jj >= 0 && (jj as usize) < g.nz { b.at(i, jj as usize) } else { 0.0 };
            col += (a.at(i, j) - bv).abs();
        }
        d += col * nu;
    }
    d
}

/// Best grid shift between two vorticity fields and whether they agree within `tol·κ`.
pub fn uniqueness_probe_fields(a: &ScalarField, b: &ScalarField, kappa: f64, tol: f64) -> Result<UniquenessReport> {
    if a.grid != b.grid {
        return Err(Error::Domain("rings live on different grids".into()));
    }
    let g = &a.grid;
    let s0 = match (a.centroid(), b.centroid()) {
        (Some(ca), Some(cb)) => ((cb.1 - ca.1) / g.hz()).round() as isize,
        _ => 0,
    };
    let mut best = (f64::INFINITY, 0isize);
    for s in (s0 - 4)..=(s0 + 4) {
        let d = shifted_l1_distance(a, b, s);
        if d < best.0 {
            best = (d, s);
        }
    }
    Ok(UniquenessReport { same: best.0 <= tol * kappa, shift_cells: best.1, shift: best.1 as f64 * g.hz(), distance: best.0 })
}

/// Empirical uniqueness check between two rings with the same parameters.
pub fn uniqueness_probe(a: &SteadyRing, b: &SteadyRing, tol: f64) -> Result<UniquenessReport> {
    let mut rep = uniqueness_probe_fields(&a.zeta, &b.zeta, a.spec.kappa, tol)?;
    if a.spec != b.spec {
        rep.same = false;
    }
    Ok(rep)
}

/// Uniform patch of radius `s` centred at `(r, z)` with circulation `κ`.
pub fn patch_seed(grid: AxisymGrid, r: f64, z: f64, s: f64, kappa: f64) -> Result<ScalarField> {
    let mut f = ScalarField::from_fn(grid, FieldKind::Vorticity, |x1, x2| {
        if (x1 - r).powi(2) + (x2 - z).powi(2) < s * s {
            1.0
        } else {
            0.0
        }
    });
    let c = circulation(&f);
    if !(c > 0.0) {
        return Err(Error::Resolution(format!("patch of radius {s} covers no cell centre")));
    }
    f.values.iter_mut().for_each(|v| *v *= kappa / c);
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> RingSpec {
        RingSpec::new(1.0, 1.0 / (4.0 * PI), 0.1, 2.0).unwrap()
    }

    #[test]
    fn mu_solve_hits_circulation() {
        let g = AxisymGrid::new(0.0, 4.0, -2.0, 2.0, 64, 64).unwrap();
        let psi = ScalarField::from_fn(g, FieldKind::Stream, |r, z| 0.6 * (-(r - 1.5).powi(2) - z * z).exp());
        let (zeta, mu) = vorticity_from_stream(&psi, &spec()).unwrap();
        assert!((circulation(&zeta) - 1.0).abs() < 1e-12);
        let phi = phi_field(&psi, &spec(), mu);
        for (z, f) in zeta.values.iter().zip(&phi.values) {
            assert_eq!(*z > 0.0, *f > 0.0);
        }
    }

    #[test]
    fn weak_seed_is_rejected() {
        let g = AxisymGrid::new(0.0, 4.0, -2.0, 2.0, 32, 32).unwrap();
        let psi = ScalarField::from_fn(g, FieldKind::Stream, |r, z| 1e-9 * (-(r - 1.5).powi(2) - z * z).exp());
        assert!(matches!(vorticity_from_stream(&psi, &spec()), Err(Error::Seed(_))));
    }

    #[test]
    fn symmetric_field_has_zero_symmetry_defect() {
        let g = AxisymGrid::new(0.0, 2.0, -1.0, 1.0, 16, 16).unwrap();
        let psi = ScalarField::from_fn(g, FieldKind::Stream, |r, z| r * r * (-z * z).exp());
        let (d, line) = symmetry_defect(&psi, 0.02);
        assert_eq!(d, 0.0);
        assert!(line.abs() < 1e-15);
    }

    #[test]
    fn uniqueness_probe_recovers_grid_shift() {
        let g = AxisymGrid::new(0.0, 2.0, -1.0, 1.0, 32, 32).unwrap();
        let a = patch_seed(g, 1.0, 0.0, 0.2, 1.0).unwrap();
        let b = a.shifted_z(3);
        let rep = uniqueness_probe_fields(&a, &b, 1.0, 1e-12).unwrap();
        assert!(rep.same);
        assert_eq!(rep.shift_cells, 3);
        let mut c = a.clone();
        c.values.iter_mut().for_each(|v| *v *= 1.5);
        assert!(!uniqueness_probe_fields(&a, &c, 1.0, 1e-2).unwrap().same);
    }

    #[test]
    fn coarse_ring_converges_and_is_a_fixed_point() {
        let s = RingSpec::new(1.0, 1.0 / (4.0 * PI), 0.1, 2.0).unwrap();
        let g = AxisymGrid::around_ring(1.0, 64, 64).unwrap();
        let seed = patch_seed(g, 1.7, 0.0, 0.6, 1.0).unwrap();
        let opts = SteadyOptions::default();
        let ring = solve_steady(s, &seed, &opts).unwrap();
        assert!(ring.defect <= opts.tol);
        assert!((circulation(&ring.zeta) - 1.0).abs() < 1e-10);
        let again = solve_steady(s, &ring.psi, &opts).unwrap();
        assert!(again.iterations <= 2, "{} iterations", again.iterations);
        let d = diagnostics(&ring);
        assert!(d.symmetry_defect <= 1e-6 * d.psi_sup);
        assert!(!d.touches_boundary);
    }
}
