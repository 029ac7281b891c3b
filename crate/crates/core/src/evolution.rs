//! Transport of potential vorticity, `∂ₜζ + v·∇ζ = 0` with `v = (1/x1)(-∂₂ψ, ∂₁ψ)` and `ℒψ = ζ`.
//!
//! Each step makes one Poisson solve. The velocity at the half step is extrapolated from the
//! last two solves, departure points are found by a midpoint backtrace, and `ζ` is sampled
//! there with a prefiltered cubic B-spline (Keys cubic convolution is the alternative).
//! Overshoot is clipped to `[inf ζ₀ ∧ 0, sup ζ₀ ∨ 0]`,
//! which for a ring is `[0, sup ζ₀]`, and values below [`FLUSH`] times that bound are set to
//! zero. The scheme keeps `ζ ≥ 0`, compact support and the initial `L∞` bound but conserves
//! `E`, `P` and the `L^q(ν)` norms only up to discretisation error. The monitors measure that
//! error.
//!
//! The mirror image of a flow under `x2 -> -x2` carries `-ζ(x1, -x2)`; see [`reflect`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{circulation, impulse, AxisymGrid, FieldKind, ScalarField};
use crate::operator::{BoundaryValues, FarField, LSolver};
use crate::steady::SteadyRing;

/// Cell-centred velocity components.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub grid: AxisymGrid,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(grid: AxisymGrid) -> Self {
        Self { grid, v1: vec![0.0; grid.len()], v2: vec![0.0; grid.len()] }
    }

    /// `max |v - c e2|` over the grid.
    pub fn max_speed(&self, frame: f64) -> f64 {
        self.v1.iter().zip(&self.v2).fold(0.0f64, |m, (a, b)| m.max(a.hypot(b - frame)))
    }

    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let f = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        Self { grid: self.grid, v1: f(&self.v1, &other.v1), v2: f(&self.v2, &other.v2) }
    }
}

/// Velocity of a stream function by centred differences, with ghost data `bv`.
///
/// On an axis grid the ghost column is the even reflection, so `v1 = 0` on the axis.
pub fn velocity_from_stream(psi: &ScalarField, bv: &BoundaryValues) -> VelocityField {
    let g = psi.grid;
    let (nr, nz) = (g.nr, g.nz);
    let (hr, hz) = (g.hr(), g.hz());
    let mut v1 = vec![0.0; g.len()];
    let mut v2 = vec![0.0; g.len()];
    v1.par_chunks_mut(nz).zip(v2.par_chunks_mut(nz)).enumerate().for_each(|(i, (c1, c2))| {
        let x = g.r(i);
        for j in 0..nz {
            let inner = if i > 0 {
                psi.at(i - 1, j)
            } else if g.r_min == 0.0 {
                psi.at(0, j)
            } else {
                bv.r_inner[j]
            };
            let outer = if i + 1 < nr { psi.at(i + 1, j) } else { bv.r_outer[j] };
            let below = if j > 0 { psi.at(i, j - 1) } else { bv.z_lower[i] };
            let above = if j + 1 < nz { psi.at(i, j + 1) } else { bv.z_upper[i] };
            c1[j] = -(above - below) / (2.0 * hz * x);
            c2[j] = (outer - inner) / (2.0 * hr * x);
        }
    });
    VelocityField { grid: g, v1, v2 }
}

/// Velocity induced by `ζ` under the far-field rule `far`.
pub fn velocity(zeta: &ScalarField, far: FarField) -> Result<VelocityField> {
    if zeta.touches_boundary() {
        log::warn!("vorticity support reaches the grid boundary; velocity is truncated");
    }
    let bv = far.boundary_values(zeta);
    let psi = LSolver::new(zeta.grid).solve_with(zeta, &bv)?;
    Ok(velocity_from_stream(&psi, &bv))
}

/// Keys cubic convolution weights (`a = -1/2`) for offset `t ∈ [0, 1)`.
#[inline]
fn keys_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ]
}

/// Uniform cubic B-spline weights for offset `t ∈ [0, 1)`.
#[inline]
fn bspline_weights(t: f64) -> [f64; 4] {
    let u = 1.0 - t;
    let t2 = t * t;
    let t3 = t2 * t;
    [u * u * u / 6.0, (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0, (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0, t3 / 6.0]
}

/// Interpolant used to sample `ζ` at departure points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Interpolation {
    /// Keys cubic convolution on the raw values.
    Keys,
    /// Interpolating cubic B-spline (prefiltered coefficients).
    #[default]
    BSpline,
}

/// 4×4-tap sampler; cells past the axis are mirrored with a parity and cells past the outer
/// edges are zero.
pub struct Sampler<'a> {
    grid: AxisymGrid,
    coeffs: std::borrow::Cow<'a, [f64]>,
    kind: Interpolation,
    parity: f64,
}

impl<'a> Sampler<'a> {
    /// Sampler for a field that is even across the axis.
    pub fn new(zeta: &'a ScalarField, kind: Interpolation) -> Self {
        Self::from_values(zeta.grid, &zeta.values, kind, 1.0)
    }

    /// Sampler for cell values with axis parity `±1`.
    pub fn from_values(grid: AxisymGrid, values: &'a [f64], kind: Interpolation, parity: f64) -> Self {
        let coeffs = match kind {
            Interpolation::Keys => std::borrow::Cow::Borrowed(values),
            Interpolation::BSpline => std::borrow::Cow::Owned(prefilter(&grid, values, parity)),
        };
        Self { grid, coeffs, kind, parity }
    }

    pub fn sample(&self, x1: f64, x2: f64) -> f64 {
        let g = &self.grid;
        let (fi, fj) = g.frac_index(x1, x2);
        let (i0, j0) = (fi.floor(), fj.floor());
        let weights = match self.kind {
            Interpolation::Keys => keys_weights,
            Interpolation::BSpline => bspline_weights,
        };
        let (wi, wj) = (weights(fi - i0), weights(fj - j0));
        let (i0, j0) = (i0 as isize, j0 as isize);
        let mut s = 0.0;
        for (a, wa) in wi.iter().enumerate() {
            let mut i = i0 - 1 + a as isize;
            let mut wa = *wa;
            if g.r_min == 0.0 && i < 0 {
                i = -i - 1;
                wa *= self.parity;
            }
            if i < 0 || i >= g.nr as isize {
                continue;
            }
            let row = &self.coeffs[i as usize * g.nz..(i as usize + 1) * g.nz];
            let mut col = 0.0;
            for (b, wb) in wj.iter().enumerate() {
                let j = j0 - 1 + b as isize;
                if j >= 0 && j < g.nz as isize {
                    col += wb * row[j as usize];
                }
            }
            s += wa * col;
        }
        s
    }
}

/// Solves `(c[k-1] + 4c[k] + c[k+1])/6 = f[k]` in place, with `c[-1] = start·c[0]` and
/// `c[n] = 0`.
fn spline_line(f: &mut [f64], start: f64, scratch: &mut Vec<f64>) {
    let n = f.len();
    scratch.clear();
    scratch.resize(n, 0.0);
    let (off, mid) = (1.0 / 6.0, 4.0 / 6.0);
    let mut diag = mid + start * off;
    scratch[0] = off / diag;
    f[0] /= diag;
    for k in 1..n {
        diag = mid - off * scratch[k - 1];
        scratch[k] = off / diag;
        f[k] = (f[k] - off * f[k - 1]) / diag;
    }
    for k in (0..n - 1).rev() {
        f[k] -= scratch[k] * f[k + 1];
    }
}

fn prefilter(g: &AxisymGrid, values: &[f64], parity: f64) -> Vec<f64> {
    let (nr, nz) = (g.nr, g.nz);
    let mut c = values.to_vec();
    c.par_chunks_mut(nz).for_each_init(Vec::new, |scratch, col| {
        if col.iter().any(|v| *v != 0.0) {
            spline_line(col, 0.0, scratch)
        }
    });
    let axis = if g.r_min == 0.0 { parity } else { 0.0 };
    let rows: Vec<Vec<f64>> = (0..nz)
        .into_par_iter()
        .map_init(Vec::new, |scratch, j| {
            let mut row: Vec<f64> = (0..nr).map(|i| c[i * nz + j]).collect();
            if row.iter().any(|v| *v != 0.0) {
                spline_line(&mut row, axis, scratch);
            }
            row
        })
        .collect();
    for (j, row) in rows.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            c[i * nz + j] = *v;
        }
    }
    c
}

/// Keys bicubic sample of a vorticity field, even across the axis and zero outside the grid.
pub fn bicubic(zeta: &ScalarField, x1: f64, x2: f64) -> f64 {
    Sampler::new(zeta, Interpolation::Keys).sample(x1, x2)
}

/// Conserved quantities and diagnostics at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monitor {
    pub t: f64,
    /// `E = ½∫ζψ dν` with the grid stream function.
    pub energy: f64,
    /// `P = ½∫x1²ζ dν`.
    pub impulse: f64,
    pub l1: f64,
    pub l2: f64,
    pub sup: f64,
    pub sup_x1: f64,
    /// Distance to the nearest axial translate of the reference, when one is set.
    pub ring_distance: Option<f64>,
}

impl Monitor {
    pub const HEADER: [&'static str; 8] = ["t", "E", "P", "L1", "L2", "sup", "sup_x1", "ring_distance"];

    pub fn row(&self) -> Vec<f64> {
        vec![self.t, self.energy, self.impulse, self.l1, self.l2, self.sup, self.sup_x1, self.ring_distance.unwrap_or(f64::NAN)]
    }
}

/// Largest relative deviation of each conserved monitor from its initial value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub energy: f64,
    pub impulse: f64,
    pub l1: f64,
    pub l2: f64,
}

impl Drift {
    pub fn of(monitors: &[Monitor]) -> Self {
        let first = monitors.first().copied();
        let rel = |f: fn(&Monitor) -> f64| -> f64 {
            let Some(m0) = first else { return 0.0 };
            let v0 = f(&m0);
            monitors.iter().fold(0.0f64, |m, x| m.max(((f(x) - v0) / v0).abs()))
        };
        Self { energy: rel(|m| m.energy), impulse: rel(|m| m.impulse), l1: rel(|m| m.l1), l2: rel(|m| m.l2) }
    }

    pub fn max(&self) -> f64 {
        self.energy.max(self.impulse).max(self.l1).max(self.l2)
    }
}

/// `‖a - b(· + σ hz e2)‖_{L¹(ν)} + ‖·‖_{L²(ν)}` for a real shift `σ` in cells, with `b`
/// resampled along `x2` by Keys interpolation.
fn shifted_distance(a: &ScalarField, b: &ScalarField, sigma: f64, rows: &[(isize, isize, isize, isize)]) -> f64 {
    let g = &a.grid;
    let base = sigma.floor();
    let w = keys_weights(sigma - base);
    let base = base as isize;
    let cols: Vec<(f64, f64)> = (0..g.nr)
        .into_par_iter()
        .map(|i| {
            let (alo, ahi, blo, bhi) = rows[i];
            // cells where either a or the resampled b can be nonzero
            let lo = alo.min(blo - base - 2).max(0);
            let hi = ahi.max(bhi - base + 2).min(g.nz as isize);
            let (mut c1, mut c2) = (0.0, 0.0);
            for j in lo..hi {
                let mut bv = 0.0;
                for (k, wk) in w.iter().enumerate() {
                    let jj = j + base - 1 + k as isize;
                    if jj >= 0 && (jj as usize) < g.nz {
                        bv += wk * b.at(i, jj as usize);
                    }
                }
                let d = a.at(i, j as usize) - bv;
                c1 += d.abs();
                c2 += d * d;
            }
            (c1 * g.nu(i), c2 * g.nu(i))
        })
        .collect();
    let (l1, l2) = cols.iter().fold((0.0, 0.0), |acc, c| (acc.0 + c.0, acc.1 + c.1));
    l1 + l2.sqrt()
}

/// Half-open range of nonzero cells in column `i`, empty as `(nz, 0)`.
fn nonzero_range(f: &ScalarField, i: usize) -> (isize, isize) {
    let g = &f.grid;
    let col = &f.values[i * g.nz..(i + 1) * g.nz];
    match (col.iter().position(|v| *v != 0.0), col.iter().rposition(|v| *v != 0.0)) {
        (Some(lo), Some(hi)) => (lo as isize, hi as isize + 1),
        _ => (g.nz as isize, 0),
    }
}

/// `inf_c ‖a - b(· + c e2)‖_{L¹(ν)} + ‖·‖_{L²(ν)}`. Returns `(distance, c)`.
///
/// The best whole-cell shift is found by descent from the centroid offset; a parabola
/// through its neighbours locates the sub-cell shift, which a short golden-section search
/// on the resampled reference then polishes.
pub fn translate_distance(a: &ScalarField, b: &ScalarField) -> (f64, f64) {
    let g = &a.grid;
    let rows: Vec<(isize, isize, isize, isize)> = (0..g.nr)
        .map(|i| {
            let (al, ah) = nonzero_range(a, i);
            let (bl, bh) = nonzero_range(b, i);
            (al, ah, bl, bh)
        })
        .collect();
    let at = |s: f64| shifted_distance(a, b, s, &rows);
    let mut s = match (a.centroid(), b.centroid()) {
        (Some(ca), Some(cb)) => ((cb.1 - ca.1) / g.hz()).round(),
        _ => 0.0,
    };
    let (mut dm, mut d0, mut dp) = (at(s - 1.0), at(s), at(s + 1.0));
    for _ in 0..g.nz {
        if dm < d0 {
            s -= 1.0;
            (dp, d0) = (d0, dm);
            dm = at(s - 1.0);
        } else if dp < d0 {
            s += 1.0;
            (dm, d0) = (d0, dp);
            dp = at(s + 1.0);
        } else {
            break;
        }
    }
    if d0 == 0.0 {
        return (0.0, s * g.hz());
    }
    let curv = dm - 2.0 * d0 + dp;
    let guess = if curv > 0.0 { s + (0.5 * (dm - dp) / curv).clamp(-0.5, 0.5) } else { s };
    let mut best = (d0, s);
    let dg = at(guess);
    if dg < best.0 {
        best = (dg, guess);
    }
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (s - 1.0, s + 1.0);
    let (mut x1, mut x2) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
    let (mut f1, mut f2) = (at(x1), at(x2));
    for _ in 0..16 {
        if f1 < f2 {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - phi * (hi - lo);
            f1 = at(x1);
        } else {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + phi * (hi - lo);
            f2 = at(x2);
        }
    }
    for (f, x) in [(f1, x1), (f2, x2)] {
        if f < best.0 {
            best = (f, x);
        }
    }
    (best.0, best.1 * g.hz())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub far_field: FarField,
    /// Axial speed `c` of the frame; the advecting velocity is `v - c e2`.
    pub frame_speed: f64,
    /// Courant number limit checked before each step.
    pub cfl: f64,
    /// Interpolant for `ζ` at departure points.
    pub interpolation: Interpolation,
    /// Interpolant for the velocity at backtrace midpoints.
    pub velocity_interpolation: Interpolation,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            far_field: FarField::SingleRing,
            frame_speed: 0.0,
            cfl: 0.5,
            interpolation: Interpolation::BSpline,
            velocity_interpolation: Interpolation::BSpline,
        }
    }
}

/// Interpolated values below this fraction of `sup |ζ₀|` are set to zero, which keeps the
/// support compact against the spline's exponentially small tails.
pub const FLUSH: f64 = 1e-12;

/// Cells sampled each step: the support's bounding box widened by this many cells. The
/// B-spline tail falls by `2 - √3` per cell, below [`FLUSH`] after 21 cells.
const BAND: usize = 24;

/// Half-open index ranges of the bounding box of `zeta`'s support widened by `pad` cells.
fn band(zeta: &ScalarField, pad: usize) -> ((usize, usize), (usize, usize)) {
    let g = &zeta.grid;
    let (mut i0, mut i1, mut j0, mut j1) = (usize::MAX, 0, usize::MAX, 0);
    for i in 0..g.nr {
        for j in 0..g.nz {
            if zeta.at(i, j) != 0.0 {
                i0 = i0.min(i);
                i1 = i1.max(i + 1);
                j0 = j0.min(j);
                j1 = j1.max(j + 1);
            }
        }
    }
    if i0 == usize::MAX {
        return ((0, 0), (0, 0));
    }
    ((i0.saturating_sub(pad), (i1 + pad).min(g.nr)), (j0.saturating_sub(pad), (j1 + pad).min(g.nz)))
}

/// Field, stream function and monitor history.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub t: f64,
    pub zeta: ScalarField,
    pub psi: ScalarField,
    pub velocity: VelocityField,
    prev_velocity: Option<VelocityField>,
    pub monitors: Vec<Monitor>,
}

/// Semi-Lagrangian integrator for one grid.
pub struct Evolver {
    solver: LSolver,
    opts: EvolveOptions,
    reference: Option<ScalarField>,
    floor: f64,
    cap: f64,
}

impl Evolver {
    pub fn new(grid: AxisymGrid, opts: EvolveOptions) -> Self {
        Self { solver: LSolver::new(grid), opts, reference: None, floor: f64::NEG_INFINITY, cap: f64::INFINITY }
    }

    /// Tracks the distance to the translates of `reference` in the monitors.
    pub fn with_reference(mut self, reference: ScalarField) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn grid(&self) -> &AxisymGrid {
        self.solver.grid()
    }

    fn stream(&self, zeta: &ScalarField) -> Result<(ScalarField, VelocityField)> {
        let bv = self.opts.far_field.boundary_values(zeta);
        let psi = self.solver.solve_with(zeta, &bv)?;
        let v = velocity_from_stream(&psi, &bv);
        Ok((psi, v))
    }

    fn monitor(&self, t: f64, zeta: &ScalarField, psi: &ScalarField) -> Monitor {
        let g = &zeta.grid;
        let mut e = 0.0;
        for i in 0..g.nr {
            let nu = g.nu(i);
            let mut col = 0.0;
            for j in 0..g.nz {
                col += zeta.at(i, j) * psi.at(i, j);
            }
            e += col * nu;
        }
        Monitor {
            t,
            energy: 0.5 * e,
            impulse: impulse(zeta),
            l1: zeta.l1_nu(),
            l2: zeta.l2_nu(),
            sup: zeta.sup_norm(),
            sup_x1: zeta.sup_x1(),
            ring_distance: self.reference.as_ref().map(|r| translate_distance(zeta, r).0),
        }
    }

    /// Initial state at `t = 0`; fixes the clipping bounds from `ζ₀`.
    pub fn start(&mut self, zeta0: &ScalarField) -> Result<EvolutionState> {
        if zeta0.grid != *self.grid() {
            return Err(Error::Domain("initial field grid does not match evolver grid".into()));
        }
        if zeta0.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("initial vorticity must be finite".into()));
        }
        if zeta0.touches_boundary() {
            log::warn!("initial vorticity reaches the grid boundary");
        }
        self.floor = zeta0.values.iter().fold(0.0f64, |m, v| m.min(*v));
        self.cap = zeta0.values.iter().fold(0.0f64, |m, v| m.max(*v));
        let (psi, velocity) = self.stream(zeta0)?;
        let m = self.monitor(0.0, zeta0, &psi);
        Ok(EvolutionState { t: 0.0, zeta: zeta0.clone(), psi, velocity, prev_velocity: None, monitors: vec![m] })
    }

    /// Largest `dt` allowed by the Courant limit at the state's current velocity.
    pub fn max_dt(&self, state: &EvolutionState) -> f64 {
        let g = self.grid();
        let vmax = state.velocity.max_speed(self.opts.frame_speed);
        if vmax > 0.0 {
            self.opts.cfl * g.hr().min(g.hz()) / vmax
        } else {
            f64::INFINITY
        }
    }

    /// Advances by `dt`, failing before any update when the Courant limit is exceeded.
    pub fn step(&self, state: &EvolutionState, dt: f64) -> Result<EvolutionState> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step {dt} must be finite and nonnegative")));
        }
        let g = *self.grid();
        let h = g.hr().min(g.hz());
        let courant = dt * state.velocity.max_speed(self.opts.frame_speed) / h;
        if courant > self.opts.cfl * (1.0 + 1e-12) {
            return Err(Error::Cfl { courant });
        }
        let half = match &state.prev_velocity {
            Some(prev) => state.velocity.combine(1.5, prev, -0.5),
            None => state.velocity.clone(),
        };
        let c = self.opts.frame_speed;
        let (floor, cap) = (self.floor, self.cap);
        let src = Sampler::new(&state.zeta, self.opts.interpolation);
        // velocity at the midpoint, with v1 odd across the axis, held constant past the
        // outermost cell centres
        let vi = self.opts.velocity_interpolation;
        let s1 = Sampler::from_values(g, &half.v1, vi, -1.0);
        let s2 = Sampler::from_values(g, &half.v2, vi, 1.0);
        let (lo1, hi1, lo2, hi2) = (g.r(0), g.r(g.nr - 1), g.z(0), g.z(g.nz - 1));
        let vel = |x1: f64, x2: f64| -> (f64, f64) {
            let y1 = if g.r_min == 0.0 { x1.min(hi1) } else { x1.clamp(lo1, hi1) };
            let y2 = x2.clamp(lo2, hi2);
            (s1.sample(y1, y2), s2.sample(y1, y2))
        };
        let flush = FLUSH * floor.abs().max(cap);
        let ((i0, i1), (j0, j1)) = band(&state.zeta, BAND);
        let mut values = vec![0.0; g.len()];
        values.par_chunks_mut(g.nz).enumerate().skip(i0).take(i1 - i0).for_each(|(i, col)| {
            let x1 = g.r(i);
            for (j, out) in col.iter_mut().enumerate().skip(j0).take(j1 - j0) {
                let x2 = g.z(j);
                let k = g.idx(i, j);
                let (a1, a2) = (half.v1[k], half.v2[k]);
                let (m1, m2) = (x1 - 0.5 * dt * a1, x2 - 0.5 * dt * (a2 - c));
                let (b1, b2) = vel(m1, m2);
                let (d1, d2) = (x1 - dt * b1, x2 - dt * (b2 - c));
                let v = src.sample(d1.abs(), d2).clamp(floor, cap);
                *out = if v.abs() < flush { 0.0 } else { v };
            }
        });
        let zeta = ScalarField { grid: g, values, kind: FieldKind::Vorticity };
        if zeta.touches_boundary() {
            log::warn!("vorticity reached the grid boundary at t = {}", state.t + dt);
        }
        let (psi, velocity) = self.stream(&zeta)?;
        let t = state.t + dt;
        let mut monitors = state.monitors.clone();
        monitors.push(self.monitor(t, &zeta, &psi));
        Ok(EvolutionState { t, zeta, psi, velocity, prev_velocity: Some(state.velocity.clone()), monitors })
    }

    /// Evolves to `t_final` with steps of `dt` (the last one shortened), calling `observe`
    /// after every step.
    pub fn run_observed(
        &mut self,
        initial: &ScalarField,
        t_final: f64,
        dt: f64,
        observe: &mut dyn FnMut(usize, &EvolutionState) -> Result<()>,
    ) -> Result<EvolutionState> {
        if !(dt > 0.0) || !(t_final >= 0.0) {
            return Err(Error::Domain("dt must be positive and the final time nonnegative".into()));
        }
        let mut state = self.start(initial)?;
        let n = (t_final / dt - 1e-9).ceil().max(0.0) as usize;
        for k in 0..n {
            let step = dt.min(t_final - state.t);
            state = self.step(&state, step)?;
            observe(k + 1, &state)?;
        }
        Ok(state)
    }

    pub fn run(&mut self, initial: &ScalarField, t_final: f64, dt: f64) -> Result<EvolutionState> {
        self.run_observed(initial, t_final, dt, &mut |_, _| Ok(()))
    }
}

/// Physical mirror image `-ζ(x1, -x2)` on a grid symmetric in `x2`.
pub fn reflect(zeta: &ScalarField) -> ScalarField {
    let mut m = zeta.mirrored_z();
    m.values.iter_mut().for_each(|v| *v = -*v);
    m
}

/// `τ = 4π² s² / κ`, the revolution period of the core's edge.
pub fn turnover_time(core_radius: f64, kappa: f64) -> f64 {
    4.0 * std::f64::consts::PI.powi(2) * core_radius * core_radius / kappa
}

/// `ζ(c + ((x1 - c1)(1 + η), (x2 - c2)/(1 + η)))` rescaled to the same circulation.
pub fn elliptic_perturbation(zeta: &ScalarField, center: (f64, f64), eta: f64) -> ScalarField {
    let g = zeta.grid;
    let k = 1.0 + eta;
    let mut out = ScalarField::from_fn(g, FieldKind::Vorticity, |x1, x2| {
        bicubic(zeta, (center.0 + (x1 - center.0) * k).abs(), center.1 + (x2 - center.1) / k).max(0.0)
    });
    let (c0, c1) = (circulation(zeta), circulation(&out));
    if c1 > 0.0 {
        out.values.iter_mut().for_each(|v| *v *= c0 / c1);
    }
    out
}

/// `‖a - b‖_{L¹(ν)} + ‖a - b‖_{L²(ν)} + |P(a) - P(b)|`.
pub fn perturbation_size(a: &ScalarField, b: &ScalarField) -> f64 {
    let d = a.difference(b);
    d.l1_nu() + d.l2_nu() + (impulse(a) - impulse(b)).abs()
}

/// Elliptic perturbation of `zeta` whose [`perturbation_size`] is `delta`. Returns `(η, ω₀)`.
pub fn calibrated_perturbation(zeta: &ScalarField, center: (f64, f64), delta: f64) -> Result<(f64, ScalarField)> {
    if delta == 0.0 {
        return Ok((0.0, zeta.clone()));
    }
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("perturbation size {delta} must be nonnegative")));
    }
    let size = |eta: f64| perturbation_size(&elliptic_perturbation(zeta, center, eta), zeta);
    let (mut lo, mut hi) = (0.0, 0.05);
    while size(hi) < delta {
        lo = hi;
        hi *= 2.0;
        if hi > 4.0 {
            return Err(Error::Domain(format!("no elliptic perturbation reaches size {delta}")));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if size(mid) < delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eta = 0.5 * (lo + hi);
    Ok((eta, elliptic_perturbation(zeta, center, eta)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    /// Courant number of the fixed step, taken from the initial velocity.
    pub cfl: f64,
    /// Safety factor on the initial speed so later velocity growth stays under the limit.
    pub speed_margin: f64,
    /// When set, the initial data is the ring translated by this many cells instead.
    pub translate_cells: Option<isize>,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self { cfl: 0.5, speed_margin: 1.1, translate_cells: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub delta: f64,
    pub eta: f64,
    pub turnover: f64,
    pub dt: f64,
    pub steps: usize,
    pub distances: Vec<(f64, f64)>,
    pub initial_distance: f64,
    pub sup_distance: f64,
    /// Mean distance over the last fifth of the run divided by that over the first fifth.
    pub growth_ratio: f64,
    pub drift: Drift,
}

/// Evolves a perturbed ring in its co-moving frame and records the distance to its translates.
pub fn stability_experiment(ring: &SteadyRing, delta: f64, t_final: f64) -> Result<StabilityReport> {
    stability_experiment_with(ring, delta, t_final, &StabilityOptions::default())
}

pub fn stability_experiment_with(ring: &SteadyRing, delta: f64, t_final: f64, opts: &StabilityOptions) -> Result<StabilityReport> {
    let zeta = &ring.zeta;
    let center = zeta.centroid().ok_or_else(|| Error::Domain("ring has no vorticity".into()))?;
    let (eta, omega0) = match opts.translate_cells {
        Some(k) => (0.0, zeta.shifted_z(k)),
        None => calibrated_perturbation(zeta, center, delta)?,
    };
    let eo = EvolveOptions { far_field: ring.far_field, frame_speed: ring.spec.speed(), cfl: opts.cfl, ..Default::default() };
    let mut ev = Evolver::new(zeta.grid, eo).with_reference(zeta.clone());
    let s0 = ev.start(&omega0)?;
    let dt = ev.max_dt(&s0) / opts.speed_margin;
    let mut distances = Vec::new();
    let mut record = |_: usize, s: &EvolutionState| -> Result<()> {
        distances.push((s.t, s.monitors.last().and_then(|m| m.ring_distance).unwrap_or(f64::NAN)));
        Ok(())
    };
    let end = ev.run_observed(&omega0, t_final, dt, &mut record)?;
    let initial_distance = end.monitors[0].ring_distance.unwrap_or(f64::NAN);
    distances.insert(0, (0.0, initial_distance));
    let sup_distance = distances.iter().fold(0.0f64, |m, d| m.max(d.1));
    let n = distances.len();
    let k = (n / 5).max(1);
    let mean = |s: &[(f64, f64)]| s.iter().map(|d| d.1).sum::<f64>() / s.len() as f64;
    let (early, late) = (mean(&distances[..k]), mean(&distances[n - k..]));
    let growth_ratio = if early > 0.0 { late / early } else if late > 0.0 { f64::INFINITY } else { 1.0 };
    Ok(StabilityReport {
        delta,
        eta,
        turnover: turnover_time(ring.support_radius, ring.spec.kappa),
        dt,
        steps: n - 1,
        distances,
        initial_distance,
        sup_distance,
        growth_ratio,
        drift: Drift::of(&end.monitors),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(g: AxisymGrid, c: (f64, f64), s: f64) -> ScalarField {
        ScalarField::from_fn(g, FieldKind::Vorticity, |x1, x2| {
            let q = 1.0 - ((x1 - c.0).powi(2) + (x2 - c.1).powi(2)) / (s * s);
            if q > 0.0 {
                q * q
            } else {
                0.0
            }
        })
    }

    #[test]
    fn keys_reproduces_cubics_and_nodes() {
        let w = keys_weights(0.0);
        assert_eq!(w, [0.0, 1.0, 0.0, 0.0]);
        for t in [0.1, 0.37, 0.8] {
            let w = keys_weights(t);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            // quadratic reproduction at nodes -1, 0, 1, 2
            let q: f64 = w.iter().zip([-1.0f64, 0.0, 1.0, 2.0]).map(|(a, x)| a * x * x).sum();
            assert!((q - t * t).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_vorticity_has_zero_velocity() {
        let g = AxisymGrid::new(0.0, 2.0, -1.0, 1.0, 16, 16).unwrap();
        let v = velocity(&ScalarField::zeros(g, FieldKind::Vorticity), FarField::SingleRing).unwrap();
        assert_eq!(v.max_speed(0.0), 0.0);
    }

    #[test]
    fn mirror_negates_axial_component() {
        let g = AxisymGrid::new(0.0, 2.0, -1.0, 1.0, 32, 32).unwrap();
        let z = blob(g, (1.0, 0.2), 0.3);
        let v = velocity(&z, FarField::SingleRing).unwrap();
        let vm = velocity(&reflect(&z), FarField::SingleRing).unwrap();
        for i in 0..g.nr {
            for j in 0..g.nz {
                let (k, km) = (g.idx(i, j), g.idx(i, g.nz - 1 - j));
                assert!((v.v1[k] - vm.v1[km]).abs() < 1e-12, "{} {} {i} {j}", v.v1[k], vm.v1[km]);
                assert!((v.v2[k] + vm.v2[km]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let g = AxisymGrid::new(0.0, 2.0, -1.0, 1.0, 32, 32).unwrap();
        let z = blob(g, (1.0, 0.0), 0.3);
        let mut ev = Evolver::new(g, EvolveOptions::default());
        let s = ev.start(&z).unwrap();
        let s1 = ev.step(&s, 0.0).unwrap();
        assert!(s1.zeta.difference(&z).sup_norm() <= 1e-13 * z.sup_norm());
        let mut keys = Evolver::new(g, EvolveOptions { interpolation: Interpolation::Keys, ..Default::default() });
        let s = keys.start(&z).unwrap();
        assert_eq!(keys.step(&s, 0.0).unwrap().zeta.values, z.values);
        assert_eq!(s1.monitors.len(), 2);
    }

    #[test]
    fn courant_limit_is_checked_before_stepping() {
        let g = AxisymGrid::new(0.0, 2.0, -1.0, 1.0, 16, 16).unwrap();
        let z = blob(g, (1.0, 0.0), 0.4);
        let mut ev = Evolver::new(g, EvolveOptions::default());
        let s = ev.start(&z).unwrap();
        let dt = 3.0 * ev.max_dt(&s);
        assert!(matches!(ev.step(&s, dt), Err(Error::Cfl { .. })));
    }

    #[test]
    fn evolution_commutes_with_mirror() {
        let g = AxisymGrid::new(0.0, 2.0, -1.0, 1.0, 32, 32).unwrap();
        let z = blob(g, (1.0, 0.15), 0.3);
        let mut a = Evolver::new(g, EvolveOptions { frame_speed: 0.1, ..Default::default() });
        let mut b = Evolver::new(g, EvolveOptions { frame_speed: -0.1, ..Default::default() });
        let sa = a.start(&z).unwrap();
        let dt = 0.5 * a.max_dt(&sa);
        let ea = a.run(&z, 10.0 * dt, dt).unwrap();
        let eb = b.run(&reflect(&z), 10.0 * dt, dt).unwrap();
        let d = reflect(&ea.zeta).difference(&eb.zeta).sup_norm();
        assert!(d <= 1e-12 * z.sup_norm(), "{d}");
    }

    #[test]
    fn transport_keeps_bounds() {
        let g = AxisymGrid::new(0.0, 2.0, -1.0, 1.0, 32, 32).unwrap();
        let z = blob(g, (1.0, 0.0), 0.3);
        let mut ev = Evolver::new(g, EvolveOptions::default());
        let s = ev.start(&z).unwrap();
        let dt = 0.5 * ev.max_dt(&s);
        let end = ev.run(&z, 20.0 * dt, dt).unwrap();
        let cap = z.sup_norm();
        assert!(end.zeta.values.iter().all(|v| *v >= 0.0 && *v <= cap));
        assert_eq!(end.monitors.len(), 21);
    }

    #[test]
    fn translate_distance_finds_subcell_shift() {
        let g = AxisymGrid::new(0.0, 2.0, -1.0, 1.0, 64, 64).unwrap();
        let a = blob(g, (1.0, 0.0), 0.3);
        let b = blob(g, (1.0, 0.1), 0.3);
        let (d, c) = translate_distance(&a, &b);
        assert!((c - 0.1).abs() < 0.3 * g.hz(), "{c}");
        assert!(d < 0.05 * a.l1_nu(), "{d}");
        assert_eq!(translate_distance(&a, &a), (0.0, 0.0));
    }

    #[test]
    fn calibration_hits_requested_size() {
        let g = AxisymGrid::new(0.0, 2.0, -1.0, 1.0, 64, 64).unwrap();
        let z = blob(g, (1.0, 0.0), 0.3);
        let c = z.centroid().unwrap();
        let (eta, w) = calibrated_perturbation(&z, c, 0.05).unwrap();
        assert!(eta > 0.0);
        assert!((perturbation_size(&w, &z) - 0.05).abs() < 1e-6);
        assert!((circulation(&w) - circulation(&z)).abs() < 1e-12);
    }
}
