//! Cell-centred grids on the meridional half plane, fields on them, and the weighted
//! functionals of the vorticity formulation.
//!
//! All functionals use the measure `ν = x1 dx` and the 2π-divided convention:
//! `E(ζ) = ½ ∫ ζ 𝒢1ζ dν`, `P(ζ) = ½ ∫ ζ x1² dν`, `𝓔_𝒲 = E - 𝒲 P`, with
//! `𝒢1ζ(x) = ∫ G1(x, y) ζ(y) dν(y)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::{self, NEAR_CONSTANT};
use crate::special::mean_log_rect;

/// Uniform cell-centred grid on `[r_min, r_max] x [z_min, z_max]`.
///
/// Values are stored radius-major: index `i * nz + j` for radial cell `i`, axial cell `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisymGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub nr: usize,
    pub nz: usize,
}

impl AxisymGrid {
    pub fn new(r_min: f64, r_max: f64, z_min: f64, z_max: f64, nr: usize, nz: usize) -> Result<Self> {
        let finite = [r_min, r_max, z_min, z_max].iter().all(|v| v.is_finite());
        if !finite || r_min < 0.0 || r_max <= r_min || z_max <= z_min || nr == 0 || nz == 0 {
            return Err(Error::Domain(format!(
                "invalid grid [{r_min}, {r_max}] x [{z_min}, {z_max}] with {nr} x {nz} cells"
            )));
        }
        Ok(Self { r_min, r_max, z_min, z_max, nr, nz })
    }

    /// Default truncation `[0, 4 r*] x [-2 r*, 2 r*]`.
    pub fn around_ring(r_star: f64, nr: usize, nz: usize) -> Result<Self> {
        Self::new(0.0, 4.0 * r_star, -2.0 * r_star, 2.0 * r_star, nr, nz)
    }

    #[inline]
    pub fn hr(&self) -> f64 {
        (self.r_max - self.r_min) / self.nr as f64
    }

    #[inline]
    pub fn hz(&self) -> f64 {
        (self.z_max - self.z_min) / self.nz as f64
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        self.r_min + (i as f64 + 0.5) * self.hr()
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        self.z_min + (j as f64 + 0.5) * self.hz()
    }

    /// Radius of the face between cells `i - 1` and `i`.
    #[inline]
    pub fn r_face(&self, i: usize) -> f64 {
        self.r_min + i as f64 * self.hr()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nz + j
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nr * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// ν-mass of a cell in column `i`.
    #[inline]
    pub fn nu(&self, i: usize) -> f64 {
        self.r(i) * self.hr() * self.hz()
    }

    /// Cell area `hr * hz`.
    #[inline]
    pub fn area(&self) -> f64 {
        self.hr() * self.hz()
    }

    /// Fractional cell coordinates of a point (cell centres at integers).
    #[inline]
    pub fn frac_index(&self, x1: f64, x2: f64) -> (f64, f64) {
        ((x1 - self.r_min) / self.hr() - 0.5, (x2 - self.z_min) / self.hz() - 0.5)
    }

    /// Same extents with each spacing halved.
    pub fn refined(&self) -> Self {
        Self { nr: 2 * self.nr, nz: 2 * self.nz, ..*self }
    }

    /// True if reflection `x2 -> -x2` maps cells to cells.
    pub fn is_symmetric_in_z(&self) -> bool {
        (self.z_min + self.z_max).abs() <= 1e-12 * (self.z_max - self.z_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    Vorticity,
    Stream,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: AxisymGrid,
    pub values: Vec<f64>,
    pub kind: FieldKind,
}

impl ScalarField {
    pub fn zeros(grid: AxisymGrid, kind: FieldKind) -> Self {
        Self { grid, values: vec![0.0; grid.len()], kind }
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: AxisymGrid, kind: FieldKind, f: F) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nr {
            let r = grid.r(i);
            for j in 0..grid.nz {
                values.push(f(r, grid.z(j)));
            }
        }
        Self { grid, values, kind }
    }

    pub fn from_values(grid: AxisymGrid, kind: FieldKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!("expected {} values, got {}", grid.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("field values must be finite".into()));
        }
        if kind == FieldKind::Vorticity && values.iter().any(|v| *v < 0.0) {
            return Err(Error::Domain("vorticity field must be nonnegative".into()));
        }
        Ok(Self { grid, values, kind })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    /// Bilinear interpolation between cell centres; `None` outside their hull.
    pub fn bilinear(&self, x1: f64, x2: f64) -> Option<f64> {
        let g = &self.grid;
        let (fi, fj) = g.frac_index(x1, x2);
        if !(fi >= 0.0 && fj >= 0.0 && fi <= (g.nr - 1) as f64 && fj <= (g.nz - 1) as f64) {
            return None;
        }
        let i = (fi as usize).min(g.nr.saturating_sub(2));
        let j = (fj as usize).min(g.nz.saturating_sub(2));
        let (ti, tj) = (fi - i as f64, fj - j as f64);
        let (i1, j1) = ((i + 1).min(g.nr - 1), (j + 1).min(g.nz - 1));
        let lo = self.at(i, j) * (1.0 - tj) + self.at(i, j1) * tj;
        let hi = self.at(i1, j) * (1.0 - tj) + self.at(i1, j1) * tj;
        Some(lo * (1.0 - ti) + hi * ti)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Cells with nonzero value, as `(i, j)`.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let g = &self.grid;
        let mut out = Vec::new();
        for i in 0..g.nr {
            for j in 0..g.nz {
                if self.values[g.idx(i, j)] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// True when any outermost cell (excluding the axis column) is nonzero.
    pub fn touches_boundary(&self) -> bool {
        let g = &self.grid;
        let edge_r = (0..g.nz).any(|j| self.at(g.nr - 1, j) != 0.0 || (g.r_min > 0.0 && self.at(0, j) != 0.0));
        let edge_z = (0..g.nr).any(|i| self.at(i, 0) != 0.0 || self.at(i, g.nz - 1) != 0.0);
        edge_r || edge_z
    }

    /// ν-weighted centroid `(∫x1 ζ dν, ∫x2 ζ dν) / ∫ζ dν`.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let g = &self.grid;
        let (mut m, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..g.nr {
            let nu = g.nu(i);
            let r = g.r(i);
            for j in 0..g.nz {
                let w = self.values[g.idx(i, j)] * nu;
                m += w;
                m1 += w * r;
                m2 += w * g.z(j);
            }
        }
        if m != 0.0 {
            Some((m1 / m, m2 / m))
        } else {
            None
        }
    }

    /// Copy shifted by `s` cells in `x2` (values leaving the grid are dropped).
    pub fn shifted_z(&self, s: isize) -> Self {
        let g = &self.grid;
        let mut out = Self::zeros(*g, self.kind);
        for i in 0..g.nr {
            for j in 0..g.nz {
                let jj = j as isize + s;
                if jj >= 0 && (jj as usize) < g.nz {
                    out.values[g.idx(i, jj as usize)] = self.values[g.idx(i, j)];
                }
            }
        }
        out
    }

    /// Mirror image under `x2 -> -x2` on a symmetric grid.
    pub fn mirrored_z(&self) -> Self {
        let g = &self.grid;
        let mut out = Self::zeros(*g, self.kind);
        for i in 0..g.nr {
            for j in 0..g.nz {
                out.values[g.idx(i, g.nz - 1 - j)] = self.values[g.idx(i, j)];
            }
        }
        out
    }

    /// `‖f‖_{L¹(ν)}`.
    pub fn l1_nu(&self) -> f64 {
        weighted_sum(&self.grid, &self.values, |v| v.abs())
    }

    /// `‖f‖_{L²(ν)}`.
    pub fn l2_nu(&self) -> f64 {
        weighted_sum(&self.grid, &self.values, |v| v * v).sqrt()
    }

    /// `sup |x1 f|`.
    pub fn sup_x1(&self) -> f64 {
        let g = &self.grid;
        let mut m: f64 = 0.0;
        for i in 0..g.nr {
            let r = g.r(i);
            for j in 0..g.nz {
                m = m.max((r * self.values[g.idx(i, j)]).abs());
            }
        }
        m
    }

    /// Pointwise difference `self - other` on the same grid.
    pub fn difference(&self, other: &Self) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Self { grid: self.grid, values, kind: self.kind }
    }
}

fn weighted_sum<F: Fn(f64) -> f64>(g: &AxisymGrid, v: &[f64], f: F) -> f64 {
    let mut s = 0.0;
    for i in 0..g.nr {
        let nu = g.nu(i);
        let mut col = 0.0;
        for j in 0..g.nz {
            col += f(v[g.idx(i, j)]);
        }
        s += col * nu;
    }
    s
}

/// `∫ ζ dν`.
pub fn circulation(zeta: &ScalarField) -> f64 {
    weighted_sum(&zeta.grid, &zeta.values, |v| v)
}

/// `½ ∫ ζ x1² dν`.
pub fn impulse(zeta: &ScalarField) -> f64 {
    let g = &zeta.grid;
    let mut s = 0.0;
    for i in 0..g.nr {
        let r = g.r(i);
        let mut col = 0.0;
        for j in 0..g.nz {
            col += zeta.values[g.idx(i, j)];
        }
        s += col * r * r * g.nu(i);
    }
    0.5 * s
}

/// Average of `G1(x, ·)` over the cell centred at `x` (near form, log average).
pub fn self_cell_green(g: &AxisymGrid, i: usize) -> f64 {
    let x1 = g.r(i);
    // ln(1/ρ) with ρ = |x-y|²/x1² averaged over the cell
    let mean_ln_inv_rho = 2.0 * x1.ln() - 2.0 * mean_log_rect(g.hr(), g.hz());
    x1 / (4.0 * PI) * (mean_ln_inv_rho + NEAR_CONSTANT)
}

/// Kernel matrix entry between cells `a = (i, j)` and `b = (k, l)`.
#[inline]
pub fn cell_green(g: &AxisymGrid, a: (usize, usize), b: (usize, usize)) -> f64 {
    if a == b {
        self_cell_green(g, a.0)
    } else {
        green::g1_fast(g.r(a.0), g.z(a.1), g.r(b.0), g.z(b.1))
    }
}

/// `𝒢1ζ` at every cell in `targets` by direct summation over the support of `zeta`.
pub fn green_potential_at(zeta: &ScalarField, targets: &[(usize, usize)]) -> Vec<f64> {
    let g = zeta.grid;
    let src: Vec<((usize, usize), f64)> =
        zeta.support().into_iter().map(|(i, j)| ((i, j), zeta.at(i, j) * g.nu(i))).collect();
    targets
        .par_iter()
        .map(|&t| src.iter().map(|&(s, q)| q * cell_green(&g, t, s)).sum())
        .collect()
}

/// `E(ζ) = ½ ΣΣ ζ(x) G1(x,y) ζ(y) ν(x) ν(y)` with the self-cell rule on the diagonal.
///
/// Works for signed fields; the reduction order is fixed.
pub fn energy(zeta: &ScalarField) -> f64 {
    let g = zeta.grid;
    let src: Vec<((usize, usize), f64)> =
        zeta.support().into_iter().map(|(i, j)| ((i, j), zeta.at(i, j) * g.nu(i))).collect();
    if zeta.kind == FieldKind::Vorticity && zeta.touches_boundary() {
        log::warn!("vorticity support reaches the grid boundary; energy is truncated");
    }
    let rows: Vec<f64> = (0..src.len())
        .into_par_iter()
        .map(|a| {
            let (ca, qa) = src[a];
            let mut s = 0.5 * qa * self_cell_green(&g, ca.0);
            for &(cb, qb) in &src[a + 1..] {
                s += qb * green::g1_fast(g.r(ca.0), g.z(ca.1), g.r(cb.0), g.z(cb.1));
            }
            qa * s
        })
        .collect();
    rows.iter().sum()
}

/// `𝓔_𝒲 = E - 𝒲 P`.
pub fn e_w(zeta: &ScalarField, w_speed: f64) -> f64 {
    energy(zeta) - w_speed * impulse(zeta)
}

/// Axial slots of a column ordered by `(|x2|, x2 >= 0 first)`.
pub fn steiner_slots(g: &AxisymGrid) -> Vec<usize> {
    let mut slots: Vec<usize> = (0..g.nz).collect();
    slots.sort_by(|&a, &b| {
        let (za, zb) = (g.z(a), g.z(b));
        za.abs()
            .partial_cmp(&zb.abs())
            .unwrap()
            .then_with(|| (za < 0.0).cmp(&(zb < 0.0)))
            .then_with(|| a.cmp(&b))
    });
    slots
}

/// Steiner symmetrisation about `x2 = 0`: each column is rearranged to be
/// nonincreasing in `|x2|`.
pub fn steiner_symmetrize(zeta: &ScalarField) -> ScalarField {
    let g = zeta.grid;
    let slots = steiner_slots(&g);
    let mut out = zeta.clone();
    out.values.par_chunks_mut(g.nz).enumerate().for_each(|(i, col)| {
        let mut vals: Vec<f64> = zeta.values[i * g.nz..(i + 1) * g.nz].to_vec();
        vals.sort_by(|a, b| b.total_cmp(a));
        for (v, &s) in vals.iter().zip(&slots) {
            col[s] = *v;
        }
    });
    out
}

/// ν-distribution of the positive part of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RearrangementClass {
    /// `(value, ν-mass)` sorted by decreasing value, equal values merged.
    pub pairs: Vec<(f64, f64)>,
    pub total_mass: f64,
    pub total_circulation: f64,
}

impl RearrangementClass {
    pub fn from_pairs(mut raw: Vec<(f64, f64)>) -> Self {
        raw.retain(|&(v, m)| v > 0.0 && m > 0.0);
        raw.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (v, m) in raw {
            match pairs.last_mut() {
                Some(last) if last.0 == v => last.1 += m,
                _ => pairs.push((v, m)),
            }
        }
        let total_mass = pairs.iter().map(|p| p.1).sum();
        let total_circulation = pairs.iter().map(|p| p.0 * p.1).sum();
        Self { pairs, total_mass, total_circulation }
    }

    /// Largest value of the class.
    pub fn sup(&self) -> f64 {
        self.pairs.first().map_or(0.0, |p| p.0)
    }
}

pub fn class_of(zeta: &ScalarField) -> RearrangementClass {
    let g = &zeta.grid;
    let mut raw = Vec::new();
    for i in 0..g.nr {
        let nu = g.nu(i);
        for j in 0..g.nz {
            let v = zeta.values[g.idx(i, j)];
            if v > 0.0 {
                raw.push((v, nu));
            }
        }
    }
    RearrangementClass::from_pairs(raw)
}

/// L¹ distance between the decreasing rearrangements of two classes.
pub fn class_distance(a: &RearrangementClass, b: &RearrangementClass) -> f64 {
    let (mut ia, mut ib) = (0usize, 0usize);
    let (mut ra, mut rb) = (
        a.pairs.first().map_or(0.0, |p| p.1),
        b.pairs.first().map_or(0.0, |p| p.1),
    );
    let mut d = 0.0;
    loop {
        let va = a.pairs.get(ia).map_or(0.0, |p| p.0);
        let vb = b.pairs.get(ib).map_or(0.0, |p| p.0);
        let a_done = ia >= a.pairs.len();
        let b_done = ib >= b.pairs.len();
        if a_done && b_done {
            break;
        }
        let step = if a_done {
            rb
        } else if b_done {
            ra
        } else {
            ra.min(rb)
        };
        d += (va - vb).abs() * step;
        if !a_done {
            ra -= step;
            if ra <= 0.0 {
                ia += 1;
                ra = a.pairs.get(ia).map_or(0.0, |p| p.1);
            }
        }
        if !b_done {
            rb -= step;
            if rb <= 0.0 {
                ib += 1;
                rb = b.pairs.get(ib).map_or(0.0, |p| p.1);
            }
        }
    }
    d
}

/// True when the rearrangement distance is at most `tol` times the larger circulation.
pub fn same_class(a: &RearrangementClass, b: &RearrangementClass, tol: f64) -> bool {
    let scale = a.total_circulation.max(b.total_circulation);
    class_distance(a, b) <= tol * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> AxisymGrid {
        AxisymGrid::new(0.0, 2.0, -1.0, 1.0, 8, 8).unwrap()
    }

    #[test]
    fn circulation_and_impulse_of_single_cell() {
        let g = grid();
        let mut z = ScalarField::zeros(g, FieldKind::Vorticity);
        assert_eq!(circulation(&z), 0.0);
        z.values[g.idx(3, 2)] = 2.5;
        assert!((circulation(&z) - 2.5 * g.nu(3)).abs() < 1e-15);
        let r = g.r(3);
        assert!((impulse(&z) - 0.5 * 2.5 * r * r * g.nu(3)).abs() < 1e-15);
    }

    #[test]
    fn steiner_moves_single_cell_to_centre_slot() {
        let g = grid();
        let mut z = ScalarField::zeros(g, FieldKind::Vorticity);
        z.values[g.idx(5, 0)] = 1.0;
        let s = steiner_symmetrize(&z);
        let slot = steiner_slots(&g)[0];
        assert_eq!(s.at(5, slot), 1.0);
        assert_eq!(g.z(slot), g.hz() / 2.0);
        assert_eq!(s.values.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn same_class_under_grid_translation_but_not_scaling() {
        let g = grid();
        let z = ScalarField::from_fn(g, FieldKind::Vorticity, |r, x2| (0.5 - (r - 1.0).powi(2) - x2 * x2).max(0.0));
        let mut doubled = z.clone();
        doubled.values.iter_mut().for_each(|v| *v *= 2.0);
        let cz = class_of(&z);
        assert!(same_class(&cz, &class_of(&z.shifted_z(0)), 0.0));
        // a one-cell shift that keeps the support inside the grid preserves the class
        let zt = ScalarField::from_fn(g, FieldKind::Vorticity, |r, x2| (0.2 - (r - 1.0).powi(2) - x2 * x2).max(0.0));
        assert!(same_class(&class_of(&zt), &class_of(&zt.shifted_z(1)), 1e-14));
        assert!(!same_class(&cz, &class_of(&doubled), 0.1));
    }

    #[test]
    fn rectangle_self_term_is_finite_and_positive() {
        let g = AxisymGrid::new(0.0, 4.0, -2.0, 2.0, 256, 256).unwrap();
        let s = self_cell_green(&g, 64);
        let neighbour = green::g1_fast(g.r(64), g.z(0), g.r(64), g.z(1));
        assert!(s > neighbour && s.is_finite());
    }
}
