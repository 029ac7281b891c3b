//! Energy maximisation over a rearrangement class by alternating bathtub filling and Steiner
//! symmetrisation.
//!
//! The functional is `𝓔_𝒲(ζ) = ½⟨ζ, 𝒢ζ⟩_ν - 𝒲 P(ζ)`, where `𝒢` is supplied by a [`Kernel`].
//! Each bathtub step places the class along the level sets of `Φ = 𝒢ζ - (𝒲/2)x1²`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    class_of, green_potential_at, impulse, steiner_symmetrize, AxisymGrid, FieldKind, RearrangementClass, ScalarField,
};
use crate::operator::{FarField, LSolver};
use crate::steady::{support_diameter, RingSpec};

/// Source of the potential `𝒢ζ`.
pub trait Kernel: Send + Sync {
    fn potential(&self, zeta: &ScalarField) -> Result<ScalarField>;
    /// True when `⟨a, 𝒢b⟩_ν = ⟨𝒢a, b⟩_ν`, which makes the ascent exact.
    fn symmetric(&self) -> bool;
    fn name(&self) -> &'static str;
}

/// Direct `G1` summation with the self-cell log-average rule. Cost grows with cells × support.
#[derive(Debug, Clone, Copy, Default)]
pub struct DenseGreen;

impl Kernel for DenseGreen {
    fn potential(&self, zeta: &ScalarField) -> Result<ScalarField> {
        let g = zeta.grid;
        let targets: Vec<(usize, usize)> = (0..g.nr).flat_map(|i| (0..g.nz).map(move |j| (i, j))).collect();
        ScalarField::from_values(g, FieldKind::Stream, green_potential_at(zeta, &targets))
    }

    fn symmetric(&self) -> bool {
        true
    }

    fn name(&self) -> &'static str {
        "dense-green"
    }
}

/// Inverse of the discrete operator with a far-field rule for the boundary data.
#[derive(Debug)]
pub struct GridKernel {
    solver: LSolver,
    far: FarField,
}

impl GridKernel {
    pub fn new(grid: AxisymGrid, far: FarField) -> Self {
        Self { solver: LSolver::new(grid), far }
    }

    pub fn grid(&self) -> &AxisymGrid {
        self.solver.grid()
    }
}

impl Kernel for GridKernel {
    fn potential(&self, zeta: &ScalarField) -> Result<ScalarField> {
        if zeta.grid != *self.solver.grid() {
            return Err(Error::Precondition("field grid differs from the kernel grid".into()));
        }
        self.solver.solve(zeta, self.far)
    }

    fn symmetric(&self) -> bool {
        self.far == FarField::Zero
    }

    fn name(&self) -> &'static str {
        match self.far {
            FarField::Zero => "grid-zero",
            FarField::SingleRing => "grid-single-ring",
            FarField::GreenSum => "grid-green-sum",
        }
    }
}

/// `½ Σ ζ ψ ν`.
pub fn paired_energy(zeta: &ScalarField, potential: &ScalarField) -> f64 {
    let g = &zeta.grid;
    let mut e = 0.0;
    for i in 0..g.nr {
        let nu = g.nu(i);
        let mut col = 0.0;
        for j in 0..g.nz {
            let k = g.idx(i, j);
            col += zeta.values[k] * potential.values[k];
        }
        e += col * nu;
    }
    0.5 * e
}

/// `(𝓔_𝒲(ζ), 𝒢ζ)`.
pub fn energy_with(kernel: &dyn Kernel, zeta: &ScalarField, w_speed: f64) -> Result<(f64, ScalarField)> {
    let pot = kernel.potential(zeta)?;
    Ok((paired_energy(zeta, &pot) - w_speed * impulse(zeta), pot))
}

/// `Φ = 𝒢ζ - (𝒲/2) x1²` from a potential.
pub fn phi_from_potential(potential: &ScalarField, w_speed: f64) -> ScalarField {
    let g = potential.grid;
    let mut out = potential.clone();
    for i in 0..g.nr {
        let q = 0.5 * w_speed * g.r(i) * g.r(i);
        for j in 0..g.nz {
            out.values[g.idx(i, j)] -= q;
        }
    }
    out
}

/// Cell order `(Φ desc, x1 asc, x2 asc)`.
pub fn fill_order(phi: &ScalarField) -> Vec<usize> {
    let g = &phi.grid;
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&a, &b| {
        phi.values[b].total_cmp(&phi.values[a]).then_with(|| (a / g.nz).cmp(&(b / g.nz))).then_with(|| a.cmp(&b))
    });
    order
}

/// Places the class along `order`: largest values first, each cell receiving its ν-mass, atoms
/// split across cells where needed.
pub fn fill_along(class: &RearrangementClass, grid: AxisymGrid, order: &[usize]) -> Result<ScalarField> {
    let grid_mass: f64 = (0..grid.nr).map(|i| grid.nu(i) * grid.nz as f64).sum();
    if class.total_mass > grid_mass * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "class mass {} exceeds the grid mass {grid_mass}",
            class.total_mass
        )));
    }
    let mut values = vec![0.0; grid.len()];
    let mut atoms = class.pairs.iter().copied();
    let mut current = atoms.next();
    for &k in order {
        let Some((mut v, mut rem)) = current else { break };
        let nu = grid.nu(k / grid.nz);
        let mut cap = nu;
        let mut acc = 0.0;
        loop {
            let take = cap.min(rem);
            acc += v * take;
            cap -= take;
            rem -= take;
            if rem <= 1e-15 * nu {
                match atoms.next() {
                    Some((nv, nm)) => {
                        v = nv;
                        rem = nm;
                    }
                    None => {
                        current = None;
                        break;
                    }
                }
            }
            if cap <= 1e-15 * nu {
                current = Some((v, rem));
                break;
            }
        }
        values[k] = acc / nu;
    }
    ScalarField::from_values(grid, FieldKind::Vorticity, values)
}

/// Maximiser of `∫ ζ' Φ dν` over the class, for a given `Φ`.
pub fn bathtub_fill(class: &RearrangementClass, phi: &ScalarField) -> Result<ScalarField> {
    fill_along(class, phi.grid, &fill_order(phi))
}

/// One bathtub step from `ζ`, redistributing its own class.
pub fn bathtub_step(zeta: &ScalarField, w_speed: f64, kernel: &dyn Kernel) -> Result<ScalarField> {
    let pot = kernel.potential(zeta)?;
    bathtub_fill(&class_of(zeta), &phi_from_potential(&pot, w_speed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximizeOptions {
    /// `𝒲`, usually `W ln(1/ε)`.
    pub w_speed: f64,
    pub max_iter: usize,
    /// Stop when the gain of a full iteration is at most `tol · |𝓔|`.
    pub tol: f64,
    /// Steiner symmetrisation every `k` bathtub steps; 0 disables it.
    pub symmetrize_every: usize,
}

impl MaximizeOptions {
    pub fn for_spec(spec: &RingSpec) -> Self {
        Self { w_speed: spec.speed(), max_iter: 500, tol: 1e-12, symmetrize_every: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Initial,
    Bathtub,
    Steiner,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub stage: Stage,
    pub energy: f64,
    pub diameter: f64,
    pub centroid: (f64, f64),
}

/// Outcome of [`maximize`].
#[derive(Debug, Clone)]
pub struct MaximizerRun {
    pub class: RearrangementClass,
    pub w_speed: f64,
    /// Every stage of every iteration.
    pub trace: Vec<TraceEntry>,
    /// `𝓔_𝒲` after each full iteration, starting with the initial field.
    pub energies: Vec<f64>,
    pub result: ScalarField,
    /// `Φ = 𝒢ζ - (𝒲/2)x1²` of the result.
    pub phi: ScalarField,
    pub iterations: usize,
    pub converged: bool,
    /// Set when an iteration failed to gain and the best iterate is returned.
    pub stagnated: bool,
    /// Largest relative decrease seen at any stage (0 for an exact ascent).
    pub worst_decrease: f64,
    pub kernel: String,
    pub profile: ProfileFit,
}

impl MaximizerRun {
    pub fn energy(&self) -> f64 {
        *self.energies.last().unwrap()
    }
}

fn entry(iter: usize, stage: Stage, energy: f64, zeta: &ScalarField) -> TraceEntry {
    TraceEntry {
        iter,
        stage,
        energy,
        diameter: support_diameter(zeta),
        centroid: zeta.centroid().unwrap_or((f64::NAN, f64::NAN)),
    }
}

/// Ascent from `zeta0` within its class.
pub fn maximize(zeta0: &ScalarField, kernel: &dyn Kernel, opts: &MaximizeOptions) -> Result<MaximizerRun> {
    if zeta0.values.iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("initial vorticity must be nonnegative".into()));
    }
    let class = class_of(zeta0);
    let w = opts.w_speed;
    let (mut e, mut pot) = energy_with(kernel, zeta0, w)?;
    let mut zeta = zeta0.clone();
    let mut trace = vec![entry(0, Stage::Initial, e, &zeta)];
    let mut energies = vec![e];
    let mut best = (e, zeta.clone(), pot.clone());
    let mut worst_decrease: f64 = 0.0;
    let (mut converged, mut stagnated) = (false, false);
    let mut misses = 0;
    let mut iterations = 0;
    let scale = |e: f64| e.abs().max(f64::MIN_POSITIVE);
    for it in 1..=opts.max_iter {
        iterations = it;
        let order = fill_order(&phi_from_potential(&pot, w));
        let mut next = fill_along(&class, zeta.grid, &order)?;
        let (mut e_next, mut pot_next) = energy_with(kernel, &next, w)?;
        worst_decrease = worst_decrease.max((e - e_next) / scale(e));
        trace.push(entry(it, Stage::Bathtub, e_next, &next));
        if opts.symmetrize_every > 0 && it % opts.symmetrize_every == 0 {
            let sym = steiner_symmetrize(&next);
            if sym != next {
                let (e_sym, pot_sym) = energy_with(kernel, &sym, w)?;
                worst_decrease = worst_decrease.max((e_next - e_sym) / scale(e_next));
                (next, e_next, pot_next) = (sym, e_sym, pot_sym);
                trace.push(entry(it, Stage::Steiner, e_next, &next));
            }
        }
        let gain = e_next - e;
        let unchanged = next == zeta;
        (zeta, e, pot) = (next, e_next, pot_next);
        energies.push(e);
        if e > best.0 {
            best = (e, zeta.clone(), pot.clone());
        }
        if unchanged || gain.abs() <= opts.tol * scale(e) {
            converged = true;
            break;
        }
        if gain < 0.0 {
            misses += 1;
            if misses >= 3 {
                stagnated = true;
                break;
            }
        } else {
            misses = 0;
        }
    }
    if !converged {
        stagnated = true;
    }
    if stagnated && best.0 > e {
        (e, zeta, pot) = best;
        energies.push(e);
    }
    let phi = phi_from_potential(&pot, w);
    let profile = recover_profile_fields(&zeta, &phi);
    Ok(MaximizerRun {
        class,
        w_speed: w,
        trace,
        energies,
        result: zeta,
        phi,
        iterations,
        converged,
        stagnated,
        worst_decrease,
        kernel: kernel.name().to_string(),
        profile,
    })
}

/// Monotone-profile fit of `ζ` against `Φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileFit {
    /// `μ̃`: largest `Φ` over vorticity-free cells within two cells of the support.
    pub mu_tilde: f64,
    /// Smallest `Φ` over the support.
    pub phi_min_support: f64,
    /// L¹(ν) distance between `ζ` and its isotonic regression on `Φ`.
    pub defect: f64,
    /// `defect / ‖ζ‖_{L¹(ν)}`.
    pub defect_rel: f64,
}

/// Weighted pool-adjacent-violators fit; returns the nondecreasing fitted values.
pub fn isotonic_fit(y: &[f64], w: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&yi, &wi) in y.iter().zip(w) {
        blocks.push((wi * yi, wi, 1));
        while blocks.len() > 1 {
            let (s1, w1, n1) = blocks[blocks.len() - 1];
            let (s0, w0, n0) = blocks[blocks.len() - 2];
            if s0 / w0 <= s1 / w1 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s0 + s1, w0 + w1, n0 + n1);
        }
    }
    blocks.iter().flat_map(|&(s, w, n)| std::iter::repeat_n(s / w, n)).collect()
}

pub fn recover_profile_fields(zeta: &ScalarField, phi: &ScalarField) -> ProfileFit {
    let g = &zeta.grid;
    let support = zeta.support();
    let mut near_max = f64::NEG_INFINITY;
    let mut marked = vec![false; g.len()];
    for &(i, j) in &support {
        for di in -2isize..=2 {
            for dj in -2isize..=2 {
                let (a, b) = (i as isize + di, j as isize + dj);
                if a < 0 || b < 0 || a >= g.nr as isize || b >= g.nz as isize {
                    continue;
                }
                let k = g.idx(a as usize, b as usize);
                if !marked[k] && zeta.values[k] == 0.0 {
                    marked[k] = true;
                    near_max = near_max.max(phi.values[k]);
                }
            }
        }
    }
    let mut pts: Vec<(f64, f64, f64)> =
        support.iter().map(|&(i, j)| (phi.at(i, j), zeta.at(i, j), g.nu(i))).collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let w: Vec<f64> = pts.iter().map(|p| p.2).collect();
    let fit = isotonic_fit(&y, &w);
    let defect: f64 = pts.iter().zip(&fit).map(|(p, f)| (p.1 - f).abs() * p.2).sum();
    let mass: f64 = pts.iter().map(|p| p.1 * p.2).sum();
    let phi_min = pts.first().map_or(f64::NAN, |p| p.0);
    ProfileFit {
        mu_tilde: if near_max.is_finite() { near_max } else { phi_min },
        phi_min_support: phi_min,
        defect,
        defect_rel: if mass > 0.0 { defect / mass } else { 0.0 },
    }
}

pub fn recover_profile(run: &MaximizerRun) -> ProfileFit {
    recover_profile_fields(&run.result, &run.phi)
}

/// Thin-core diagnostics of a maximiser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationalReport {
    pub eps: f64,
    pub diameter: f64,
    pub diameter_over_eps: f64,
    /// Innermost support radius on the row(s) nearest `x2 = 0`.
    pub a_eps: f64,
    /// Outermost support radius on the same rows.
    pub b_eps: f64,
    pub centroid: (f64, f64),
    /// `argmax Γ1 = κ/4πW`.
    pub r_star: f64,
    pub impulse: f64,
    /// `½ κ r*²`.
    pub impulse_limit: f64,
    pub energy: f64,
    /// Leading coefficient `κ² r*/4π - κ W r*²/2` of `𝓔` in `ln(1/ε)`.
    pub energy_slope_limit: f64,
    pub mu_tilde: f64,
}

pub fn asymptotic_report(run: &MaximizerRun, kappa: f64, w: f64, eps: f64) -> VariationalReport {
    let z = &run.result;
    let g = &z.grid;
    let zmin = (0..g.nz).map(|j| g.z(j).abs()).fold(f64::INFINITY, f64::min);
    let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, j) in z.support() {
        if g.z(j).abs() <= zmin + 1e-12 * g.hz() {
            a = a.min(g.r(i));
            b = b.max(g.r(i));
        }
    }
    let r_star = crate::asymptotics::gamma1_argmax(kappa, w);
    let diameter = support_diameter(z);
    VariationalReport {
        eps,
        diameter,
        diameter_over_eps: diameter / eps,
        a_eps: a,
        b_eps: b,
        centroid: z.centroid().unwrap_or((f64::NAN, f64::NAN)),
        r_star,
        impulse: impulse(z),
        impulse_limit: 0.5 * kappa * r_star * r_star,
        energy: run.energy(),
        energy_slope_limit: kappa * kappa * r_star / (4.0 * std::f64::consts::PI) - 0.5 * kappa * w * r_star * r_star,
        mu_tilde: run.profile.mu_tilde,
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// The class of `zeta` rearranged radially decreasing about `center`.
pub fn radial_rearrangement(zeta: &ScalarField, center: (f64, f64)) -> Result<ScalarField> {
    let g = zeta.grid;
    let phi = ScalarField::from_fn(g, FieldKind::Stream, |r, z| -((r - center.0).powi(2) + (z - center.1).powi(2)));
    bathtub_fill(&class_of(zeta), &phi)
}

/// Ascent from the class of `zeta` rearranged radially about its centroid, with the grid
/// operator under `far` as kernel.
pub fn maximize_from_class(zeta: &ScalarField, spec: &RingSpec, far: FarField) -> Result<MaximizerRun> {
    let c = zeta.centroid().ok_or_else(|| Error::Precondition("vorticity has no mass".into()))?;
    let start = radial_rearrangement(zeta, c)?;
    maximize(&start, &GridKernel::new(zeta.grid, far), &MaximizeOptions::for_spec(spec))
}

/// Exhaustive optimum of `∫ ζ Φ dν` over fills of the class along every ordered choice of cells
/// and every ordering of the atoms. Intended for at most 16 cells and 4 atoms.
pub fn brute_force_linear_max(class: &RearrangementClass, phi: &ScalarField) -> f64 {
    let g = phi.grid;
    let atoms = class.pairs.clone();
    let mut perms = Vec::new();
    permutations(&mut (0..atoms.len()).collect::<Vec<_>>(), 0, &mut perms);
    let mut best = f64::NEG_INFINITY;
    for perm in perms {
        let seq: Vec<(f64, f64)> = perm.iter().map(|&k| atoms[k]).collect();
        let mut used = vec![false; g.len()];
        search(&g, phi, &seq, 0, seq.first().map_or(0.0, |a| a.1), &mut used, 0.0, &mut best);
    }
    best
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

#[allow(clippy::too_many_arguments)]
fn search(
    g: &AxisymGrid,
    phi: &ScalarField,
    atoms: &[(f64, f64)],
    mut a: usize,
    mut rem: f64,
    used: &mut [bool],
    value: f64,
    best: &mut f64,
) {
    if a >= atoms.len() {
        *best = best.max(value);
        return;
    }
    for k in 0..g.len() {
        if used[k] {
            continue;
        }
        let nu = g.nu(k / g.nz);
        let (mut cap, mut gain) = (nu, 0.0);
        let (a0, rem0) = (a, rem);
        while a < atoms.len() && cap > 1e-15 * nu {
            let take = cap.min(rem);
            gain += atoms[a].0 * take * phi.values[k];
            cap -= take;
            rem -= take;
            if rem <= 1e-15 * nu {
                a += 1;
                rem = atoms.get(a).map_or(0.0, |x| x.1);
            }
        }
        used[k] = true;
        search(g, phi, atoms, a, rem, used, value + gain, best);
        used[k] = false;
        (a, rem) = (a0, rem0);
    }
}

/// `∫ ζ Φ dν`.
pub fn linear_value(zeta: &ScalarField, phi: &ScalarField) -> f64 {
    let g = &zeta.grid;
    (0..g.len()).map(|k| zeta.values[k] * phi.values[k] * g.nu(k / g.nz)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::same_class;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_grid(n: usize) -> AxisymGrid {
        AxisymGrid::new(0.5, 1.5, -0.5, 0.5, n, n).unwrap()
    }

    #[test]
    fn single_atom_goes_to_the_larger_phi() {
        let g = AxisymGrid::new(1.0, 2.0, 0.0, 1.0, 2, 1).unwrap();
        let phi = ScalarField::from_values(g, FieldKind::Stream, vec![0.1, 0.7]).unwrap();
        let class = RearrangementClass::from_pairs(vec![(3.0, g.nu(0))]);
        let out = bathtub_fill(&class, &phi).unwrap();
        assert_eq!(out.values[0], 0.0);
        assert!(out.values[1] > 0.0);
        assert!((crate::fields::circulation(&out) - 3.0 * g.nu(0)).abs() < 1e-15);
    }

    #[test]
    fn sorted_field_is_a_fixed_point() {
        let g = small_grid(8);
        let phi = ScalarField::from_fn(g, FieldKind::Stream, |r, z| -(r - 1.0).powi(2) - 2.0 * z * z);
        let zeta = ScalarField::from_fn(g, FieldKind::Vorticity, |r, z| {
            let v = 0.1 - (r - 1.0).powi(2) - 2.0 * z * z;
            if v > 0.0 {
                17.0
            } else {
                0.0
            }
        });
        let out = bathtub_fill(&class_of(&zeta), &phi).unwrap();
        let d: f64 = out.values.iter().zip(&zeta.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d <= 1e-12 * 17.0, "{d}");
    }

    #[test]
    fn fill_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..30 {
            let (nr, nz) = (1 + case % 4, 1 + (case / 4) % 4);
            let g = AxisymGrid::new(0.3, 1.3, -0.4, 0.6, nr, nz).unwrap();
            let phi = ScalarField::from_values(g, FieldKind::Stream, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap();
            let min_nu = g.nu(0);
            let atoms = 1 + case % 4;
            let pairs: Vec<(f64, f64)> =
                (0..atoms).map(|_| (rng.gen_range(0.5..4.0), rng.gen_range(0.05..0.75) * min_nu)).collect();
            let class = RearrangementClass::from_pairs(pairs);
            let out = bathtub_fill(&class, &phi).unwrap();
            let brute = brute_force_linear_max(&class, &phi);
            let got = linear_value(&out, &phi);
            assert!((got - brute).abs() <= 1e-12 * brute.abs().max(1e-3), "case {case}: {got} vs {brute}");
        }
    }

    #[test]
    fn isotonic_fit_of_monotone_data_is_exact() {
        let y = [0.0, 1.0, 1.0, 3.0];
        assert_eq!(isotonic_fit(&y, &[1.0; 4]), y.to_vec());
        let fit = isotonic_fit(&[2.0, 1.0, 3.0], &[1.0, 1.0, 2.0]);
        assert_eq!(fit, vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn ascent_is_monotone_with_dense_kernel() {
        let g = small_grid(12);
        for seed in 0..3u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let zeta = ScalarField::from_values(
                g,
                FieldKind::Vorticity,
                (0..g.len()).map(|_| if rng.gen_bool(0.2) { rng.gen_range(0.0..5.0) } else { 0.0 }).collect(),
            )
            .unwrap();
            let opts = MaximizeOptions { w_speed: 0.05, max_iter: 50, tol: 1e-13, symmetrize_every: 1 };
            let run = maximize(&zeta, &DenseGreen, &opts).unwrap();
            assert!(run.worst_decrease <= 1e-12, "{}", run.worst_decrease);
            let sym = steiner_symmetrize(&run.result);
            assert_eq!(sym, run.result);
            assert!(same_class(&run.class, &class_of(&run.result), 0.2));
        }
    }

    #[test]
    fn converged_maximizer_restarts_in_at_most_one_iteration() {
        let g = small_grid(12);
        let zeta = ScalarField::from_fn(g, FieldKind::Vorticity, |r, z| (0.06 - (r - 1.0).powi(2) - z * z).max(0.0));
        let opts = MaximizeOptions { w_speed: 0.02, max_iter: 200, tol: 1e-14, symmetrize_every: 1 };
        let run = maximize(&zeta, &DenseGreen, &opts).unwrap();
        assert!(run.converged);
        let again = maximize(&run.result, &DenseGreen, &opts).unwrap();
        assert!(again.iterations <= 1, "{}", again.iterations);
    }
}
