//! Quadrature rules and elliptic integrals used by the Green-function and
//! field modules.

use std::f64::consts::PI;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights of the `n`-point rule, by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies the rule on `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive composite Gauss–Legendre quadrature.
///
/// Each panel is compared against the sum over its two halves; panels are bisected
/// until the difference drops below `tol * max(|estimate|, abs_floor)`.
pub fn adaptive<F: Fn(f64) -> f64>(
    rule: &GaussLegendre,
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: usize,
) -> f64 {
    let whole = rule.integrate(f, a, b);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    refine(rule, f, a, b, whole, tol, scale, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    rule: &GaussLegendre,
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    scale: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let left = rule.integrate(f, a, m);
    let right = rule.integrate(f, m, b);
    let sum = left + right;
    if depth == 0 || (sum - whole).abs() <= tol * scale {
        return sum;
    }
    refine(rule, f, a, m, left, tol, scale, depth - 1) + refine(rule, f, m, b, right, tol, scale, depth - 1)
}

/// Carlson's symmetric integral `R_F(x, y, z)`.
pub fn carlson_rf(x: f64, y: f64, z: f64) -> f64 {
    let (mut x, mut y, mut z) = (x, y, z);
    for _ in 0..200 {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * (sy + sz) + sy * sz;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        let ave = (x + y + z) / 3.0;
        let dx = 1.0 - x / ave;
        let dy = 1.0 - y / ave;
        let dz = 1.0 - z / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()) < 1e-3 {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / ave.sqrt();
        }
    }
    f64::NAN
}

/// Carlson's symmetric integral `R_D(x, y, z)`.
pub fn carlson_rd(x: f64, y: f64, z: f64) -> f64 {
    const C1: f64 = 3.0 / 14.0;
    const C2: f64 = 1.0 / 6.0;
    const C3: f64 = 9.0 / 22.0;
    const C4: f64 = 3.0 / 26.0;
    const C5: f64 = 0.25 * C3;
    const C6: f64 = 1.5 * C4;
    let (mut x, mut y, mut z) = (x, y, z);
    let mut sum = 0.0;
    let mut fac = 1.0;
    for _ in 0..200 {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * (sy + sz) + sy * sz;
        sum += fac / (sz * (z + lam));
        fac *= 0.25;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        let ave = 0.2 * (x + y + 3.0 * z);
        let dx = (ave - x) / ave;
        let dy = (ave - y) / ave;
        let dz = (ave - z) / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()) < 1e-3 {
            let ea = dx * dy;
            let eb = dz * dz;
            let ec = ea - eb;
            let ed = ea - 6.0 * eb;
            let ee = ed + ec + ec;
            return 3.0 * sum
                + fac * (1.0 + ed * (-C1 + C5 * ed - C6 * dz * ee) + dz * (C2 * ee + dz * (-C3 * ec + dz * C4 * ea)))
                    / (ave * ave.sqrt());
        }
    }
    f64::NAN
}

/// Complete elliptic integral of the first kind, parameter `m = k^2`.
pub fn ellip_k(m: f64) -> f64 {
    carlson_rf(0.0, 1.0 - m, 1.0)
}

/// Complete elliptic integral of the second kind, parameter `m = k^2`.
pub fn ellip_e(m: f64) -> f64 {
    carlson_rf(0.0, 1.0 - m, 1.0) - m / 3.0 * carlson_rd(0.0, 1.0 - m, 1.0)
}

/// `K(m) - E(m)` given the complementary parameter `m1 = 1 - m`, without cancellation.
pub fn ellip_k_minus_e(m: f64, m1: f64) -> f64 {
    m / 3.0 * carlson_rd(0.0, m1, 1.0)
}

/// Mean of `ln |u|` over the rectangle `[-a/2, a/2] x [-b/2, b/2]`.
pub fn mean_log_rect(a: f64, b: f64) -> f64 {
    let (p, q) = (0.5 * a, 0.5 * b);
    let f = p * q * ((p * p + q * q).ln() - 3.0) + p * p * (q / p).atan() + q * q * (p / q).atan();
    0.5 * f / (p * q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(8);
        let v = rule.integrate(&|x: f64| x.powi(14) + 3.0 * x.powi(3), -1.0, 1.0);
        assert!((v - 2.0 / 15.0).abs() < 1e-15);
        let w: f64 = rule.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn large_rule_nodes_are_accurate() {
        let rule = GaussLegendre::new(160);
        let v = rule.integrate(&|x: f64| x.cos(), 0.0, PI / 2.0);
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_log_endpoint() {
        let rule = GaussLegendre::new(10);
        let v = adaptive(&rule, &|x: f64| x.ln(), 0.0, 1.0, 1e-13, 60);
        assert!((v + 1.0).abs() < 1e-10);
    }

    #[test]
    fn complete_elliptic_reference_values() {
        // K(1/2), E(1/2) to 16 digits
        assert!((ellip_k(0.5) - 1.854_074_677_301_372).abs() < 1e-14);
        assert!((ellip_e(0.5) - 1.350_643_881_047_675_5).abs() < 1e-14);
        assert!((ellip_k(0.0) - PI / 2.0).abs() < 1e-15);
        let m: f64 = 1e-6;
        let direct = ellip_k(m) - ellip_e(m);
        assert!((ellip_k_minus_e(m, 1.0 - m) - direct).abs() < 1e-15);
        assert!((ellip_k_minus_e(m, 1.0 - m) - PI * m / 4.0).abs() < 1e-12);
    }

    #[test]
    fn rectangle_log_mean_matches_quadrature() {
        let (a, b) = (0.3, 0.17);
        let rule = GaussLegendre::new(40);
        let inner = |u: f64| adaptive(&rule, &|v: f64| 0.5 * (u * u + v * v).ln(), 0.0, b / 2.0, 1e-14, 40);
        let v = adaptive(&rule, &inner, 0.0, a / 2.0, 1e-13, 40) / (a * b / 4.0);
        assert!((v - mean_log_rect(a, b)).abs() < 1e-10, "{v} vs {}", mean_log_rect(a, b));
    }
}
