//! Composite Gauss–Legendre quadrature for lag moments `∫ f(x) e^{jπνk x} dx`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::linalg::C64;

const NODES_PER_PANEL: usize = 64;
const REL_TOL: f64 = 1e-10;
const MAX_PANELS: usize = 1 << 14;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
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
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule64() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(NODES_PER_PANEL))
}

/// Lag moments `∫_{t0}^{t1} w(t) e^{jπν k x(t)} dt` for `k = 0..m`.
///
/// `w` is the (possibly change-of-variable-weighted) density in the
/// integration variable `t` and `x` maps `t` to the angle domain. Panels are
/// doubled until successive lag vectors agree to 1e-10 relative.
pub fn lag_moments(
    w: impl Fn(f64) -> f64,
    x: impl Fn(f64) -> f64,
    t0: f64,
    t1: f64,
    m: usize,
    nu: f64,
) -> Vec<C64> {
    let mut panels = 1;
    let mut prev = composite(&w, &x, t0, t1, m, nu, panels);
    loop {
        panels *= 2;
        let next = composite(&w, &x, t0, t1, m, nu, panels);
        let scale = prev.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let diff = prev.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prev = next;
        if diff <= REL_TOL * scale || panels >= MAX_PANELS {
            return prev;
        }
    }
}

fn composite(
    w: &impl Fn(f64) -> f64,
    x: &impl Fn(f64) -> f64,
    t0: f64,
    t1: f64,
    m: usize,
    nu: f64,
    panels: usize,
) -> Vec<C64> {
    let (nodes, weights) = rule64();
    let h = (t1 - t0) / panels as f64;
    let mut out = vec![C64::new(0.0, 0.0); m];
    for p in 0..panels {
        let a = t0 + p as f64 * h;
        for (&node, &wt) in nodes.iter().zip(weights) {
            let t = a + 0.5 * h * (node + 1.0);
            let dens = w(t) * wt * 0.5 * h;
            if dens == 0.0 {
                continue;
            }
            let step = C64::from_polar(1.0, PI * nu * x(t));
            let mut z = C64::new(dens, 0.0);
            for o in out.iter_mut() {
                *o += z;
                z *= step;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(64);
        let sum_w: f64 = w.iter().sum();
        assert!((sum_w - 2.0).abs() < 1e-13);
        let x126: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(126)).sum();
        assert!((x126 - 2.0 / 127.0).abs() < 1e-13);
    }

    #[test]
    fn small_rule_nodes() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-14);
    }
}
