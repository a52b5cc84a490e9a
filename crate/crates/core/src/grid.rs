use std::sync::{Arc, OnceLock};

use crate::bessel::{bessel_j, bessel_zeros, sphere_area};
use crate::error::{Error, Result};
use crate::spectral::TransformPlan;

/// Radial collocation grid on [0, rmax] built from the zeros of J_nu,
/// nu = d/2 - 1, together with the matching frequency grid.
#[derive(Debug)]
pub struct RadialGrid {
    d: usize,
    n: usize,
    rmax: f64,
    nu: f64,
    zeros: Vec<f64>,
    last_zero: f64,
    jnext: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    spectral_nodes: Vec<f64>,
    spectral_weights: Vec<f64>,
    plan: OnceLock<TransformPlan>,
}

pub fn make_grid(d: usize, rmax: f64, n: usize) -> Result<Arc<RadialGrid>> {
    if d < 2 {
        return Err(Error::InvalidGrid(format!("dimension {d} < 2")));
    }
    if !(rmax.is_finite() && rmax > 0.0) {
        return Err(Error::InvalidGrid(format!("rmax = {rmax} must be positive")));
    }
    if n < 16 {
        return Err(Error::InvalidGrid(format!("n = {n} is below the minimum of 16")));
    }
    let nu = d as f64 / 2.0 - 1.0;
    let mut zeros = bessel_zeros(nu, n + 1);
    let last_zero = zeros.pop().unwrap();
    let s = last_zero;
    let jnext: Vec<f64> = zeros.iter().map(|&z| bessel_j(nu + 1.0, z).abs()).collect();
    let omega = sphere_area(d);
    let nodes: Vec<f64> = zeros.iter().map(|&z| z * rmax / s).collect();
    let spectral_nodes: Vec<f64> = zeros.iter().map(|&z| z / rmax).collect();
    let band = s / rmax;
    let weights = nodes
        .iter()
        .zip(&jnext)
        .map(|(&r, &j)| omega * 2.0 * rmax * rmax * r.powi(d as i32 - 2) / (s * s * j * j))
        .collect();
    let spectral_weights = spectral_nodes
        .iter()
        .zip(&jnext)
        .map(|(&p, &j)| omega * 2.0 * band * band * p.powi(d as i32 - 2) / (s * s * j * j))
        .collect();
    Ok(Arc::new(RadialGrid {
        d,
        n,
        rmax,
        nu,
        zeros,
        last_zero,
        jnext,
        nodes,
        weights,
        spectral_nodes,
        spectral_weights,
        plan: OnceLock::new(),
    }))
}

impl RadialGrid {
    pub fn dim(&self) -> usize {
        self.d
    }
    pub fn len(&self) -> usize {
        self.n
    }
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
    pub fn rmax(&self) -> f64 {
        self.rmax
    }
    /// Bessel order d/2 - 1 of the scalar transform.
    pub fn order(&self) -> f64 {
        self.nu
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    /// Quadrature weights for integrals over R^d of radial functions.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn spectral_nodes(&self) -> &[f64] {
        &self.spectral_nodes
    }
    /// Quadrature weights for integrals over frequency space.
    pub fn spectral_weights(&self) -> &[f64] {
        &self.spectral_weights
    }
    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }
    /// The (n+1)-th zero, which fixes the band limit.
    pub fn last_zero(&self) -> f64 {
        self.last_zero
    }
    /// |J_{nu+1}| at each zero.
    pub fn jnext(&self) -> &[f64] {
        &self.jnext
    }
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.d)
    }
    pub fn plan(&self) -> &TransformPlan {
        self.plan.get_or_init(|| TransformPlan::new(self))
    }

    /// Integral over R^d of a radial function sampled at the nodes.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Volume of the ball of radius rmax in R^d.
    pub fn ball_volume(&self) -> f64 {
        sphere_area(self.d) * self.rmax.powi(self.d as i32) / self.d as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn nodes_increase_inside_domain() {
        let g = make_grid(3, 10.0, 64).unwrap();
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        assert!(g.nodes()[0] > 0.0 && *g.nodes().last().unwrap() < 10.0);
        assert!(g.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn gaussian_moment() {
        for d in 2..=8 {
            let g = make_grid(d, 12.0, 128).unwrap();
            let f: Vec<f64> = g.nodes().iter().map(|r| (-r * r).exp()).collect();
            let exact = PI.powf(d as f64 / 2.0);
            assert!((g.integrate(&f) - exact).abs() / exact < 1e-12, "d={d}");
        }
    }

    #[test]
    fn ball_volume_converges_at_first_order() {
        for d in [2usize, 3, 5] {
            let mut errs = Vec::new();
            for n in [64usize, 128, 256] {
                let g = make_grid(d, 1.0, n).unwrap();
                let ones = vec![1.0; n];
                errs.push((g.integrate(&ones) - g.ball_volume()).abs() / g.ball_volume());
            }
            assert!(errs[0] < 2.0 * d as f64 / 64.0);
            let ratio = errs[1] / errs[2];
            assert!((1.6..2.5).contains(&ratio), "d={d} ratio={ratio}");
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(make_grid(1, 10.0, 64).is_err());
        assert!(make_grid(3, -1.0, 64).is_err());
        assert!(make_grid(3, 10.0, 15).is_err());
    }
}
