//! Quasi-discrete Hankel transform on the radial grid and the Fourier
//! multipliers built on it.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::bessel_j;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::RadialGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symbol {
    /// Delta, symbol -rho^2.
    Lap,
    /// Delta^2, symbol rho^4.
    Bilap,
    /// (-Delta)^{-1} with the Dirichlet condition at rmax, symbol 1/rho^2.
    Invlap,
    /// |nabla|^{-1}, symbol 1/rho.
    RieszHalf,
    /// (-Delta)^s, symbol rho^{2s}.
    FracLap(f64),
}

impl Symbol {
    pub fn eval(&self, rho: f64) -> f64 {
        match *self {
            Symbol::Lap => -rho * rho,
            Symbol::Bilap => rho.powi(4),
            Symbol::Invlap => 1.0 / (rho * rho),
            Symbol::RieszHalf => 1.0 / rho,
            Symbol::FracLap(s) => rho.powf(2.0 * s),
        }
    }
}

/// Transform matrices and scalings for one grid.
///
/// Internally a field u is represented by coefficients a = T (D u), where T
/// is symmetric and orthogonal, so the L^2 norm is a fixed multiple of |a|.
#[derive(Debug)]
pub struct TransformPlan {
    n: usize,
    d: usize,
    rmax: f64,
    kernel: Vec<f64>,
    node_scale: Vec<f64>,
    hat_scale: Vec<f64>,
    coeff_norm: f64,
    rho: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    spectral_weights: Vec<f64>,
    vec_fwd_scale: Vec<f64>,
    vec_inv_scale: Vec<f64>,
    raw_defect: f64,
    zeros: Vec<f64>,
    last_zero: f64,
    nu: f64,
    jnext: Vec<f64>,
    shifted: OnceLock<Vec<f64>>,
}

/// y = M x for a row-major n x n real matrix and complex x.
pub(crate) fn matvec(m: &[f64], n: usize, x: &[Complex64], y: &mut [Complex64]) {
    assert_eq!(x.len(), n);
    assert_eq!(y.len(), n);
    unsafe {
        matrixmultiply::dgemm(
            n,
            n,
            2,
            1.0,
            m.as_ptr(),
            n as isize,
            1,
            x.as_ptr() as *const f64,
            2,
            1,
            0.0,
            y.as_mut_ptr() as *mut f64,
            2,
            1,
        );
    }
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    unsafe {
        matrixmultiply::dgemm(
            n,
            n,
            n,
            1.0,
            a.as_ptr(),
            n as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    c
}

/// max |X^2 - I| entrywise.
fn involution_defect(x: &[f64], n: usize) -> f64 {
    let sq = matmul(x, x, n);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let e = sq[i * n + j] - if i == j { 1.0 } else { 0.0 };
            worst = worst.max(e.abs());
        }
    }
    worst
}

fn bessel_matrix(order: f64, zeros: &[f64], s: f64) -> Vec<f64> {
    let n = zeros.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = bessel_j(order, zeros[i] * zeros[j] / s);
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    m
}

impl TransformPlan {
    pub(crate) fn new(grid: &RadialGrid) -> TransformPlan {
        let n = grid.len();
        let nu = grid.order();
        let s = grid.last_zero();
        let rmax = grid.rmax();
        let zeros = grid.zeros().to_vec();
        let jn = grid.jnext();
        let mut kernel = bessel_matrix(nu, &zeros, s);
        for i in 0..n {
            for j in 0..n {
                kernel[i * n + j] *= 2.0 / (jn[i] * jn[j] * s);
            }
        }
        let raw_defect = involution_defect(&kernel, n);
        // Newton-Schulz iteration to the nearest orthogonal matrix; it keeps symmetry.
        let mut defect = raw_defect;
        for _ in 0..20 {
            if defect < 1e-14 {
                break;
            }
            let sq = matmul(&kernel, &kernel, n);
            let mut three_minus = sq;
            for v in three_minus.iter_mut() {
                *v = -*v;
            }
            for i in 0..n {
                three_minus[i * n + i] += 3.0;
            }
            let mut next = matmul(&kernel, &three_minus, n);
            for i in 0..n {
                for j in 0..i {
                    let a = 0.25 * (next[i * n + j] + next[j * n + i]);
                    next[i * n + j] = a;
                    next[j * n + i] = a;
                }
                next[i * n + i] *= 0.5;
            }
            let new_defect = involution_defect(&next, n);
            if new_defect >= defect {
                break;
            }
            kernel = next;
            defect = new_defect;
        }
        let nodes = grid.nodes().to_vec();
        let rho = grid.spectral_nodes().to_vec();
        let node_scale = nodes.iter().zip(jn).map(|(r, j)| rmax * r.powf(nu) / j).collect();
        let hat_scale = rho.iter().zip(jn).map(|(p, j)| p.powf(-nu) * rmax / s * j).collect();
        let band = s / rmax;
        let vec_fwd_scale = nodes
            .iter()
            .zip(jn)
            .map(|(r, j)| 2.0 * rmax * rmax / (s * s * j * j) * r.powf(nu))
            .collect();
        let vec_inv_scale =
            rho.iter().zip(jn).map(|(p, j)| 2.0 * band * band / (s * s * j * j) * p.powf(nu)).collect();
        TransformPlan {
            n,
            d: grid.dim(),
            rmax,
            kernel,
            node_scale,
            hat_scale,
            coeff_norm: 2.0 * grid.sphere_area() / (s * s),
            rho,
            nodes,
            weights: grid.weights().to_vec(),
            spectral_weights: grid.spectral_weights().to_vec(),
            vec_fwd_scale,
            vec_inv_scale,
            raw_defect,
            zeros,
            last_zero: s,
            nu,
            jnext: jn.to_vec(),
            shifted: OnceLock::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }
    /// |T^2 - I| of the unpolished Bessel kernel.
    pub fn raw_defect(&self) -> f64 {
        self.raw_defect
    }
    /// |T^2 - I| of the kernel in use.
    pub fn defect(&self) -> f64 {
        involution_defect(&self.kernel, self.n)
    }
    /// L^2(R^d) norm squared equals this factor times the coefficient norm squared.
    pub fn coeff_norm(&self) -> f64 {
        self.coeff_norm
    }

    pub fn to_coeffs(&self, u: &[Complex64]) -> Vec<Complex64> {
        let x: Vec<Complex64> = u.iter().zip(&self.node_scale).map(|(v, s)| v * s).collect();
        let mut a = vec![Complex64::new(0.0, 0.0); self.n];
        matvec(&self.kernel, self.n, &x, &mut a);
        a
    }

    pub fn from_coeffs(&self, a: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        matvec(&self.kernel, self.n, a, &mut y);
        for (v, s) in y.iter_mut().zip(&self.node_scale) {
            *v /= s;
        }
        y
    }

    /// Band-limited interpolant of the coefficients `a` at an arbitrary radius.
    pub fn evaluate(&self, a: &[Complex64], r: f64) -> Complex64 {
        let s = self.last_zero;
        let sum: Complex64 = a
            .iter()
            .zip(&self.zeros)
            .zip(&self.jnext)
            .map(|((v, z), j)| {
                let x = z * r / self.rmax;
                let radial = if x < 1e-8 {
                    (0.5 * z / self.rmax).powf(self.nu) / crate::bessel::gamma_half(self.nu + 1.0)
                } else {
                    bessel_j(self.nu, x) / r.powf(self.nu)
                };
                v * (radial / j)
            })
            .sum();
        sum * (2.0 / (s * self.rmax))
    }

    /// Hankel transform values at the frequency nodes.
    pub fn forward(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut a = self.to_coeffs(u);
        for (v, s) in a.iter_mut().zip(&self.hat_scale) {
            *v *= s;
        }
        a
    }

    pub fn inverse(&self, hat: &[Complex64]) -> Vec<Complex64> {
        let a: Vec<Complex64> = hat.iter().zip(&self.hat_scale).map(|(v, s)| v / s).collect();
        self.from_coeffs(&a)
    }

    pub fn apply_multiplier(&self, u: &[Complex64], m: impl Fn(f64) -> f64) -> Vec<Complex64> {
        let mut a = self.to_coeffs(u);
        for (v, &p) in a.iter_mut().zip(&self.rho) {
            *v *= m(p);
        }
        self.from_coeffs(&a)
    }

    pub fn apply_symbol(&self, u: &[Complex64], symbol: Symbol) -> Vec<Complex64> {
        self.apply_multiplier(u, |p| symbol.eval(p))
    }

    /// Weighted sum of |a_k|^2 m(rho_k), i.e. the quadratic form of the multiplier m.
    pub fn quadratic_form(&self, a: &[Complex64], m: impl Fn(f64) -> f64) -> f64 {
        self.coeff_norm * a.iter().zip(&self.rho).map(|(v, &p)| v.norm_sqr() * m(p)).sum::<f64>()
    }

    fn shifted(&self) -> &[f64] {
        self.shifted.get_or_init(|| bessel_matrix(self.nu + 1.0, &self.zeros, self.last_zero))
    }

    /// Transform of the profile g of a radial vector field g(r) x/r.
    pub fn vector_forward(&self, g: &[Complex64]) -> Vec<Complex64> {
        let x: Vec<Complex64> = g.iter().zip(&self.vec_fwd_scale).map(|(v, s)| v * s).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        matvec(self.shifted(), self.n, &x, &mut out);
        for (v, &p) in out.iter_mut().zip(&self.rho) {
            *v *= p.powf(-self.nu);
        }
        out
    }

    pub fn vector_inverse(&self, hat: &[Complex64]) -> Vec<Complex64> {
        let x: Vec<Complex64> = hat.iter().zip(&self.vec_inv_scale).map(|(v, s)| v * s).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        matvec(self.shifted(), self.n, &x, &mut out);
        for (v, &r) in out.iter_mut().zip(&self.nodes) {
            *v *= r.powf(-self.nu);
        }
        out
    }

    /// Squared L^2 norm of |nabla|^{-1} applied to the vector field g x/r.
    pub fn vector_riesz_norm_sqr(&self, g: &[Complex64]) -> f64 {
        let hat = self.vector_forward(g);
        hat.iter()
            .zip(&self.rho)
            .zip(&self.spectral_weights)
            .map(|((v, p), w)| w * v.norm_sqr() / (p * p))
            .sum()
    }

    /// Profile of (-Delta)^{-1} applied to the vector field g x/r.
    pub fn vector_invlap(&self, g: &[Complex64]) -> Vec<Complex64> {
        let mut hat = self.vector_forward(g);
        for (v, p) in hat.iter_mut().zip(&self.rho) {
            *v /= p * p;
        }
        self.vector_inverse(&hat)
    }

    /// Divergence of the vector field g x/r.
    pub fn divergence(&self, g: &[Complex64]) -> Vec<Complex64> {
        let mut hat = self.vector_forward(g);
        for (v, p) in hat.iter_mut().zip(&self.rho) {
            *v *= p;
        }
        self.inverse(&hat)
    }

    /// Radial derivatives of order 1 or 2.
    pub fn radial_derivative(&self, u: &[Complex64], order: usize) -> Result<Vec<Complex64>> {
        let mut hat = self.forward(u);
        for (v, p) in hat.iter_mut().zip(&self.rho) {
            *v *= -p;
        }
        let first = self.vector_inverse(&hat);
        match order {
            1 => Ok(first),
            2 => {
                let lap = self.apply_symbol(u, Symbol::Lap);
                let c = self.d as f64 - 1.0;
                Ok(lap.iter().zip(&first).zip(&self.nodes).map(|((l, f), r)| l - f * (c / r)).collect())
            }
            _ => Err(Error::InvalidParams(format!("radial derivative of order {order}"))),
        }
    }

    /// Free-space (-Delta)^{-1} for data supported well inside the domain:
    /// the Dirichlet solution plus the constant monopole offset at rmax.
    pub fn free_space_invlap(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut u = self.apply_symbol(f, Symbol::Invlap);
        let total: Complex64 = f.iter().zip(&self.weights).map(|(v, w)| v * w).sum();
        let omega = crate::bessel::sphere_area(self.d);
        let offset = total * self.rmax.powf(2.0 - self.d as f64) / ((self.d as f64 - 2.0) * omega);
        for v in u.iter_mut() {
            *v += offset;
        }
        u
    }
}

pub(crate) fn lagrange_cumulative(nodes: &[f64], f: &[Complex64], power: i32) -> Vec<Complex64> {
    // cumulative integral int_0^{r_j} f(s) s^power ds with local degree-7 interpolation
    // of the even extension of f
    const GL_X: [f64; 8] = [
        -0.960_289_856_497_536_3,
        -0.796_666_477_413_626_7,
        -0.525_532_409_916_329_0,
        -0.183_434_642_495_649_8,
        0.183_434_642_495_649_8,
        0.525_532_409_916_329_0,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const GL_W: [f64; 8] = [
        0.101_228_536_290_376_3,
        0.222_381_034_453_374_5,
        0.313_706_645_877_887_3,
        0.362_683_783_378_362_0,
        0.362_683_783_378_362_0,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    let n = nodes.len();
    let point = |idx: isize| -> (f64, Complex64) {
        if idx >= 0 {
            (nodes[idx as usize], f[idx as usize])
        } else {
            let m = (-idx - 1) as usize;
            (-nodes[m], f[m])
        }
    };
    let mut out = Vec::with_capacity(n);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut left = 0.0;
    for j in 0..n {
        let right = nodes[j];
        let mut start = j as isize - 4;
        if start + 7 > n as isize - 1 {
            start = n as isize - 8;
        }
        let stencil: Vec<(f64, Complex64)> = (start..start + 8).map(point).collect();
        let half = 0.5 * (right - left);
        let mid = 0.5 * (right + left);
        for (gx, gw) in GL_X.iter().zip(&GL_W) {
            let s = mid + half * gx;
            let mut val = Complex64::new(0.0, 0.0);
            for (i, &(xi, fi)) in stencil.iter().enumerate() {
                let mut l = 1.0;
                for (k, &(xk, _)) in stencil.iter().enumerate() {
                    if k != i {
                        l *= (s - xk) / (xi - xk);
                    }
                }
                val += fi * l;
            }
            acc += val * (gw * half * s.powi(power));
        }
        out.push(acc);
        left = right;
    }
    out
}

/// Newton potential of a radial function by direct radial quadrature,
/// independent of the transform.
pub fn newton_potential_oracle(f: &Field) -> Result<Vec<Complex64>> {
    let grid = f.grid();
    let d = grid.dim();
    if d < 3 {
        return Err(Error::InvalidParams("Newton potential needs d >= 3".into()));
    }
    let nodes = grid.nodes();
    let inner = lagrange_cumulative(nodes, f.values(), d as i32 - 1);
    let outer_cum = lagrange_cumulative(nodes, f.values(), 1);
    let outer_total = *outer_cum.last().unwrap();
    let c = 1.0 / (d as f64 - 2.0);
    Ok(nodes
        .iter()
        .enumerate()
        .map(|(j, &r)| c * (r.powf(2.0 - d as f64) * inner[j] + (outer_total - outer_cum[j])))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn evaluates_between_nodes() {
        for d in [2usize, 3, 4] {
            let g = make_grid(d, 15.0, 128).unwrap();
            let u = Field::from_real_fn(g.clone(), |r| (-r * r / 2.0).exp());
            let a = g.plan().to_coeffs(u.values());
            for &r in &[0.0, 0.013, 0.77, 2.31, 5.5] {
                assert!((g.plan().evaluate(&a, r).re - (-r * r / 2.0f64).exp()).abs() < 1e-12, "d={d} r={r}");
            }
        }
    }

    #[test]
    fn kernel_is_polished() {
        for d in [2usize, 3, 4, 5] {
            let g = make_grid(d, 20.0, 96).unwrap();
            let p = g.plan();
            assert!(p.defect() < 1e-13, "d={d} defect={}", p.defect());
        }
    }

    #[test]
    fn gaussian_hankel_transform() {
        // e^{-r^2/2} is its own Fourier transform in the unitary convention
        for d in [2usize, 3, 4, 7] {
            let g = make_grid(d, 15.0, 128).unwrap();
            let u: Vec<Complex64> = g.nodes().iter().map(|r| c((-r * r / 2.0).exp())).collect();
            let hat = g.plan().forward(&u);
            for (h, p) in hat.iter().zip(g.spectral_nodes()) {
                assert!((h.re - (-p * p / 2.0).exp()).abs() < 1e-10, "d={d}");
            }
        }
    }

    #[test]
    fn laplacian_of_gaussian() {
        let d = 3;
        let g = make_grid(d, 15.0, 128).unwrap();
        let u: Vec<Complex64> = g.nodes().iter().map(|r| c((-r * r).exp())).collect();
        let lap = g.plan().apply_symbol(&u, Symbol::Lap);
        for (l, r) in lap.iter().zip(g.nodes()) {
            let exact = (4.0 * r * r - 2.0 * d as f64) * (-r * r).exp();
            assert!((l.re - exact).abs() < 1e-9);
        }
        let du = g.plan().radial_derivative(&u, 1).unwrap();
        let d2u = g.plan().radial_derivative(&u, 2).unwrap();
        for ((a, b), r) in du.iter().zip(&d2u).zip(g.nodes()) {
            assert!((a.re + 2.0 * r * (-r * r).exp()).abs() < 1e-9);
            assert!((b.re - (4.0 * r * r - 2.0) * (-r * r).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn newton_oracle_point_values() {
        // -Delta^{-1} of e^{-r^2} in d = 3 is pi^{3/2} erf(r) / (4 pi r)
        let g = make_grid(3, 20.0, 256).unwrap();
        let f = Field::from_real_fn(g.clone(), |r| (-r * r).exp());
        let pot = newton_potential_oracle(&f).unwrap();
        for (v, &r) in pot.iter().zip(g.nodes()).step_by(17) {
            let exact = PI.powf(1.5) * erf(r) / (4.0 * PI * r);
            assert!((v.re - exact).abs() < 1e-10, "r={r}: {} vs {exact}", v.re);
        }
    }

    fn erf(x: f64) -> f64 {
        // series and continued fraction, adequate for the test
        if x < 3.0 {
            let mut sum = x;
            let mut term = x;
            for k in 1..200 {
                term *= -x * x / k as f64;
                let t = term / (2 * k + 1) as f64;
                sum += t;
                if t.abs() < 1e-17 {
                    break;
                }
            }
            2.0 / PI.sqrt() * sum
        } else {
            let mut cf = 0.0;
            for k in (1..60).rev() {
                cf = (k as f64 / 2.0) / (x + cf);
            }
            1.0 - (-x * x).exp() / (PI.sqrt() * (x + cf))
        }
    }
}
