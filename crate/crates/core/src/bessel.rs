//! Bessel functions of the first kind for integer and half-integer order,
//! and their positive zeros.

use std::f64::consts::PI;

/// Gamma function at a positive integer or half-integer argument.
pub fn gamma_half(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    assert!(twice >= 1.0 && (2.0 * x - twice).abs() < 1e-12, "gamma_half: bad argument {x}");
    let t = twice as i64;
    if t % 2 == 0 {
        (1..t / 2).fold(1.0, |acc, k| acc * k as f64)
    } else {
        let mut g = PI.sqrt();
        let mut a = 0.5;
        while a < x - 0.25 {
            g *= a;
            a += 1.0;
        }
        g
    }
}

/// Surface area of the unit sphere in R^d.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma_half(d as f64 / 2.0)
}

fn classify(nu: f64) -> (bool, i64) {
    let twice = (2.0 * nu).round();
    assert!(
        twice >= 0.0 && (2.0 * nu - twice).abs() < 1e-12,
        "bessel order must be a non-negative integer or half-integer, got {nu}"
    );
    let t = twice as i64;
    (t % 2 == 0, t)
}

fn series(nu: f64, x: f64) -> f64 {
    let mut term = (0.5 * x).powf(nu) / gamma_half(nu + 1.0);
    let mut sum = term;
    let q = -0.25 * x * x;
    for m in 1..200 {
        term *= q / (m as f64 * (nu + m as f64));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn trapezoid_integer(n: i64, x: f64) -> f64 {
    // J_n(x) = (1/2pi) int_0^{2pi} cos(n t - x sin t) dt, periodic analytic integrand
    let m = 2 * (x as usize + n as usize + 32);
    let h = 2.0 * PI / m as f64;
    let nf = n as f64;
    let mut s = 0.0;
    for k in 0..m {
        let t = k as f64 * h;
        s += (nf * t - x * t.sin()).cos();
    }
    s / m as f64
}

fn hankel(nu: f64, x: f64) -> f64 {
    let mu4 = 4.0 * nu * nu;
    let mut p: f64 = 0.0;
    let mut q: f64 = 0.0;
    let mut a: f64 = 1.0;
    let mut prev = f64::INFINITY;
    for k in 0..200usize {
        let t = a;
        if t.abs() > prev && k > 2 {
            break;
        }
        prev = t.abs();
        match k % 4 {
            0 => p += t,
            1 => q += t,
            2 => p -= t,
            _ => q -= t,
        }
        if t == 0.0 || t.abs() < 1e-18 * (p.abs() + q.abs()) {
            break;
        }
        let odd = (2 * k + 1) as f64;
        a *= (mu4 - odd * odd) / (8.0 * (k + 1) as f64 * x);
    }
    let chi = x - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// J_nu(x) for x >= 0 and nu a non-negative integer or half-integer.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    assert!(x >= 0.0, "bessel_j: negative argument");
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let (integer, twice) = classify(nu);
    if integer {
        let n = twice / 2;
        if x <= 40.0 {
            trapezoid_integer(n, x)
        } else {
            hankel(nu, x)
        }
    } else if x <= 2.0 + nu {
        series(nu, x)
    } else {
        hankel(nu, x)
    }
}

/// First `count` positive zeros of J_nu.
pub fn bessel_zeros(nu: f64, count: usize) -> Vec<f64> {
    let mut zeros = Vec::with_capacity(count);
    let step = 0.1;
    let mut a = nu.max(0.5);
    let mut fa = bessel_j(nu, a);
    while zeros.len() < count {
        let b = a + step;
        let fb = bessel_j(nu, b);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa * fb < 0.0 {
            zeros.push(bisect(nu, a, b, fa));
        }
        a = b;
        fa = fb;
    }
    zeros
}

fn bisect(nu: f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = bessel_j(nu, m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        for &x in &[0.3, 1.0, 5.0, 9.5, 17.0, 60.0, 400.0] {
            let j12 = (2.0 / (PI * x)).sqrt() * x.sin();
            assert!((bessel_j(0.5, x) - j12).abs() < 1e-14, "x={x}");
            let j32 = (2.0 / (PI * x)).sqrt() * (x.sin() / x - x.cos());
            assert!((bessel_j(1.5, x) - j32).abs() < 1e-14, "x={x}");
        }
    }

    #[test]
    fn integer_reference_values() {
        // tabulated values
        assert!((bessel_j(0.0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j(1.0, 2.5) - 0.497_094_102_464_274_4).abs() < 1e-15);
        assert!((bessel_j(2.0, 10.0) - 0.254_630_313_685_120_6).abs() < 1e-15);
        assert!((bessel_j(0.0, 50.0) - 0.055_812_327_669_251_8).abs() < 1e-15);
    }

    #[test]
    fn branches_agree() {
        for n in 0..5 {
            let nu = n as f64;
            for &x in &[38.0, 40.0, 45.0] {
                let a = trapezoid_integer(n, x);
                let b = hankel(nu, x);
                assert!((a - b).abs() < 1e-14, "n={n} x={x}: {a} {b}");
            }
        }
        for l in 0..5 {
            let nu = l as f64 + 0.5;
            let x = 2.0 + nu;
            assert!((series(nu, x) - hankel(nu, x)).abs() < 1e-13);
        }
    }

    #[test]
    fn recurrence_holds() {
        for &nu in &[0.0, 0.5, 1.0, 1.5, 2.0, 3.0] {
            for &x in &[0.7, 3.3, 12.0, 39.9, 41.0, 150.0] {
                let lhs = bessel_j(nu, x) + bessel_j(nu + 2.0, x);
                let rhs = 2.0 * (nu + 1.0) / x * bessel_j(nu + 1.0, x);
                assert!((lhs - rhs).abs() < 1e-13, "nu={nu} x={x}");
            }
        }
    }

    #[test]
    fn zeros_known() {
        let z = bessel_zeros(0.0, 3);
        assert!((z[0] - 2.404_825_557_695_773).abs() < 1e-13);
        assert!((z[2] - 8.653_727_912_911_013).abs() < 1e-13);
        let z = bessel_zeros(0.5, 10);
        for (k, zk) in z.iter().enumerate() {
            assert!((zk - PI * (k + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }
}
