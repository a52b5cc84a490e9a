//! Piecewise polynomials in local coordinates, used to build the cutoffs
//! exactly.

#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Poly {
        Poly(vec![c])
    }

    /// k-th derivative at t.
    pub fn deriv_at(&self, t: f64, k: usize) -> f64 {
        let c = &self.0;
        if k >= c.len() {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in (k..c.len()).rev() {
            let mut f = 1.0;
            for j in 0..k {
                f *= (i - j) as f64;
            }
            acc = acc * t + c[i] * f;
        }
        acc
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.deriv_at(t, 0)
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly::constant(0.0);
        }
        Poly(self.0.iter().enumerate().skip(1).map(|(i, v)| v * i as f64).collect())
    }

    /// Antiderivative vanishing at 0.
    pub fn integral(&self) -> Poly {
        let mut c = vec![0.0];
        c.extend(self.0.iter().enumerate().map(|(i, v)| v / (i + 1) as f64));
        Poly(c)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut c = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly(c)
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|v| v * s).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly((0..n).map(|i| self.0.get(i).unwrap_or(&0.0) + other.0.get(i).unwrap_or(&0.0)).collect())
    }

    /// p(a + b t).
    pub fn compose_affine(&self, a: f64, b: f64) -> Poly {
        let lin = Poly(vec![a, b]);
        let mut out = Poly::constant(0.0);
        for c in self.0.iter().rev() {
            out = out.mul(&lin).add(&Poly::constant(*c));
        }
        out
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Smoothstep of order n: 0 at 0, 1 at 1, first n derivatives vanish at both ends.
pub fn smoothstep(n: u64) -> Poly {
    let mut c = vec![0.0; (2 * n + 2) as usize];
    for k in 0..=n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        c[(n + 1 + k) as usize] = sign * binomial(n + k, k) * binomial(2 * n + 1, n - k);
    }
    Poly(c)
}

/// Smoothstep of order n in the centered variable s = t - 1/2, built from
/// S'(t) = c (t (1 - t))^n = c (1/4 - s^2)^n so that no cancellation occurs.
pub fn smoothstep_centered(n: u64) -> Poly {
    let c = (n + 1..=2 * n + 1).fold(1.0, |a, k| a * k as f64) / (1..=n).fold(1.0, |a, k| a * k as f64);
    let mut dp = vec![0.0; (2 * n + 1) as usize];
    for k in 0..=n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        dp[(2 * k) as usize] = c * sign * binomial(n, k) * 0.25f64.powi((n - k) as i32);
    }
    Poly(dp).integral().add(&Poly::constant(0.5))
}

/// Smoothstep of order n in the variable t - anchor.
pub fn smoothstep_at(n: u64, anchor: f64) -> Poly {
    if anchor == 0.0 {
        smoothstep(n)
    } else if anchor == 0.5 {
        smoothstep_centered(n)
    } else {
        smoothstep(n).compose_affine(anchor, 1.0)
    }
}

/// Piecewise polynomial; piece i covers [starts[i], starts[i] + lens[i]] and
/// is a polynomial in t = (r - start) / len - anchor. The last piece extends
/// to infinity.
#[derive(Debug, Clone)]
pub struct Piecewise {
    pub starts: Vec<f64>,
    pub lens: Vec<f64>,
    pub polys: Vec<Poly>,
    pub anchor: f64,
}

impl Piecewise {
    pub fn new(starts: Vec<f64>, lens: Vec<f64>, polys: Vec<Poly>, anchor: f64) -> Piecewise {
        assert!(starts.len() == lens.len() && lens.len() == polys.len());
        Piecewise { starts, lens, polys, anchor }
    }

    fn locate(&self, r: f64) -> usize {
        let mut i = 0;
        while i + 1 < self.starts.len() && r >= self.starts[i + 1] {
            i += 1;
        }
        i
    }

    /// k-th derivative in r.
    pub fn deriv_at(&self, r: f64, k: usize) -> f64 {
        let i = self.locate(r);
        let t = (r - self.starts[i]) / self.lens[i] - self.anchor;
        self.polys[i].deriv_at(t, k) / self.lens[i].powi(k as i32)
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.deriv_at(r, 0)
    }

    /// Antiderivative taking the value `c0` at the first start.
    pub fn integral(&self, c0: f64) -> Piecewise {
        let mut value = c0;
        let mut polys = Vec::with_capacity(self.polys.len());
        let a = self.anchor;
        for (i, p) in self.polys.iter().enumerate() {
            let big = p.integral().scale(self.lens[i]);
            let q = big.add(&Poly::constant(value - big.eval(-a)));
            value = q.eval(1.0 - a);
            polys.push(q);
        }
        Piecewise::new(self.starts.clone(), self.lens.clone(), polys, a)
    }

    pub fn square_half(&self) -> Piecewise {
        let polys = self.polys.iter().map(|p| p.mul(p).scale(0.5)).collect();
        Piecewise::new(self.starts.clone(), self.lens.clone(), polys, self.anchor)
    }

    /// New piecewise function from f(start, len, poly) on each piece.
    pub fn map_pieces(&self, f: impl Fn(f64, f64, &Poly) -> Poly) -> Piecewise {
        let polys = self
            .polys
            .iter()
            .enumerate()
            .map(|(i, p)| f(self.starts[i], self.lens[i], p))
            .collect();
        Piecewise::new(self.starts.clone(), self.lens.clone(), polys, self.anchor)
    }

    /// Breakpoints between pieces.
    pub fn breaks(&self) -> &[f64] {
        &self.starts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_properties() {
        for n in [1u64, 2, 5, 6] {
            let s = smoothstep(n);
            assert!(s.eval(0.0).abs() < 1e-14);
            assert!((s.eval(1.0) - 1.0).abs() < 1e-12);
            assert!((s.eval(0.5) - 0.5).abs() < 1e-12);
            for k in 1..=n as usize {
                assert!(s.deriv_at(0.0, k).abs() < 1e-9);
                assert!(s.deriv_at(1.0, k).abs() < 1e-7, "n={n} k={k} {}", s.deriv_at(1.0, k));
            }
            assert!((s.integral().eval(1.0) - 0.5).abs() < 1e-13);
        }
    }

    #[test]
    fn compose_and_integrate() {
        let p = Poly(vec![1.0, 2.0, 3.0]);
        let q = p.compose_affine(1.0, 2.0);
        for &t in &[0.0, 0.3, 1.7] {
            assert!((q.eval(t) - p.eval(1.0 + 2.0 * t)).abs() < 1e-12);
        }
        for anchor in [0.0, 0.5] {
            let pw = Piecewise::new(
                vec![0.0, 1.0],
                vec![1.0, 2.0],
                vec![Poly::constant(1.0), Poly::constant(-0.5)],
                anchor,
            );
            let f = pw.integral(0.0);
            assert!((f.eval(1.0) - 1.0).abs() < 1e-15);
            assert!((f.eval(3.0) - 0.0).abs() < 1e-15);
            assert!((f.deriv_at(2.0, 1) + 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn centered_smoothstep_matches() {
        for n in [2u64, 5, 6] {
            let a = smoothstep(n);
            let b = smoothstep_centered(n);
            for i in 0..=20 {
                let t = i as f64 / 20.0;
                assert!((a.eval(t) - b.eval(t - 0.5)).abs() < 1e-11);
            }
            assert!(b.eval(-0.5).abs() < 1e-15);
            assert!((b.eval(0.5) - 1.0).abs() < 1e-14);
        }
    }
}
