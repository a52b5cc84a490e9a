//! Radial cutoff pairs (phi, psi) for the localized virial and bivariance
//! functionals. Both kinds satisfy phi = r^2/2 on [0, 1], phi'' <= 1 and are
//! flat beyond their support; `Generic` additionally has psi' = 0 for r >= 10
//! and phi = (psi')^2 / 2 everywhere.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{smoothstep_at, Piecewise, Poly};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    Generic,
    AppendixB,
}

pub const JET: usize = 8;

const GL16_X: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003,
    0.865_631_202_387_831_7,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL16_W: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_5,
    0.149_595_988_816_576_7,
    0.124_628_971_255_533_9,
    0.095_158_511_682_492_8,
    0.062_253_523_938_647_9,
    0.027_152_459_411_754_1,
];

pub(crate) fn gauss16(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let m = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in GL16_X.iter().zip(&GL16_W) {
        s += w * (f(m + h * x) + f(m - h * x));
    }
    s * h
}

/// Unit-scale cutoff profile.
#[derive(Debug, Clone)]
pub struct CutoffProfile {
    kind: CutoffKind,
    phi: Piecewise,
    hess_margin: Piecewise,
    slope_margin: Piecewise,
    psi: Option<Piecewise>,
    psi_knots: Vec<(f64, f64)>,
    support_end: f64,
}

/// Plateau slope and transition widths of the generic profile.
const GENERIC_RISE: f64 = 2.0;
const GENERIC_FALL: f64 = 4.0;
const GENERIC_END: f64 = 10.0;
const SMOOTH_ORDER: u64 = 6;

/// psi' of the generic profile in the local basis with the given anchor.
fn generic_slope(anchor: f64) -> Piecewise {
    let l1 = GENERIC_RISE;
    let l2 = GENERIC_FALL;
    // closure condition for psi'(10) = 0
    let slope = (1.0 + l1 / 2.0) / (GENERIC_END - 1.0 - l1 / 2.0 - l2 / 2.0);
    let s = smoothstep_at(SMOOTH_ORDER, anchor);
    let r1 = 1.0 + l1;
    let r2 = GENERIC_END - l2;
    let dg = Piecewise::new(
        vec![0.0, 1.0, r1, r2, GENERIC_END],
        vec![1.0, l1, r2 - r1, l2, 1.0],
        vec![
            Poly::constant(1.0),
            Poly::constant(1.0).add(&s.scale(-(1.0 + slope))),
            Poly::constant(-slope),
            Poly::constant(-slope).add(&s.scale(slope)),
            Poly::constant(0.0),
        ],
        anchor,
    );
    let mut g = dg.integral(0.0);
    let last = g.polys.len() - 1;
    g.polys[last] = Poly::constant(0.0);
    g
}

fn generic_profile() -> CutoffProfile {
    let g = generic_slope(0.5);
    let psi = g.integral(0.0);
    let phi = g.square_half();
    let left = generic_slope(0.0).square_half();
    CutoffProfile::assemble(CutoffKind::Generic, phi, &left, Some(psi), GENERIC_END)
}

/// phi'' of the appendix-B profile, and the width of its final transition.
fn appendix_b_curvature(anchor: f64, width: f64) -> Piecewise {
    let eps = 6f64.powf(-0.2);
    let rb = 1.0 + eps;
    let one_minus_s = Poly::constant(1.0).add(&smoothstep_at(SMOOTH_ORDER, anchor).scale(-1.0));
    let q_base = Poly(vec![1.0, 0.0, 0.0, 0.0, 0.0, -6.0]);
    let near = Poly(vec![1.0, 0.0, 0.0, 0.0, 0.0, -1.0]).compose_affine(anchor, 1.0);
    Piecewise::new(
        vec![0.0, 1.0, rb, rb + width],
        vec![1.0, eps, width, 1.0],
        vec![
            Poly::constant(1.0),
            near,
            q_base.compose_affine(eps + width * anchor, width).mul(&one_minus_s),
            Poly::constant(0.0),
        ],
        anchor,
    )
}

fn appendix_b_width() -> Result<f64> {
    let eps = 6f64.powf(-0.2);
    let rb = 1.0 + eps;
    let slope_at_rb = rb - eps.powi(6);
    let tail_integral = |l: f64| -> f64 {
        let curv = appendix_b_curvature(0.5, l);
        let p = &curv.polys[2];
        let big = p.integral();
        l * (big.eval(0.5) - big.eval(-0.5))
    };
    let (mut lo, mut hi) = (1e-6, 8.0);
    if slope_at_rb + tail_integral(hi) > 0.0 {
        return Err(Error::InvalidParams("appendix-B transition width not bracketed".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope_at_rb + tail_integral(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn appendix_b_phi(anchor: f64, width: f64) -> Piecewise {
    let mut d1 = appendix_b_curvature(anchor, width).integral(0.0);
    // force the flat tail exactly
    let last = d1.polys.len() - 1;
    d1.polys[last] = Poly::constant(0.0);
    d1.integral(0.0)
}

fn appendix_b_profile() -> Result<CutoffProfile> {
    let eps = 6f64.powf(-0.2);
    let rb = 1.0 + eps;
    let width = appendix_b_width()?;
    let end = rb + width;
    let phi = appendix_b_phi(0.5, width);
    let left = appendix_b_phi(0.0, width);
    let mut profile = CutoffProfile::assemble(CutoffKind::AppendixB, phi, &left, None, end);
    let mut knots = vec![(1.0, 0.5)];
    let mut marks = vec![1.0];
    let steps = 40;
    for k in 1..=steps {
        marks.push(1.0 + eps * k as f64 / steps as f64);
    }
    for k in 1..=steps {
        marks.push(rb + width * k as f64 / steps as f64);
    }
    let mut acc = 0.5;
    for w in marks.windows(2) {
        acc += gauss16(w[0], w[1], |r| profile.psi_slope(r));
        knots.push((w[1], acc));
    }
    profile.psi_knots = knots;
    Ok(profile)
}

/// Taylor coefficients of sqrt of a series with positive leading term.
fn sqrt_series(p: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; p.len()];
    s[0] = p[0].sqrt();
    for k in 1..p.len() {
        let mut acc = p[k];
        for i in 1..k {
            acc -= s[i] * s[k - i];
        }
        s[k] = acc / (2.0 * s[0]);
    }
    s
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |a, i| a * i as f64)
}

impl CutoffProfile {
    fn assemble(
        kind: CutoffKind,
        phi: Piecewise,
        left: &Piecewise,
        psi: Option<Piecewise>,
        support_end: f64,
    ) -> CutoffProfile {
        // 1 - phi'' and r - phi' formed symbolically in the left-anchored basis,
        // where they vanish to high order, so they keep relative precision
        let hess_margin = left.map_pieces(|_, len, p| {
            Poly::constant(1.0).add(&p.derivative().derivative().scale(-1.0 / (len * len)))
        });
        let slope_margin = left.map_pieces(|start, len, p| Poly(vec![start, len]).add(&p.derivative().scale(-1.0 / len)));
        CutoffProfile { kind, phi, hess_margin, slope_margin, psi, psi_knots: Vec::new(), support_end }
    }

    /// 1 - phi''(r), accurate where it is small.
    pub fn hessian_margin(&self, r: f64) -> f64 {
        if r <= 1.0 {
            0.0
        } else {
            self.hess_margin.eval(r)
        }
    }

    /// 1 - phi'(r)/r, accurate where it is small.
    pub fn slope_margin(&self, r: f64) -> f64 {
        if r <= 1.0 {
            0.0
        } else {
            self.slope_margin.eval(r) / r
        }
    }

    pub fn new(kind: CutoffKind) -> Result<CutoffProfile> {
        match kind {
            CutoffKind::Generic => Ok(generic_profile()),
            CutoffKind::AppendixB => appendix_b_profile(),
        }
    }

    pub fn kind(&self) -> CutoffKind {
        self.kind
    }

    /// Radius beyond which phi' vanishes.
    pub fn support_end(&self) -> f64 {
        self.support_end
    }

    pub fn breakpoints(&self) -> &[f64] {
        self.phi.breaks()
    }

    /// phi and its first seven derivatives.
    pub fn phi_jet(&self, r: f64) -> [f64; JET] {
        let mut out = [0.0; JET];
        if r <= 1.0 {
            out[0] = 0.5 * r * r;
            out[1] = r;
            out[2] = 1.0;
            return out;
        }
        for (k, v) in out.iter_mut().enumerate() {
            *v = self.phi.deriv_at(r, k);
        }
        if let (CutoffKind::Generic, Some(psi)) = (self.kind, &self.psi) {
            // the expanded square can round below zero near the support end
            let g = psi.deriv_at(r, 1);
            out[0] = 0.5 * g * g;
        }
        out
    }

    fn psi_slope(&self, r: f64) -> f64 {
        if r <= 1.0 {
            r
        } else {
            (2.0 * self.phi.eval(r)).max(0.0).sqrt()
        }
    }

    /// psi and its first seven derivatives.
    pub fn psi_jet(&self, r: f64) -> [f64; JET] {
        let mut out = [0.0; JET];
        if r <= 1.0 {
            out[0] = 0.5 * r * r;
            out[1] = r;
            out[2] = 1.0;
            return out;
        }
        if let Some(psi) = &self.psi {
            for (k, v) in out.iter_mut().enumerate() {
                *v = psi.deriv_at(r, k);
            }
            return out;
        }
        let phi = self.phi_jet(r);
        let p: Vec<f64> = (0..JET - 1).map(|k| 2.0 * phi[k] / factorial(k)).collect();
        let s = sqrt_series(&p);
        for k in 0..JET - 1 {
            out[k + 1] = factorial(k) * s[k];
        }
        out[0] = self.psi_value(r);
        out
    }

    fn psi_value(&self, r: f64) -> f64 {
        let knots = &self.psi_knots;
        let (last_r, last_v) = *knots.last().unwrap();
        if r >= last_r {
            return last_v + (r - last_r) * self.psi_slope(last_r);
        }
        let mut i = 0;
        while i + 1 < knots.len() && knots[i + 1].0 <= r {
            i += 1;
        }
        let (a, v) = knots[i];
        v + gauss16(a, r, |s| self.psi_slope(s))
    }
}

/// Radial derivatives of Delta f from radial derivatives of f at r > 0.
pub fn laplacian_jet(f: &[f64], r: f64, d: usize) -> Vec<f64> {
    let c = d as f64 - 1.0;
    let m_max = f.len() - 2;
    (0..m_max)
        .map(|m| {
            let mut acc = f[m + 2];
            let mut binom = 1.0;
            for i in 0..=m {
                if i > 0 {
                    binom = binom * (m - i + 1) as f64 / i as f64;
                }
                let q = m - i;
                let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                acc += c * binom * f[i + 1] * sign * factorial(q) / r.powi(q as i32 + 1);
            }
            acc
        })
        .collect()
}

/// Unit-scale Laplacian data: Delta phi with derivatives up to order 4,
/// Delta^2 phi up to order 2, and Delta^3 phi.
#[derive(Debug, Clone, Copy)]
pub struct LaplacianData {
    pub lap: [f64; 5],
    /// d - Delta phi.
    pub lap_defect: f64,
    pub bilap: [f64; 3],
    pub trilap: f64,
}

impl CutoffProfile {
    pub fn laplacian_data(&self, r: f64, d: usize) -> LaplacianData {
        if r <= 1.0 {
            return LaplacianData {
                lap: [d as f64, 0.0, 0.0, 0.0, 0.0],
                lap_defect: 0.0,
                bilap: [0.0; 3],
                trilap: 0.0,
            };
        }
        let phi = self.phi_jet(r);
        let l1 = laplacian_jet(&phi[..7], r, d);
        let l2 = laplacian_jet(&l1, r, d);
        let l3 = laplacian_jet(&l2, r, d);
        let lap_defect = self.hessian_margin(r) + (d as f64 - 1.0) * self.slope_margin(r);
        LaplacianData {
            lap: [l1[0], l1[1], l1[2], l1[3], l1[4]],
            lap_defect,
            bilap: [l2[0], l2[1], l2[2]],
            trilap: l3[0],
        }
    }
}

/// Cutoff pair at scale R sampled at a set of radii.
#[derive(Debug, Clone)]
pub struct CutoffPair {
    pub scale: f64,
    pub kind: CutoffKind,
    pub d: usize,
    pub radii: Vec<f64>,
    /// phi_R and radial derivatives of orders 0..=6, indexed [order][radius].
    pub phi: Vec<Vec<f64>>,
    /// Delta phi_R and radial derivatives of orders 0..=2.
    pub lap_phi: Vec<Vec<f64>>,
    pub bilap_phi: Vec<f64>,
    pub trilap_phi: Vec<f64>,
    /// d - Delta phi_R, computed without cancellation.
    pub lap_defect: Vec<f64>,
    /// 1 - phi_R'', computed without cancellation.
    pub hess_margin: Vec<f64>,
    /// psi_R and radial derivatives of orders 0..=6, once built.
    pub psi: Option<Vec<Vec<f64>>>,
    profile: Arc<CutoffProfile>,
    constants: OnceLock<VirialConstants>,
}

pub fn build_phi(scale: f64, kind: CutoffKind, d: usize, radii: &[f64]) -> Result<CutoffPair> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParams(format!("cutoff scale {scale} must be positive")));
    }
    if d < 2 {
        return Err(Error::InvalidParams("cutoff dimension must be >= 2".into()));
    }
    let profile = Arc::new(CutoffProfile::new(kind)?);
    let mut phi: Vec<Vec<f64>> = (0..7).map(|_| Vec::with_capacity(radii.len())).collect();
    let mut lap_phi: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(radii.len())).collect();
    let mut bilap_phi = Vec::with_capacity(radii.len());
    let mut trilap_phi = Vec::with_capacity(radii.len());
    let mut lap_defect = Vec::with_capacity(radii.len());
    let mut hess_margin = Vec::with_capacity(radii.len());
    for &r in radii {
        let x = r / scale;
        let jet = profile.phi_jet(x);
        for (k, col) in phi.iter_mut().enumerate() {
            col.push(scale.powi(2 - k as i32) * jet[k]);
        }
        let lap = profile.laplacian_data(x, d);
        for (k, col) in lap_phi.iter_mut().enumerate() {
            col.push(scale.powi(-(k as i32)) * lap.lap[k]);
        }
        bilap_phi.push(scale.powi(-2) * lap.bilap[0]);
        trilap_phi.push(scale.powi(-4) * lap.trilap);
        lap_defect.push(lap.lap_defect);
        hess_margin.push(profile.hessian_margin(x));
    }
    Ok(CutoffPair {
        scale,
        kind,
        d,
        radii: radii.to_vec(),
        phi,
        lap_phi,
        bilap_phi,
        trilap_phi,
        lap_defect,
        hess_margin,
        psi: None,
        profile,
        constants: OnceLock::new(),
    })
}

pub fn build_psi(mut pair: CutoffPair) -> CutoffPair {
    let scale = pair.scale;
    let mut psi: Vec<Vec<f64>> = (0..7).map(|_| Vec::with_capacity(pair.radii.len())).collect();
    for &r in &pair.radii {
        let jet = pair.profile.psi_jet(r / scale);
        for (k, col) in psi.iter_mut().enumerate() {
            col.push(scale.powi(2 - k as i32) * jet[k]);
        }
    }
    pair.psi = Some(psi);
    pair
}

/// Cutoff pair sampled on the nodes of a grid.
pub fn mastercutoff_pair(scale: f64, kind: CutoffKind, grid: &crate::grid::RadialGrid) -> Result<CutoffPair> {
    Ok(build_psi(build_phi(scale, kind, grid.dim(), grid.nodes())?))
}

impl CutoffPair {
    pub fn profile(&self) -> &CutoffProfile {
        &self.profile
    }

    /// phi_R'(r) at the sample radii.
    pub fn phi_slope(&self) -> &[f64] {
        &self.phi[1]
    }

    pub fn psi_slope(&self) -> Option<&[f64]> {
        self.psi.as_ref().map(|p| p[1].as_slice())
    }

    /// Unit-scale virial constants, computed once per pair.
    pub fn virial_constants(&self) -> VirialConstants {
        *self.constants.get_or_init(|| virial_constants(&self.profile, self.d))
    }

    /// Largest radius at which any derivative of phi_R of order >= 1 is nonzero.
    pub fn support_radius(&self) -> f64 {
        self.scale * self.profile.support_end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eta0Report {
    /// Largest admissible constant, capped at 1.
    pub eta_star: f64,
    /// Constant actually reported, half of eta_star.
    pub eta0: f64,
    /// Smallest relative slack 1 - eta0 b / a.
    pub min_slack: f64,
    /// Radius (unit scale) where the ratio a / b is smallest.
    pub argmin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffReport {
    pub min_hessian_margin: f64,
    pub min_slope_margin: f64,
    pub min_laplacian_margin: f64,
    pub min_phi: f64,
    pub max_mastercutoff_error: f64,
    pub max_tail_derivative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirialConstants {
    /// sup |(Delta phi)''| at unit scale.
    pub hess_lap: f64,
    /// sup |Delta^2 phi|.
    pub bilap: f64,
    /// sup |Delta^3 phi|.
    pub trilap: f64,
    /// sup |d - Delta phi|.
    pub lap_defect: f64,
}

fn fine_radii(profile: &CutoffProfile, lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mut r: Vec<f64> = (0..=count).map(|i| lo + (hi - lo) * i as f64 / count as f64).collect();
    r.extend(profile.breakpoints().iter().filter(|&&b| b > lo && b < hi));
    r.sort_by(|a, b| a.partial_cmp(b).unwrap());
    r
}

/// Check the pointwise cutoff inequalities at the pair's radii and on a fine
/// unit-scale grid.
pub fn verify_cutoff(pair: &CutoffPair) -> Result<CutoffReport> {
    let profile = &pair.profile;
    let d = pair.d;
    let end = profile.support_end();
    let mut unit: Vec<f64> = fine_radii(profile, 1e-3, end + 1.0, 10_000);
    unit.extend(pair.radii.iter().map(|r| r / pair.scale));
    let mut report = CutoffReport {
        min_hessian_margin: f64::INFINITY,
        min_slope_margin: f64::INFINITY,
        min_laplacian_margin: f64::INFINITY,
        min_phi: f64::INFINITY,
        max_mastercutoff_error: 0.0,
        max_tail_derivative: 0.0,
    };
    let tol = 1e-12;
    for &x in &unit {
        let jet = profile.phi_jet(x);
        let checks = [
            ("1 - phi''", profile.hessian_margin(x)),
            ("1 - phi'/r", profile.slope_margin(x)),
            ("d - Delta phi", profile.laplacian_data(x, d).lap_defect),
            ("phi", jet[0]),
        ];
        for (what, margin) in checks {
            if margin < -tol {
                return Err(Error::CutoffViolation { what: what.into(), radius: x * pair.scale, margin });
            }
        }
        report.min_hessian_margin = report.min_hessian_margin.min(checks[0].1);
        report.min_slope_margin = report.min_slope_margin.min(checks[1].1);
        report.min_laplacian_margin = report.min_laplacian_margin.min(checks[2].1);
        report.min_phi = report.min_phi.min(jet[0]);
        let psi = profile.psi_jet(x);
        let err = (0.5 * psi[1] * psi[1] - jet[0]).abs() / (1.0 + jet[0]);
        report.max_mastercutoff_error = report.max_mastercutoff_error.max(err);
        if x > end {
            for v in &jet[1..7] {
                report.max_tail_derivative = report.max_tail_derivative.max(v.abs());
            }
        }
    }
    Ok(report)
}

/// Constant eta0 in the pointwise inequality
/// 1 - phi'' >= eta0 (A^2 + B^{d/2}) for r > 1, with
/// A = 4 (Delta phi)'' + 2 Delta^2 phi and B = 8d/(4+d) (d - Delta phi).
pub fn eta0(profile: &CutoffProfile, d: usize) -> Result<Eta0Report> {
    let end = profile.support_end();
    // both sides vanish as r -> 1+, with a/b -> infinity; start just inside
    let radii = fine_radii(profile, 1.0 + 1e-4, end, 100_000);
    let mut best = f64::INFINITY;
    let mut argmin = f64::NAN;
    let ratios: Vec<(f64, f64, f64)> = radii
        .iter()
        .filter(|&&x| x > 1.0)
        .map(|&x| {
            let lap = profile.laplacian_data(x, d);
            let a = profile.hessian_margin(x);
            let big_a = 4.0 * lap.lap[2] + 2.0 * lap.bilap[0];
            let big_b = 8.0 * d as f64 / (4.0 + d as f64) * lap.lap_defect;
            (x, a, big_a * big_a + big_b.max(0.0).powf(d as f64 / 2.0))
        })
        .collect();
    for &(x, a, b) in &ratios {
        if a < 0.0 {
            return Err(Error::CutoffViolation { what: "1 - phi''".into(), radius: x, margin: a });
        }
        if b > 0.0 && a / b < best {
            best = a / b;
            argmin = x;
        }
    }
    let eta_star = best.min(1.0);
    let eta0 = 0.5 * eta_star;
    let min_slack = ratios
        .iter()
        .filter(|(_, a, b)| *b > 0.0 && *a > 0.0)
        .map(|(_, a, b)| 1.0 - eta0 * b / a)
        .fold(f64::INFINITY, f64::min);
    Ok(Eta0Report { eta_star, eta0, min_slack, argmin })
}

/// Sup norms of the unit-scale cutoff quantities entering the virial error budget.
pub fn virial_constants(profile: &CutoffProfile, d: usize) -> VirialConstants {
    let radii = fine_radii(profile, 1.0, profile.support_end() + 0.5, 20_000);
    let mut c = VirialConstants { hess_lap: 0.0, bilap: 0.0, trilap: 0.0, lap_defect: 0.0 };
    for &x in &radii {
        let lap = profile.laplacian_data(x, d);
        c.hess_lap = c.hess_lap.max(lap.lap[2].abs());
        c.bilap = c.bilap.max(lap.bilap[0].abs());
        c.trilap = c.trilap.max(lap.trilap.abs());
        c.lap_defect = c.lap_defect.max(lap.lap_defect.abs());
    }
    // sampled suprema, padded for the gaps between samples
    let pad = 1.01;
    VirialConstants {
        hess_lap: c.hess_lap * pad,
        bilap: c.bilap * pad,
        trilap: c.trilap * pad,
        lap_defect: c.lap_defect * pad,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_jet_matches_power() {
        // f = r^4: Delta f = (12 + 4(d-1)) r^2
        let d = 3;
        let r: f64 = 1.7;
        let f = [r.powi(4), 4.0 * r.powi(3), 12.0 * r * r, 24.0 * r, 24.0, 0.0, 0.0];
        let l = laplacian_jet(&f, r, d);
        let c = 12.0 + 4.0 * (d as f64 - 1.0);
        assert!((l[0] - c * r * r).abs() < 1e-12);
        assert!((l[1] - 2.0 * c * r).abs() < 1e-12);
        assert!((l[2] - 2.0 * c).abs() < 1e-12);
        assert!(l[3].abs() < 1e-12);
    }

    #[test]
    fn generic_profile_shape() {
        let p = CutoffProfile::new(CutoffKind::Generic).unwrap();
        assert_eq!(p.psi_jet(10.0)[1], 0.0);
        assert_eq!(p.psi_jet(12.0)[1], 0.0);
        for &r in &[0.5, 1.0, 2.3, 5.0, 9.9] {
            let psi = p.psi_jet(r);
            let phi = p.phi_jet(r);
            assert!((0.5 * psi[1] * psi[1] - phi[0]).abs() < 1e-13);
            assert!(phi[2] <= 1.0 + 1e-14);
        }
        // psi by quadrature of psi'
        let q = gauss16(0.0, 1.0, |s| s) + gauss16(1.0, 3.0, |s| p.psi_jet(s)[1]);
        assert!((p.psi_jet(3.0)[0] - q).abs() < 1e-13);
    }

    #[test]
    fn appendix_b_profile_shape() {
        let p = CutoffProfile::new(CutoffKind::AppendixB).unwrap();
        let eps = 6f64.powf(-0.2);
        let rb = 1.0 + eps;
        assert!(p.phi_jet(rb)[2].abs() < 1e-13);
        let end = p.support_end();
        assert!(p.phi_jet(end + 0.1)[1].abs() < 1e-12);
        // 1 - phi'' = 6 eps^5 just past r = 1
        let e: f64 = 0.05;
        assert!((1.0 - p.phi_jet(1.0 + e)[2] - 6.0 * e.powi(5)).abs() < 1e-13);
        // psi' never vanishes beyond the support
        assert!(p.psi_jet(end + 5.0)[1] > 1.0);
        for &r in &[1.2, rb + 0.1, end - 0.01] {
            let psi = p.psi_jet(r);
            let h = 1e-5;
            let fd = (p.psi_jet(r + h)[0] - p.psi_jet(r - h)[0]) / (2.0 * h);
            assert!((fd - psi[1]).abs() < 1e-8);
            let fd2 = (p.psi_jet(r + h)[1] - p.psi_jet(r - h)[1]) / (2.0 * h);
            assert!((fd2 - psi[2]).abs() < 1e-7);
        }
    }

    #[test]
    fn margins_hold() {
        for kind in [CutoffKind::Generic, CutoffKind::AppendixB] {
            for d in 2..=6 {
                let radii: Vec<f64> = (1..400).map(|i| i as f64 * 0.05).collect();
                let pair = build_psi(build_phi(1.0, kind, d, &radii).unwrap());
                let rep = verify_cutoff(&pair).unwrap();
                assert!(rep.min_hessian_margin >= -1e-12);
                assert!(rep.max_mastercutoff_error < 1e-10);
            }
        }
    }

    #[test]
    fn scaling_of_samples() {
        let radii = [0.5, 3.0, 11.0, 25.0];
        let a = build_psi(build_phi(1.0, CutoffKind::Generic, 3, &[0.125, 0.75, 2.75, 6.25]).unwrap());
        let b = build_psi(build_phi(4.0, CutoffKind::Generic, 3, &radii).unwrap());
        for k in 0..7 {
            for i in 0..4 {
                let expect = 4f64.powi(2 - k as i32) * a.phi[k][i];
                assert!((b.phi[k][i] - expect).abs() < 1e-12 * (1.0 + expect.abs()));
            }
        }
    }
}
