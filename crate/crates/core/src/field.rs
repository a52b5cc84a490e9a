use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;

/// Complex radial profile sampled at the grid nodes.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<RadialGrid>,
    values: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2: f64,
    pub grad_l2: f64,
    pub lap_l2: f64,
}

impl Field {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<Complex64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("field samples".into()));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Field {
        let n = grid.len();
        Field { grid, values: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> Complex64) -> Field {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Field { grid, values }
    }

    pub fn from_real_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Field {
        Field::from_fn(grid, |r| Complex64::new(f(r), 0.0))
    }

    pub(crate) fn from_parts(grid: Arc<RadialGrid>, values: Vec<Complex64>) -> Field {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field::from_parts(self.grid.clone(), self.values.iter().map(|v| v * c).collect())
    }

    pub fn conj(&self) -> Field {
        Field::from_parts(self.grid.clone(), self.values.iter().map(|v| v.conj()).collect())
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }

    /// L^2 distance to another field on the same grid.
    pub fn distance(&self, other: &Field) -> Result<f64> {
        self.same_grid(other)?;
        let w = self.grid.weights();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(w)
            .map(|((a, b), w)| w * (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// L^2 inner product, conjugate-linear in the first slot.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        self.same_grid(other)?;
        let w = self.grid.weights();
        Ok(self.values.iter().zip(&other.values).zip(w).map(|((a, b), w)| a.conj() * b * w).sum())
    }

    /// L^p norm by nodal quadrature.
    pub fn lp(&self, p: f64) -> f64 {
        let w = self.grid.weights();
        self.values.iter().zip(w).map(|(v, w)| w * v.norm().powf(p)).sum::<f64>().powf(1.0 / p)
    }

    /// L^2 norms of u, grad u and Delta u, the last two computed spectrally.
    pub fn norms(&self) -> Norms {
        let plan = self.grid.plan();
        let a = plan.to_coeffs(&self.values);
        Norms {
            l2: plan.quadratic_form(&a, |_| 1.0).sqrt(),
            grad_l2: plan.quadratic_form(&a, |p| p * p).sqrt(),
            lap_l2: plan.quadratic_form(&a, |p| p.powi(4)).sqrt(),
        }
    }

    pub fn mass(&self) -> f64 {
        let w = self.grid.weights();
        self.values.iter().zip(w).map(|(v, w)| w * v.norm_sqr()).sum()
    }
}
