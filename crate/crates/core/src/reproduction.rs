//! Reproduction numbers: closed forms and the next-generation-matrix route.
//!
//! The two routes are kept independent so that one can check the other.

use nalgebra::Matrix2;
use thiserror::Error;

use crate::model::{FullState, ModelParams, Provenance, ReproductionSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReproductionError {
    #[error("degenerate rates: {0}")]
    DegenerateRates(&'static str),
}

/// Closed-form `R1, R2, R12, R21` and `R0 = max(R1, R2)`.
///
/// ```text
/// R1  = beta1 / gamma1
/// R2  = beta2 / gamma2
/// R12 = (R1 / R2) ((1 - eps) beta2 + eps gamma2 + sigma2) / (gamma2 + sigma2)
/// R21 = (R2 / R1) (beta1 + sigma1) / (gamma1 + sigma1)
/// ```
///
/// When a transmission rate is zero the ratio `Ri/Rj` is replaced by its
/// one-sided limit so the function stays total over parameter scans.
pub fn closed_form_reproduction(p: &ModelParams) -> Result<ReproductionSet, ReproductionError> {
    if !(p.gamma1 > 0.0 && p.gamma2 > 0.0) {
        return Err(ReproductionError::DegenerateRates("recovery rates must be positive"));
    }
    if !(p.gamma1 + p.sigma1 > 0.0 && p.gamma2 + p.sigma2 > 0.0) {
        return Err(ReproductionError::DegenerateRates("gamma + sigma must be positive"));
    }
    let r1 = p.beta1 / p.gamma1;
    let r2 = p.beta2 / p.gamma2;
    let eps = p.epsilon;

    // R12 = beta1 gamma2 ((1-eps) beta2 + eps gamma2 + sigma2) / (beta2 gamma1 (gamma2 + sigma2))
    let r12 = if p.beta2 > 0.0 {
        p.beta1 * p.gamma2 * ((1.0 - eps) * p.beta2 + eps * p.gamma2 + p.sigma2)
            / (p.beta2 * p.gamma1 * (p.gamma2 + p.sigma2))
    } else if p.beta1 == 0.0 {
        0.0
    } else if eps * p.gamma2 + p.sigma2 > 0.0 {
        f64::INFINITY
    } else {
        r1
    };
    // R21 = beta2 gamma1 (beta1 + sigma1) / (beta1 gamma2 (gamma1 + sigma1))
    let r21 = if p.beta1 > 0.0 {
        p.beta2 * p.gamma1 * (p.beta1 + p.sigma1) / (p.beta1 * p.gamma2 * (p.gamma1 + p.sigma1))
    } else if p.beta2 == 0.0 {
        0.0
    } else if p.sigma1 > 0.0 {
        f64::INFINITY
    } else {
        r2
    };

    Ok(ReproductionSet {
        r0: r1.max(r2),
        r1,
        r2,
        r12,
        r21,
        provenance: Provenance::ClosedForm,
        r12_target_physical: r2 > 1.0,
        r21_target_physical: r1 > 1.0,
    })
}

/// Jacobians of the new-infection and transition terms restricted to the
/// infectious compartments `(I1, I2)`, evaluated at a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgmPieces {
    pub f_matrix: Matrix2<f64>,
    pub v_matrix: Matrix2<f64>,
    pub evaluated_at: FullState,
}

impl NgmPieces {
    /// `F V^{-1}`. `V` is inverted as a general 2x2 matrix.
    pub fn next_generation_matrix(&self) -> Option<Matrix2<f64>> {
        self.v_matrix.try_inverse().map(|v_inv| self.f_matrix * v_inv)
    }

    /// Spectral radius of the strain-`i` block of `F V^{-1}` (i = 1 or 2).
    pub fn strain_radius(&self, strain: usize) -> Option<f64> {
        assert!(strain == 1 || strain == 2, "strain index must be 1 or 2");
        let k = self.next_generation_matrix()?;
        let mut block = Matrix2::zeros();
        let j = strain - 1;
        block[(j, j)] = k[(j, j)];
        Some(spectral_radius_2x2(&block))
    }
}

/// Next-generation pieces at `x`. `x` is expected to be a steady state; this
/// is not checked.
pub fn ngm_at_state(p: &ModelParams, x: &FullState) -> NgmPieces {
    let n = p.n_pop;
    // new infections: (beta1/N) I1 (S + (1-eps) R2) and (beta2/N) I2 (S + R1)
    let f11 = p.beta1 / n * (x.s + (1.0 - p.epsilon) * x.r2);
    let f22 = p.beta2 / n * (x.s + x.r1);
    NgmPieces {
        f_matrix: Matrix2::new(f11, 0.0, 0.0, f22),
        v_matrix: Matrix2::new(p.gamma1, 0.0, 0.0, p.gamma2),
        evaluated_at: *x,
    }
}

/// Largest eigenvalue modulus of a real 2x2 matrix via the characteristic
/// quadratic `l^2 - tr l + det = 0`.
pub fn spectral_radius_2x2(m: &Matrix2<f64>) -> f64 {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        (half + root).abs().max((half - root).abs())
    } else {
        // complex pair, |l|^2 = det
        det.sqrt()
    }
}

/// Reproduction numbers assembled from spectral radii at the disease-free and
/// single-strain steady states, as an independent check of the closed forms.
pub fn ngm_reproduction(
    p: &ModelParams,
    x1: &FullState,
    x2: &FullState,
) -> Result<ReproductionSet, ReproductionError> {
    let x0 = FullState::disease_free(p.n_pop);
    let radius = |x: &FullState, strain| {
        ngm_at_state(p, x)
            .strain_radius(strain)
            .ok_or(ReproductionError::DegenerateRates("V is singular"))
    };
    let r1 = radius(&x0, 1)?;
    let r2 = radius(&x0, 2)?;
    Ok(ReproductionSet {
        r0: spectral_radius_2x2(
            &ngm_at_state(p, &x0)
                .next_generation_matrix()
                .ok_or(ReproductionError::DegenerateRates("V is singular"))?,
        ),
        r1,
        r2,
        r12: radius(x2, 1)?,
        r21: radius(x1, 2)?,
        provenance: Provenance::NextGeneration,
        r12_target_physical: r2 > 1.0,
        r21_target_physical: r1 > 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(beta1: f64, epsilon: f64) -> ModelParams {
        ModelParams::new(beta1, 0.6, 0.2, 0.1, 0.1, 0.1, epsilon, 10000.0).unwrap()
    }

    fn sig3(x: f64) -> f64 {
        let mag = 10f64.powf(x.abs().log10().floor() - 2.0);
        (x / mag).round() * mag
    }

    #[test]
    fn coexistence_reference_values() {
        let r = closed_form_reproduction(&reference(0.4, 0.0)).unwrap();
        assert_eq!(r.r1, 2.0);
        assert!((r.r2 - 6.0).abs() < 1e-12);
        assert!((sig3(r.r12) - 1.17).abs() < 1e-12);
        assert!((r.r21 - 5.0).abs() < 1e-12);
        assert_eq!(r.r0, r.r1.max(r.r2));
    }

    #[test]
    fn partial_cross_immunity_values() {
        let r = closed_form_reproduction(&reference(0.4, 0.5)).unwrap();
        assert!((r.r12 - 0.75).abs() < 1e-12);
        assert!((r.r21 - 5.0).abs() < 1e-12);
    }

    #[test]
    fn delta_like_full_r1() {
        let p = ModelParams::new(0.36685, 0.43498, 0.35878, 0.35878, 0.00266, 0.046, 0.001, 16336307.0).unwrap();
        let r = closed_form_reproduction(&p).unwrap();
        assert!((r.r1 - 1.02250).abs() < 1e-4);
    }

    #[test]
    fn fast_waning_limit_recovers_basic_ratio() {
        let mut p = reference(0.4, 0.0);
        p.sigma2 = 1e9;
        let r = closed_form_reproduction(&p).unwrap();
        assert!((r.r12 - r.r1 / r.r2).abs() < 1e-8);
    }

    #[test]
    fn zero_transmission_takes_limits() {
        let r = closed_form_reproduction(&ModelParams { beta1: 0.0, ..reference(0.4, 0.0) }).unwrap();
        assert_eq!(r.r1, 0.0);
        assert_eq!(r.r12, 0.0);
        assert_eq!(r.r21, f64::INFINITY);
        assert!(!r.r21_target_physical);
        let r = closed_form_reproduction(&ModelParams { beta2: 0.0, ..reference(0.4, 0.0) }).unwrap();
        assert_eq!(r.r12, f64::INFINITY);
        assert_eq!(r.r21, 0.0);
        let r = closed_form_reproduction(&ModelParams { beta1: 0.0, beta2: 0.0, ..reference(0.4, 0.0) }).unwrap();
        assert_eq!((r.r1, r.r2, r.r12, r.r21), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn degenerate_recovery_is_an_error() {
        let p = ModelParams { gamma2: 0.0, ..reference(0.4, 0.0) };
        assert!(closed_form_reproduction(&p).is_err());
    }

    #[test]
    fn ngm_at_disease_free_state() {
        let p = reference(0.4, 0.0);
        let pieces = ngm_at_state(&p, &FullState::disease_free(p.n_pop));
        assert_eq!(pieces.f_matrix, Matrix2::new(0.4, 0.0, 0.0, 0.6));
        assert_eq!(pieces.v_matrix, Matrix2::new(0.2, 0.0, 0.0, 0.1));
    }

    #[test]
    fn full_cross_immunity_drops_r2_term() {
        let p = reference(0.4, 1.0);
        let x = FullState::new(3000.0, 1000.0, 2000.0, 1500.0, 2500.0).unwrap();
        let pieces = ngm_at_state(&p, &x);
        assert!((pieces.f_matrix[(0, 0)] - p.beta1 * x.s / p.n_pop).abs() < 1e-15);
    }

    #[test]
    fn ngm_at_original_equilibrium_gives_r21() {
        let p = reference(0.4, 0.0);
        let n = p.n_pop;
        let x1 = FullState {
            s: n * p.gamma1 / p.beta1,
            i1: n * p.sigma1 * (p.beta1 - p.gamma1) / (p.beta1 * (p.gamma1 + p.sigma1)),
            r1: n * p.gamma1 * (p.beta1 - p.gamma1) / (p.beta1 * (p.gamma1 + p.sigma1)),
            i2: 0.0,
            r2: 0.0,
        };
        let rho = ngm_at_state(&p, &x1).strain_radius(2).unwrap();
        assert!((rho - 5.0).abs() < 1e-10);
    }

    #[test]
    fn spectral_radius_examples() {
        assert_eq!(spectral_radius_2x2(&Matrix2::new(2.0, 0.0, 0.0, 6.0)), 6.0);
        assert_eq!(spectral_radius_2x2(&Matrix2::new(0.0, 1.0, 1.0, 0.0)), 1.0);
        let expected = (5.0 + 33f64.sqrt()) / 2.0;
        assert!((spectral_radius_2x2(&Matrix2::new(1.0, 2.0, 3.0, 4.0)) - expected).abs() < 1e-12);
        // rotation-like matrix with complex eigenvalues 1 +- 2i
        assert!((spectral_radius_2x2(&Matrix2::new(1.0, -2.0, 2.0, 1.0)) - 5f64.sqrt()).abs() < 1e-12);
    }
}
