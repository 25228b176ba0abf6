//! Closed-form coefficients of the exponential ansatz
//! `K = W exp(⟨αx,x⟩ + ⟨βx,x0⟩ + ⟨γx0,x0⟩ + ⟨μ,x⟩ + ⟨ν,x0⟩)`
//! and the ODE system they satisfy:
//!
//! ```text
//! α̇ = 4αAα - (B + Bᵗ)/2      β̇ = 4βAα              γ̇ = βAβ
//! μ̇ = 4αAμ - 2αf - g          ν̇ = 2βAμ - βf
//! Ẇ/W = 2 tr(Aα) + ⟨Aμ,μ⟩ - ⟨f,μ⟩ - h
//! ```

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{require_nonsingular_d, KernelValue};
use crate::spectral::{check_regular, check_time, spectral_values, BranchFunction, OperatorSpec};

/// Entry magnitude at which [`rk4_propagate_alpha`] reports a blow-up.
pub const BLOW_UP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCoefficients {
    pub t: f64,
    pub alpha: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub nu: DVector<f64>,
    pub w: Complex64,
    /// `log W` with half the principal logarithm of each `ψ`; finite when `W`
    /// itself under- or overflows.
    pub log_w: Complex64,
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `α = γ = -(1/4t) A⁻¹φ(t√D)`, `β = (1/2t) A⁻¹ψ(t√D)`,
/// `μ = ½A⁻¹f - coth(t√D)/√D g`, `ν = g/(√D sinh(t√D))` and
/// `W = (4πt)^{-n/2} (det ψ / det A)^{1/2} exp(-(¼|f|²_{A⁻¹} + h)t + ⟨Aφ_W g, g⟩)`.
pub fn coefficients(spec: &OperatorSpec, t: f64) -> Result<KernelCoefficients> {
    check_time(t)?;
    let n = spec.dim();
    let sd = spec.spectral();
    let ainv = spec.a().inverse();
    let phi = sd.reconstruct(&spectral_values(sd, BranchFunction::Phi, t)?);
    let psi_vals = spectral_values(sd, BranchFunction::Psi, t)?;
    let psi = sd.reconstruct(&psi_vals);

    let alpha = symmetrize(ainv * phi * (-0.25 / t));
    let beta = symmetrize(ainv * psi * (0.5 / t));
    let gamma = alpha.clone();

    let f = spec.f();
    let g = spec.g();
    let mut mu = ainv * f * 0.5;
    let mut nu = DVector::zeros(n);
    let mut log_w = -(0.25 * f.dot(&(ainv * f)) + spec.h()) * t;
    if g.iter().any(|&v| v != 0.0) {
        require_nonsingular_d(spec)?;
        let coth = sd.reconstruct(&spectral_values(sd, BranchFunction::CothOverRoot, t)?);
        let csch = sd.reconstruct(&spectral_values(sd, BranchFunction::InvRootSinh, t)?);
        let phi_w = sd.reconstruct(&spectral_values(sd, BranchFunction::PhiW, t)?);
        mu -= coth * g;
        nu = csch * g;
        log_w += g.dot(&(spec.a().matrix() * phi_w * g));
    }

    let log_root: Complex64 = psi_vals.iter().map(|&p| 0.5 * Complex64::new(p, 0.0).ln()).sum();
    let log_w = log_root
        - 0.5 * (n as f64 * (4.0 * std::f64::consts::PI * t).ln() + spec.a().determinant().ln())
        + log_w;
    let w = log_w.exp();

    Ok(KernelCoefficients {
        t,
        alpha,
        beta,
        gamma,
        mu,
        nu,
        w,
        log_w,
    })
}

/// Evaluates the exponential ansatz.
pub fn assemble_ansatz(coef: &KernelCoefficients, x: &DVector<f64>, x0: &DVector<f64>) -> KernelValue {
    let expo = x.dot(&(&coef.alpha * x))
        + x.dot(&(&coef.beta * x0))
        + x0.dot(&(&coef.gamma * x0))
        + coef.mu.dot(x)
        + coef.nu.dot(x0);
    KernelValue((coef.log_w + expo).exp())
}

/// Residual of one equation: `‖FD derivative - right-hand side‖` and
/// `‖right-hand side‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquationResidual {
    pub residual: f64,
    pub rhs_norm: f64,
}

impl EquationResidual {
    /// `residual ≤ tol·(1 + ‖rhs‖)`
    pub fn passes(&self, tol: f64) -> bool {
        self.residual <= tol * (1.0 + self.rhs_norm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeResidualRow {
    pub t: f64,
    pub alpha: EquationResidual,
    pub beta: EquationResidual,
    pub gamma: EquationResidual,
    pub mu: EquationResidual,
    pub nu: EquationResidual,
    pub w: EquationResidual,
}

impl OdeResidualRow {
    pub fn equations(&self) -> [(&'static str, EquationResidual); 6] {
        [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("mu", self.mu),
            ("nu", self.nu),
            ("W", self.w),
        ]
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.equations().iter().all(|(_, e)| e.passes(tol))
    }

    pub fn worst_relative(&self) -> f64 {
        self.equations()
            .iter()
            .map(|(_, e)| e.residual / (1.0 + e.rhs_norm))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeResidualReport {
    pub rows: Vec<OdeResidualRow>,
}

impl OdeResidualReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.rows.iter().all(|r| r.passes(tol))
    }
}

/// Central-difference step used by [`ode_residuals`].
pub fn fd_step(t: f64) -> f64 {
    1e-5 * t.max(0.1)
}

fn residual_m(lhs: DMatrix<f64>, rhs: DMatrix<f64>) -> EquationResidual {
    EquationResidual {
        residual: (lhs - &rhs).norm(),
        rhs_norm: rhs.norm(),
    }
}

fn residual_v(lhs: DVector<f64>, rhs: DVector<f64>) -> EquationResidual {
    EquationResidual {
        residual: (lhs - &rhs).norm(),
        rhs_norm: rhs.norm(),
    }
}

/// Compares central differences of the closed forms with the right-hand
/// sides of the ODE system at each time.
pub fn ode_residuals(spec: &OperatorSpec, times: &[f64]) -> Result<OdeResidualReport> {
    let a = spec.a().matrix();
    let b = spec.b();
    let f = spec.f();
    let g = spec.g();
    let b_sym = (b + b.transpose()) * 0.5;
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let h = fd_step(t);
        let c = coefficients(spec, t)?;
        let lo = coefficients(spec, t - h)?;
        let hi = coefficients(spec, t + h)?;
        let dm = |p: &DMatrix<f64>, m: &DMatrix<f64>| (p - m) / (2.0 * h);
        let dv = |p: &DVector<f64>, m: &DVector<f64>| (p - m) / (2.0 * h);

        let alpha = residual_m(dm(&hi.alpha, &lo.alpha), &c.alpha * a * &c.alpha * 4.0 - &b_sym);
        let beta = residual_m(dm(&hi.beta, &lo.beta), &c.beta * a * &c.alpha * 4.0);
        let gamma = residual_m(dm(&hi.gamma, &lo.gamma), &c.beta * a * &c.beta);
        let mu = residual_v(
            dv(&hi.mu, &lo.mu),
            &c.alpha * a * &c.mu * 4.0 - &c.alpha * f * 2.0 - g,
        );
        let nu = residual_v(dv(&hi.nu, &lo.nu), &c.beta * a * &c.mu * 2.0 - &c.beta * f);
        let w_rhs = 2.0 * (a * &c.alpha).trace() + c.mu.dot(&(a * &c.mu)) - f.dot(&c.mu) - spec.h();
        let w_lhs = (hi.log_w - lo.log_w) / (2.0 * h);
        let w = EquationResidual {
            residual: (w_lhs - w_rhs).norm(),
            rhs_norm: w_rhs.abs(),
        };
        rows.push(OdeResidualRow {
            t,
            alpha,
            beta,
            gamma,
            mu,
            nu,
            w,
        });
    }
    Ok(OdeResidualReport { rows })
}

/// Classical RK4 for `α̇ = 4αAα - (B + Bᵗ)/2` started from the closed form
/// at `t0`.
pub fn rk4_propagate_alpha(spec: &OperatorSpec, t0: f64, t1: f64, steps: usize) -> Result<DMatrix<f64>> {
    check_time(t0)?;
    check_time(t1)?;
    if steps == 0 {
        return Err(Error::InvalidArgument("RK4 needs at least one step".into()));
    }
    for (i, &l) in spec.spectral().eigenvalues().iter().enumerate() {
        check_regular(t1, l, i)?;
    }
    let a = spec.a().matrix();
    let b_sym = (spec.b() + spec.b().transpose()) * 0.5;
    let rhs = |m: &DMatrix<f64>| m * a * m * 4.0 - &b_sym;
    let h = (t1 - t0) / steps as f64;
    let mut alpha = coefficients(spec, t0)?.alpha;
    for step in 1..=steps {
        let k1 = rhs(&alpha);
        let k2 = rhs(&(&alpha + &k1 * (h / 2.0)));
        let k3 = rhs(&(&alpha + &k2 * (h / 2.0)));
        let k4 = rhs(&(&alpha + &k3 * h));
        alpha += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let magnitude = alpha.amax();
        if !(magnitude <= BLOW_UP) {
            return Err(Error::StepUnstable {
                step,
                t: t0 + step as f64 * h,
                magnitude,
            });
        }
    }
    Ok(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{InstanceGenerator, SignClass};
    use crate::kernels::{kernel_l, kernel_ls};
    use crate::spectral::SymPosDefMatrix;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    fn scalar(b: f64, g: f64) -> OperatorSpec {
        OperatorSpec::new(SymPosDefMatrix::identity(1), dmatrix![b])
            .unwrap()
            .with_lower_order(dvector![0.0], dvector![g], 0.0)
            .unwrap()
    }

    #[test]
    fn no_potential() {
        let a = SymPosDefMatrix::new(dmatrix![2.0, 0.3; 0.3, 1.0]).unwrap();
        let spec = OperatorSpec::new(a.clone(), DMatrix::zeros(2, 2)).unwrap();
        let t = 0.4;
        let c = coefficients(&spec, t).unwrap();
        assert_relative_eq!(c.alpha, a.inverse() * (-0.25 / t), epsilon = 1e-15);
        assert_relative_eq!(c.beta, a.inverse() * (0.5 / t), epsilon = 1e-15);
        assert_eq!(c.alpha, c.gamma);
        assert_eq!(c.mu, DVector::zeros(2));
        assert_eq!(c.nu, DVector::zeros(2));
        let w = 1.0 / (4.0 * std::f64::consts::PI * t) / a.determinant().sqrt();
        assert_relative_eq!(c.w.re, w, max_relative = 1e-15);
        assert_eq!(c.w.im, 0.0);
    }

    #[test]
    fn hermite_scalar_values() {
        let c = coefficients(&scalar(1.0, 1.0), 0.25).unwrap();
        assert_relative_eq!(c.alpha[(0, 0)], -1.081_976_706_869_326_4, max_relative = 1e-14);
        assert_relative_eq!(c.mu[0], -1.081_976_706_869_326_4, max_relative = 1e-14);
        assert_relative_eq!(c.nu[0], 0.959_517_375_667_471_9, max_relative = 1e-14);
    }

    #[test]
    fn w_equals_homogeneous_amplitude() {
        let mut g = InstanceGenerator::new(9);
        for _ in 0..20 {
            let n = g.index(1, 4);
            let spec = g.operator(n, SignClass::Mixed);
            let t = g.regular_time(&spec, 0.05, 2.5, 0.02);
            let c = coefficients(&spec, t).unwrap();
            let z = DVector::zeros(n);
            let k = kernel_ls(&spec, &z, &z, t).unwrap();
            assert!((c.w - k.0).norm() <= 1e-12 * k.norm());
        }
    }

    #[test]
    fn residuals_on_random_instances() {
        let mut g = InstanceGenerator::new(21);
        for _ in 0..50 {
            let n = g.index(1, 4);
            let class = [SignClass::Hyperbolic, SignClass::Mixed, SignClass::Polynomial][g.index(0, 2)];
            let spec = g.operator(n, class);
            if spec.spectral().zero_eigenvalue().is_some() {
                continue;
            }
            let spec = g.lower_order(spec).unwrap();
            let report = ode_residuals(&spec, &[0.1, 0.3, 0.7]).unwrap();
            for row in &report.rows {
                assert!(row.passes(1e-5), "{row:?}");
            }
        }
    }

    #[test]
    fn residual_without_potential_is_tiny() {
        let spec = OperatorSpec::new(SymPosDefMatrix::identity(2), DMatrix::zeros(2, 2)).unwrap();
        let report = ode_residuals(&spec, &[0.1, 0.5, 2.0]).unwrap();
        for row in &report.rows {
            assert!(row.passes(1e-9), "{row:?}");
        }
    }

    #[test]
    fn rk4_examples() {
        let a = rk4_propagate_alpha(&scalar(1.0, 0.0), 0.01, 0.5, 4096).unwrap();
        assert!((a[(0, 0)] + 0.656_517_642_749_665_7).abs() < 1e-8);

        let am = SymPosDefMatrix::new(dmatrix![1.5, 0.2; 0.2, 0.9]).unwrap();
        let spec = OperatorSpec::new(am.clone(), DMatrix::zeros(2, 2)).unwrap();
        let a = rk4_propagate_alpha(&spec, 0.01, 0.5, 4096).unwrap();
        assert_relative_eq!(a, am.inverse() * (-0.5), epsilon = 1e-10);

        let spec = scalar(-1.0, 0.0);
        let a = rk4_propagate_alpha(&spec, 0.01, 0.7, 4096).unwrap();
        let closed = coefficients(&spec, 0.7).unwrap().alpha[(0, 0)];
        assert_relative_eq!(closed, -0.086_238_362_915_900_0, max_relative = 1e-12);
        assert!((a[(0, 0)] - closed).abs() < 1e-7);
    }

    #[test]
    fn rk4_through_conjugate_time_blows_up() {
        // the interval [1, 2] contains the pole of α at π/2
        for steps in [64, 4096] {
            let err = rk4_propagate_alpha(&scalar(-1.0, 0.0), 1.0, 2.0, steps).unwrap_err();
            assert!(matches!(err, Error::StepUnstable { .. }), "{err:?}");
        }
    }

    #[test]
    fn assembly_matches_kernel_l() {
        let mut g = InstanceGenerator::new(33);
        for _ in 0..20 {
            let n = g.index(1, 4);
            let spec = g.operator(n, SignClass::Polynomial);
            if spec.spectral().zero_eigenvalue().is_some() {
                continue;
            }
            let spec = g.lower_order(spec).unwrap();
            let t = g.regular_time(&spec, 0.05, 1.5, 0.02);
            let c = coefficients(&spec, t).unwrap();
            let (x, x0) = (g.vector(n, 1.0), g.vector(n, 1.0));
            let k = kernel_l(&spec, &x, &x0, t).unwrap();
            let a = assemble_ansatz(&c, &x, &x0);
            assert!((a.0 - k.0).norm() <= 1e-11 * k.norm(), "{a:?} vs {k:?}");
        }
    }

    #[test]
    fn assembly_simple_cases() {
        let spec = OperatorSpec::new(SymPosDefMatrix::identity(1), dmatrix![0.5]).unwrap();
        let c = coefficients(&spec, 0.3).unwrap();
        let x = dvector![0.7];
        let z = dvector![0.0];
        let v = assemble_ansatz(&c, &x, &z);
        assert_relative_eq!(v.re(), c.w.re * (c.alpha[(0, 0)] * 0.49).exp(), max_relative = 1e-15);
        let k = kernel_ls(&spec, &x, &dvector![0.2], 0.3).unwrap();
        assert_relative_eq!(assemble_ansatz(&c, &x, &dvector![0.2]).re(), k.re(), max_relative = 1e-12);
    }

    #[test]
    fn singular_d_with_g() {
        let spec = scalar(0.0, 1.0);
        assert!(matches!(coefficients(&spec, 0.5), Err(Error::SingularD { .. })));
    }
}
