//! Closed-form heat kernels.
//!
//! For `L_S = -div(A∇) + ⟨Bx,x⟩` with `AB = BA` the kernel is
//! `(4πt)^{-n/2} (det ψ(t√D) / det A)^{1/2} exp(-S/2)` where `S` is the action
//! of the geodesic from `x0` to `x` in time `t`. Beyond the first conjugate
//! time `ψ` has negative eigenvalues and the amplitude is complex; each
//! eigenvalue contributes its own principal square root.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonics::{action, BoundaryData};
use crate::spectral::{
    check_regular, check_time, spectral_values, BranchFunction, OperatorSpec,
    SpectralData, SymPosDefMatrix, SIGN_TOLERANCE,
};

/// Off-diagonal Frobenius mass below which inputs take the diagonal path.
pub const DIAGONAL_THRESHOLD: f64 = 1e-14;

/// Relative size below which an eigenvalue of `D` counts as zero for the
/// lower-order terms.
pub const SINGULAR_D_THRESHOLD: f64 = 1e-10;

/// Complex kernel value. Real up to rounding in the regular component that
/// contains `t → 0⁺`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue(pub Complex64);

impl KernelValue {
    pub fn re(self) -> f64 {
        self.0.re
    }

    pub fn im(self) -> f64 {
        self.0.im
    }

    pub fn norm(self) -> f64 {
        self.0.norm()
    }

    /// `|im| ≤ tol·|value|`
    pub fn is_real(self, tol: f64) -> bool {
        self.0.im.abs() <= tol * self.0.norm()
    }
}

fn principal_sqrt(x: f64) -> Complex64 {
    Complex64::new(x, 0.0).sqrt()
}

fn check_point(n: usize, x: &DVector<f64>) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.len(),
        });
    }
    Ok(())
}

fn off_diagonal_mass(m: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for (i, j) in (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))) {
        if i != j {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s.sqrt()
}

/// Heat kernel of `-div(A∇) + ⟨Bx,x⟩`. Diagonal inputs are routed to
/// [`kernel_ls_diag`], everything else to [`kernel_ls_spectral`].
pub fn kernel_ls(
    spec: &OperatorSpec,
    x: &DVector<f64>,
    x0: &DVector<f64>,
    t: f64,
) -> Result<KernelValue> {
    if !spec.is_homogeneous() {
        return Err(Error::InvalidArgument(
            "kernel_ls takes f = g = 0 and h = 0; use kernel_l for lower-order terms".into(),
        ));
    }
    let a = spec.a().matrix();
    let b = spec.b();
    if off_diagonal_mass(a) < DIAGONAL_THRESHOLD && off_diagonal_mass(b) < DIAGONAL_THRESHOLD {
        let a_diag: Vec<f64> = a.diagonal().iter().map(|v| v.sqrt()).collect();
        let b_diag: Vec<f64> = b.diagonal().iter().copied().collect();
        kernel_ls_diag(&a_diag, &b_diag, x, x0, t)
    } else {
        kernel_ls_spectral(spec, x, x0, t)
    }
}

/// `(4πt)^{-n/2} (det A)^{-1/2} ∏ √ψᵢ`, one principal root per eigenvalue.
pub(crate) fn ls_amplitude(a: &SymPosDefMatrix, sd: &SpectralData, t: f64) -> Result<Complex64> {
    Ok(log_ls_amplitude(a, sd, t)?.exp())
}

fn log_ls_amplitude(a: &SymPosDefMatrix, sd: &SpectralData, t: f64) -> Result<Complex64> {
    let n = sd.dim() as f64;
    let psi = spectral_values(sd, BranchFunction::Psi, t)?;
    let log_root: Complex64 = psi.iter().map(|&p| 0.5 * Complex64::new(p, 0.0).ln()).sum();
    Ok(log_root - 0.5 * (n * (4.0 * std::f64::consts::PI * t).ln() + a.determinant().ln()))
}

/// `log K` of [`kernel_ls_spectral`], finite where the kernel itself under- or
/// overflows. The imaginary part carries the phase past conjugate times.
pub fn log_kernel_ls(spec: &OperatorSpec, x: &DVector<f64>, x0: &DVector<f64>, t: f64) -> Result<Complex64> {
    let n = spec.dim();
    check_point(n, x)?;
    check_point(n, x0)?;
    let s = action(spec, &BoundaryData::new(x0.clone(), x.clone(), t))?;
    Ok(log_ls_amplitude(spec.a(), spec.spectral(), t)? - 0.5 * s.0)
}

/// Kernel through the spectral data of `D` and the action of the geodesic.
pub fn kernel_ls_spectral(
    spec: &OperatorSpec,
    x: &DVector<f64>,
    x0: &DVector<f64>,
    t: f64,
) -> Result<KernelValue> {
    Ok(KernelValue(log_kernel_ls(spec, x, x0, t)?.exp()))
}

/// Product-form kernel for `A = diag(aⱼ²)` and `B = diag(b_signed)`, where
/// `b_signed[j] = ±bⱼ²`. Each coordinate contributes
/// `√(b/(2πa sinh u)) exp(-(b/2a)[coth u (x² + x0²) - 2x x0 / sinh u])`
/// with `u = 2t a b`, or the same with `sin`/`cot` for negative entries.
pub fn kernel_ls_diag(
    a: &[f64],
    b_signed: &[f64],
    x: &DVector<f64>,
    x0: &DVector<f64>,
    t: f64,
) -> Result<KernelValue> {
    let n = a.len();
    if b_signed.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b_signed.len(),
        });
    }
    check_point(n, x)?;
    check_point(n, x0)?;
    check_time(t)?;
    let mut value = Complex64::new(1.0, 0.0);
    for j in 0..n {
        let aj = a[j];
        if !(aj > 0.0) {
            return Err(Error::NotPositiveDefinite {
                reason: format!("a[{j}] = {aj} must be positive"),
            });
        }
        let bs = b_signed[j];
        let (xj, yj) = (x[j], x0[j]);
        let factor = if bs.abs() <= SIGN_TOLERANCE {
            let var = 4.0 * t * aj * aj;
            Complex64::new(
                (std::f64::consts::PI * var).sqrt().recip() * (-(xj - yj).powi(2) / var).exp(),
                0.0,
            )
        } else {
            let bj = bs.abs().sqrt();
            let u = 2.0 * t * aj * bj;
            let (sn, cotlike) = if bs > 0.0 {
                (u.sinh(), u.cosh() / u.sinh())
            } else {
                check_regular(t, -4.0 * aj * aj * bs.abs(), j)?;
                (u.sin(), u.cos() / u.sin())
            };
            let amp = principal_sqrt(bj / (2.0 * std::f64::consts::PI * aj * sn));
            let expo = -(bj / (2.0 * aj)) * (cotlike * (xj * xj + yj * yj) - 2.0 * xj * yj / sn);
            amp * expo.exp()
        };
        value *= factor;
    }
    Ok(KernelValue(value))
}

fn has_nonzero(v: &DVector<f64>) -> bool {
    v.iter().any(|&c| c != 0.0)
}

/// Rejects a numerically zero eigenvalue of `D` when `g ≠ 0`.
pub(crate) fn require_nonsingular_d(spec: &OperatorSpec) -> Result<()> {
    if !has_nonzero(spec.g()) {
        return Ok(());
    }
    let sd = spec.spectral();
    let scale = sd.d().norm();
    for (index, &eigenvalue) in sd.eigenvalues().iter().enumerate() {
        if eigenvalue.abs() <= SINGULAR_D_THRESHOLD * scale {
            return Err(Error::SingularD { index, eigenvalue });
        }
    }
    Ok(())
}

/// Heat kernel of `-div(A∇) + ⟨Bx,x⟩ + ⟨f,∇⟩ + ⟨g,x⟩ + h`.
///
/// It is the homogeneous kernel times
/// `exp(½⟨f,x⟩_{A⁻¹} - ⟨coth(t√D)/√D g, x⟩ + ⟨g, x0⟩ / (√D sinh(t√D)))`
/// and `exp(-(¼|f|²_{A⁻¹} + h)t + ⟨A φ_W(t√D) g, g⟩)`.
///
/// With `g ≠ 0` this equals `K_LS(x - c, x0)` up to a factor depending on `t`
/// alone, where `(B + Bᵗ)c = -g`: as `t → 0` it concentrates at `x0 + c`
/// rather than at `x0`.
pub fn kernel_l(
    spec: &OperatorSpec,
    x: &DVector<f64>,
    x0: &DVector<f64>,
    t: f64,
) -> Result<KernelValue> {
    Ok(KernelValue(log_kernel_l(spec, x, x0, t)?.exp()))
}

/// `log K` of [`kernel_l`], assembled before exponentiating.
pub fn log_kernel_l(spec: &OperatorSpec, x: &DVector<f64>, x0: &DVector<f64>, t: f64) -> Result<Complex64> {
    let log_base = log_kernel_ls(spec, x, x0, t)?;
    let ainv = spec.a().inverse();
    let f = spec.f();
    let g = spec.g();
    let mut expo = 0.5 * f.dot(&(ainv * x)) - (0.25 * f.dot(&(ainv * f)) + spec.h()) * t;
    if has_nonzero(g) {
        require_nonsingular_d(spec)?;
        let sd = spec.spectral();
        let coth = sd.reconstruct(&spectral_values(sd, BranchFunction::CothOverRoot, t)?);
        let csch = sd.reconstruct(&spectral_values(sd, BranchFunction::InvRootSinh, t)?);
        let phi_w = sd.reconstruct(&spectral_values(sd, BranchFunction::PhiW, t)?);
        expo += -(coth * g).dot(x) + (csch * g).dot(x0) + g.dot(&(spec.a().matrix() * phi_w * g));
    }
    Ok(log_base + expo)
}

/// `(4πt)^{-n/2} (det A)^{-1/2} exp(-|x - x0|²_{A⁻¹} / 4t)`
pub fn kernel_gaussian(
    a: &SymPosDefMatrix,
    x: &DVector<f64>,
    x0: &DVector<f64>,
    t: f64,
) -> Result<f64> {
    let n = a.dim();
    check_point(n, x)?;
    check_point(n, x0)?;
    check_time(t)?;
    let d = x - x0;
    let q = d.dot(&(a.inverse() * &d));
    Ok((4.0 * std::f64::consts::PI * t).powi(-(n as i32)).sqrt() / a.determinant().sqrt()
        * (-q / (4.0 * t)).exp())
}

/// Mehler kernel of `-Σ aⱼ²∂ⱼ² + Σ bⱼ²xⱼ²` for positive `aⱼ, bⱼ`.
pub fn kernel_mehler(
    a: &[f64],
    b: &[f64],
    x: &DVector<f64>,
    x0: &DVector<f64>,
    t: f64,
) -> Result<f64> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    check_point(n, x)?;
    check_point(n, x0)?;
    check_time(t)?;
    let mut value = 1.0;
    for j in 0..n {
        let (aj, bj) = (a[j], b[j]);
        if !(aj > 0.0 && bj > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Mehler coefficients must be positive (a[{j}] = {aj}, b[{j}] = {bj})"
            )));
        }
        let u = 2.0 * t * aj * bj;
        let r = bj / aj;
        let quad = (x[j] * x[j] + x0[j] * x0[j]) * u.cosh() - 2.0 * x[j] * x0[j];
        value *= (r / (2.0 * std::f64::consts::PI * u.sinh())).sqrt()
            * (-r * quad / (2.0 * u.sinh())).exp();
    }
    Ok(value)
}

fn check_square(m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.nrows().max(m.ncols()),
        });
    }
    Ok(())
}

/// Ornstein–Uhlenbeck kernel of `div(A∇) - ⟨Bx,∇⟩` with respect to the
/// weighted measure `e^{-½⟨By,y⟩_{A⁻¹}} dy`, obtained by conjugating with
/// the Schrödinger operator whose `D` is `BᵗB`.
pub fn kernel_ou(
    a: &SymPosDefMatrix,
    b: &DMatrix<f64>,
    x: &DVector<f64>,
    x0: &DVector<f64>,
    t: f64,
) -> Result<f64> {
    let n = a.dim();
    check_square(b, n)?;
    check_point(n, x)?;
    check_point(n, x0)?;
    check_time(t)?;
    let scale = b.norm().max(f64::MIN_POSITIVE);
    let asym = (b - b.transpose()).norm();
    if asym > 1e-12 * scale {
        return Err(Error::NonCommuting {
            residual: asym,
            bound: 1e-12 * scale,
        });
    }
    let am = a.matrix();
    let comm = (am * b - b * am).norm();
    let bound = 1e-10 * am.norm() * b.norm();
    if comm > bound {
        return Err(Error::NonCommuting {
            residual: comm,
            bound,
        });
    }
    let sd = SpectralData::from_symmetric(b.transpose() * b)?;
    let phi = sd.reconstruct(&spectral_values(&sd, BranchFunction::Phi, t)?);
    let psi_vals = spectral_values(&sd, BranchFunction::Psi, t)?;
    let psi = sd.reconstruct(&psi_vals);
    let det_psi: f64 = psi_vals.iter().product();
    let ainv = a.inverse();
    let shifted = ainv * (phi - b * t);
    let quad = x.dot(&(&shifted * x)) + x0.dot(&(&shifted * x0)) - 2.0 * x.dot(&(ainv * psi * x0));
    let amp = (4.0 * std::f64::consts::PI * t).powi(-(n as i32)).sqrt()
        * (det_psi / a.determinant() * (t * b.trace()).exp()).sqrt();
    Ok(amp * (-quad / (4.0 * t)).exp())
}

fn fourier_inputs(a: &[f64], b_signed: &[f64], t: f64) -> Result<()> {
    if b_signed.len() != a.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b_signed.len(),
        });
    }
    check_time(t)?;
    if let Some(j) = a.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NotPositiveDefinite {
            reason: format!("a[{j}] = {} must be positive", a[j]),
        });
    }
    Ok(())
}

/// Fourier transform `∫K(x, 0; t) e^{-2πi⟨ξ,x⟩} dx` of the diagonal kernel:
/// `∏ (sech u)^{1/2} (sec u)^{1/2} exp(-2π² (a/b) tanh u ξ²)` with `u = 2tab`
/// and `tan` in place of `tanh` for negative `b_signed`.
///
/// The integral converges only while `cot u > 0` on trigonometric
/// coordinates. Past `u = π` the sine factor of the kernel is negative and
/// the result is complex, matching the principal-root kernel.
pub fn fourier_closed_form(
    a: &[f64],
    b_signed: &[f64],
    xi: &DVector<f64>,
    t: f64,
) -> Result<Complex64> {
    fourier_inputs(a, b_signed, t)?;
    check_point(a.len(), xi)?;
    let mut value = Complex64::new(1.0, 0.0);
    for j in 0..a.len() {
        let aj = a[j];
        let bs = b_signed[j];
        let pi2 = 2.0 * std::f64::consts::PI.powi(2);
        if bs.abs() <= SIGN_TOLERANCE {
            value *= (-pi2 * 2.0 * t * aj * aj * xi[j] * xi[j]).exp();
            continue;
        }
        let bj = bs.abs().sqrt();
        let u = 2.0 * t * aj * bj;
        if bs > 0.0 {
            value *= (-pi2 * (aj / bj) * u.tanh() * xi[j] * xi[j]).exp() / u.cosh().sqrt();
        } else {
            let (sn, cs) = u.sin_cos();
            if cs.abs() <= 1e-12 {
                return Err(Error::SingularCos { index: j, t });
            }
            if sn == 0.0 || cs / sn <= 0.0 {
                return Err(Error::DivergentIntegral { index: j, t });
            }
            value *= principal_sqrt(1.0 / cs) * (-pi2 * (aj / bj) * (sn / cs) * xi[j] * xi[j]).exp();
        }
    }
    Ok(value)
}

/// `∫K(x, 0; t) dx = ∏ (sech u)^{1/2} ∏ (sec u)^{1/2}`
pub fn normalization_integral(a: &[f64], b_signed: &[f64], t: f64) -> Result<Complex64> {
    fourier_closed_form(a, b_signed, &DVector::zeros(a.len()), t)
}

/// One coordinate axis of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn value(&self, k: usize) -> f64 {
        self.lo + (self.hi - self.lo) * k as f64 / (self.points - 1) as f64
    }
}

/// Tensor grid of evaluation points and a list of times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
    pub times: Vec<f64>,
}

impl GridSpec {
    /// Checks axis sizes and that no time sits on the singular set of `spec`.
    pub fn validate(&self, spec: &OperatorSpec) -> Result<()> {
        if self.axes.len() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                found: self.axes.len(),
            });
        }
        if let Some(ax) = self.axes.iter().find(|ax| ax.points < 2) {
            return Err(Error::InvalidArgument(format!(
                "grid axes need at least 2 points, got {}",
                ax.points
            )));
        }
        for &t in &self.times {
            check_time(t)?;
            for (i, &l) in spec.spectral().eigenvalues().iter().enumerate() {
                check_regular(t, l, i)?;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product::<usize>() * self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spatial points with the last axis varying fastest.
    pub fn points(&self) -> Vec<DVector<f64>> {
        let total: usize = self.axes.iter().map(|a| a.points).product();
        (0..total)
            .map(|mut idx| {
                let mut v = DVector::zeros(self.axes.len());
                for (d, ax) in self.axes.iter().enumerate().rev() {
                    v[d] = ax.value(idx % ax.points);
                    idx /= ax.points;
                }
                v
            })
            .collect()
    }
}

/// Which closed form a grid evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    /// `kernel_ls`, requires `f = g = 0`, `h = 0`
    Schrodinger,
    /// `kernel_l`
    Full,
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSample {
    pub x: DVector<f64>,
    pub t: f64,
    pub value: KernelValue,
}

pub fn evaluate_kernel(
    kind: KernelKind,
    spec: &OperatorSpec,
    x: &DVector<f64>,
    x0: &DVector<f64>,
    t: f64,
) -> Result<KernelValue> {
    match kind {
        KernelKind::Schrodinger => kernel_ls(spec, x, x0, t),
        KernelKind::Full => kernel_l(spec, x, x0, t),
    }
}

/// Evaluates the kernel from `x0` on every grid point, time-major order.
pub fn evaluate_grid(
    kind: KernelKind,
    spec: &OperatorSpec,
    x0: &DVector<f64>,
    grid: &GridSpec,
) -> Result<Vec<GridSample>> {
    grid.validate(spec)?;
    let points = grid.points();
    let jobs: Vec<(f64, &DVector<f64>)> = grid
        .times
        .iter()
        .flat_map(|&t| points.iter().map(move |p| (t, p)))
        .collect();
    let eval = |&(t, p): &(f64, &DVector<f64>)| -> Result<GridSample> {
        Ok(GridSample {
            x: p.clone(),
            t,
            value: evaluate_kernel(kind, spec, p, x0, t)?,
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.par_iter().map(eval).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(eval).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{first_singular_time, InstanceGenerator, SignClass};
    use crate::quadrature::TanhSinh;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn scalar(a2: f64, b: f64) -> OperatorSpec {
        OperatorSpec::new(SymPosDefMatrix::diagonal(&[a2]).unwrap(), dmatrix![b]).unwrap()
    }

    const MEHLER_HALF: f64 = 0.368_005_198_707_560_8;

    #[test]
    fn gaussian_examples() {
        let a = SymPosDefMatrix::identity(1);
        let v = kernel_gaussian(&a, &dvector![1.0], &dvector![0.0], 0.25).unwrap();
        assert_relative_eq!(v, 0.207_553_748_710_297_4, max_relative = 1e-15);
        let a = SymPosDefMatrix::new(dmatrix![2.0, 0.5; 0.5, 1.0]).unwrap();
        let v = kernel_gaussian(&a, &dvector![0.3, 0.3], &dvector![0.3, 0.3], 0.7).unwrap();
        assert_relative_eq!(v, 1.0 / (4.0 * PI * 0.7) / a.determinant().sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn gaussian_total_mass() {
        let q = TanhSinh::default();
        let a = SymPosDefMatrix::identity(1);
        let m = q
            .integrate_real(|x| kernel_gaussian(&a, &dvector![x], &dvector![0.2], 0.3).unwrap(), -9.0, 9.0)
            .unwrap();
        assert!((m - 1.0).abs() < 1e-6);
        let a = SymPosDefMatrix::new(dmatrix![1.5, 0.4; 0.4, 0.8]).unwrap();
        let m = q
            .integrate_2d(
                |x, y| Complex64::new(kernel_gaussian(&a, &dvector![x, y], &dvector![0.0, 0.0], 0.2).unwrap(), 0.0),
                (-8.0, 8.0),
                (-8.0, 8.0),
                &[0.0],
                &[0.0],
            )
            .unwrap();
        assert!((m.re - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ls_without_potential_is_gaussian() {
        let a = SymPosDefMatrix::new(dmatrix![2.0, 0.3; 0.3, 1.0]).unwrap();
        let spec = OperatorSpec::new(a.clone(), DMatrix::zeros(2, 2)).unwrap();
        let (x, x0) = (dvector![0.4, -1.0], dvector![0.1, 0.5]);
        let k = kernel_ls(&spec, &x, &x0, 0.6).unwrap();
        assert_relative_eq!(k.re(), kernel_gaussian(&a, &x, &x0, 0.6).unwrap(), max_relative = 1e-12);
        assert_eq!(k.im(), 0.0);
    }

    #[test]
    fn hermite_at_origin() {
        let k = kernel_ls(&scalar(1.0, 1.0), &dvector![0.0], &dvector![0.0], 0.5).unwrap();
        assert_relative_eq!(k.re(), MEHLER_HALF, max_relative = 1e-15);
        let k = kernel_ls_spectral(&scalar(1.0, 1.0), &dvector![0.0], &dvector![0.0], 0.5).unwrap();
        assert_relative_eq!(k.re(), MEHLER_HALF, max_relative = 1e-15);
        let m = kernel_mehler(&[1.0], &[1.0], &dvector![0.0], &dvector![0.0], 0.5).unwrap();
        assert_relative_eq!(m, MEHLER_HALF, max_relative = 1e-15);
    }

    #[test]
    fn diag_singular_time() {
        let err = kernel_ls_diag(&[1.0], &[-1.0], &dvector![0.0], &dvector![0.0], FRAC_PI_2).unwrap_err();
        assert!(matches!(err, Error::SingularTime { .. }));
    }

    #[test]
    fn mehler_matches_diag_and_spectral() {
        let mut g = InstanceGenerator::new(5);
        for _ in 0..50 {
            let n = g.index(1, 4);
            let a: Vec<f64> = (0..n).map(|_| g.uniform(0.5, 1.5)).collect();
            let b: Vec<f64> = (0..n).map(|_| g.uniform(0.2, 1.5)).collect();
            let (x, x0) = (g.vector(n, 1.5), g.vector(n, 1.5));
            let t = g.uniform(0.05, 2.0);
            let m = kernel_mehler(&a, &b, &x, &x0, t).unwrap();
            let b2: Vec<f64> = b.iter().map(|v| v * v).collect();
            let d = kernel_ls_diag(&a, &b2, &x, &x0, t).unwrap();
            assert_relative_eq!(m, d.re(), max_relative = 1e-12);
            let a2: Vec<f64> = a.iter().map(|v| v * v).collect();
            let spec = OperatorSpec::new(
                SymPosDefMatrix::diagonal(&a2).unwrap(),
                DMatrix::from_diagonal(&DVector::from_vec(b2)),
            )
            .unwrap();
            let s = kernel_ls_spectral(&spec, &x, &x0, t).unwrap();
            assert_relative_eq!(m, s.re(), max_relative = 1e-12);
        }
    }

    #[test]
    fn mehler_small_b_approaches_gaussian() {
        let (x, x0) = (dvector![0.7], dvector![-0.2]);
        let gauss = kernel_gaussian(&SymPosDefMatrix::identity(1), &x, &x0, 0.4).unwrap();
        for b in [1e-1, 1e-2, 1e-3] {
            let m = kernel_mehler(&[1.0], &[b], &x, &x0, 0.4).unwrap();
            assert!((m - gauss).abs() <= 2.0 * b * b * gauss, "b = {b}");
        }
    }

    #[test]
    fn positive_all_hyperbolic_on_diagonal() {
        let k = kernel_ls_diag(&[1.0, 0.7], &[0.5, 2.0], &dvector![0.3, 0.3], &dvector![0.3, 0.3], 0.9).unwrap();
        assert!(k.re() > 0.0 && k.im() == 0.0);
    }

    #[test]
    fn complex_beyond_first_conjugate_time() {
        // sin(2t) < 0 for t in (π/2, π)
        let k = kernel_ls_diag(&[1.0], &[-1.0], &dvector![0.1], &dvector![0.0], 2.0).unwrap();
        assert!(k.re().abs() < 1e-15 * k.norm() && k.im() > 0.0);
        let s = kernel_ls_spectral(&scalar(1.0, -1.0), &dvector![0.1], &dvector![0.0], 2.0).unwrap();
        assert_relative_eq!(s.im(), k.im(), max_relative = 1e-12);
    }

    #[test]
    fn lower_order_examples() {
        let a = SymPosDefMatrix::new(dmatrix![1.2, 0.1; 0.1, 0.9]).unwrap();
        let b = 0.3 * a.matrix() - DMatrix::identity(2, 2) * 0.2;
        let spec = OperatorSpec::new(a, b).unwrap();
        let (x, x0) = (dvector![0.2, -0.4], dvector![0.5, 0.1]);
        let base = kernel_ls(&spec, &x, &x0, 0.8).unwrap();
        assert_relative_eq!(kernel_l(&spec, &x, &x0, 0.8).unwrap().re(), base.re(), max_relative = 1e-14);
        let with_h = spec.clone().with_lower_order(DVector::zeros(2), DVector::zeros(2), 0.7).unwrap();
        assert_relative_eq!(
            kernel_l(&with_h, &x, &x0, 0.8).unwrap().re(),
            base.re() * (-0.7f64 * 0.8).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn linear_potential_displaces_the_source() {
        // kernel_l(., x0; t) / K_LS(. - c, x0; t) does not depend on x
        let mut g = InstanceGenerator::new(21);
        for class in [SignClass::Hyperbolic, SignClass::Mixed] {
            let spec = g.operator(2, class);
            let spec = spec.clone().with_lower_order(DVector::zeros(2), dvector![0.6, -0.4], 0.0).unwrap();
            let bs = spec.b() + spec.b().transpose();
            let c = -bs.lu().solve(spec.g()).unwrap();
            let hom = OperatorSpec::new(spec.a().clone(), spec.b().clone()).unwrap();
            let (x0, t) = (dvector![0.2, -0.1], 0.3);
            let ratio = |x: DVector<f64>| {
                log_kernel_l(&spec, &x, &x0, t).unwrap() - log_kernel_ls(&hom, &(&x - &c), &x0, t).unwrap()
            };
            let r0 = ratio(dvector![0.0, 0.0]);
            for x in [dvector![1.0, 0.5], dvector![-0.7, 1.3]] {
                assert!((ratio(x) - r0).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn lower_order_singular_d() {
        let spec = OperatorSpec::new(SymPosDefMatrix::identity(2), dmatrix![1.0, 0.0; 0.0, 0.0])
            .unwrap()
            .with_lower_order(dvector![0.0, 0.0], dvector![0.0, 1.0], 0.0)
            .unwrap();
        let err = kernel_l(&spec, &dvector![0.0, 0.0], &dvector![0.0, 0.0], 0.5).unwrap_err();
        assert!(matches!(err, Error::SingularD { index: 1, .. }));
        // f alone does not need D to be invertible
        let spec = OperatorSpec::new(SymPosDefMatrix::identity(1), dmatrix![0.0])
            .unwrap()
            .with_lower_order(dvector![1.0], dvector![0.0], 0.0)
            .unwrap();
        assert!(kernel_l(&spec, &dvector![0.3], &dvector![0.0], 0.5).is_ok());
    }

    #[test]
    fn ou_examples() {
        let a = SymPosDefMatrix::new(dmatrix![1.3, 0.2; 0.2, 0.7]).unwrap();
        let (x, x0) = (dvector![0.4, -0.3], dvector![1.0, 0.2]);
        let ou = kernel_ou(&a, &DMatrix::zeros(2, 2), &x, &x0, 0.5).unwrap();
        assert_relative_eq!(ou, kernel_gaussian(&a, &x, &x0, 0.5).unwrap(), max_relative = 1e-14);

        let b = 0.8 * a.matrix() + DMatrix::identity(2, 2) * 0.3;
        let k1 = kernel_ou(&a, &b, &x, &x0, 0.5).unwrap();
        let k2 = kernel_ou(&a, &b, &x0, &x, 0.5).unwrap();
        assert_relative_eq!(k1, k2, max_relative = 1e-14);

        let err = kernel_ou(&a, &dmatrix![0.0, 1.0; 0.0, 0.0], &x, &x0, 0.5).unwrap_err();
        assert!(matches!(err, Error::NonCommuting { .. }));
    }

    #[test]
    fn ou_weighted_mass_is_one() {
        let q = TanhSinh::default();
        let a = SymPosDefMatrix::identity(1);
        let b = dmatrix![1.0];
        for (x, t) in [(0.0, 0.5), (1.3, 0.2), (-0.7, 2.0)] {
            let m = q
                .integrate_split(
                    |y| {
                        let k = kernel_ou(&a, &b, &dvector![x], &dvector![y], t).unwrap();
                        Complex64::new(k * (-0.5 * y * y).exp(), 0.0)
                    },
                    -12.0,
                    12.0,
                    &[0.0, x],
                )
                .unwrap();
            assert!((m.re - 1.0).abs() < 1e-5, "x={x} t={t} mass={}", m.re);
        }
    }

    #[test]
    fn fourier_examples() {
        let n = normalization_integral(&[1.0], &[1.0], 0.5).unwrap();
        assert_relative_eq!(n.re, 0.805_018_182_194_592, max_relative = 1e-14);
        let f0 = fourier_closed_form(&[1.0, 0.8], &[0.5, -0.3], &dvector![0.0, 0.0], 0.4).unwrap();
        assert_eq!(f0, normalization_integral(&[1.0, 0.8], &[0.5, -0.3], 0.4).unwrap());
        let f = fourier_closed_form(&[1.0], &[1.0], &dvector![0.3], 0.25).unwrap();
        assert_relative_eq!(f.re, 0.414_359_349_071_151_4, max_relative = 1e-14);
        let small = fourier_closed_form(&[1.0], &[1.0], &dvector![0.3], 1e-6).unwrap();
        assert!((small.re - 1.0).abs() < 1e-4);
    }

    #[test]
    fn fourier_matches_quadrature() {
        let q = TanhSinh::default();
        for (bs, t, xi) in [(1.0f64, 0.25f64, 0.3f64), (-1.0, 0.3, 0.5), (0.0, 0.4, 0.2), (2.0, 0.1, 1.0)] {
            let r = 8.0 * (2.0 * t).sqrt().max(1.0);
            let v = q
                .integrate_split(
                    |x| {
                        let k = kernel_ls_diag(&[1.0], &[bs], &dvector![x], &dvector![0.0], t).unwrap();
                        k.0 * Complex64::new(0.0, -2.0 * PI * xi * x).exp()
                    },
                    -r,
                    r,
                    &[0.0],
                )
                .unwrap();
            let c = fourier_closed_form(&[1.0], &[bs], &dvector![xi], t).unwrap();
            assert!((v - c).norm() < 1e-9, "b={bs} t={t}: {v} vs {c}");
        }
    }

    #[test]
    fn fourier_errors() {
        let t = PI / 4.0;
        let err = fourier_closed_form(&[1.0], &[-1.0], &dvector![0.1], t).unwrap_err();
        assert!(matches!(err, Error::SingularCos { index: 0, .. }));
        let err = normalization_integral(&[1.0], &[-1.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::DivergentIntegral { .. }));
    }

    #[test]
    fn positivity_well_before_first_conjugate_time() {
        let mut g = InstanceGenerator::new(17);
        let mut margin = f64::INFINITY;
        for _ in 0..100 {
            let n = g.index(1, 4);
            let spec = g.operator(n, SignClass::Mixed);
            let horizon = first_singular_time(&spec).unwrap_or(4.0) / 4.0;
            let t = g.uniform(1e-3, horizon);
            let k = kernel_ls(&spec, &g.vector(n, 2.0), &g.vector(n, 2.0), t).unwrap();
            assert!(k.re() > 0.0);
            assert!(k.is_real(1e-10));
            margin = margin.min(k.re());
        }
        assert!(margin > 0.0);
    }

    #[test]
    fn grid_layout_and_validation() {
        let spec = scalar(1.0, -1.0);
        let grid = GridSpec {
            axes: vec![Axis { lo: -1.0, hi: 1.0, points: 3 }],
            times: vec![0.5, 0.25],
        };
        let out = evaluate_grid(KernelKind::Schrodinger, &spec, &dvector![0.0], &grid).unwrap();
        assert_eq!(out.len(), 6);
        assert_eq!(out[0].t, 0.5);
        assert_eq!(out[3].t, 0.25);
        assert_eq!(out[1].x[0], 0.0);
        let bad = GridSpec { times: vec![FRAC_PI_2], ..grid.clone() };
        assert!(matches!(bad.validate(&spec), Err(Error::SingularTime { .. })));
        let bad = GridSpec { axes: vec![Axis { lo: 0.0, hi: 1.0, points: 1 }], ..grid };
        assert!(bad.validate(&spec).is_err());
    }
}
