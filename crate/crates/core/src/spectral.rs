//! Spectral data of `D = 2A(B + Bᵗ)` and branch-correct scalar functions of it.
//!
//! Every closed form in this crate is a function of the symmetric matrix `D`.
//! A scalar function `F(t, λ)` is lifted to a matrix by `Q·diag(F(t, λᵢ))·Qᵗ`.
//! For `λ > 0` the hyperbolic branch is used, for `λ < 0` its trigonometric
//! continuation through `u = i·t·√(-λ)`, and near `λ = 0` a truncated series
//! in `u² = t²λ` (which covers both signs at once).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Absolute guard in `t` around a singular time `kπ/√(-λ)`.
pub const SINGULAR_GUARD: f64 = 1e-8;

/// Eigenvalues below `-SIGN_TOLERANCE` are treated as trigonometric.
pub const SIGN_TOLERANCE: f64 = 1e-12;

const SERIES_CUTOFF: f64 = 1e-4;
// t/λ - coth/λ^{3/2} is expanded further out than the other branches
const PHI_W_SERIES_CUTOFF: f64 = 1e-2;

const JACOBI_MAX_SWEEPS: usize = 64;
const JACOBI_TOLERANCE: f64 = 1e-13;

/// Cyclic Jacobi eigensolver for a symmetric matrix.
///
/// Returns eigenvalues sorted in descending order together with the matrix
/// whose columns are the corresponding orthonormal eigenvectors.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let norm = m.norm();
    let threshold = JACOBI_TOLERANCE * norm;

    let off_mass = |a: &DMatrix<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_mass(&a);
        if off <= threshold {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Rutishauser's stable rotation
                let theta = (aqq - app) / (2.0 * apq);
                let tan = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let tan = if theta == 0.0 { 1.0 } else { tan };
                let cos = 1.0 / (tan * tan + 1.0).sqrt();
                let sin = tan * cos;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = cos * akp - sin * akq;
                    a[(k, q)] = sin * akp + cos * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = cos * apk - sin * aqk;
                    a[(q, k)] = sin * apk + cos * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = cos * vkp - sin * vkq;
                    v[(k, q)] = sin * vkp + cos * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).norm()
}

/// Symmetric positive definite coefficient matrix `A`, with its inverse and
/// determinant cached from the eigendecomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SymPosDefMatrix {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl SymPosDefMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::NotPositiveDefinite {
                reason: format!("expected a non-empty square matrix, got {}x{}", n, matrix.ncols()),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite {
                reason: "non-finite entry".into(),
            });
        }
        let norm = matrix.norm();
        if asymmetry(&matrix) > 1e-12 * norm {
            return Err(Error::NotPositiveDefinite {
                reason: "not symmetric".into(),
            });
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let (eigenvalues, q) = jacobi_eigen(&sym)?;
        let largest = eigenvalues[0];
        let smallest = eigenvalues[n - 1];
        if largest <= 0.0 || smallest <= 1e-12 * largest {
            return Err(Error::NotPositiveDefinite {
                reason: format!("eigenvalue range [{smallest:e}, {largest:e}]"),
            });
        }
        let inv_diag = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            eigenvalues.iter().map(|l| 1.0 / l),
        ));
        let inverse = &q * inv_diag * q.transpose();
        let inverse = (&inverse + inverse.transpose()) * 0.5;
        Ok(Self {
            matrix: sym,
            inverse,
            eigenvalues,
        })
    }

    /// Diagonal matrix `diag(entries)`.
    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn determinant(&self) -> f64 {
        self.eigenvalues.iter().product()
    }

    pub fn largest_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }
}

/// Coefficients `(A, B, f, g, h)` of
/// `L = -div(A∇) + ⟨Bx,x⟩ + ⟨f,∇⟩ + ⟨g,x⟩ + h` together with the spectral
/// data of `D`, built once at construction.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    a: SymPosDefMatrix,
    b: DMatrix<f64>,
    f: DVector<f64>,
    g: DVector<f64>,
    h: f64,
    spectral: SpectralData,
}

impl OperatorSpec {
    /// Operator `-div(A∇) + ⟨Bx,x⟩` without lower-order terms.
    pub fn new(a: SymPosDefMatrix, b: DMatrix<f64>) -> Result<Self> {
        let n = a.dim();
        let spectral = build_spectral(&a, &b)?;
        Ok(Self {
            a,
            b,
            f: DVector::zeros(n),
            g: DVector::zeros(n),
            h: 0.0,
            spectral,
        })
    }

    pub fn with_lower_order(mut self, f: DVector<f64>, g: DVector<f64>, h: f64) -> Result<Self> {
        let n = self.dim();
        for v in [&f, &g] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        if !h.is_finite() || f.iter().chain(g.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite lower-order coefficient".into()));
        }
        self.f = f;
        self.g = g;
        self.h = h;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn a(&self) -> &SymPosDefMatrix {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn f(&self) -> &DVector<f64> {
        &self.f
    }

    pub fn g(&self) -> &DVector<f64> {
        &self.g
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    /// True when f, g and h all vanish.
    pub fn is_homogeneous(&self) -> bool {
        self.h == 0.0 && self.f.iter().all(|v| *v == 0.0) && self.g.iter().all(|v| *v == 0.0)
    }

    /// `⟨Bx, x⟩`
    pub fn potential(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.b * x))
    }
}

/// Eigendecomposition `D = QΛQᵗ` with eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    d: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    q: DMatrix<f64>,
}

impl SpectralData {
    /// Decompose an arbitrary symmetric matrix.
    pub fn from_symmetric(d: DMatrix<f64>) -> Result<Self> {
        let n = d.nrows();
        if d.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: d.ncols(),
            });
        }
        let norm = d.norm();
        if asymmetry(&d) > 1e-10 * norm {
            return Err(Error::InvalidArgument("matrix passed as D is not symmetric".into()));
        }
        let d = (&d + d.transpose()) * 0.5;
        let (eigenvalues, q) = jacobi_eigen(&d)?;
        Ok(Self { d, eigenvalues, q })
    }

    pub fn dim(&self) -> usize {
        self.d.nrows()
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthogonal matrix whose columns are eigenvectors.
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// `Q·diag(values)·Qᵗ`
    pub fn reconstruct(&self, values: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for (k, &v) in values.iter().enumerate() {
            let col = self.q.column(k);
            out += v * col * col.transpose();
        }
        out
    }

    /// Index and value of the first eigenvalue with `|λ| ≤ 1e-10·‖D‖_F`.
    pub fn zero_eigenvalue(&self) -> Option<(usize, f64)> {
        let threshold = 1e-10 * self.d.norm();
        self.eigenvalues
            .iter()
            .enumerate()
            .find(|(_, l)| l.abs() <= threshold)
            .map(|(i, l)| (i, *l))
    }
}

/// `D = 2A(B + Bᵗ)` and its eigendecomposition.
pub fn build_spectral(a: &SymPosDefMatrix, b: &DMatrix<f64>) -> Result<SpectralData> {
    let n = a.dim();
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.nrows().max(b.ncols()),
        });
    }
    let am = a.matrix();
    let residual = (am * b - b * am).norm();
    let bound = 1e-10 * am.norm() * b.norm();
    if residual > bound {
        return Err(Error::NonCommuting { residual, bound });
    }
    let d = 2.0 * am * (b + b.transpose());
    SpectralData::from_symmetric(d)
}

/// Scalar functions of `(t, λ)` lifted to matrices of `D`.
///
/// With `u = t√λ`:
///
/// | variant | `λ > 0` | `λ < 0` (`v = t√(-λ)`) | `λ → 0` |
/// |---|---|---|---|
/// | `Phi` | `u coth u` | `v cot v` | 1 |
/// | `Psi` | `u / sinh u` | `v / sin v` | 1 |
/// | `PhiW` | `t/λ - coth(u)/λ^{3/2}` | `t/λ - cot(v)/(-λ)^{3/2}` | diverges |
/// | `CothOverRoot` | `coth(u)/√λ` | `-cot(v)/√(-λ)` | diverges |
/// | `InvRootSinh` | `1/(√λ sinh u)` | `-1/(√(-λ) sin v)` | diverges |
/// | `CoshOverSinhSq` | `u² cosh u / sinh² u` | `v² cos v / sin² v` | 1 |
///
/// `PhiW` is `t³·φ_W(t√λ)` with `φ_W(u) = (u - coth u)/u³`. The diverging
/// variants return [`Error::SingularD`] at `λ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchFunction {
    Phi,
    Psi,
    PhiW,
    CothOverRoot,
    InvRootSinh,
    CoshOverSinhSq,
}

impl BranchFunction {
    pub const ALL: [BranchFunction; 6] = [
        BranchFunction::Phi,
        BranchFunction::Psi,
        BranchFunction::PhiW,
        BranchFunction::CothOverRoot,
        BranchFunction::InvRootSinh,
        BranchFunction::CoshOverSinhSq,
    ];

    /// Whether the function has a finite limit at `λ = 0`.
    pub fn regular_at_zero(self) -> bool {
        matches!(self, Self::Phi | Self::Psi | Self::CoshOverSinhSq)
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::DomainError { t });
    }
    Ok(())
}

/// Rejects `t` within [`SINGULAR_GUARD`] of `kπ/√(-λ)`, `k ≥ 1`.
pub(crate) fn check_regular(t: f64, lambda: f64, index: usize) -> Result<()> {
    if lambda >= -SIGN_TOLERANCE {
        return Ok(());
    }
    let w = (-lambda).sqrt();
    let k = (t * w / std::f64::consts::PI).round();
    if k >= 1.0 {
        let singular = k * std::f64::consts::PI / w;
        if (t - singular).abs() <= SINGULAR_GUARD {
            return Err(Error::SingularTime {
                t,
                singular,
                index,
                eigenvalue: lambda,
                k: k as u64,
                tolerance: SINGULAR_GUARD,
            });
        }
    }
    Ok(())
}

fn series(func: BranchFunction, t: f64, u2: f64, lambda: f64) -> Result<f64> {
    let zero = || Error::SingularD {
        index: 0,
        eigenvalue: lambda,
    };
    Ok(match func {
        BranchFunction::Phi => 1.0 + u2 / 3.0 - u2 * u2 / 45.0,
        BranchFunction::Psi => 1.0 - u2 / 6.0 + 7.0 * u2 * u2 / 360.0,
        BranchFunction::CoshOverSinhSq => 1.0 + u2 / 6.0 - 7.0 * u2 * u2 / 120.0,
        BranchFunction::PhiW => {
            if u2 == 0.0 {
                return Err(zero());
            }
            t.powi(3) * (-1.0 / (u2 * u2) + 2.0 / (3.0 * u2) + 1.0 / 45.0 - 2.0 * u2 / 945.0)
        }
        BranchFunction::CothOverRoot => {
            if u2 == 0.0 {
                return Err(zero());
            }
            // t·coth(u)/u
            t * (1.0 / u2 + 1.0 / 3.0 - u2 / 45.0)
        }
        BranchFunction::InvRootSinh => {
            if u2 == 0.0 {
                return Err(zero());
            }
            // t/(u sinh u)
            t / (u2 * (1.0 + u2 / 6.0 + u2 * u2 / 120.0))
        }
    })
}

/// Evaluate a [`BranchFunction`] at `(t, λ)`.
pub fn scalar_branch(func: BranchFunction, t: f64, lambda: f64) -> Result<f64> {
    check_time(t)?;
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("eigenvalue {lambda} is not finite")));
    }
    check_regular(t, lambda, 0)?;

    let u2 = t * t * lambda;
    let cutoff = match func {
        BranchFunction::PhiW => PHI_W_SERIES_CUTOFF,
        _ => SERIES_CUTOFF,
    };
    if u2.abs() < cutoff * cutoff {
        return series(func, t, u2, lambda);
    }
    Ok(closed_form(func, t, lambda))
}

fn closed_form(func: BranchFunction, t: f64, lambda: f64) -> f64 {
    if lambda > 0.0 {
        let w = lambda.sqrt();
        let u = t * w;
        match func {
            BranchFunction::Phi => u / u.tanh(),
            BranchFunction::Psi => u / u.sinh(),
            BranchFunction::PhiW => t / lambda - 1.0 / (u.tanh() * lambda * w),
            BranchFunction::CothOverRoot => 1.0 / (u.tanh() * w),
            BranchFunction::InvRootSinh => 1.0 / (w * u.sinh()),
            BranchFunction::CoshOverSinhSq => u * u / (u.sinh() * u.tanh()),
        }
    } else {
        let w = (-lambda).sqrt();
        let v = t * w;
        let (sin, cos) = v.sin_cos();
        match func {
            BranchFunction::Phi => v * cos / sin,
            BranchFunction::Psi => v / sin,
            BranchFunction::PhiW => t / lambda - cos / (sin * w * w * w),
            BranchFunction::CothOverRoot => -cos / (sin * w),
            BranchFunction::InvRootSinh => -1.0 / (w * sin),
            BranchFunction::CoshOverSinhSq => v * v * cos / (sin * sin),
        }
    }
}

/// `F(t, λᵢ)` for every eigenvalue, with errors tagged by eigenvalue index.
pub fn spectral_values(s: &SpectralData, func: BranchFunction, t: f64) -> Result<Vec<f64>> {
    s.eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            scalar_branch(func, t, l).map_err(|e| match e {
                Error::SingularTime {
                    t,
                    singular,
                    eigenvalue,
                    k,
                    tolerance,
                    ..
                } => Error::SingularTime {
                    t,
                    singular,
                    index: i,
                    eigenvalue,
                    k,
                    tolerance,
                },
                Error::SingularD { eigenvalue, .. } => Error::SingularD { index: i, eigenvalue },
                other => other,
            })
        })
        .collect()
}

/// `Q·diag(F(t, λᵢ))·Qᵗ`.
pub fn matrix_function(s: &SpectralData, func: BranchFunction, t: f64) -> Result<DMatrix<f64>> {
    let values = spectral_values(s, func, t)?;
    Ok(s.reconstruct(&values))
}

/// One conjugate time `t = kπ/√(-λᵢ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPoint {
    pub t: f64,
    pub index: usize,
    pub k: u64,
}

/// Conjugate times of the trigonometric eigenvalues up to a horizon.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SingularSet {
    pub times: Vec<SingularPoint>,
}

impl SingularSet {
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// Nearest listed time within [`SINGULAR_GUARD`] of `t`, if any.
    pub fn near(&self, t: f64) -> Option<&SingularPoint> {
        self.times.iter().find(|p| (p.t - t).abs() <= SINGULAR_GUARD)
    }

    /// Distance from `t` to the closest listed time.
    pub fn distance(&self, t: f64) -> f64 {
        self.times
            .iter()
            .map(|p| (p.t - t).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// All `kπ/√(-λᵢ) ∈ (0, t_max]` for `λᵢ < -1e-12`, sorted ascending.
pub fn singular_times(s: &SpectralData, t_max: f64) -> Result<SingularSet> {
    check_time(t_max)?;
    let mut times = Vec::new();
    for (index, &l) in s.eigenvalues.iter().enumerate() {
        if l >= -SIGN_TOLERANCE {
            continue;
        }
        let period = std::f64::consts::PI / (-l).sqrt();
        let mut k = 1u64;
        loop {
            let t = k as f64 * period;
            if t > t_max {
                break;
            }
            times.push(SingularPoint { t, index, k });
            k += 1;
        }
    }
    times.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(SingularSet { times })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn spec(a: DMatrix<f64>, b: DMatrix<f64>) -> OperatorSpec {
        OperatorSpec::new(SymPosDefMatrix::new(a).unwrap(), b).unwrap()
    }

    #[test]
    fn identity_pair_gives_four_identity() {
        let s = spec(DMatrix::identity(2, 2), DMatrix::identity(2, 2));
        let sd = s.spectral();
        assert_eq!(sd.d(), &(4.0 * DMatrix::<f64>::identity(2, 2)));
        assert_eq!(sd.eigenvalues(), &[4.0, 4.0]);
        assert_relative_eq!(sd.q().clone(), DMatrix::identity(2, 2), epsilon = 1e-15);
    }

    #[test]
    fn diagonal_indefinite_b() {
        let s = spec(DMatrix::identity(2, 2), dmatrix![1.0, 0.0; 0.0, -1.0]);
        assert_eq!(s.spectral().eigenvalues(), &[4.0, -4.0]);
    }

    #[test]
    fn squared_two_by_two() {
        let a = dmatrix![2.0, 1.0; 1.0, 2.0];
        let s = spec(a.clone(), a);
        let l = s.spectral().eigenvalues();
        assert_relative_eq!(l[0], 36.0, epsilon = 1e-12);
        assert_relative_eq!(l[1], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_commuting_and_indefinite() {
        let a = SymPosDefMatrix::new(dmatrix![2.0, 0.0; 0.0, 1.0]).unwrap();
        let err = OperatorSpec::new(a, dmatrix![0.0, 1.0; 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NonCommuting { .. }));
        let err = SymPosDefMatrix::new(dmatrix![1.0, 0.0; 0.0, -1.0]).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
        let err = SymPosDefMatrix::new(dmatrix![1.0, 0.5; 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn scalar_examples() {
        assert_eq!(scalar_branch(BranchFunction::Phi, 0.7, 0.0).unwrap(), 1.0);
        assert_relative_eq!(
            scalar_branch(BranchFunction::Phi, 0.5, 4.0).unwrap(),
            1.313_035_285_499_331_3,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            scalar_branch(BranchFunction::Phi, 0.5, -4.0).unwrap(),
            0.642_092_615_934_330_7,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            scalar_branch(BranchFunction::Psi, 0.5, -4.0).unwrap(),
            1.188_395_105_778_121_2,
            max_relative = 1e-14
        );
    }

    #[test]
    fn scalar_errors() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        for f in BranchFunction::ALL {
            let err = scalar_branch(f, half_pi + 5e-9, -4.0).unwrap_err();
            assert!(matches!(err, Error::SingularTime { k: 1, .. }), "{f:?}: {err}");
        }
        assert!(matches!(
            scalar_branch(BranchFunction::Phi, 0.0, 1.0),
            Err(Error::DomainError { .. })
        ));
        assert!(matches!(
            scalar_branch(BranchFunction::Psi, -1.0, 1.0),
            Err(Error::DomainError { .. })
        ));
        for f in [BranchFunction::PhiW, BranchFunction::CothOverRoot, BranchFunction::InvRootSinh] {
            assert!(matches!(scalar_branch(f, 1.0, 0.0), Err(Error::SingularD { .. })));
        }
        // just outside the guard is allowed
        assert!(scalar_branch(BranchFunction::Phi, half_pi + 1e-6, -4.0).is_ok());
    }

    #[test]
    fn continuity_across_zero() {
        for f in [BranchFunction::Phi, BranchFunction::Psi, BranchFunction::CoshOverSinhSq] {
            // |φ(u) - 1| ≈ t²|λ|/3, so the bound holds for t ≤ √3
            for t in [0.1, 0.9, 1.5] {
                let at0 = scalar_branch(f, t, 0.0).unwrap();
                for l in [1e-6, -1e-6] {
                    let v = scalar_branch(f, t, l).unwrap();
                    assert!((v - at0).abs() <= 1e-6, "{f:?} t={t} l={l}: {v} vs {at0}");
                }
            }
        }
    }

    #[test]
    fn series_matches_closed_form_at_cutoff() {
        for f in BranchFunction::ALL {
            let cutoff = if f == BranchFunction::PhiW {
                PHI_W_SERIES_CUTOFF
            } else {
                SERIES_CUTOFF
            };
            for sign in [1.0, -1.0] {
                let t = 0.8;
                let lambda = sign * (cutoff / t).powi(2);
                let a = series(f, t, t * t * lambda, lambda).unwrap();
                let b = closed_form(f, t, lambda);
                let rel = (a - b).abs() / a.abs().max(b.abs());
                assert!(rel < 1e-11, "{f:?} sign {sign}: {a} vs {b} ({rel:e})");
            }
        }
    }

    #[test]
    fn phi_w_is_antiderivative_of_coth_sq_over_lambda() {
        // d/dt [t/λ - coth(t√λ)/λ^{3/2}] = coth²(t√λ)/λ, for both branches
        for lambda in [3.0, 0.2, -0.7, -5.0] {
            let t = 0.4;
            let h = 1e-5;
            let fd = (scalar_branch(BranchFunction::PhiW, t + h, lambda).unwrap()
                - scalar_branch(BranchFunction::PhiW, t - h, lambda).unwrap())
                / (2.0 * h);
            let c = scalar_branch(BranchFunction::CothOverRoot, t, lambda).unwrap();
            let expected = c * c;
            assert_relative_eq!(fd, expected, max_relative = 1e-7);
        }
    }

    #[test]
    fn matrix_function_examples() {
        let zero_b = spec(dmatrix![2.0, 0.5; 0.5, 1.0], DMatrix::zeros(2, 2));
        let phi = matrix_function(zero_b.spectral(), BranchFunction::Phi, 0.8).unwrap();
        assert_eq!(phi, DMatrix::identity(2, 2));

        let s = spec(DMatrix::identity(2, 2), DMatrix::identity(2, 2));
        let psi = matrix_function(s.spectral(), BranchFunction::Psi, 0.5).unwrap();
        assert_relative_eq!(
            psi,
            0.850_918_128_239_321_5 * DMatrix::<f64>::identity(2, 2),
            max_relative = 1e-14
        );

        let s = spec(dmatrix![2.0, 1.0; 1.0, 2.0], dmatrix![0.3, -0.2; -0.2, 0.3]);
        for f in [BranchFunction::Phi, BranchFunction::Psi, BranchFunction::CoshOverSinhSq] {
            for t in [1e-2, 1e-3] {
                let m = matrix_function(s.spectral(), f, t).unwrap();
                let dev = (m - DMatrix::identity(2, 2)).norm();
                assert!(dev < 2.0 * t * t * 36.0, "{f:?} t={t}: {dev}");
            }
        }
    }

    #[test]
    fn matrix_function_propagates_index() {
        let s = spec(DMatrix::identity(2, 2), dmatrix![1.0, 0.0; 0.0, -1.0]);
        let err = matrix_function(s.spectral(), BranchFunction::Psi, std::f64::consts::FRAC_PI_2)
            .unwrap_err();
        assert!(matches!(err, Error::SingularTime { index: 1, k: 1, .. }));
    }

    #[test]
    fn singular_set_examples() {
        let s = spec(DMatrix::identity(2, 2), DMatrix::identity(2, 2));
        assert!(singular_times(s.spectral(), 10.0).unwrap().is_empty());

        let s = spec(DMatrix::identity(1, 1), dmatrix![-1.0]);
        let set = singular_times(s.spectral(), 4.0).unwrap();
        let ts: Vec<f64> = set.times.iter().map(|p| p.t).collect();
        assert_eq!(ts.len(), 2);
        assert_relative_eq!(ts[0], std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
        assert_relative_eq!(ts[1], std::f64::consts::PI, epsilon = 1e-15);

        let sd = SpectralData::from_symmetric(dmatrix![-1.0]).unwrap();
        let set = singular_times(&sd, 7.0).unwrap();
        let ts: Vec<f64> = set.times.iter().map(|p| p.t).collect();
        assert_eq!(ts, vec![std::f64::consts::PI, 2.0 * std::f64::consts::PI]);
        assert!(set.near(std::f64::consts::PI + 5e-9).is_some());
        assert!(set.near(std::f64::consts::PI + 5e-8).is_none());
    }

    fn random_commuting(n: usize, seed: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        // A = Q Λ Qᵗ from a Householder-free Gram-Schmidt on seed values, B = p(A)
        let raw = DMatrix::from_fn(n, n, |i, j| seed[(i * n + j) % seed.len()] + (i == j) as u8 as f64);
        let q = raw.qr().q();
        let eig: Vec<f64> = (0..n).map(|i| 0.5 + 1.5 * ((seed[i % seed.len()] + 1.0) / 2.0)).collect();
        let a = &q * DMatrix::from_diagonal(&DVector::from_vec(eig)) * q.transpose();
        let a = (&a + a.transpose()) * 0.5;
        let b = seed[0] * DMatrix::identity(n, n) + seed[1] * &a + seed[2] * &a * &a;
        (a, b)
    }

    proptest! {
        #[test]
        fn eigendecomposition_residual(
            n in 1usize..=8,
            seed in proptest::collection::vec(-1.0f64..1.0, 12),
        ) {
            let (a, b) = random_commuting(n, &seed);
            let s = spec(a, b);
            let sd = s.spectral();
            let lam = DMatrix::from_diagonal(&DVector::from_column_slice(sd.eigenvalues()));
            let recon = sd.q() * lam * sd.q().transpose();
            prop_assert!((recon - sd.d()).norm() <= 1e-10 * sd.d().norm().max(f64::MIN_POSITIVE));
            let orth = (sd.q().transpose() * sd.q() - DMatrix::identity(n, n)).norm();
            prop_assert!(orth <= 1e-12 * n as f64);
            for w in sd.eigenvalues().windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
        }

        #[test]
        fn matrix_functions_commute(
            n in 1usize..=5,
            seed in proptest::collection::vec(-1.0f64..1.0, 12),
            t in 0.05f64..0.6,
        ) {
            let (a, b) = random_commuting(n, &seed);
            let s = spec(a, b);
            let sd = s.spectral();
            // skip draws that land on a conjugate time
            prop_assume!(sd.eigenvalues().iter().all(|&l| check_regular(t, l, 0).is_ok()));
            prop_assume!(sd.zero_eigenvalue().is_none());
            let mats: Vec<DMatrix<f64>> = BranchFunction::ALL
                .iter()
                .map(|&f| matrix_function(sd, f, t).unwrap())
                .collect();
            for m in &mats {
                let scale = m.norm() * sd.d().norm() + 1.0;
                prop_assert!((m * sd.d() - sd.d() * m).norm() <= 1e-9 * scale);
            }
            for f in &mats {
                for g in &mats {
                    let scale = f.norm() * g.norm() + 1.0;
                    prop_assert!((f * g - g * f).norm() <= 1e-9 * scale);
                }
            }
        }

        #[test]
        fn phi_matches_complex_continuation(t in 0.01f64..3.0, lambda in -30.0f64..-1e-3) {
            prop_assume!(check_regular(t, lambda, 0).is_ok());
            let v = t * (-lambda).sqrt();
            prop_assume!(v.sin().abs() > 1e-3);
            let u = Complex64::new(0.0, v);
            let reference = u * u.cosh() / u.sinh();
            let value = scalar_branch(BranchFunction::Phi, t, lambda).unwrap();
            let scale = reference.norm().max(1.0);
            prop_assert!(reference.im.abs() <= 1e-12 * scale);
            prop_assert!((reference.re - value).abs() <= 1e-12 * scale);
        }
    }
}
