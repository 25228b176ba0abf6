use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{ordered_map, ResidualSample, VerificationReport};
use crate::error::{Error, Result};
use crate::hamiltonics::{energy, BoundaryData};
use crate::kernels::{kernel_gaussian, kernel_l, kernel_ls, kernel_ls_diag, kernel_mehler, kernel_ou, log_kernel_l};
use crate::spectral::{singular_times, OperatorSpec, SymPosDefMatrix};

/// A closed-form kernel together with the operator it should solve.
#[derive(Debug, Clone)]
pub enum KernelSelector {
    /// `-div(A∇)`
    Gaussian(SymPosDefMatrix),
    /// `-div(A∇) + ⟨Bx,x⟩` through `kernel_ls`
    Schrodinger(OperatorSpec),
    /// `-div(A∇) + ⟨Bx,x⟩ + ⟨f,∇⟩ + ⟨g,x⟩ + h` through `kernel_l`
    Full(OperatorSpec),
    /// product form with `A = diag(a²)`, `B = diag(b_signed)`
    Diagonal { a: Vec<f64>, b_signed: Vec<f64> },
    /// `-Σ aⱼ²∂ⱼ² + Σ bⱼ²xⱼ²`
    Mehler { a: Vec<f64>, b: Vec<f64> },
    /// `-div(A∇) + ⟨Bx,∇⟩`, kernel relative to `e^{-½⟨By,y⟩_{A⁻¹}} dy`
    OrnsteinUhlenbeck { a: SymPosDefMatrix, b: DMatrix<f64> },
}

fn diag_spd(a: &[f64]) -> Result<SymPosDefMatrix> {
    SymPosDefMatrix::diagonal(&a.iter().map(|v| v * v).collect::<Vec<_>>())
}

impl KernelSelector {
    pub fn name(&self) -> &'static str {
        match self {
            KernelSelector::Gaussian(_) => "gaussian",
            KernelSelector::Schrodinger(_) => "schrodinger",
            KernelSelector::Full(_) => "full",
            KernelSelector::Diagonal { .. } => "diagonal",
            KernelSelector::Mehler { .. } => "mehler",
            KernelSelector::OrnsteinUhlenbeck { .. } => "ornstein-uhlenbeck",
        }
    }

    pub fn eval(&self, x: &DVector<f64>, x0: &DVector<f64>, t: f64) -> Result<Complex64> {
        let re = |v: f64| Complex64::new(v, 0.0);
        Ok(match self {
            KernelSelector::Gaussian(a) => re(kernel_gaussian(a, x, x0, t)?),
            KernelSelector::Schrodinger(s) => kernel_ls(s, x, x0, t)?.0,
            KernelSelector::Full(s) => kernel_l(s, x, x0, t)?.0,
            KernelSelector::Diagonal { a, b_signed } => kernel_ls_diag(a, b_signed, x, x0, t)?.0,
            KernelSelector::Mehler { a, b } => re(kernel_mehler(a, b, x, x0, t)?),
            KernelSelector::OrnsteinUhlenbeck { a, b } => re(kernel_ou(a, b, x, x0, t)?),
        })
    }

    /// `log K`, computed without forming `K` where a log-space form exists.
    pub fn log_eval(&self, x: &DVector<f64>, x0: &DVector<f64>, t: f64) -> Result<Complex64> {
        match self {
            KernelSelector::Full(s) => log_kernel_l(s, x, x0, t),
            _ => Ok(self.eval(x, x0, t)?.ln()),
        }
    }

    /// Schrödinger operator with the same energy landscape; it supplies the
    /// residual normalization.
    pub fn schrodinger_equivalent(&self) -> Result<OperatorSpec> {
        match self {
            KernelSelector::Gaussian(a) => OperatorSpec::new(a.clone(), DMatrix::zeros(a.dim(), a.dim())),
            KernelSelector::Schrodinger(s) | KernelSelector::Full(s) => Ok(s.clone()),
            KernelSelector::Diagonal { a, b_signed } => OperatorSpec::new(
                diag_spd(a)?,
                DMatrix::from_diagonal(&DVector::from_column_slice(b_signed)),
            ),
            KernelSelector::Mehler { a, b } => OperatorSpec::new(
                diag_spd(a)?,
                DMatrix::from_diagonal(&DVector::from_iterator(b.len(), b.iter().map(|v| v * v))),
            ),
            KernelSelector::OrnsteinUhlenbeck { a, b } => {
                let bp = b.transpose() * a.inverse() * b * 0.25;
                OperatorSpec::new(a.clone(), (&bp + bp.transpose()) * 0.5)
            }
        }
    }

    fn diffusion(&self, equiv: &OperatorSpec) -> DMatrix<f64> {
        equiv.a().matrix().clone()
    }

    /// `V(x)` in `L = -div(A∇) + ⟨drift, ∇⟩ + V`.
    fn zeroth_order(&self, equiv: &OperatorSpec, x: &DVector<f64>) -> f64 {
        match self {
            KernelSelector::OrnsteinUhlenbeck { .. } => 0.0,
            KernelSelector::Full(s) => s.potential(x) + s.g().dot(x) + s.h(),
            _ => equiv.potential(x),
        }
    }

    fn drift(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            KernelSelector::OrnsteinUhlenbeck { b, .. } => Some(b * x),
            KernelSelector::Full(s) => Some(s.f().clone()),
            _ => None,
        }
    }
}

/// `(∂ₜ + L)K` by Richardson-extrapolated central differences at each
/// `(x, x0, t)`, normalized by `|K|·(1 + |E|)` with `E` the geodesic energy
/// from `x0` to `x`. Kernel values are taken relative to `K(x, x0, t)` in log
/// space, so points where `K` itself underflows are still checked.
///
/// `h` is relative: the steps are `100h` times the local length and time
/// scales. The length scale is the smaller of the kernel width and
/// `1/|∇log|K||`; the time scale is the smallest of `t`, the distance to the
/// nearest conjugate time and `1/|∂ₜlog|K||`.
pub fn pde_residual(
    kernel: &KernelSelector,
    points: &[(DVector<f64>, DVector<f64>, f64)],
    h: f64,
    tol: f64,
) -> Result<VerificationReport> {
    let equiv = kernel.schrodinger_equivalent()?;
    let a = kernel.diffusion(&equiv);
    let lmax = equiv.a().largest_eigenvalue();
    let samples = ordered_map(points, |(x, x0, t)| {
        // the equation is linear, so K / K(x, x0, t) is checked instead of K
        let reference = kernel.log_eval(x, x0, *t)?;
        let eval = |y: &DVector<f64>, y0: &DVector<f64>, s: f64| Ok((kernel.log_eval(y, y0, s)? - reference).exp());
        residual_at(&eval, kernel, &equiv, &a, lmax, x, x0, *t, h, tol)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(VerificationReport::new(
        format!("pde_residual[{}]", kernel.name()),
        None,
        samples,
    ))
}

type Eval<'a> = &'a (dyn Fn(&DVector<f64>, &DVector<f64>, f64) -> Result<Complex64> + Sync);

struct Derivatives {
    kt: Complex64,
    grad: Vec<Complex64>,
    /// `tr(A∇²K)`
    div: Complex64,
}

#[allow(clippy::too_many_arguments)]
fn derivatives(
    eval: Eval<'_>,
    a: &DMatrix<f64>,
    x: &DVector<f64>,
    x0: &DVector<f64>,
    t: f64,
    k0: Complex64,
    dt: f64,
    dx: f64,
) -> Result<Derivatives> {
    let n = x.len();
    let kt = (eval(x, x0, t + dt)? - eval(x, x0, t - dt)?) / (2.0 * dt);
    let at = |shift: &[(usize, f64)]| -> Result<Complex64> {
        let mut y = x.clone();
        for &(i, s) in shift {
            y[i] += s;
        }
        eval(&y, x0, t)
    };
    let mut grad = vec![Complex64::new(0.0, 0.0); n];
    let mut div = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let (p, m) = (at(&[(i, dx)])?, at(&[(i, -dx)])?);
        grad[i] = (p - m) / (2.0 * dx);
        div += (p - k0 * 2.0 + m) / (dx * dx) * a[(i, i)];
        for j in (i + 1)..n {
            if a[(i, j)] == 0.0 && a[(j, i)] == 0.0 {
                continue;
            }
            let mixed = (at(&[(i, dx), (j, dx)])? - at(&[(i, dx), (j, -dx)])?
                - at(&[(i, -dx), (j, dx)])?
                + at(&[(i, -dx), (j, -dx)])?)
                / (4.0 * dx * dx);
            div += mixed * (a[(i, j)] + a[(j, i)]);
        }
    }
    Ok(Derivatives { kt, grad, div })
}

#[allow(clippy::too_many_arguments)]
fn residual_at(
    eval: Eval<'_>,
    kernel: &KernelSelector,
    equiv: &OperatorSpec,
    a: &DMatrix<f64>,
    lmax: f64,
    x: &DVector<f64>,
    x0: &DVector<f64>,
    t: f64,
    h: f64,
    tol: f64,
) -> Result<ResidualSample> {
    let n = x.len();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    let k0 = eval(x, x0, t)?;
    let width = (2.0 * t * lmax).sqrt();

    // pilot estimate of |∇log|K||
    let delta = 1e-4 * width;
    let mut log_grad = 0.0;
    for i in 0..n {
        let mut p = x.clone();
        let mut m = x.clone();
        p[i] += delta;
        m[i] -= delta;
        let d = (eval(&p, x0, t)?.norm().ln() - eval(&m, x0, t)?.norm().ln()) / (2.0 * delta);
        log_grad += d * d;
    }
    let length = 1.0 / (1.0 / width + log_grad.sqrt());

    // same for the time scale, which conjugate times also shorten
    let tau = 1e-6 * t;
    let log_rate = (eval(x, x0, t + tau)?.norm().ln() - eval(x, x0, t - tau)?.norm().ln()) / (2.0 * tau);
    let horizon = singular_times(equiv.spectral(), 2.0 * t)?.distance(t);
    let duration = 1.0 / (1.0 / t + 1.0 / horizon + log_rate.abs());
    let (dt, dx) = (100.0 * h * duration, 100.0 * h * length);

    let coarse = derivatives(eval, a, x, x0, t, k0, dt, dx)?;
    let fine = derivatives(eval, a, x, x0, t, k0, 0.5 * dt, 0.5 * dx)?;
    let extrapolate = |c: Complex64, f: Complex64| (f * 4.0 - c) / 3.0;
    let kt = extrapolate(coarse.kt, fine.kt);
    let div = extrapolate(coarse.div, fine.div);

    let mut lk = -div + k0 * kernel.zeroth_order(equiv, x);
    if let Some(drift) = kernel.drift(x) {
        for i in 0..n {
            lk += extrapolate(coarse.grad[i], fine.grad[i]) * drift[i];
        }
    }
    let e = energy(equiv, &BoundaryData::new(x0.clone(), x.clone(), t))?.0;
    Ok(ResidualSample::new(
        "heat equation",
        x,
        x0,
        t,
        (kt + lk).norm(),
        k0.norm() * (1.0 + e.abs()),
        tol,
    ))
}
