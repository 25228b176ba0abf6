use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ordered_map, ResidualSample, VerificationReport};
use crate::error::{Error, Result};
use crate::kernels::{fourier_closed_form, kernel_ls, kernel_ls_diag, normalization_integral};
use crate::quadrature::TanhSinh;
use crate::spectral::{OperatorSpec, SIGN_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierTolerances {
    /// `|quadrature - closed form|`
    pub quadrature: f64,
    /// relative error of `∫K dx`
    pub normalization: f64,
    /// `|K̂ - 1|` at the smallest time
    pub trend_final: f64,
}

impl Default for FourierTolerances {
    fn default() -> Self {
        Self {
            quadrature: 1e-5,
            normalization: 1e-6,
            trend_final: 0.15,
        }
    }
}

/// Tolerance used for samples that only record a value.
const TRACE_ONLY: f64 = f64::MAX;

/// Half width of the integration box for `K(·, 0; t)` of the diagonal
/// operator: at least `8·max(√(2t·max a²), 1)` and wide enough for the
/// Gaussian factor to fall below `e^{-40}`.
fn radius(a: &[f64], b_signed: &[f64], t: f64) -> f64 {
    let amax = a.iter().fold(0.0f64, |m, v| m.max(v * v));
    let mut r = 8.0 * (2.0 * t * amax).sqrt().max(1.0);
    for (&aj, &bs) in a.iter().zip(b_signed) {
        let rate = if bs.abs() <= SIGN_TOLERANCE {
            1.0 / (4.0 * t * aj * aj)
        } else {
            let bj = bs.abs().sqrt();
            let u = 2.0 * t * aj * bj;
            let c = if bs > 0.0 { 1.0 / u.tanh() } else { u.cos() / u.sin() };
            bj / (2.0 * aj) * c
        };
        if rate > 0.0 {
            r = r.max((40.0 / rate).sqrt());
        }
    }
    r
}

fn transform_by_quadrature(a: &[f64], b_signed: &[f64], xi: &DVector<f64>, t: f64) -> Result<Complex64> {
    let q = TanhSinh::default();
    let r = radius(a, b_signed, t);
    let two_pi = 2.0 * std::f64::consts::PI;
    match a.len() {
        1 => q.integrate_split(
            |x| {
                let k = kernel_ls_diag(a, b_signed, &DVector::from_element(1, x), &DVector::zeros(1), t)
                    .map(|k| k.0)
                    .unwrap_or(Complex64::new(f64::NAN, 0.0));
                k * Complex64::new(0.0, -two_pi * xi[0] * x).exp()
            },
            -r,
            r,
            &[0.0],
        ),
        2 => q.integrate_2d(
            |x, y| {
                let k = kernel_ls_diag(a, b_signed, &DVector::from_vec(vec![x, y]), &DVector::zeros(2), t)
                    .map(|k| k.0)
                    .unwrap_or(Complex64::new(f64::NAN, 0.0));
                k * Complex64::new(0.0, -two_pi * (xi[0] * x + xi[1] * y)).exp()
            },
            (-r, r),
            (-r, r),
            &[0.0],
            &[0.0],
        ),
        n => Err(Error::InvalidArgument(format!(
            "quadrature checks support n ≤ 2, got n = {n}"
        ))),
    }
}

/// Quadrature of `∫K(x,0;t) e^{-2πi⟨ξ,x⟩} dx` against the closed form for
/// every `(ξ, t)`, and for each `ξ` the trend of `|K̂ - 1|` along `times`
/// sorted in decreasing order: it must never increase and must end below
/// `trend_final`.
pub fn fourier_check(
    a: &[f64],
    b_signed: &[f64],
    xis: &[DVector<f64>],
    times: &[f64],
    tol: &FourierTolerances,
) -> Result<VerificationReport> {
    let pairs: Vec<(&DVector<f64>, f64)> = xis.iter().flat_map(|xi| times.iter().map(move |&t| (xi, t))).collect();
    let empty = DVector::zeros(0);
    let mut samples = ordered_map(&pairs, |&(xi, t)| -> Result<ResidualSample> {
        let closed = fourier_closed_form(a, b_signed, xi, t)?;
        let quad = transform_by_quadrature(a, b_signed, xi, t)?;
        Ok(ResidualSample::new("fourier quadrature", xi, &empty, t, (quad - closed).norm(), 1.0, tol.quadrature))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut sorted = times.to_vec();
    sorted.sort_by(|x, y| y.total_cmp(x));
    if let Some(&last) = sorted.last() {
        for xi in xis {
            let gaps = sorted
                .iter()
                .map(|&t| Ok((fourier_closed_form(a, b_signed, xi, t)? - 1.0).norm()))
                .collect::<Result<Vec<f64>>>()?;
            for (&t, &gap) in sorted.iter().zip(&gaps) {
                samples.push(ResidualSample::new("fourier gap (trace)", xi, &empty, t, gap, 1.0, TRACE_ONLY));
            }
            let increase = gaps.windows(2).map(|w| (w[1] - w[0]).max(0.0)).fold(0.0, f64::max);
            samples.push(ResidualSample::new("fourier trend monotone", xi, &empty, last, increase, 1.0, 0.0));
            samples.push(ResidualSample::new(
                "fourier trend final",
                xi,
                &empty,
                last,
                gaps[gaps.len() - 1],
                1.0,
                tol.trend_final,
            ));
        }
    }
    Ok(VerificationReport::new("fourier_check", None, samples))
}

/// `∫K(x, 0; t) dx` by quadrature against `∏ sech^{1/2} ∏ sec^{1/2}`.
pub fn normalization_check(a: &[f64], b_signed: &[f64], times: &[f64], tol: f64) -> Result<VerificationReport> {
    let zero = DVector::zeros(a.len());
    let samples = ordered_map(times, |&t| -> Result<ResidualSample> {
        let closed = normalization_integral(a, b_signed, t)?;
        let quad = transform_by_quadrature(a, b_signed, &zero, t)?;
        Ok(ResidualSample::new("normalization", &zero, &zero, t, (quad - closed).norm(), closed.norm(), tol))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(VerificationReport::new("normalization_check", None, samples))
}

/// Smooth bump `exp(-1/(1 - r²))`, `r = |x - center| / radius`, supported
/// in the ball of the given radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub radius: f64,
}

impl Bump {
    pub fn eval(&self, x: f64) -> f64 {
        let r = (x - self.center) / self.radius;
        if r.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - r * r)).exp()
        }
    }
}

/// `|∫K(x, 0; t) ϕ(x) dx - ϕ(0)|` for each bump along the decreasing time
/// sequence. The last error must be below `tol` and the last three errors
/// must decrease.
pub fn delta_check(spec: &OperatorSpec, bumps: &[Bump], times: &[f64], tol: f64) -> Result<VerificationReport> {
    if spec.dim() != 1 {
        return Err(Error::InvalidArgument(format!(
            "delta_check is one-dimensional, got n = {}",
            spec.dim()
        )));
    }
    let q = TanhSinh::default();
    let zero = DVector::zeros(1);
    let jobs: Vec<(Bump, f64)> = bumps.iter().flat_map(|&b| times.iter().map(move |&t| (b, t))).collect();
    let errors = ordered_map(&jobs, |&(bump, t)| -> Result<f64> {
        let mut complex = false;
        let value = q.integrate_split(
            |x| {
                let k = kernel_ls(spec, &DVector::from_element(1, x), &zero, t)
                    .map(|k| k.0)
                    .unwrap_or(Complex64::new(f64::NAN, 0.0));
                k * bump.eval(x)
            },
            bump.center - bump.radius,
            bump.center + bump.radius,
            &[0.0],
        )?;
        if value.im.abs() > 1e-10 * value.norm() {
            complex = true;
        }
        Ok(if complex { f64::NAN } else { (value.re - bump.eval(0.0)).abs() })
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    let mut samples = Vec::new();
    for (bi, bump) in bumps.iter().enumerate() {
        let errs = &errors[bi * times.len()..(bi + 1) * times.len()];
        let loc = DVector::from_element(1, bump.center);
        for (&t, &e) in times.iter().zip(errs) {
            samples.push(ResidualSample::new("delta error (trace)", &loc, &zero, t, e, 1.0, TRACE_ONLY));
        }
        if let Some(&last) = errs.last() {
            let t_last = times[times.len() - 1];
            samples.push(ResidualSample::new("delta final", &loc, &zero, t_last, last, 1.0, tol));
            let tail = &errs[errs.len().saturating_sub(3)..];
            let increase = tail.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            samples.push(ResidualSample::new("delta trend", &loc, &zero, t_last, increase.max(0.0), 1.0, 0.0));
        }
    }
    Ok(VerificationReport::new("delta_check", None, samples))
}
