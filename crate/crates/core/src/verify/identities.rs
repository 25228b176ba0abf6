use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ordered_map, ResidualSample, VerificationReport};
use crate::error::Result;
use crate::hamiltonics::{action, energy, shooting_oracle, solve_geodesic, BoundaryData};
use crate::kernels::ls_amplitude;
use crate::riccati::{coefficients, ode_residuals, rk4_propagate_alpha};
use crate::spectral::{singular_times, spectral_values, BranchFunction, OperatorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicTolerances {
    pub boundary: f64,
    pub ode: f64,
    pub shooting: f64,
    pub conservation: f64,
    pub action: f64,
}

impl Default for GeodesicTolerances {
    fn default() -> Self {
        Self {
            boundary: 1e-9,
            ode: 1e-5,
            shooting: 1e-7,
            conservation: 1e-6,
            action: 1e-5,
        }
    }
}

fn a_inner(spec: &OperatorSpec, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    u.dot(&(spec.a().inverse() * v))
}

/// Boundary exactness, the ODE `ẍ = Dx`, energy conservation, `dS/dt = -E`
/// and agreement with the shooting oracle for one geodesic.
pub fn geodesic_checks(
    spec: &OperatorSpec,
    bd: &BoundaryData,
    tol: &GeodesicTolerances,
) -> Result<Vec<ResidualSample>> {
    let gs = solve_geodesic(spec, bd)?;
    let t = bd.t;
    let (x0, x1) = (&bd.x0, &bd.x1);
    let mut out = Vec::with_capacity(5);

    let scale = 1.0 + x0.amax().max(x1.amax());
    let boundary = (gs.eval(0.0)? - x0).amax().max((gs.eval(t)? - x1).amax());
    out.push(ResidualSample::new("boundary", x1, x0, t, boundary, scale, tol.boundary));

    let h = 1e-4 * t;
    let d = spec.spectral().d();
    let e = energy(spec, bd)?.0;
    let mut ode = 0.0f64;
    let mut drift = 0.0f64;
    let mut magnitude = 0.0f64;
    for k in 1..=10 {
        let s = t * k as f64 / 11.0;
        let (xm, x, xp) = (gs.eval(s - h)?, gs.eval(s)?, gs.eval(s + h)?);
        let acc = (&xp - &x * 2.0 + &xm) / (h * h);
        let dx = d * &x;
        ode = ode.max((&acc - &dx).norm() / (1.0 + dx.norm() + x.norm() / (t * t)));
        let vel = gs.velocity(s)?;
        let kinetic = a_inner(spec, &vel, &vel);
        let curvature = a_inner(spec, &dx, &x);
        magnitude = magnitude.max(kinetic.abs() + curvature.abs());
        drift = drift.max((0.5 * (kinetic - curvature) - e).abs());
    }
    out.push(ResidualSample::new("geodesic ODE", x1, x0, t, ode, 1.0, tol.ode));
    out.push(ResidualSample::new(
        "energy conservation",
        x1,
        x0,
        t,
        drift,
        1.0 + magnitude,
        tol.conservation,
    ));

    let at = |tt: f64| -> Result<f64> { Ok(action(spec, &BoundaryData::new(x0.clone(), x1.clone(), tt))?.0) };
    let ds = (at(t + h)? - at(t - h)?) / (2.0 * h);
    out.push(ResidualSample::new("dS/dt = -E", x1, x0, t, (ds + e).abs(), 1.0 + e.abs(), tol.action));

    let sample = match shooting_oracle(spec, bd) {
        Ok(traj) => ResidualSample::new("shooting oracle", x1, x0, t, traj.sup_distance(&gs)?, 1.0, tol.shooting),
        Err(err) => ResidualSample::failure("shooting oracle", t, &err.to_string()),
    };
    out.push(sample);
    Ok(out)
}

fn gradient_and_trace(
    spec: &OperatorSpec,
    x0: &DVector<f64>,
    x: &DVector<f64>,
    t: f64,
) -> Result<(DVector<f64>, f64)> {
    let n = x.len();
    let a = spec.a().matrix();
    let s = |y: &DVector<f64>| -> Result<f64> { Ok(action(spec, &BoundaryData::new(x0.clone(), y.clone(), t))?.0) };
    // S is quadratic in x, so central differences are exact up to rounding
    let d = 1e-2 * (1.0 + x.norm());
    let shifted = |moves: &[(usize, f64)]| {
        let mut y = x.clone();
        for &(i, v) in moves {
            y[i] += v;
        }
        y
    };
    let s0 = s(x)?;
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let (p, m) = (s(&shifted(&[(i, d)]))?, s(&shifted(&[(i, -d)]))?);
        grad[i] = (p - m) / (2.0 * d);
        hess[(i, i)] = (p - 2.0 * s0 + m) / (d * d);
        for j in (i + 1)..n {
            let v = (s(&shifted(&[(i, d), (j, d)]))? - s(&shifted(&[(i, d), (j, -d)]))?
                - s(&shifted(&[(i, -d), (j, d)]))?
                + s(&shifted(&[(i, -d), (j, -d)]))?)
                / (4.0 * d * d);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok((grad, (a * hess).trace()))
}

/// Three identities of the action at each `(x0, x, t)`:
/// `|∇S|²_A = 4⟨Bx,x⟩ + 2E`, `tr(A Hess S) = (1/t) tr φ(t√D)` and the
/// transport equation `V'/V = -½ tr(A Hess S)` for the amplitude
/// `V = (4πt)^{-n/2} (det ψ / det A)^{1/2}`. Derivatives of `S` and `V` are
/// finite differences.
pub fn lemma_identities(
    spec: &OperatorSpec,
    points: &[(DVector<f64>, DVector<f64>, f64)],
    tol: f64,
) -> Result<VerificationReport> {
    let samples = ordered_map(points, |(x0, x, t)| -> Result<Vec<ResidualSample>> {
        let t = *t;
        let (grad, trace) = gradient_and_trace(spec, x0, x, t)?;
        let e = energy(spec, &BoundaryData::new(x0.clone(), x.clone(), t))?.0;
        let pot = 4.0 * spec.potential(x);
        let lhs = grad.dot(&(spec.a().matrix() * &grad));
        let first = ResidualSample::new(
            "gradient identity",
            x,
            x0,
            t,
            (lhs - pot - 2.0 * e).abs(),
            1.0 + pot.abs() + 2.0 * e.abs(),
            tol,
        );

        let phi = spectral_values(spec.spectral(), BranchFunction::Phi, t)?;
        let exact = phi.iter().sum::<f64>() / t;
        let second = ResidualSample::new("laplacian identity", x, x0, t, (trace - exact).abs(), 1.0 + exact.abs(), tol);

        // conjugate times make log V vary on the scale of their distance
        let reach = singular_times(spec.spectral(), 2.0 * t)?.distance(t).min(t);
        let h = 1e-3 * reach;
        let v = |tt: f64| ls_amplitude(spec.a(), spec.spectral(), tt);
        let v0 = v(t)?;
        let rate = |step: f64| -> Result<Complex64> { Ok((v(t + step)? - v(t - step)?) / (2.0 * step * v0)) };
        let log_rate = (rate(0.5 * h)? * 4.0 - rate(h)?) / 3.0;
        let third = ResidualSample::new(
            "transport equation",
            x,
            x0,
            t,
            (log_rate + 0.5 * trace).norm(),
            1.0 + 0.5 * trace.abs(),
            tol,
        );
        Ok(vec![first, second, third])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .into_iter()
    .flatten()
    .collect();
    Ok(VerificationReport::new("lemma_identities", None, samples))
}

/// Residuals of the six coefficient ODEs at each time, plus an optional RK4
/// propagation of `α` over `(t0, t1)` with the given number of steps.
pub fn riccati_checks(
    spec: &OperatorSpec,
    times: &[f64],
    tol: f64,
    rk4: Option<(f64, f64, usize, f64)>,
) -> Result<Vec<ResidualSample>> {
    let report = ode_residuals(spec, times)?;
    let empty = DVector::zeros(0);
    let mut out = Vec::new();
    for row in &report.rows {
        for (name, eq) in row.equations() {
            out.push(ResidualSample::new(
                format!("riccati {name}"),
                &empty,
                &empty,
                row.t,
                eq.residual,
                1.0 + eq.rhs_norm,
                tol,
            ));
        }
    }
    if let Some((t0, t1, steps, rk_tol)) = rk4 {
        let exact = coefficients(spec, t1)?.alpha;
        let sample = match rk4_propagate_alpha(spec, t0, t1, steps) {
            Ok(alpha) => ResidualSample::scalar("rk4 alpha", t1, (alpha - &exact).amax(), 1.0 + exact.amax(), rk_tol),
            Err(err) => ResidualSample::failure("rk4 alpha", t1, &err.to_string()),
        };
        out.push(sample);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{InstanceGenerator, SignClass};
    use crate::spectral::SymPosDefMatrix;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn origin_reads_zero_equals_zero() {
        let spec = OperatorSpec::new(SymPosDefMatrix::identity(1), dmatrix![1.0]).unwrap();
        let z = dvector![0.0];
        let r = lemma_identities(&spec, &[(z.clone(), z.clone(), 0.4)], 1e-5).unwrap();
        assert!(r.pass);
        assert!(r.samples[0].residual < 1e-14);
    }

    #[test]
    fn hermite_and_mixed_points() {
        let mut g = InstanceGenerator::new(2);
        let hermite = OperatorSpec::new(SymPosDefMatrix::identity(1), dmatrix![1.0]).unwrap();
        let pts: Vec<_> = (0..10)
            .map(|_| (g.vector(1, 2.0), g.vector(1, 2.0), g.uniform(0.05, 2.0)))
            .collect();
        let r = lemma_identities(&hermite, &pts, 1e-5).unwrap();
        assert!(r.pass, "{:?}", r.summary);

        let mixed = g.operator(3, SignClass::Mixed);
        let pts: Vec<_> = (0..10)
            .map(|_| (g.vector(3, 2.0), g.vector(3, 2.0), g.regular_time(&mixed, 0.05, 2.0, 0.02)))
            .collect();
        let r = lemma_identities(&mixed, &pts, 1e-5).unwrap();
        assert!(r.pass, "{:?}", r.summary);
    }

    #[test]
    fn geodesic_checks_pass_on_all_classes() {
        let mut g = InstanceGenerator::new(12);
        for class in SignClass::ALL {
            let spec = g.operator(3, class);
            let t = g.regular_time(&spec, 0.05, 1.5, 0.05);
            let bd = BoundaryData::new(g.vector(3, 2.0), g.vector(3, 2.0), t);
            let samples = geodesic_checks(&spec, &bd, &GeodesicTolerances::default()).unwrap();
            assert_eq!(samples.len(), 5);
            assert!(samples.iter().all(|s| s.pass), "{class:?}: {samples:?}");
        }
    }

    #[test]
    fn riccati_checks_report_each_equation() {
        let spec = OperatorSpec::new(SymPosDefMatrix::identity(1), dmatrix![1.0]).unwrap();
        let s = riccati_checks(&spec, &[0.1, 0.3], 1e-5, Some((0.01, 0.5, 4096, 1e-7))).unwrap();
        assert_eq!(s.len(), 13);
        assert!(s.iter().all(|s| s.pass), "{s:?}");
    }
}
