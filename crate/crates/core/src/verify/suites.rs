use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{
    chapman_kolmogorov, delta_check, fourier_check, geodesic_checks, lemma_identities, normalization_check,
    ordered_map, pde_residual, riccati_checks, Bump, FourierTolerances, GeodesicTolerances, KernelSelector,
    ResidualSample, VerificationReport,
};
use crate::error::{Error, Result};
use crate::hamiltonics::{action, energy, shooting_oracle, solve_geodesic, BoundaryData};
use crate::instances::{first_singular_time, InstanceGenerator, SignClass};
use crate::kernels::{kernel_gaussian, kernel_l, kernel_ls, kernel_ls_spectral, kernel_mehler};
use crate::riccati::{assemble_ansatz, coefficients};
use crate::spectral::{singular_times, OperatorSpec, SymPosDefMatrix};

/// The built-in verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteName {
    Riccati,
    Heat,
    Geodesic,
    Lemma,
    Fourier,
    Delta,
    Specialization,
    TwoPath,
    Singular,
}

impl SuiteName {
    pub const ALL: [SuiteName; 9] = [
        SuiteName::Riccati,
        SuiteName::Heat,
        SuiteName::Geodesic,
        SuiteName::Lemma,
        SuiteName::Fourier,
        SuiteName::Delta,
        SuiteName::Specialization,
        SuiteName::TwoPath,
        SuiteName::Singular,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Riccati => "riccati",
            SuiteName::Heat => "heat",
            SuiteName::Geodesic => "geodesic",
            SuiteName::Lemma => "lemma",
            SuiteName::Fourier => "fourier",
            SuiteName::Delta => "delta",
            SuiteName::Specialization => "specialization",
            SuiteName::TwoPath => "two-path",
            SuiteName::Singular => "singular",
        }
    }

    /// Stream separator so suites draw independent instances from one seed.
    fn salt(self) -> u64 {
        0x9E37_79B9_7F4A_7C15u64.wrapping_mul(self as u64 + 1)
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SuiteName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = SuiteName::ALL.iter().map(|n| n.as_str()).collect();
                Error::InvalidArgument(format!("unknown suite '{s}' (known: {})", known.join(", ")))
            })
    }
}

/// Runs one suite. Instances are drawn sequentially from `seed` before any
/// concurrent evaluation, so the report does not depend on scheduling.
pub fn run_suite(name: SuiteName, seed: u64) -> Result<VerificationReport> {
    let start = Instant::now();
    let mut g = InstanceGenerator::new(seed ^ name.salt());
    let samples = match name {
        SuiteName::Riccati => riccati_suite(&mut g)?,
        SuiteName::Heat => heat_suite(&mut g)?,
        SuiteName::Geodesic => geodesic_suite(&mut g)?,
        SuiteName::Lemma => lemma_suite(&mut g)?,
        SuiteName::Fourier => fourier_suite()?,
        SuiteName::Delta => delta_suite()?,
        SuiteName::Specialization => specialization_suite(&mut g)?,
        SuiteName::TwoPath => two_path_suite(&mut g)?,
        SuiteName::Singular => singular_suite(&mut g)?,
    };
    let mut report = VerificationReport::new(name.as_str(), Some(seed), samples);
    report.elapsed_seconds = Some(start.elapsed().as_secs_f64());
    Ok(report)
}

/// Runs several suites concurrently; reports come back in input order.
pub fn run_suites(names: &[SuiteName], seed: u64) -> Vec<Result<VerificationReport>> {
    ordered_map(names, |&n| run_suite(n, seed))
}

fn flatten(parts: Vec<Result<Vec<ResidualSample>>>) -> Result<Vec<ResidualSample>> {
    Ok(parts.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
}

/// Smallest `|λ(D)|` accepted for instances that carry a linear potential.
/// As `λ → 0` the coefficients `μ` and `log W` diverge like `1/λ` and cancel
/// inside the exponent, so the closed form loses all relative accuracy well
/// before the exact `SingularD` limit.
const MIN_EIGENVALUE_WITH_G: f64 = 0.1;

fn conditioned_for_g(spec: &OperatorSpec) -> bool {
    spec.spectral().eigenvalues().iter().all(|l| l.abs() >= MIN_EIGENVALUE_WITH_G)
}

/// Nearest singular time at least `margin` away from every entry of `times`.
fn clear_of(spec: &OperatorSpec, times: &[f64], margin: f64) -> bool {
    let horizon = times.iter().fold(0.0f64, |m, &t| m.max(t)) + margin;
    let set = singular_times(spec.spectral(), horizon).expect("positive horizon");
    times.iter().all(|&t| set.distance(t) > margin)
}

fn riccati_suite(g: &mut InstanceGenerator) -> Result<Vec<ResidualSample>> {
    let times = [0.1, 0.3, 0.7];
    let classes = [SignClass::Hyperbolic, SignClass::Mixed, SignClass::Polynomial, SignClass::Trigonometric];
    let mut specs = Vec::with_capacity(50);
    while specs.len() < 50 {
        let n = g.index(1, 4);
        let spec = g.operator(n, classes[specs.len() % classes.len()]);
        let rk4_clear = first_singular_time(&spec).is_none_or(|t| t > 0.55);
        if !conditioned_for_g(&spec) || !clear_of(&spec, &times, 0.05) || !rk4_clear {
            continue;
        }
        specs.push(g.lower_order(spec)?);
    }
    flatten(ordered_map(&specs, |s| {
        riccati_checks(s, &times, 1e-5, Some((0.01, 0.5, 4096, 1e-7)))
    }))
}

fn heat_suite(g: &mut InstanceGenerator) -> Result<Vec<ResidualSample>> {
    let classes = [SignClass::Mixed, SignClass::Polynomial, SignClass::Hyperbolic, SignClass::Trigonometric];
    let mut jobs = Vec::with_capacity(20);
    while jobs.len() < 20 {
        let n = g.index(1, 4);
        let spec = g.operator(n, classes[jobs.len() % classes.len()]);
        if !conditioned_for_g(&spec) {
            continue;
        }
        let spec = g.lower_order(spec)?;
        let points: Vec<_> = (0..20)
            .map(|_| (g.vector(n, 1.5), g.vector(n, 1.5), g.regular_time(&spec, 0.05, 1.5, 0.02)))
            .collect();
        jobs.push((spec, points));
    }
    flatten(ordered_map(&jobs, |(spec, points)| {
        Ok(pde_residual(&KernelSelector::Full(spec.clone()), points, 1e-4, 1e-5)?.samples)
    }))
}

fn geodesic_suite(g: &mut InstanceGenerator) -> Result<Vec<ResidualSample>> {
    let jobs: Vec<(OperatorSpec, BoundaryData)> = (0..100)
        .map(|i| {
            let n = g.index(1, 6);
            let spec = g.operator(n, SignClass::ALL[i % SignClass::ALL.len()]);
            let t = g.regular_time(&spec, 0.05, 1.5, 0.05);
            let bd = BoundaryData::new(g.vector(n, 2.0), g.vector(n, 2.0), t);
            (spec, bd)
        })
        .collect();
    let tol = GeodesicTolerances::default();
    flatten(ordered_map(&jobs, |(spec, bd)| geodesic_checks(spec, bd, &tol)))
}

fn lemma_suite(g: &mut InstanceGenerator) -> Result<Vec<ResidualSample>> {
    let classes = [
        SignClass::Hyperbolic,
        SignClass::Mixed,
        SignClass::Trigonometric,
        SignClass::Polynomial,
        SignClass::Flat,
    ];
    let mut parts = Vec::new();
    for i in 0..10 {
        let n = g.index(1, 4);
        let spec = g.operator(n, classes[i % classes.len()]);
        let points: Vec<_> = (0..5)
            .map(|_| (g.vector(n, 2.0), g.vector(n, 2.0), g.regular_time(&spec, 0.05, 1.5, 0.02)))
            .collect();
        parts.push(lemma_identities(&spec, &points, 1e-5).map(|r| r.samples));
    }
    flatten(parts)
}

fn fourier_suite() -> Result<Vec<ResidualSample>> {
    let tol = FourierTolerances::default();
    let dyadic = [0.4, 0.2, 0.1, 0.05];
    let mut samples = fourier_check(&[1.0], &[1.0], &[DVector::from_element(1, 0.3)], &dyadic, &tol)?.samples;

    // further quadrature pairs: trigonometric sign and other frequencies
    let extra = fourier_check(
        &[1.0],
        &[-1.0],
        &[DVector::from_element(1, 0.5), DVector::from_element(1, 1.0)],
        &[0.3, 0.1, 0.05],
        &tol,
    )?;
    samples.extend(extra.samples.into_iter().filter(|s| s.label == "fourier quadrature"));

    samples.extend(normalization_check(&[1.0], &[1.0], &[0.5, 0.25, 0.1], tol.normalization)?.samples);
    samples.extend(normalization_check(&[1.0], &[-1.0], &[0.3], tol.normalization)?.samples);
    samples.extend(normalization_check(&[1.0, 0.8], &[0.5, -0.3], &[0.3], tol.normalization)?.samples);
    Ok(samples)
}

fn delta_suite() -> Result<Vec<ResidualSample>> {
    let bumps = [
        Bump { center: 0.0, radius: 1.0 },
        Bump { center: 0.0, radius: 2.0 },
        Bump { center: 0.3, radius: 1.5 },
    ];
    let times = [1e-1, 1e-2, 1e-3, 1e-4];
    let mut samples = Vec::new();
    for b in [1.0, -1.0] {
        let spec = OperatorSpec::new(SymPosDefMatrix::identity(1), nalgebra::dmatrix![b])?;
        samples.extend(delta_check(&spec, &bumps, &times, 1e-4)?.samples);
    }
    Ok(samples)
}

fn relative(label: &str, x: &DVector<f64>, x0: &DVector<f64>, t: f64, a: f64, b: f64, tol: f64) -> ResidualSample {
    ResidualSample::new(label, x, x0, t, (a - b).abs(), b.abs(), tol)
}

fn specialization_suite(g: &mut InstanceGenerator) -> Result<Vec<ResidualSample>> {
    let mut samples = Vec::new();
    for _ in 0..20 {
        let n = g.index(1, 4);
        let spec = g.operator(n, SignClass::Flat);
        let (x, x0, t) = (g.vector(n, 1.5), g.vector(n, 1.5), g.uniform(0.05, 2.0));
        let k = kernel_ls(&spec, &x, &x0, t)?;
        let gauss = kernel_gaussian(spec.a(), &x, &x0, t)?;
        samples.push(ResidualSample::new(
            "B = 0 is Gaussian",
            &x,
            &x0,
            t,
            (k.0 - gauss).norm(),
            gauss,
            1e-12,
        ));
    }
    for _ in 0..20 {
        let n = g.index(1, 4);
        let a: Vec<f64> = (0..n).map(|_| g.uniform(0.6, 1.4)).collect();
        let b: Vec<f64> = (0..n).map(|_| g.uniform(-1.0, 1.0)).collect();
        let spec = OperatorSpec::new(
            SymPosDefMatrix::diagonal(&a.iter().map(|v| v * v).collect::<Vec<_>>())?,
            nalgebra::DMatrix::from_diagonal(&DVector::from_column_slice(&b)),
        )?;
        let t = g.regular_time(&spec, 0.05, 1.5, 0.02);
        let (x, x0) = (g.vector(n, 1.5), g.vector(n, 1.5));
        let fast = kernel_ls(&spec, &x, &x0, t)?;
        let slow = kernel_ls_spectral(&spec, &x, &x0, t)?;
        samples.push(ResidualSample::new(
            "diagonal path = spectral path",
            &x,
            &x0,
            t,
            (fast.0 - slow.0).norm(),
            slow.norm(),
            1e-12,
        ));
        let bpos: Vec<f64> = b.iter().map(|v| v.abs().sqrt().max(0.1)).collect();
        let mspec = OperatorSpec::new(
            spec.a().clone(),
            nalgebra::DMatrix::from_diagonal(&DVector::from_iterator(n, bpos.iter().map(|v| v * v))),
        )?;
        let m = kernel_mehler(&a, &bpos, &x, &x0, t)?;
        samples.push(relative("Mehler = kernel_ls", &x, &x0, t, kernel_ls_spectral(&mspec, &x, &x0, t)?.re(), m, 1e-12));
    }
    let ou_cases = [
        (1.0, 1.0, 0.5, -0.8, 0.3, 0.4),
        (2.0, 0.5, 1.2, 0.2, 0.2, 0.7),
        (0.7, 1.5, -0.4, 0.9, 0.5, 0.25),
    ];
    let parts = ordered_map(&ou_cases, |&(a, b, x, z, s, t)| -> Result<ResidualSample> {
        let sel = KernelSelector::OrnsteinUhlenbeck {
            a: SymPosDefMatrix::diagonal(&[a])?,
            b: nalgebra::dmatrix![b],
        };
        chapman_kolmogorov(&sel, &DVector::from_element(1, x), &DVector::from_element(1, z), s, t, 1e-5)
    });
    for p in parts {
        samples.push(p?);
    }
    Ok(samples)
}

fn two_path_suite(g: &mut InstanceGenerator) -> Result<Vec<ResidualSample>> {
    let classes = [SignClass::Polynomial, SignClass::Mixed, SignClass::Hyperbolic, SignClass::Trigonometric];
    let mut samples = Vec::new();
    let mut count = 0;
    while count < 20 {
        let n = g.index(1, 4);
        let spec = g.operator(n, classes[count % classes.len()]);
        if !conditioned_for_g(&spec) {
            continue;
        }
        let spec = g.lower_order(spec)?;
        let t = g.regular_time(&spec, 0.05, 1.5, 0.02);
        let coef = coefficients(&spec, t)?;
        for _ in 0..3 {
            let (x, x0) = (g.vector(n, 1.5), g.vector(n, 1.5));
            let direct = kernel_l(&spec, &x, &x0, t)?;
            let assembled = assemble_ansatz(&coef, &x, &x0);
            samples.push(ResidualSample::new(
                "ansatz = kernel_l",
                &x,
                &x0,
                t,
                (assembled.0 - direct.0).norm(),
                direct.norm(),
                1e-11,
            ));
        }
        count += 1;
    }
    Ok(samples)
}

fn outcome(label: &str, t: f64, ok: bool) -> ResidualSample {
    ResidualSample::scalar(label, t, if ok { 0.0 } else { 1.0 }, 1.0, 0.5)
}

fn singular_suite(g: &mut InstanceGenerator) -> Result<Vec<ResidualSample>> {
    let mut samples = Vec::new();
    for i in 0..10 {
        let n = g.index(1, 4);
        let class = if i % 2 == 0 { SignClass::Trigonometric } else { SignClass::Mixed };
        let mut spec = g.operator(n, class);
        while first_singular_time(&spec).is_none() {
            spec = g.operator(n, class);
        }
        let (x0, x1) = (g.vector(n, 1.0), g.vector(n, 1.0));
        let set = singular_times(spec.spectral(), 3.0 * first_singular_time(&spec).expect("checked"))?;
        for point in set.times.iter().take(3) {
            let ts = point.t;
            for dt in [0.0, 5e-9, -5e-9] {
                let t = ts + dt;
                let bd = BoundaryData::new(x0.clone(), x1.clone(), t);
                let rejected = |r: std::result::Result<(), Error>| matches!(r, Err(Error::SingularTime { .. }));
                samples.push(outcome("kernel rejects singular time", t, rejected(kernel_ls(&spec, &x1, &x0, t).map(|_| ()))));
                samples.push(outcome("geodesic rejects singular time", t, rejected(solve_geodesic(&spec, &bd).map(|_| ()))));
                samples.push(outcome("energy rejects singular time", t, rejected(energy(&spec, &bd).map(|_| ()))));
                samples.push(outcome("action rejects singular time", t, rejected(action(&spec, &bd).map(|_| ()))));
                samples.push(outcome("coefficients reject singular time", t, rejected(coefficients(&spec, t).map(|_| ()))));
            }
            let near = set.distance(ts * (1.0 + 1e-4)).min(set.distance(ts * (1.0 - 1e-4)));
            if near >= ts * 1e-4 * 0.5 {
                for t in [ts * (1.0 + 1e-4), ts * (1.0 - 1e-4)] {
                    let bd = BoundaryData::new(x0.clone(), x1.clone(), t);
                    let flagged = matches!(shooting_oracle(&spec, &bd), Err(Error::SingularShooting { .. }));
                    samples.push(outcome("shooting flags conditioning blow-up", t, flagged));
                }
            }
        }
        let t_reg = 0.5 * set.times[0].t;
        let bd = BoundaryData::new(x0.clone(), x1.clone(), t_reg);
        samples.push(outcome("shooting accepts regular time", t_reg, shooting_oracle(&spec, &bd).is_ok()));
        let outside = set.times[0].t + 2e-8;
        samples.push(outcome("kernel accepts time outside guard", outside, kernel_ls(&spec, &x1, &x0, outside).is_ok()));
    }
    Ok(samples)
}
