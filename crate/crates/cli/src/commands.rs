use mehler_core::hamiltonics::{action, energy, solve_geodesic, BoundaryData};
use mehler_core::kernels::{
    evaluate_grid, kernel_gaussian, kernel_l, kernel_ls_spectral, kernel_mehler, kernel_ou, Axis, GridSpec,
    KernelKind,
};
use mehler_core::riccati::coefficients;
use mehler_core::verify::{run_suites, SuiteName, VerificationReport};
use mehler_core::{OperatorSpec, SymPosDefMatrix};
use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use serde_json::json;

use crate::config::{AxisConfig, Format};
use crate::error::CliError;
use crate::output::{csv_row, num};

fn point(name: &str, v: &[f64], n: usize) -> Result<DVector<f64>, CliError> {
    if v.len() != n {
        return Err(CliError::Config(format!("{name} has {} entries, expected {n}", v.len())));
    }
    Ok(DVector::from_column_slice(v))
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

pub fn kernel(
    spec: &OperatorSpec,
    x0: &[f64],
    axes: &[AxisConfig],
    times: &[f64],
    format: Format,
) -> Result<String, CliError> {
    let n = spec.dim();
    let x0 = point("task.x0", x0, n)?;
    let grid = GridSpec {
        axes: axes.iter().map(|a| Axis { lo: a.lo, hi: a.hi, points: a.points }).collect(),
        times: times.to_vec(),
    };
    let kind = if spec.is_homogeneous() { KernelKind::Schrodinger } else { KernelKind::Full };
    let samples = evaluate_grid(kind, spec, &x0, &grid)?;
    Ok(match format {
        Format::Csv => {
            let mut out = csv_row(indexed("x", n).chain(["t", "re", "im"].map(String::from)));
            for s in &samples {
                out += &csv_row(s.x.iter().map(|&v| num(v)).chain([num(s.t), num(s.value.re()), num(s.value.im())]));
            }
            out
        }
        Format::Json => {
            let rows: Vec<_> = samples
                .iter()
                .map(|s| json!({ "x": s.x.as_slice(), "t": s.t, "re": s.value.re(), "im": s.value.im() }))
                .collect();
            let kind = match kind {
                KernelKind::Schrodinger => "schrodinger",
                KernelKind::Full => "full",
            };
            pretty(&json!({ "kernel": kind, "x0": x0.as_slice(), "samples": rows }))
        }
    })
}

pub fn geodesic(
    spec: &OperatorSpec,
    x0: &[f64],
    x1: &[f64],
    t: f64,
    samples: usize,
    format: Format,
) -> Result<String, CliError> {
    let n = spec.dim();
    if samples < 2 {
        return Err(CliError::Config("task.samples must be at least 2".into()));
    }
    let bd = BoundaryData::new(point("task.x0", x0, n)?, point("task.x1", x1, n)?, t);
    let gs = solve_geodesic(spec, &bd)?;
    let e = energy(spec, &bd)?.0;
    let s_value = action(spec, &bd)?.0;
    let path = (0..samples)
        .map(|k| {
            // the last sample is exactly t so that it matches x1 bit for bit
            let s = if k + 1 == samples { t } else { t * k as f64 / (samples - 1) as f64 };
            Ok((s, gs.eval(s)?))
        })
        .collect::<Result<Vec<_>, mehler_core::Error>>()?;
    Ok(match format {
        Format::Csv => {
            let mut out = csv_row(std::iter::once("s".to_string()).chain(indexed("x", n)));
            for (s, x) in &path {
                out += &csv_row(std::iter::once(num(*s)).chain(x.iter().map(|&v| num(v))));
            }
            out += &format!("# E = {}\n# S = {}\n", num(e), num(s_value));
            out
        }
        Format::Json => pretty(&json!({
            "t": t,
            "x0": x0,
            "x1": x1,
            "energy": e,
            "action": s_value,
            "s": path.iter().map(|(s, _)| *s).collect::<Vec<_>>(),
            "x": path.iter().map(|(_, x)| x.as_slice().to_vec()).collect::<Vec<_>>(),
        })),
    })
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub fn riccati(spec: &OperatorSpec, times: &[f64], format: Format) -> Result<String, CliError> {
    let n = spec.dim();
    let coefs = times.iter().map(|&t| coefficients(spec, t)).collect::<Result<Vec<_>, _>>()?;
    Ok(match format {
        Format::Json => {
            let rows: Vec<_> = coefs
                .iter()
                .map(|c| {
                    json!({
                        "t": c.t,
                        "alpha": row_major(&c.alpha),
                        "beta": row_major(&c.beta),
                        "gamma": row_major(&c.gamma),
                        "mu": c.mu.as_slice(),
                        "nu": c.nu.as_slice(),
                        "w": { "re": c.w.re, "im": c.w.im },
                    })
                })
                .collect();
            pretty(&json!({ "n": n, "coefficients": rows }))
        }
        Format::Csv => {
            let pairs = |name: &'static str| {
                (1..=n).flat_map(move |i| (1..=n).map(move |j| format!("{name}_{i}{j}")))
            };
            let header = std::iter::once("t".to_string())
                .chain(pairs("alpha"))
                .chain(pairs("beta"))
                .chain(pairs("gamma"))
                .chain(indexed("mu", n))
                .chain(indexed("nu", n))
                .chain(["w_re".to_string(), "w_im".to_string()]);
            let mut out = csv_row(header);
            for c in &coefs {
                let values = std::iter::once(c.t)
                    .chain(row_major(&c.alpha))
                    .chain(row_major(&c.beta))
                    .chain(row_major(&c.gamma))
                    .chain(c.mu.iter().copied())
                    .chain(c.nu.iter().copied())
                    .chain([c.w.re, c.w.im]);
                out += &csv_row(values.map(num));
            }
            out
        }
    })
}

pub fn parse_suites(names: &[String]) -> Result<Vec<SuiteName>, CliError> {
    if names.is_empty() {
        return Ok(SuiteName::ALL.to_vec());
    }
    names
        .iter()
        .map(|s| s.parse::<SuiteName>().map_err(|e| CliError::Config(e.to_string())))
        .collect()
}

/// Runs the suites and renders the reports; the flag is the overall verdict.
pub fn verify(suites: &[SuiteName], seed: u64, format: Format) -> Result<(String, Vec<VerificationReport>), CliError> {
    let reports = run_suites(suites, seed).into_iter().collect::<Result<Vec<_>, _>>()?;
    let text = match format {
        Format::Json => pretty(&json!({
            "seed": seed,
            "pass": reports.iter().all(|r| r.pass),
            "reports": reports,
        })),
        Format::Csv => {
            let mut out = csv_row(
                ["suite", "label", "t", "residual", "scale", "tol", "pass"].map(String::from),
            );
            for r in &reports {
                for s in &r.samples {
                    out += &csv_row([
                        r.suite.clone(),
                        s.label.replace(',', ";"),
                        num(s.t),
                        num(s.residual),
                        num(s.scale),
                        num(s.tol),
                        s.pass.to_string(),
                    ]);
                }
            }
            out
        }
    };
    Ok((text, reports))
}

struct ExampleRow {
    example: &'static str,
    x: DVector<f64>,
    x0: DVector<f64>,
    t: f64,
    closed_form: f64,
    general: f64,
}

/// The three classical specializations, each evaluated by its textbook closed
/// form and by the general engine.
fn example_rows() -> Result<Vec<ExampleRow>, CliError> {
    let points = [
        (dvector![0.0, 0.0], dvector![0.0, 0.0], 0.5),
        (dvector![0.7, -0.2], dvector![-0.3, 0.4], 0.25),
        (dvector![1.2, 0.5], dvector![0.1, -0.6], 1.0),
    ];
    let mut rows = Vec::new();

    // generalised Laplacian: B = 0 gives the anisotropic Gaussian
    let a = SymPosDefMatrix::new(dmatrix![1.5, 0.3; 0.3, 0.8])?;
    let laplacian = OperatorSpec::new(a.clone(), DMatrix::zeros(2, 2))?;
    for (x, x0, t) in &points {
        rows.push(ExampleRow {
            example: "generalised laplacian",
            x: x.clone(),
            x0: x0.clone(),
            t: *t,
            closed_form: kernel_gaussian(&a, x, x0, *t)?,
            general: kernel_ls_spectral(&laplacian, x, x0, *t)?.re(),
        });
    }

    // generalised Hermite: A = diag(a²), B = diag(b²) gives Mehler's formula
    let (ha, hb) = ([1.0, 0.7], [1.0, 1.3]);
    let hermite = OperatorSpec::new(
        SymPosDefMatrix::diagonal(&[ha[0] * ha[0], ha[1] * ha[1]])?,
        DMatrix::from_diagonal(&dvector![hb[0] * hb[0], hb[1] * hb[1]]),
    )?;
    for (x, x0, t) in &points {
        rows.push(ExampleRow {
            example: "generalised hermite",
            x: x.clone(),
            x0: x0.clone(),
            t: *t,
            closed_form: kernel_mehler(&ha, &hb, x, x0, *t)?,
            general: kernel_ls_spectral(&hermite, x, x0, *t)?.re(),
        });
    }

    // Ornstein–Uhlenbeck: conjugate the Schrödinger operator with
    // ⟨Bx,x⟩ → ¼⟨BA⁻¹Bx,x⟩ and h = -½ tr B by e^{φ/2}, φ = ½⟨Bx,x⟩_{A⁻¹}
    let b = a.matrix() * 0.7 + DMatrix::identity(2, 2) * 0.2;
    let bp = b.transpose() * a.inverse() * &b * 0.25;
    let schrodinger = OperatorSpec::new(a.clone(), (&bp + bp.transpose()) * 0.5)?.with_lower_order(
        DVector::zeros(2),
        DVector::zeros(2),
        -0.5 * b.trace(),
    )?;
    let phi = |y: &DVector<f64>| 0.5 * y.dot(&(a.inverse() * &b * y));
    for (x, x0, t) in &points {
        let conjugated = kernel_l(&schrodinger, x, x0, *t)?.re() * (0.5 * (phi(x) + phi(x0))).exp();
        rows.push(ExampleRow {
            example: "ornstein-uhlenbeck",
            x: x.clone(),
            x0: x0.clone(),
            t: *t,
            closed_form: kernel_ou(&a, &b, x, x0, *t)?,
            general: conjugated,
        });
    }
    Ok(rows)
}

pub fn examples(format: Format) -> Result<String, CliError> {
    let rows = example_rows()?;
    let rel = |r: &ExampleRow| (r.closed_form - r.general).abs() / r.closed_form.abs();
    Ok(match format {
        Format::Csv => {
            let mut out = String::from(
                "# generalised laplacian: -div(A∇), A = [[1.5, 0.3], [0.3, 0.8]]; closed form is the Gaussian\n\
                 # generalised hermite: -div(A∇) + <Bx,x>, A = diag(1, 0.49), B = diag(1, 1.69); closed form is Mehler's\n\
                 # ornstein-uhlenbeck: -div(A∇) + <Bx,∇>, B = 0.7A + 0.2I, kernel on e^{-φ}dy; general value by conjugation\n",
            );
            out += &csv_row(
                ["example", "x_1", "x_2", "x0_1", "x0_2", "t", "closed_form", "general", "rel_diff"].map(String::from),
            );
            for r in &rows {
                out += &csv_row(
                    std::iter::once(r.example.to_string())
                        .chain(r.x.iter().chain(r.x0.iter()).map(|&v| num(v)))
                        .chain([num(r.t), num(r.closed_form), num(r.general), num(rel(r))]),
                );
            }
            out
        }
        Format::Json => {
            let items: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({
                        "example": r.example,
                        "x": r.x.as_slice(),
                        "x0": r.x0.as_slice(),
                        "t": r.t,
                        "closed_form": r.closed_form,
                        "general": r.general,
                        "rel_diff": rel(r),
                    })
                })
                .collect();
            pretty(&json!({ "examples": items }))
        }
    })
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples_agree() {
        for r in example_rows().unwrap() {
            let rel = (r.closed_form - r.general).abs() / r.closed_form.abs();
            assert!(rel < 1e-12, "{} at t = {}: {rel:e}", r.example, r.t);
        }
    }
}
