//! Independent numerical oracles: finite-difference PDE residuals,
//! quadrature transforms, delta convergence, Chapman–Kolmogorov, the
//! action identities and the geodesic and Riccati cross-checks, packaged as
//! named deterministic suites.

mod identities;
mod pde;
mod semigroup;
mod suites;
mod transforms;

pub use identities::{geodesic_checks, lemma_identities, riccati_checks, GeodesicTolerances};
pub use pde::{pde_residual, KernelSelector};
pub use semigroup::chapman_kolmogorov;
pub use suites::{run_suite, run_suites, SuiteName};
pub use transforms::{delta_check, fourier_check, normalization_check, Bump, FourierTolerances};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// One checked quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub label: String,
    pub x: Vec<f64>,
    pub x0: Vec<f64>,
    pub t: f64,
    pub residual: f64,
    pub scale: f64,
    pub tol: f64,
    pub pass: bool,
}

impl ResidualSample {
    /// `pass ⇔ residual ≤ tol·scale`; NaN residuals fail.
    pub fn new(
        label: impl Into<String>,
        x: &DVector<f64>,
        x0: &DVector<f64>,
        t: f64,
        residual: f64,
        scale: f64,
        tol: f64,
    ) -> Self {
        Self {
            label: label.into(),
            x: x.iter().copied().collect(),
            x0: x0.iter().copied().collect(),
            t,
            residual,
            scale,
            tol,
            pass: residual <= tol * scale,
        }
    }

    /// A sample without a spatial location.
    pub fn scalar(label: impl Into<String>, t: f64, residual: f64, scale: f64, tol: f64) -> Self {
        let empty = DVector::zeros(0);
        Self::new(label, &empty, &empty, t, residual, scale, tol)
    }

    /// A failed check that produced an error instead of a number.
    pub fn failure(label: impl Into<String>, t: f64, reason: &str) -> Self {
        let mut s = Self::scalar(format!("{}: {reason}", label.into()), t, f64::NAN, 1.0, 0.0);
        s.pass = false;
        s
    }

    pub fn relative(&self) -> f64 {
        self.residual / self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub failures: usize,
    /// Largest and median of `residual / scale`.
    pub max: f64,
    pub median: f64,
}

impl Summary {
    fn of(samples: &[ResidualSample]) -> Self {
        let mut rel: Vec<f64> = samples.iter().map(ResidualSample::relative).collect();
        rel.sort_by(f64::total_cmp);
        let median = match rel.len() {
            0 => 0.0,
            len if len % 2 == 1 => rel[len / 2],
            len => 0.5 * (rel[len / 2 - 1] + rel[len / 2]),
        };
        Self {
            count: samples.len(),
            failures: samples.iter().filter(|s| !s.pass).count(),
            max: rel.iter().copied().fold(0.0, |m, v| if v.is_nan() { v } else { m.max(v) }),
            median,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: String,
    pub seed: Option<u64>,
    pub samples: Vec<ResidualSample>,
    pub summary: Summary,
    pub pass: bool,
    pub elapsed_seconds: Option<f64>,
}

impl VerificationReport {
    pub fn new(suite: impl Into<String>, seed: Option<u64>, samples: Vec<ResidualSample>) -> Self {
        let summary = Summary::of(&samples);
        Self {
            suite: suite.into(),
            seed,
            pass: samples.iter().all(|s| s.pass),
            samples,
            summary,
            elapsed_seconds: None,
        }
    }

    pub fn failing(&self) -> impl Iterator<Item = &ResidualSample> {
        self.samples.iter().filter(|s| !s.pass)
    }

    /// Labels that have at least one failing sample, deduplicated in order.
    pub fn failing_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in self.failing() {
            let key = s.label.split(':').next().unwrap_or(&s.label).to_string();
            if !out.contains(&key) {
                out.push(key);
            }
        }
        out
    }
}

/// Ordered map that runs concurrently when the `parallel` feature is on.
pub(crate) fn ordered_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
