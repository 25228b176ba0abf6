//! Tanh–sinh quadrature with level escalation.
//!
//! Each level halves the step of the trapezoidal rule in the transformed
//! variable and reuses the previous nodes. Integration stops once two
//! successive levels differ by less than `tol` relative to the running
//! estimate of `∫|f|`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Transformed-variable half width; beyond it the nodes are within `1e-40`
/// of the endpoints.
const T_MAX: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TanhSinh {
    pub tol: f64,
    pub min_level: u32,
    pub max_level: u32,
}

impl Default for TanhSinh {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            min_level: 3,
            max_level: 12,
        }
    }
}

struct Interval {
    a: f64,
    b: f64,
    sum: Complex64,
    abs_sum: f64,
}

impl Interval {
    // adds the nodes ±kh for the given k, both halves of the interval
    fn add_node(&mut self, f: &impl Fn(f64) -> Complex64, t: f64) {
        let r = 0.5 * (self.b - self.a);
        let s = std::f64::consts::FRAC_PI_2 * t.sinh();
        let e = (-2.0 * s).exp();
        // 1 - tanh(s) without cancellation
        let delta = 2.0 * e / (1.0 + e);
        let w = std::f64::consts::FRAC_PI_2 * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        if delta * r == 0.0 {
            return;
        }
        let (lo, hi) = (self.a + r * delta, self.b - r * delta);
        if t == 0.0 {
            let v = f(0.5 * (self.a + self.b));
            self.sum += v * w;
            self.abs_sum += v.norm() * w;
        } else {
            let (vl, vh) = (f(lo), f(hi));
            self.sum += (vl + vh) * w;
            self.abs_sum += (vl.norm() + vh.norm()) * w;
        }
    }
}

impl TanhSinh {
    /// `∫_a^b f`
    pub fn integrate(&self, f: impl Fn(f64) -> Complex64, a: f64, b: f64) -> Result<Complex64> {
        self.integrate_split(f, a, b, &[])
    }

    pub fn integrate_real(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        Ok(self.integrate(|x| Complex64::new(f(x), 0.0), a, b)?.re)
    }

    /// `∫_a^b f` with the interval split at every breakpoint inside `(a, b)`.
    /// Narrow peaks belong at breakpoints, where nodes cluster.
    pub fn integrate_split(
        &self,
        f: impl Fn(f64) -> Complex64,
        a: f64,
        b: f64,
        breakpoints: &[f64],
    ) -> Result<Complex64> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "quadrature interval [{a}, {b}] must be finite and non-empty"
            )));
        }
        let mut cuts: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&p| p > a && p < b)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut edges = vec![a];
        edges.extend(cuts);
        edges.push(b);
        let mut parts: Vec<Interval> = edges
            .windows(2)
            .map(|w| Interval {
                a: w[0],
                b: w[1],
                sum: Complex64::new(0.0, 0.0),
                abs_sum: 0.0,
            })
            .collect();

        let estimate = |parts: &[Interval], h: f64| -> (Complex64, f64) {
            parts.iter().fold((Complex64::new(0.0, 0.0), 0.0), |(s, m), p| {
                let r = 0.5 * (p.b - p.a);
                (s + p.sum * (h * r), m + p.abs_sum * h * r)
            })
        };

        let mut h = 1.0;
        let kmax = (T_MAX / h) as i64;
        for p in parts.iter_mut() {
            for k in 0..=kmax {
                p.add_node(&f, k as f64 * h);
            }
        }
        let (mut prev, _) = estimate(&parts, h);
        let mut change = f64::INFINITY;
        for level in 1..=self.max_level {
            h *= 0.5;
            let kmax = (T_MAX / h) as i64;
            for p in parts.iter_mut() {
                for k in (1..=kmax).step_by(2) {
                    p.add_node(&f, k as f64 * h);
                }
            }
            let (cur, mass) = estimate(&parts, h);
            change = (cur - prev).norm();
            let scale = mass.max(f64::MIN_POSITIVE);
            if !change.is_finite() || !cur.norm().is_finite() {
                return Err(Error::QuadratureNonConvergent { level, change });
            }
            if level >= self.min_level && change <= self.tol * scale {
                return Ok(cur);
            }
            prev = cur;
        }
        Err(Error::QuadratureNonConvergent {
            level: self.max_level,
            change,
        })
    }

    /// `∫∫ f(x, y)` over a rectangle by nested one-dimensional rules.
    pub fn integrate_2d(
        &self,
        f: impl Fn(f64, f64) -> Complex64,
        x_range: (f64, f64),
        y_range: (f64, f64),
        x_breaks: &[f64],
        y_breaks: &[f64],
    ) -> Result<Complex64> {
        let inner_err = std::cell::Cell::new(None);
        let outer = self.integrate_split(
            |x| match self.integrate_split(|y| f(x, y), y_range.0, y_range.1, y_breaks) {
                Ok(v) => v,
                Err(e) => {
                    inner_err.set(Some(e));
                    Complex64::new(0.0, 0.0)
                }
            },
            x_range.0,
            x_range.1,
            x_breaks,
        )?;
        match inner_err.into_inner() {
            Some(e) => Err(e),
            None => Ok(outer),
        }
    }
}
