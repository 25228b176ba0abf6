//! Geodesics, conserved energy and action of the Hamiltonian system
//! `ẋ = -2Aξ`, `ξ̇ = -(B + Bᵗ)x`, i.e. `ẍ = Dx` with `D = 2A(B + Bᵗ)`.
//!
//! Closed forms work in the eigenframe `y = Qᵗx` of `D`, where every
//! coordinate is an independent hyperbolic, trigonometric or affine mode.
//! Energy and action are written as `A⁻¹`-weighted quadratic forms of matrix
//! functions of `D`, which is the same thing expressed without a frame.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    check_regular, check_time, spectral_values, BranchFunction, OperatorSpec, SIGN_TOLERANCE,
};

/// Steps used by [`shooting_oracle`].
pub const SHOOTING_STEPS: usize = 2048;

/// End-point maps with `σ_min < SHOOTING_RCOND·t` are rejected.
pub const SHOOTING_RCOND: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub x0: DVector<f64>,
    pub x1: DVector<f64>,
    pub t: f64,
}

impl BoundaryData {
    pub fn new(x0: DVector<f64>, x1: DVector<f64>, t: f64) -> Self {
        Self { x0, x1, t }
    }

    fn validate(&self, n: usize) -> Result<()> {
        check_time(self.t)?;
        for v in [&self.x0, &self.x1] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeClass {
    /// `λ > 0`: combination of `e^{±√λ s}`
    Hyperbolic,
    /// `λ < 0`: combination of `cos, sin(√(-λ) s)`
    Trigonometric,
    /// `λ = 0`: affine in `s`
    Flat,
}

/// One eigen-coordinate of the geodesic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub class: ModeClass,
    /// `√|λ|`
    pub rate: f64,
    pub y0: f64,
    pub y1: f64,
}

// sinh(a)/sinh(b) and cosh(a)/sinh(b) for 0 ≤ a ≤ b, b > 0, without overflow
fn hyperbolic_ratio(a: f64, b: f64, cosh: bool) -> f64 {
    if b < 20.0 {
        let num = if cosh { a.cosh() } else { a.sinh() };
        num / b.sinh()
    } else {
        let tail = (-2.0 * a).exp();
        let num = if cosh { 1.0 + tail } else { 1.0 - tail };
        (a - b).exp() * num / (-(-2.0 * b).exp_m1())
    }
}

impl Mode {
    /// Paper-form coefficient pair: `(c_grow, c_decay)` of `e^{ws}, e^{-ws}`
    /// for hyperbolic modes, `(c_cos, c_sin)` for trigonometric modes and
    /// `(intercept, slope)` for flat ones.
    pub fn coefficients(&self, t: f64) -> (f64, f64) {
        let w = self.rate;
        match self.class {
            ModeClass::Hyperbolic => {
                let e1 = (-w * t).exp();
                let denom = -(-2.0 * w * t).exp_m1();
                let grow = (self.y1 * e1 - self.y0 * e1 * e1) / denom;
                let decay = (self.y0 - self.y1 * e1) / denom;
                (grow, decay)
            }
            ModeClass::Trigonometric => {
                let (sin, cos) = (w * t).sin_cos();
                (self.y0, (self.y1 - cos * self.y0) / sin)
            }
            ModeClass::Flat => (self.y0, (self.y1 - self.y0) / t),
        }
    }

    fn value(&self, s: f64, t: f64) -> f64 {
        let w = self.rate;
        match self.class {
            ModeClass::Hyperbolic => {
                self.y0 * hyperbolic_ratio(w * (t - s), w * t, false)
                    + self.y1 * hyperbolic_ratio(w * s, w * t, false)
            }
            ModeClass::Trigonometric => {
                let st = (w * t).sin();
                (self.y0 * (w * (t - s)).sin() + self.y1 * (w * s).sin()) / st
            }
            ModeClass::Flat => self.y0 + (s / t) * (self.y1 - self.y0),
        }
    }

    fn velocity(&self, s: f64, t: f64) -> f64 {
        let w = self.rate;
        match self.class {
            ModeClass::Hyperbolic => {
                w * (self.y1 * hyperbolic_ratio(w * s, w * t, true)
                    - self.y0 * hyperbolic_ratio(w * (t - s), w * t, true))
            }
            ModeClass::Trigonometric => {
                let st = (w * t).sin();
                w * (self.y1 * (w * s).cos() - self.y0 * (w * (t - s)).cos()) / st
            }
            ModeClass::Flat => (self.y1 - self.y0) / t,
        }
    }
}

/// Unique geodesic between two points for a regular travel time.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSolution {
    /// Orthogonal `P` with `y = Px` diagonalizing `D`.
    pub frame: DMatrix<f64>,
    pub modes: Vec<Mode>,
    pub boundary: BoundaryData,
}

impl GeodesicSolution {
    pub fn t(&self) -> f64 {
        self.boundary.t
    }

    fn check_s(&self, s: f64) -> Result<()> {
        let t = self.boundary.t;
        if !(0.0..=t).contains(&s) {
            return Err(Error::OutOfRange { s, t });
        }
        Ok(())
    }

    fn to_original(&self, y: DVector<f64>) -> DVector<f64> {
        self.frame.transpose() * y
    }

    pub fn eval(&self, s: f64) -> Result<DVector<f64>> {
        self.check_s(s)?;
        let t = self.boundary.t;
        let y = DVector::from_iterator(self.modes.len(), self.modes.iter().map(|m| m.value(s, t)));
        Ok(self.to_original(y))
    }

    /// `ẋ(s)`
    pub fn velocity(&self, s: f64) -> Result<DVector<f64>> {
        self.check_s(s)?;
        let t = self.boundary.t;
        let y = DVector::from_iterator(
            self.modes.len(),
            self.modes.iter().map(|m| m.velocity(s, t)),
        );
        Ok(self.to_original(y))
    }
}

/// Full symbol `H(x, ξ) = -⟨Aξ,ξ⟩ + ⟨Bx,x⟩`.
pub fn hamiltonian_value(spec: &OperatorSpec, x: &DVector<f64>, xi: &DVector<f64>) -> f64 {
    -xi.dot(&(spec.a().matrix() * xi)) + spec.potential(x)
}

pub fn solve_geodesic(spec: &OperatorSpec, bd: &BoundaryData) -> Result<GeodesicSolution> {
    let n = spec.dim();
    bd.validate(n)?;
    let sd = spec.spectral();
    let frame = sd.q().transpose();
    let y0 = &frame * &bd.x0;
    let y1 = &frame * &bd.x1;
    let mut modes = Vec::with_capacity(n);
    for (i, &lambda) in sd.eigenvalues().iter().enumerate() {
        check_regular(bd.t, lambda, i)?;
        let class = if lambda > SIGN_TOLERANCE {
            ModeClass::Hyperbolic
        } else if lambda < -SIGN_TOLERANCE {
            ModeClass::Trigonometric
        } else {
            ModeClass::Flat
        };
        let rate = match class {
            ModeClass::Flat => 0.0,
            _ => lambda.abs().sqrt(),
        };
        modes.push(Mode {
            class,
            rate,
            y0: y0[i],
            y1: y1[i],
        });
    }
    Ok(GeodesicSolution {
        frame,
        modes,
        boundary: bd.clone(),
    })
}

pub fn eval_geodesic(gs: &GeodesicSolution, s: f64) -> Result<DVector<f64>> {
    gs.eval(s)
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EnergyValue(pub f64);

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ActionValue(pub f64);

// ⟨A⁻¹ M(D) u, v⟩ for M given by its eigenvalues
fn weighted_form(spec: &OperatorSpec, values: &[f64], u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let m = spec.a().inverse() * spec.spectral().reconstruct(values);
    u.dot(&(m * v))
}

/// Conserved energy `½(⟨ẋ,ẋ⟩_{A⁻¹} - ⟨ẍ,x⟩_{A⁻¹})` of the geodesic, in
/// closed form:
/// `(1/2t²)[⟨ψ² x,x⟩ + ⟨ψ² x0,x0⟩ - 2⟨φψ x,x0⟩]` with `A⁻¹`-weighted
/// products and `φψ(u) = u² cosh u / sinh² u`.
pub fn energy(spec: &OperatorSpec, bd: &BoundaryData) -> Result<EnergyValue> {
    bd.validate(spec.dim())?;
    let t = bd.t;
    let sd = spec.spectral();
    let psi = spectral_values(sd, BranchFunction::Psi, t)?;
    let cross = spectral_values(sd, BranchFunction::CoshOverSinhSq, t)?;
    let psi_sq: Vec<f64> = psi.iter().map(|p| p * p).collect();
    let e = weighted_form(spec, &psi_sq, &bd.x1, &bd.x1) + weighted_form(spec, &psi_sq, &bd.x0, &bd.x0)
        - 2.0 * weighted_form(spec, &cross, &bd.x1, &bd.x0);
    Ok(EnergyValue(e / (2.0 * t * t)))
}

/// Action `S = -∫E dt`:
/// `(1/2t)[⟨φ x,x⟩ + ⟨φ x0,x0⟩ - 2⟨ψ x,x0⟩]` with `A⁻¹`-weighted products.
pub fn action(spec: &OperatorSpec, bd: &BoundaryData) -> Result<ActionValue> {
    bd.validate(spec.dim())?;
    let t = bd.t;
    let sd = spec.spectral();
    let phi = spectral_values(sd, BranchFunction::Phi, t)?;
    let psi = spectral_values(sd, BranchFunction::Psi, t)?;
    let s = weighted_form(spec, &phi, &bd.x1, &bd.x1) + weighted_form(spec, &phi, &bd.x0, &bd.x0)
        - 2.0 * weighted_form(spec, &psi, &bd.x1, &bd.x0);
    Ok(ActionValue(s / (2.0 * t)))
}

/// Sampled trajectory from the shooting oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub s: Vec<f64>,
    pub x: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn end(&self) -> &DVector<f64> {
        self.x.last().expect("trajectory has at least one sample")
    }

    /// Sup-norm distance to a closed-form geodesic over all samples.
    pub fn sup_distance(&self, gs: &GeodesicSolution) -> Result<f64> {
        let mut worst = 0.0f64;
        for (s, x) in self.s.iter().zip(&self.x) {
            let s = s.min(gs.t());
            worst = worst.max((gs.eval(s)? - x).amax());
        }
        Ok(worst)
    }
}

fn rk4_second_order(
    d: &DMatrix<f64>,
    x0: &DVector<f64>,
    v0: &DVector<f64>,
    t: f64,
    steps: usize,
    mut visit: impl FnMut(usize, &DVector<f64>),
) -> DVector<f64> {
    let h = t / steps as f64;
    let mut x = x0.clone();
    let mut v = v0.clone();
    visit(0, &x);
    for k in 1..=steps {
        let k1x = v.clone();
        let k1v = d * &x;
        let k2x = &v + &k1v * (h / 2.0);
        let k2v = d * (&x + &k1x * (h / 2.0));
        let k3x = &v + &k2v * (h / 2.0);
        let k3v = d * (&x + &k2x * (h / 2.0));
        let k4x = &v + &k3v * h;
        let k4v = d * (&x + &k3x * h);
        x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        visit(k, &x);
    }
    x
}

/// Independent geodesic by shooting: RK4 on `ẍ = Dx` in the original
/// coordinates, with the initial velocity from the linear end-point map.
///
/// The end-point map `v ↦ x(t)` is assembled column by column from unit
/// initial velocities; its smallest singular value is `|sin(t√-λ)|/√-λ` for
/// trigonometric modes, so it collapses near conjugate times.
pub fn shooting_oracle(spec: &OperatorSpec, bd: &BoundaryData) -> Result<Trajectory> {
    let n = spec.dim();
    bd.validate(n)?;
    let d = spec.spectral().d();
    let t = bd.t;
    let steps = SHOOTING_STEPS;
    let zero = DVector::zeros(n);

    let drift = rk4_second_order(d, &bd.x0, &zero, t, steps, |_, _| {});
    let mut map = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        let end = rk4_second_order(d, &zero, &e, t, steps, |_, _| {});
        map.set_column(j, &end);
    }

    let svd = map.clone().svd(false, false);
    let sigma_min = svd.singular_values.min();
    let rcond = sigma_min / t;
    if !(rcond >= SHOOTING_RCOND) {
        return Err(Error::SingularShooting { rcond });
    }
    let rhs = &bd.x1 - drift;
    let v0 = map
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularShooting { rcond })?;

    let mut s = Vec::with_capacity(steps + 1);
    let mut x = Vec::with_capacity(steps + 1);
    let h = t / steps as f64;
    rk4_second_order(d, &bd.x0, &v0, t, steps, |k, xk| {
        s.push(k as f64 * h);
        x.push(xk.clone());
    });
    Ok(Trajectory { s, x })
}
