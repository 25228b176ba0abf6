//! Browser bindings for three one-dimensional views of `-a u'' + b x² u`:
//! a kernel profile `x ↦ K(x, x0; t)`, a geodesic with its energy and
//! action, and the Riccati coefficient `α(t)` with its singular times.
//!
//! The plain functions work natively and are what the tests exercise; the
//! `#[wasm_bindgen]` wrappers only convert errors into JavaScript ones.

use mehler_core::hamiltonics::{action, energy, solve_geodesic, BoundaryData};
use mehler_core::kernels::{kernel_l, kernel_ls_spectral};
use mehler_core::riccati::coefficients;
use mehler_core::{singular_times, OperatorSpec, SymPosDefMatrix};
use nalgebra::{dmatrix, dvector};
use wasm_bindgen::prelude::*;

fn operator(a: f64, b: f64, g: f64) -> Result<OperatorSpec, String> {
    let spec = OperatorSpec::new(SymPosDefMatrix::diagonal(&[a]).map_err(|e| e.to_string())?, dmatrix![b])
        .map_err(|e| e.to_string())?;
    if g == 0.0 {
        Ok(spec)
    } else {
        spec.with_lower_order(dvector![0.0], dvector![g], 0.0).map_err(|e| e.to_string())
    }
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect(),
    }
}

/// Kernel values on `points` equally spaced `x` in `[lo, hi]`, interleaved
/// as `re, im` pairs.
#[allow(clippy::too_many_arguments)]
pub fn kernel_profile(
    a: f64,
    b: f64,
    g: f64,
    x0: f64,
    t: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let spec = operator(a, b, g)?;
    let src = dvector![x0];
    let mut out = Vec::with_capacity(2 * points);
    for x in grid(lo, hi, points) {
        let x = dvector![x];
        let k = if spec.is_homogeneous() {
            kernel_ls_spectral(&spec, &x, &src, t)
        } else {
            kernel_l(&spec, &x, &src, t)
        }
        .map_err(|e| e.to_string())?;
        out.extend([k.re(), k.im()]);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPlot {
    pub s: Vec<f64>,
    pub x: Vec<f64>,
    pub energy: f64,
    pub action: f64,
}

/// The geodesic from `x0` at `s = 0` to `x1` at `s = t`.
pub fn geodesic_plot(a: f64, b: f64, x0: f64, x1: f64, t: f64, samples: usize) -> Result<GeodesicPlot, String> {
    let spec = operator(a, b, 0.0)?;
    let bd = BoundaryData::new(dvector![x0], dvector![x1], t);
    let gs = solve_geodesic(&spec, &bd).map_err(|e| e.to_string())?;
    let s = grid(0.0, t, samples.max(2));
    let x = s
        .iter()
        .map(|&s| gs.eval(s).map(|p| p[0]))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok(GeodesicPlot {
        s,
        x,
        energy: energy(&spec, &bd).map_err(|e| e.to_string())?.0,
        action: action(&spec, &bd).map_err(|e| e.to_string())?.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaCurve {
    pub t: Vec<f64>,
    /// `NaN` where the time is too close to a singular time to evaluate.
    pub alpha: Vec<f64>,
    pub singular: Vec<f64>,
}

/// `α(t)` on `points` equally spaced times in `(0, t_max]`.
pub fn alpha_curve(a: f64, b: f64, t_max: f64, points: usize) -> Result<AlphaCurve, String> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(format!("t_max must be positive and finite, got {t_max}"));
    }
    let spec = operator(a, b, 0.0)?;
    let singular = singular_times(spec.spectral(), t_max)
        .map_err(|e| e.to_string())?
        .times
        .iter()
        .map(|p| p.t)
        .collect();
    let t: Vec<f64> = (1..=points).map(|k| t_max * k as f64 / points as f64).collect();
    let alpha = t
        .iter()
        .map(|&t| coefficients(&spec, t).map_or(f64::NAN, |c| c.alpha[(0, 0)]))
        .collect();
    Ok(AlphaCurve { t, alpha, singular })
}

#[wasm_bindgen(js_name = kernelProfile)]
#[allow(clippy::too_many_arguments)]
pub fn kernel_profile_js(
    a: f64,
    b: f64,
    g: f64,
    x0: f64,
    t: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    kernel_profile(a, b, g, x0, t, lo, hi, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = Geodesic)]
pub struct GeodesicJs(GeodesicPlot);

#[wasm_bindgen(js_class = Geodesic)]
impl GeodesicJs {
    #[wasm_bindgen(constructor)]
    pub fn new(a: f64, b: f64, x0: f64, x1: f64, t: f64, samples: usize) -> Result<GeodesicJs, JsError> {
        geodesic_plot(a, b, x0, x1, t, samples).map(GeodesicJs).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn s(&self) -> Vec<f64> {
        self.0.s.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.0.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn energy(&self) -> f64 {
        self.0.energy
    }

    #[wasm_bindgen(getter)]
    pub fn action(&self) -> f64 {
        self.0.action
    }
}

#[wasm_bindgen(js_name = AlphaCurve)]
pub struct AlphaCurveJs(AlphaCurve);

#[wasm_bindgen(js_class = AlphaCurve)]
impl AlphaCurveJs {
    #[wasm_bindgen(constructor)]
    pub fn new(a: f64, b: f64, t_max: f64, points: usize) -> Result<AlphaCurveJs, JsError> {
        alpha_curve(a, b, t_max, points).map(AlphaCurveJs).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn t(&self) -> Vec<f64> {
        self.0.t.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn alpha(&self) -> Vec<f64> {
        self.0.alpha.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn singular(&self) -> Vec<f64> {
        self.0.singular.clone()
    }
}
