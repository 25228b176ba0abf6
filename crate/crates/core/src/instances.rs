//! Seeded random commuting operator instances for tests and verification
//! suites.
//!
//! `A = QΛQᵗ` with eigenvalues log-uniform in `[0.5, 2]`. `B` shares the
//! eigenbasis of `A`, so it is a polynomial in `A` and commutes exactly up
//! to rounding.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spectral::{singular_times, OperatorSpec, SymPosDefMatrix};

const A_EIG_MIN: f64 = 0.5;
const A_EIG_MAX: f64 = 2.0;

/// Sign pattern of the spectrum of `D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignClass {
    /// `B = 0`
    Flat,
    /// all eigenvalues of `D` positive
    Hyperbolic,
    /// all eigenvalues of `D` negative
    Trigonometric,
    /// both signs present (for `n ≥ 2`)
    Mixed,
    /// `B = c₀I + c₁A + c₂A²` with `cᵢ` uniform in `[-1, 1]`
    Polynomial,
}

impl SignClass {
    pub const ALL: [SignClass; 5] = [
        SignClass::Flat,
        SignClass::Hyperbolic,
        SignClass::Trigonometric,
        SignClass::Mixed,
        SignClass::Polynomial,
    ];
}

#[derive(Debug, Clone)]
pub struct InstanceGenerator {
    rng: ChaCha8Rng,
}

impl InstanceGenerator {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    pub fn index(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        self.rng.random_range(lo..=hi_inclusive)
    }

    /// Haar-distributed orthogonal matrix from the QR factorization of a
    /// Gaussian matrix with the sign of `R`'s diagonal folded into `Q`.
    pub fn orthogonal(&mut self, n: usize) -> DMatrix<f64> {
        let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut self.rng));
        let qr = g.qr();
        let r = qr.r();
        let mut q = qr.q();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        q
    }

    pub fn vector(&mut self, n: usize, scale: f64) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.uniform(-scale, scale))
    }

    fn a_eigenvalues(&mut self, n: usize) -> Vec<f64> {
        let (lo, hi) = (A_EIG_MIN.ln(), A_EIG_MAX.ln());
        (0..n).map(|_| self.uniform(lo, hi).exp()).collect()
    }

    /// Eigenvalues of `B` in the eigenbasis of `A` for the requested class.
    fn b_eigenvalues(&mut self, class: SignClass, a_eigs: &[f64]) -> Vec<f64> {
        let n = a_eigs.len();
        let magnitude = |g: &mut Self| g.uniform(0.2, 1.0);
        match class {
            SignClass::Flat => vec![0.0; n],
            SignClass::Hyperbolic => (0..n).map(|_| magnitude(self)).collect(),
            SignClass::Trigonometric => (0..n).map(|_| -magnitude(self)).collect(),
            SignClass::Mixed => {
                let mut v: Vec<f64> = (0..n)
                    .map(|_| {
                        let m = magnitude(self);
                        if self.rng.random_bool(0.5) {
                            m
                        } else {
                            -m
                        }
                    })
                    .collect();
                if n >= 2 {
                    let i = self.index(0, n - 1);
                    let j = (i + 1 + self.index(0, n - 2)) % n;
                    v[i] = v[i].abs();
                    v[j] = -v[j].abs();
                }
                v
            }
            SignClass::Polynomial => {
                let c: Vec<f64> = (0..3).map(|_| self.uniform(-1.0, 1.0)).collect();
                a_eigs.iter().map(|&a| c[0] + c[1] * a + c[2] * a * a).collect()
            }
        }
    }

    /// Random `(A, B)` of dimension `n` with the requested spectral class and
    /// `f = g = 0`, `h = 0`.
    pub fn operator(&mut self, n: usize, class: SignClass) -> OperatorSpec {
        let q = self.orthogonal(n);
        let a_eigs = self.a_eigenvalues(n);
        let b_eigs = self.b_eigenvalues(class, &a_eigs);
        let conj = |vals: &[f64]| {
            let m = &q * DMatrix::from_diagonal(&DVector::from_column_slice(vals)) * q.transpose();
            (&m + m.transpose()) * 0.5
        };
        let a = SymPosDefMatrix::new(conj(&a_eigs)).expect("eigenvalues lie in [0.5, 2]");
        OperatorSpec::new(a, conj(&b_eigs)).expect("B is built in the eigenbasis of A")
    }

    /// Random `f`, `g` with entries in `[-1, 1]` and `h ∈ [-1, 1]`.
    pub fn lower_order(&mut self, spec: OperatorSpec) -> Result<OperatorSpec> {
        let n = spec.dim();
        let f = self.vector(n, 1.0);
        let g = self.vector(n, 1.0);
        let h = self.uniform(-1.0, 1.0);
        spec.with_lower_order(f, g, h)
    }

    /// Time uniform in `[lo, hi]` at least `margin` away from every singular
    /// time of `spec`.
    pub fn regular_time(&mut self, spec: &OperatorSpec, lo: f64, hi: f64, margin: f64) -> f64 {
        let set = singular_times(spec.spectral(), hi + margin).expect("hi is positive");
        loop {
            let t = self.uniform(lo, hi);
            if set.distance(t) > margin {
                return t;
            }
        }
    }
}

/// First conjugate time of `spec`, if `D` has a negative eigenvalue.
pub fn first_singular_time(spec: &OperatorSpec) -> Option<f64> {
    spec.spectral()
        .eigenvalues()
        .iter()
        .filter(|&&l| l < -crate::spectral::SIGN_TOLERANCE)
        .map(|&l| std::f64::consts::PI / (-l).sqrt())
        .reduce(f64::min)
}
