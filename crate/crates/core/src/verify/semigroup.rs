use nalgebra::DVector;
use num_complex::Complex64;

use super::{KernelSelector, ResidualSample};
use crate::error::{Error, Result};
use crate::quadrature::TanhSinh;

/// `|∫K(x,y;t) K(y,z;s) dy - K(x,z;s+t)| / |K(x,z;s+t)|` by quadrature,
/// `n ≤ 2`. The Ornstein–Uhlenbeck kernel is integrated against its
/// weighted measure `e^{-½⟨By,y⟩_{A⁻¹}} dy`.
pub fn chapman_kolmogorov(
    kernel: &KernelSelector,
    x: &DVector<f64>,
    z: &DVector<f64>,
    s: f64,
    t: f64,
    tol: f64,
) -> Result<ResidualSample> {
    let n = x.len();
    let equiv = kernel.schrodinger_equivalent()?;
    let weight = |y: &DVector<f64>| -> f64 {
        match kernel {
            KernelSelector::OrnsteinUhlenbeck { a, b } => (-0.5 * y.dot(&(a.inverse() * (b * y)))).exp(),
            _ => 1.0,
        }
    };
    let integrand = |y: DVector<f64>| -> Complex64 {
        let k1 = kernel.eval(x, &y, t);
        let k2 = kernel.eval(&y, z, s);
        match (k1, k2) {
            (Ok(a), Ok(b)) => a * b * weight(&y),
            _ => Complex64::new(f64::NAN, 0.0),
        }
    };
    let lmax = equiv.a().largest_eigenvalue();
    let r = 8.0 * (2.0 * (s + t) * lmax).sqrt().max(1.0) + x.amax().max(z.amax());
    let mid = (x * s + z * t) / (s + t);
    let q = TanhSinh::default();
    let value = match n {
        1 => q.integrate_split(|y| integrand(DVector::from_element(1, y)), -r, r, &[0.0, x[0], z[0], mid[0]])?,
        2 => q.integrate_2d(
            |u, v| integrand(DVector::from_vec(vec![u, v])),
            (-r, r),
            (-r, r),
            &[0.0, x[0], z[0], mid[0]],
            &[0.0, x[1], z[1], mid[1]],
        )?,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "Chapman–Kolmogorov check supports n ≤ 2, got n = {n}"
            )))
        }
    };
    let direct = kernel.eval(x, z, s + t)?;
    Ok(ResidualSample::new(
        format!("chapman-kolmogorov[{}]", kernel.name()),
        x,
        z,
        s + t,
        (value - direct).norm(),
        direct.norm(),
        tol,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SymPosDefMatrix;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn gaussian_semigroup() {
        let sel = KernelSelector::Gaussian(SymPosDefMatrix::identity(1));
        let s = chapman_kolmogorov(&sel, &dvector![0.4], &dvector![-0.3], 0.2, 0.5, 1e-8).unwrap();
        assert!(s.pass, "{s:?}");
    }

    #[test]
    fn hermite_semigroup() {
        let sel = KernelSelector::Mehler { a: vec![1.0], b: vec![1.0] };
        let s = chapman_kolmogorov(&sel, &dvector![0.5], &dvector![-0.2], 0.3, 0.3, 1e-5).unwrap();
        assert!(s.pass, "{s:?}");
    }

    #[test]
    fn ou_weighted_semigroup() {
        let sel = KernelSelector::OrnsteinUhlenbeck {
            a: SymPosDefMatrix::identity(1),
            b: dmatrix![1.0],
        };
        let s = chapman_kolmogorov(&sel, &dvector![0.5], &dvector![-0.8], 0.3, 0.4, 1e-5).unwrap();
        assert!(s.pass, "{s:?}");
    }

    #[test]
    fn mixed_two_dimensional() {
        let sel = KernelSelector::Diagonal { a: vec![1.0, 0.8], b_signed: vec![0.5, -0.3] };
        let s = chapman_kolmogorov(&sel, &dvector![0.2, 0.1], &dvector![-0.1, 0.3], 0.2, 0.25, 1e-5).unwrap();
        assert!(s.pass, "{s:?}");
    }
}
