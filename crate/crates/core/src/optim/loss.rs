use ndarray::{ArrayView2, Zip};

use crate::{Error, Result, Scalar};

/// Mean over all entries of the squared difference.
pub fn mse<T: Scalar>(pred: ArrayView2<T>, target: ArrayView2<T>) -> Result<T> {
    if pred.dim() != target.dim() {
        return Err(Error::Shape(format!("prediction {:?} vs target {:?}", pred.dim(), target.dim())));
    }
    if pred.is_empty() {
        return Err(Error::Empty("loss input"));
    }
    let mut sum = T::zero();
    Zip::from(pred).and(target).for_each(|&p, &t| sum += (p - t) * (p - t));
    Ok(sum / T::from_usize(pred.len()).unwrap())
}

/// Gradient of [`mse`] with respect to `pred`: `2 (pred - target) / N`.
pub fn mse_grad<T: Scalar>(pred: ArrayView2<T>, target: ArrayView2<T>) -> ndarray::Array2<T> {
    let scale = T::from_f64_lossy(2.0) / T::from_usize(pred.len()).unwrap();
    (&pred - &target) * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn values() {
        let a = array![[1.0f64, -2.0], [0.5, 3.0]];
        assert_eq!(mse(a.view(), a.view()).unwrap(), 0.0);
        assert_eq!(mse(array![[0.0, 0.0]].view(), array![[3.0, 4.0]].view()).unwrap(), 12.5);
        let b = array![[0.0, 1.0], [2.0, 2.0]];
        let base = mse(a.view(), b.view()).unwrap();
        let scaled = mse((&a * 3.0).view(), (&b * 3.0).view()).unwrap();
        assert!((scaled - 9.0 * base).abs() < 1e-12);
        assert!(mse(a.view(), array![[1.0]].view()).is_err());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = array![[0.3f64, -1.2, 2.0]];
        let t = array![[1.0, 0.0, -0.5]];
        let g = mse_grad(p.view(), t.view());
        for j in 0..3 {
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[[0, j]] += 1e-6;
            lo[[0, j]] -= 1e-6;
            let fd = (mse(hi.view(), t.view()).unwrap() - mse(lo.view(), t.view()).unwrap()) / 2e-6;
            assert!((fd - g[[0, j]]).abs() < 1e-8);
        }
    }
}
