use crate::{Error, Result, Scalar};

fn mean<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x) / T::from_usize(v.len()).unwrap()
}

fn is_constant<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(|&x| x == v[0])
}

fn check_pair<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("metric inputs of length {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::UndefinedMetric("need at least two points"));
    }
    Ok(())
}

/// Pearson correlation `cov(a, b) / (std(a) std(b))`, two-pass.
pub fn pearson<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    check_pair(a, b)?;
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if is_constant(a) || is_constant(b) {
        return Err(Error::UndefinedMetric("pearson of a constant series"));
    }
    let r = sab / (saa * sbb).sqrt();
    Ok(r.max(-T::one()).min(T::one()))
}

/// Coefficient of determination `1 - SS_res / SS_tot`, with `SS_tot`
/// taken about the mean of `actual`.
pub fn r_squared<T: Scalar>(pred: &[T], actual: &[T]) -> Result<T> {
    check_pair(pred, actual)?;
    let m = mean(actual);
    let (mut ss_res, mut ss_tot) = (T::zero(), T::zero());
    for (&p, &y) in pred.iter().zip(actual) {
        ss_res += (y - p) * (y - p);
        ss_tot += (y - m) * (y - m);
    }
    if is_constant(actual) {
        return Err(Error::UndefinedMetric("r_squared of a constant series"));
    }
    Ok(T::one() - ss_res / ss_tot)
}
