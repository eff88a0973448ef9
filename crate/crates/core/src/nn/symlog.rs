use crate::scalar::Scalar;

/// `sign(x) * ln(|x| + 1)`.
#[inline]
pub fn symlog<T: Scalar>(x: T) -> T {
    x.signum() * x.abs().ln_1p()
}

/// Inverse of [`symlog`]: `sign(x) * (exp(|x|) - 1)`.
#[inline]
pub fn symexp<T: Scalar>(x: T) -> T {
    x.signum() * x.abs().exp_m1()
}

/// Derivative of [`symlog`], `1 / (|x| + 1)`.
#[inline]
pub fn symlog_grad<T: Scalar>(x: T) -> T {
    T::one() / (x.abs() + T::one())
}

pub fn symlog_slice<T: Scalar>(xs: &mut [T]) {
    xs.iter_mut().for_each(|x| *x = symlog(*x));
}
