/// A real-valued function on `[0,1]^d` that can be probed pointwise.
pub trait Function: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
}

impl<F: Function + ?Sized> Function for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
}

/// Adapter for closures.
pub struct FnFunction<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnFunction<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Function for FnFunction<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Pointwise sum of two functions of the same dimension.
pub struct Sum<A, B>(pub A, pub B);

impl<A: Function, B: Function> Function for Sum<A, B> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(x) + self.1.value(x)
    }
}
