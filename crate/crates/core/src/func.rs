/// A real function on `[0, 1]` that can be sampled pointwise.
pub trait RealFn: Send + Sync {
    fn eval(&self, x: f64) -> f64;
}

impl<F> RealFn for F
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}
