use crate::autodiff::tape::{DualValue, Tape};
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

/// Compares reverse-mode gradients against central finite differences at
/// `point` and returns the worst relative error, `|ad - fd| / max(1, |fd|)`.
///
/// The closure must build a scalar from the given input on the given tape;
/// it is re-invoked on fresh tapes for every probe, so it should be a pure
/// function of its input. Non-finite function values are an error rather
/// than a silent NaN in the report.
pub fn check_grad_fd<F>(f: F, point: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &DualValue) -> Result<DualValue>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("step size {h} must be positive")));
    }

    let eval = |t: &Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.var(t.clone());
        let y = f(&mut tape, &x)?;
        let v = y.scalar()?;
        if !v.is_finite() {
            return Err(Error::non_finite("finite-difference probe"));
        }
        Ok(v)
    };

    let mut tape = Tape::new();
    let x = tape.var(point.clone());
    let y = f(&mut tape, &x)?;
    if !y.scalar()?.is_finite() {
        return Err(Error::non_finite("gradient check at base point"));
    }
    let g = tape.grad(&y, &[&x])?.remove(0);

    let mut worst = 0.0f64;
    for i in 0..point.len() {
        let mut plus = point.clone();
        plus.data_mut()[i] += h;
        let mut minus = point.clone();
        minus.data_mut()[i] -= h;
        let fd = (eval(&plus)? - eval(&minus)?) / (2.0 * h);
        let ad = g.data()[i];
        if !ad.is_finite() {
            return Err(Error::non_finite("reverse-mode gradient"));
        }
        let rel = (ad - fd).abs() / fd.abs().max(1.0);
        worst = worst.max(rel);
    }
    Ok(worst)
}
