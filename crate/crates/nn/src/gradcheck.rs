//! Central finite-difference verification of tape gradients.

use crate::error::NnError;
use crate::params::ParameterStore;
use crate::tape::{Tape, Var};

/// Default perturbation for central differences.
pub const DEFAULT_EPSILON: f64 = 1e-5;
/// Default relative tolerance for gradient agreement.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

#[derive(Debug)]
pub struct GradCheckFailure {
    pub parameter: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

impl std::fmt::Display for GradCheckFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "gradient mismatch at {}[{}]: analytic {:.6e} vs numeric {:.6e} (rel {:.3e})",
            self.parameter, self.index, self.analytic, self.numeric, self.rel_error
        )
    }
}

fn eval_loss(
    store: &ParameterStore,
    build: &dyn Fn(&mut Tape, &ParameterStore) -> Result<Var, NnError>,
) -> Result<f64, NnError> {
    let mut tape = Tape::new();
    let loss = build(&mut tape, store)?;
    Ok(tape.value(loss).item())
}

/// Compare tape gradients of the scalar loss built by `build` against
/// central finite differences, for every entry of every parameter currently
/// in the store. Relative error uses `max(1, |analytic|, |numeric|)` as the
/// denominator.
pub fn finite_difference_check(
    store: &mut ParameterStore,
    build: &dyn Fn(&mut Tape, &ParameterStore) -> Result<Var, NnError>,
    epsilon: f64,
    tolerance: f64,
) -> Result<(), Box<GradCheckFailure>> {
    finite_difference_check_sampled(store, build, epsilon, tolerance, usize::MAX)
}

/// Like [`finite_difference_check`], but verifying at most
/// `max_entries_per_param` evenly-strided entries of each parameter. For
/// full-width networks an exhaustive sweep is prohibitively slow; a strided
/// sample still exercises every operation's backward path.
pub fn finite_difference_check_sampled(
    store: &mut ParameterStore,
    build: &dyn Fn(&mut Tape, &ParameterStore) -> Result<Var, NnError>,
    epsilon: f64,
    tolerance: f64,
    max_entries_per_param: usize,
) -> Result<(), Box<GradCheckFailure>> {
    let names: Vec<String> = store.names().map(str::to_string).collect();

    store.zero_grads();
    let mut tape = Tape::new();
    let loss = build(&mut tape, store).expect("gradcheck forward failed");
    tape.backward(loss).expect("gradcheck backward failed");
    tape.apply_param_grads(store).expect("gradcheck grad transfer failed");

    for name in &names {
        let len = store.value(name).expect("param").len();
        let count = len.min(max_entries_per_param);
        let stride = len.div_ceil(count).max(1);
        for i in (0..len).step_by(stride) {
            let analytic = store.grad(name).expect("grad").data()[i];
            let original = store.value(name).expect("param").data()[i];

            store.value_mut(name).expect("param").data_mut()[i] = original + epsilon;
            let plus = eval_loss(store, build).expect("gradcheck +eps eval failed");
            store.value_mut(name).expect("param").data_mut()[i] = original - epsilon;
            let minus = eval_loss(store, build).expect("gradcheck -eps eval failed");
            store.value_mut(name).expect("param").data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let denom = 1.0f64.max(analytic.abs()).max(numeric.abs());
            let rel_error = (analytic - numeric).abs() / denom;
            if rel_error > tolerance {
                return Err(Box::new(GradCheckFailure {
                    parameter: name.clone(),
                    index: i,
                    analytic,
                    numeric,
                    rel_error,
                }));
            }
        }
    }
    Ok(())
}
