//! Central finite differences against the tape's analytic gradients.
//!
//! The numeric side only ever evaluates the forward closure, so it shares no
//! code with `Tape::backward`.

use crate::error::Result;
use crate::params::ParamStore;
use crate::tape::{Tape, Var};

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// ‖analytic − numeric‖ / max(‖analytic‖ + ‖numeric‖, 1e-12)
    pub relative_error: f64,
    pub coordinates: usize,
    pub worst_parameter: String,
}

/// Compares analytic and numeric gradients for every parameter in `store`.
/// `max_coords_per_param` limits how many coordinates of each tensor are
/// probed (evenly strided); `None` probes all of them.
pub fn check<F>(store: &ParamStore, h: f64, max_coords_per_param: Option<usize>, loss_fn: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, store)?;
    let grads = tape.backward(loss)?;

    let eval = |s: &ParamStore| -> Result<f64> {
        let mut t = Tape::inference();
        let l = loss_fn(&mut t, s)?;
        t.value(l).item()
    };

    let mut diff_sq = 0.0;
    let mut a_sq = 0.0;
    let mut n_sq = 0.0;
    let mut coords = 0;
    let mut worst = (0.0f64, String::new());
    let mut probe = store.clone();
    let names: Vec<String> = store.names().map(str::to_string).collect();
    for name in names {
        let base = store.get(&name)?.clone();
        let analytic = grads.params().get(&name).cloned();
        let len = base.len();
        let stride = match max_coords_per_param {
            Some(m) if m > 0 && len > m => len.div_ceil(m),
            _ => 1,
        };
        for k in (0..len).step_by(stride) {
            let mut plus = base.clone();
            plus.data_mut()[k] += h;
            probe.set(&name, plus)?;
            let lp = eval(&probe)?;
            let mut minus = base.clone();
            minus.data_mut()[k] -= h;
            probe.set(&name, minus)?;
            let lm = eval(&probe)?;
            probe.set(&name, base.clone())?;
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic.as_ref().map_or(0.0, |g| g.data()[k]);
            let d = (a - numeric).abs();
            if d > worst.0 {
                worst = (d, name.clone());
            }
            diff_sq += d * d;
            a_sq += a * a;
            n_sq += numeric * numeric;
            coords += 1;
        }
    }
    let denom = (a_sq.sqrt() + n_sq.sqrt()).max(1e-12);
    Ok(GradCheckReport {
        relative_error: diff_sq.sqrt() / denom,
        coordinates: coords,
        worst_parameter: worst.1,
    })
}
