use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
    pub max_rel_error: f64,
    /// `(parameter, flat index)` where the largest error occurred.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
}

/// Compares tape gradients against central differences
/// `(f(x + h) - f(x - h)) / 2h`.
///
/// `loss` rebuilds the objective on a fresh evaluation tape from leaf vars in
/// the order of `params`; it must be deterministic. At most
/// `coords_per_param` entries of each parameter are probed, chosen by `seed`.
pub fn finite_diff_check<T, F>(
    mut loss: F,
    params: &[Tensor<T>],
    h: T,
    coords_per_param: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    T: Scalar,
    F: FnMut(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let root = loss(&mut tape, &vars)?;
    let grads = tape.backward(root)?;
    let analytic: Vec<Tensor<T>> = vars.iter().map(|&v| grads.wrt(v, &tape)).collect();

    let mut eval = |values: &[Tensor<T>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|p| tape.leaf(p.clone())).collect();
        let root = loss(&mut tape, &vars)?;
        Ok(tape.value(root).item().as_f64())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, checked: 0 };
    let mut probe = params.to_vec();
    for (k, p) in params.iter().enumerate() {
        let coords: Vec<usize> = if p.len() <= coords_per_param {
            (0..p.len()).collect()
        } else {
            index::sample(&mut rng, p.len(), coords_per_param).into_vec()
        };
        for idx in coords {
            let x0 = p.data()[idx];
            probe[k].data_mut()[idx] = x0 + h;
            let up = eval(&probe)?;
            probe[k].data_mut()[idx] = x0 - h;
            let down = eval(&probe)?;
            probe[k].data_mut()[idx] = x0;

            let numeric = (up - down) / (2.0 * h.as_f64());
            let exact = analytic[k].data()[idx].as_f64();
            let denom = exact.abs().max(numeric.abs()).max(1e-8);
            let rel = (exact - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some((k, idx));
            }
        }
    }
    Ok(report)
}
