use super::ops::Backend;
use super::tape::{Tape, Var};
use super::tensor::Tensor;

/// Compares tape gradients of a scalar function against central finite
/// differences and returns the worst relative error
/// `|g_fd − g_ad| / (|g_fd| + |g_ad| + 1e-8)` over all parameter entries.
///
/// `f` builds the scalar on the given tape from leaf variables holding
/// `params`. The difference quotient uses the fourth-order central stencil
/// `(8(f(x+h) − f(x−h)) − (f(x+2h) − f(x−2h))) / 12h`.
pub fn grad_check<F>(f: F, params: &[Tensor], step: f64) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let eval = |ps: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.leaf(p.clone())).collect();
        let out = f(&mut tape, &vars);
        tape.value(&out).item()
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let out = f(&mut tape, &vars);
    let grads = tape.backward(out);

    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for (pi, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var);
        for k in 0..params[pi].len() {
            let g_ad = analytic.map_or(0.0, |g| g.data()[k]);
            let x = params[pi].data()[k];
            let mut at = |delta: f64| {
                work[pi].data_mut()[k] = x + delta;
                eval(&work)
            };
            let (p1, m1, p2, m2) = (at(step), at(-step), at(2.0 * step), at(-2.0 * step));
            work[pi].data_mut()[k] = x;
            let g_fd = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * step);
            let rel = (g_fd - g_ad).abs() / (g_fd.abs() + g_ad.abs() + 1e-8);
            worst = worst.max(rel);
        }
    }
    worst
}
