//! Finite-difference validation of tape gradients.

/// A scalar-valued computation over a flat parameter vector, with both an
/// analytic-gradient route (through the tape) and a value-only route.
pub trait GradProblem {
    fn loss_and_grad(&self, params: &[f64]) -> (f64, Vec<f64>);
    fn loss(&self, params: &[f64]) -> f64;
}

pub struct FnProblem<F, G> {
    pub loss_and_grad: F,
    pub loss: G,
}

impl<F, G> GradProblem for FnProblem<F, G>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
    G: Fn(&[f64]) -> f64,
{
    fn loss_and_grad(&self, params: &[f64]) -> (f64, Vec<f64>) {
        (self.loss_and_grad)(params)
    }
    fn loss(&self, params: &[f64]) -> f64 {
        (self.loss)(params)
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckResult {
    /// max over coordinates of |analytic - central| / (|analytic| + |central| + 1e-12)
    pub max_rel_err: f64,
    pub worst_coord: usize,
    /// Coordinate whose perturbed evaluation produced a non-finite value, if any.
    pub non_finite_at: Option<usize>,
}

impl GradCheckResult {
    pub fn passed(&self, tol: f64) -> bool {
        self.non_finite_at.is_none() && self.max_rel_err <= tol
    }
}

/// Central finite differences vs the analytic gradient.
pub fn grad_check(problem: &dyn GradProblem, params: &[f64], h: f64) -> GradCheckResult {
    let (loss0, analytic) = problem.loss_and_grad(params);
    assert_eq!(analytic.len(), params.len(), "gradient length");
    if !loss0.is_finite() {
        return GradCheckResult {
            max_rel_err: f64::INFINITY,
            worst_coord: 0,
            non_finite_at: Some(0),
        };
    }
    let mut max_rel = 0.0;
    let mut worst = 0;
    let mut work = params.to_vec();
    for i in 0..params.len() {
        let orig = work[i];
        work[i] = orig + h;
        let fp = problem.loss(&work);
        work[i] = orig - h;
        let fm = problem.loss(&work);
        work[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return GradCheckResult {
                max_rel_err: f64::INFINITY,
                worst_coord: i,
                non_finite_at: Some(i),
            };
        }
        let fd = (fp - fm) / (2.0 * h);
        let rel = (analytic[i] - fd).abs() / (analytic[i].abs() + fd.abs() + 1e-12);
        if rel > max_rel {
            max_rel = rel;
            worst = i;
        }
    }
    GradCheckResult {
        max_rel_err: max_rel,
        worst_coord: worst,
        non_finite_at: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{GradTape, SeqTensor};

    fn vec_problem(
        build: impl Fn(&mut GradTape, crate::numerics::Var) -> crate::numerics::Var + Copy,
        n: usize,
    ) -> impl GradProblem {
        FnProblem {
            loss_and_grad: move |p: &[f64]| {
                let mut tape = GradTape::new();
                let x = tape.leaf(SeqTensor::from_vec(1, n, p.to_vec()));
                let f = build(&mut tape, x);
                let loss = tape.scalar(f);
                tape.backward(f).unwrap();
                (loss, tape.grad(x).data().to_vec())
            },
            loss: move |p: &[f64]| {
                let mut tape = GradTape::new();
                let x = tape.leaf(SeqTensor::from_vec(1, n, p.to_vec()));
                let f = build(&mut tape, x);
                tape.scalar(f)
            },
        }
    }

    #[test]
    fn sum_of_squares_checks_out() {
        let p = vec_problem(
            |tape, x| {
                let sq = tape.mul(x, x);
                tape.sum_all(sq)
            },
            3,
        );
        let r = grad_check(&p, &[1.0, 2.0, 3.0], 1e-5);
        assert!(r.max_rel_err < 1e-8, "rel err {}", r.max_rel_err);
    }

    #[test]
    fn linear_function_is_exact_to_float_noise() {
        let p = vec_problem(
            |tape, x| {
                let s = tape.scale(x, 2.5);
                tape.sum_all(s)
            },
            4,
        );
        let r = grad_check(&p, &[0.3, -0.7, 1.1, 0.0], 1e-5);
        assert!(r.max_rel_err < 1e-10, "rel err {}", r.max_rel_err);
    }

    #[test]
    fn nonsmooth_mix_through_tape_ops() {
        let p = vec_problem(
            |tape, x| {
                let s = tape.silu(x);
                let t = tape.tanh(s);
                let sp = tape.softplus(t);
                let ln = tape.layer_norm(sp, 1e-5);
                let sq = tape.mul(ln, ln);
                tape.sum_all(sq)
            },
            6,
        );
        let r = grad_check(&p, &[0.4, -1.2, 0.9, 2.0, -0.3, 0.7], 1e-5);
        assert!(r.max_rel_err < 1e-4, "rel err {}", r.max_rel_err);
    }
}
