//! Inner adaptation and outer gradients over flat parameter vectors.

use crate::drl::losses::{actor_hvp, actor_loss_grad, critic_hvp, critic_loss_grad, dqn_hvp, dqn_loss_grad};
use crate::drl::Batch;
use crate::error::{Error, Result};
use crate::neuralnet::ParamSet;

/// A twice-differentiable scalar loss.
pub trait Objective {
    fn loss_grad(&self, p: &[f64]) -> (f64, Vec<f64>);
    /// Hessian at `p` applied to `v`.
    fn hvp(&self, p: &[f64], v: &[f64]) -> Vec<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterMode {
    /// Query gradient at the adapted point, used as the gradient at the
    /// starting point.
    FirstOrder,
    /// Query gradient pulled back through every inner step.
    Exact,
}

/// `steps` plain gradient-descent steps from `p0`. Returns every iterate,
/// `p0` first.
pub fn adapt_trajectory(obj: &dyn Objective, p0: &[f64], lr: f64, steps: usize, what: &'static str) -> Result<Vec<Vec<f64>>> {
    let mut path = vec![p0.to_vec()];
    for step in 0..steps {
        let cur = path.last().expect("non-empty");
        let (loss, g) = obj.loss_grad(cur);
        if !loss.is_finite() {
            return Err(Error::Divergence {
                what,
                step: step as u64,
            });
        }
        let next: Vec<f64> = cur.iter().zip(&g).map(|(w, gi)| w - lr * gi).collect();
        path.push(next);
    }
    Ok(path)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OuterGrad {
    pub query_loss: f64,
    pub grad: Vec<f64>,
    pub adapted: Vec<f64>,
}

/// Adapts on `support`, then differentiates the query loss at the adapted
/// point with respect to `p0`.
pub fn outer_gradient(
    support: &dyn Objective,
    query: &dyn Objective,
    p0: &[f64],
    lr: f64,
    steps: usize,
    mode: OuterMode,
    what: &'static str,
) -> Result<OuterGrad> {
    let path = adapt_trajectory(support, p0, lr, steps, what)?;
    let adapted = path.last().expect("non-empty").clone();
    let (query_loss, mut grad) = query.loss_grad(&adapted);
    if !query_loss.is_finite() {
        return Err(Error::Divergence {
            what,
            step: steps as u64,
        });
    }
    if mode == OuterMode::Exact {
        // d p_{n+1} / d p_n = I - lr * H(p_n), applied last step first.
        for p in path[..steps].iter().rev() {
            let hg = support.hvp(p, &grad);
            for (g, h) in grad.iter_mut().zip(hg) {
                *g -= lr * h;
            }
        }
    }
    Ok(OuterGrad {
        query_loss,
        grad,
        adapted,
    })
}

/// DQN loss in the Q parameters, target network fixed.
pub struct DqnObjective<'a> {
    pub template: &'a ParamSet,
    pub target: &'a ParamSet,
    pub batch: &'a Batch,
    pub gamma: f64,
}

impl Objective for DqnObjective<'_> {
    fn loss_grad(&self, p: &[f64]) -> (f64, Vec<f64>) {
        let q = self.template.with_flat(p).expect("flat length");
        let lg = dqn_loss_grad(&q, self.target, self.batch, self.gamma);
        (lg.loss, lg.grad.to_flat())
    }

    fn hvp(&self, p: &[f64], v: &[f64]) -> Vec<f64> {
        let q = self.template.with_flat(p).expect("flat length");
        let v = self.template.with_flat(v).expect("flat length");
        dqn_hvp(&q, self.target, self.batch, self.gamma, &v).to_flat()
    }
}

/// Critic TD loss, target actor and critic fixed.
pub struct CriticObjective<'a> {
    pub template: &'a ParamSet,
    pub actor_target: &'a ParamSet,
    pub critic_target: &'a ParamSet,
    pub batch: &'a Batch,
    pub gamma: f64,
    pub p_max: f64,
}

impl Objective for CriticObjective<'_> {
    fn loss_grad(&self, p: &[f64]) -> (f64, Vec<f64>) {
        let c = self.template.with_flat(p).expect("flat length");
        let lg = critic_loss_grad(&c, self.actor_target, self.critic_target, self.batch, self.gamma, self.p_max);
        (lg.loss, lg.grad.to_flat())
    }

    fn hvp(&self, p: &[f64], v: &[f64]) -> Vec<f64> {
        let c = self.template.with_flat(p).expect("flat length");
        let v = self.template.with_flat(v).expect("flat length");
        critic_hvp(&c, self.actor_target, self.critic_target, self.batch, self.gamma, self.p_max, &v).to_flat()
    }
}

/// Actor loss -Q(s, pi(s)) against a fixed critic.
pub struct ActorObjective<'a> {
    pub template: &'a ParamSet,
    pub critic: &'a ParamSet,
    pub batch: &'a Batch,
    pub p_max: f64,
}

impl Objective for ActorObjective<'_> {
    fn loss_grad(&self, p: &[f64]) -> (f64, Vec<f64>) {
        let a = self.template.with_flat(p).expect("flat length");
        let lg = actor_loss_grad(&a, self.critic, self.batch, self.p_max);
        (lg.loss, lg.grad.to_flat())
    }

    fn hvp(&self, p: &[f64], v: &[f64]) -> Vec<f64> {
        let a = self.template.with_flat(p).expect("flat length");
        let v = self.template.with_flat(v).expect("flat length");
        actor_hvp(&a, self.critic, self.batch, self.p_max, &v).to_flat()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// L(w) = c * (w - 1)^2 on every coordinate.
    struct Quadratic(f64);

    impl Objective for Quadratic {
        fn loss_grad(&self, p: &[f64]) -> (f64, Vec<f64>) {
            let loss = p.iter().map(|w| self.0 * (w - 1.0).powi(2)).sum();
            (loss, p.iter().map(|w| 2.0 * self.0 * (w - 1.0)).collect())
        }

        fn hvp(&self, _p: &[f64], v: &[f64]) -> Vec<f64> {
            v.iter().map(|x| 2.0 * self.0 * x).collect()
        }
    }

    #[test]
    fn zero_steps_is_identity() {
        let path = adapt_trajectory(&Quadratic(1.0), &[0.3, -2.0], 0.1, 0, "toy").unwrap();
        assert_eq!(path, vec![vec![0.3, -2.0]]);
    }

    #[test]
    fn exact_equals_first_order_times_jacobian() {
        let q = Quadratic(1.0);
        let fo = outer_gradient(&q, &q, &[0.0], 0.1, 1, OuterMode::FirstOrder, "toy").unwrap();
        let ex = outer_gradient(&q, &q, &[0.0], 0.1, 1, OuterMode::Exact, "toy").unwrap();
        assert!((ex.grad[0] - 0.8 * fo.grad[0]).abs() < 1e-15);
    }
}
