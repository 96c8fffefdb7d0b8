use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::approximator::params::ParamStore;
use crate::error::{config_err, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub config: AdamConfig,
    pub step: u64,
    m: BTreeMap<String, Array2<T>>,
    v: BTreeMap<String, Array2<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(store: &ParamStore<T>, config: AdamConfig) -> Self {
        let zeros = |store: &ParamStore<T>| {
            store
                .iter()
                .map(|(n, p)| (n.to_string(), Array2::zeros(p.shape())))
                .collect::<BTreeMap<_, _>>()
        };
        Self {
            config,
            step: 0,
            m: zeros(store),
            v: zeros(store),
        }
    }

    pub fn first_moment(&self, name: &str) -> Option<&Array2<T>> {
        self.m.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Array2<T>> {
        self.v.get(name)
    }

    /// Overrides the moments of one parameter. Used to resume from known state.
    pub fn set_moments(&mut self, name: &str, m: Array2<T>, v: Array2<T>) -> Result<()> {
        match (self.m.get_mut(name), self.v.get_mut(name)) {
            (Some(mm), Some(vv)) if mm.dim() == m.dim() && vv.dim() == v.dim() => {
                *mm = m;
                *vv = v;
                Ok(())
            }
            _ => Err(config_err(format!("no matching moments for `{name}`"))),
        }
    }
}

/// One bias-corrected Adam update from the gradients in `params`, which are
/// zeroed afterwards. Fails before touching anything if a gradient is not
/// finite.
pub fn adam_step<T: Scalar>(params: &mut ParamStore<T>, opt: &mut OptimizerState<T>) -> Result<()> {
    params.check_finite_grads()?;
    opt.step += 1;
    let c = opt.config;
    let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
    let (one, lr, eps) = (T::one(), T::lit(c.lr), T::lit(c.eps));
    let t = opt.step as i32;
    let bc1 = one - b1.powi(t);
    let bc2 = one - b2.powi(t);
    for (name, p) in params.params_mut() {
        let m = opt
            .m
            .get_mut(name)
            .ok_or_else(|| config_err(format!("optimizer has no state for `{name}`")))?;
        let v = opt.v.get_mut(name).expect("m and v share keys");
        ndarray::Zip::from(m).and(v).and(p.grad()).for_each(|m, v, &g| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
        });
        let (m, v) = (&opt.m[name], &opt.v[name]);
        let (value, grad) = p.split_mut();
        ndarray::Zip::from(value).and(m).and(v).for_each(|x, &m, &v| {
            let mh = m / bc1;
            let vh = v / bc2;
            *x -= lr * mh / (vh.sqrt() + eps);
        });
        grad.fill(T::zero());
    }
    Ok(())
}
