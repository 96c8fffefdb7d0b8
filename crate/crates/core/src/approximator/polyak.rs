use crate::approximator::params::ParamStore;
use crate::error::{config_err, Result};
use crate::scalar::Scalar;

/// `target <- tau * online + (1 - tau) * target`, element-wise.
pub fn polyak_update<T: Scalar>(target: &mut ParamStore<T>, online: &ParamStore<T>, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(config_err(format!("polyak rate {tau} outside [0, 1]")));
    }
    target.check_same_layout(online)?;
    let t = T::lit(tau);
    let keep = T::one() - t;
    for (name, p) in online.iter() {
        let dst = target
            .value_mut(name)
            .ok_or_else(|| config_err(format!("target lacks `{name}`")))?;
        if tau == 1.0 {
            dst.assign(p.value());
        } else if tau != 0.0 {
            ndarray::Zip::from(dst)
                .and(p.value())
                .for_each(|d, &o| *d = t * o + keep * *d);
        }
    }
    Ok(())
}
