use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::approximator::params::ParamStore;
use crate::approximator::tape::{Activation, Tape, Var};
use crate::error::{config_err, Result};
use crate::scalar::Scalar;

/// Layer widths including the input width, e.g. `[13, 64, 5]` is one hidden
/// layer of 64 units between a 13-wide input and 5 outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, hidden: Activation, output: Activation) -> Result<Self> {
        let spec = Self {
            widths,
            hidden,
            output,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(config_err("an MLP needs an input width and at least one layer"));
        }
        if self.widths.contains(&0) {
            return Err(config_err(format!("MLP widths must be positive: {:?}", self.widths)));
        }
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    pub fn weight_name(prefix: &str, layer: usize) -> String {
        format!("{prefix}.l{layer}.weight")
    }

    pub fn bias_name(prefix: &str, layer: usize) -> String {
        format!("{prefix}.l{layer}.bias")
    }

    /// Registers Glorot weights and zero biases under `prefix`.
    pub fn init_params<T: Scalar, R: Rng>(
        &self,
        store: &mut ParamStore<T>,
        prefix: &str,
        rng: &mut R,
    ) -> Result<()> {
        self.validate()?;
        for l in 0..self.n_layers() {
            let (i, o) = (self.widths[l], self.widths[l + 1]);
            store.insert_glorot(Self::weight_name(prefix, l), i, o, rng)?;
            store.insert_zeros(Self::bias_name(prefix, l), 1, o)?;
        }
        Ok(())
    }
}

/// Records an MLP forward pass on `tape`. Rows of `input` are samples.
pub fn mlp_forward<T: Scalar>(
    tape: &mut Tape<T>,
    spec: &MlpSpec,
    store: &ParamStore<T>,
    prefix: &str,
    input: Var,
) -> Result<Var> {
    let cols = tape.value(input).ncols();
    if cols != spec.input_width() {
        return Err(config_err(format!(
            "MLP `{prefix}` expects {} input columns, got {cols}",
            spec.input_width()
        )));
    }
    let mut h = input;
    for l in 0..spec.n_layers() {
        let w = tape.param(store, &MlpSpec::weight_name(prefix, l));
        let b = tape.param(store, &MlpSpec::bias_name(prefix, l));
        let z = tape.matmul(h, w);
        let z = tape.add_bias(z, b);
        let act = if l + 1 == spec.n_layers() {
            spec.output
        } else {
            spec.hidden
        };
        h = tape.activate(z, act);
    }
    Ok(h)
}

/// Forward pass without keeping the tape around.
pub fn mlp_eval<T: Scalar>(
    spec: &MlpSpec,
    store: &ParamStore<T>,
    prefix: &str,
    input: Array2<T>,
) -> Result<Array2<T>> {
    let mut tape = Tape::new();
    let x = tape.leaf(input);
    let y = mlp_forward(&mut tape, spec, store, prefix, x)?;
    Ok(tape.value(y).clone())
}
