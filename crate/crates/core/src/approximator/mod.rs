//! Differentiable-function core: reverse-mode tape, MLPs, Adam, Polyak
//! averaging and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod mlp;
pub mod params;
pub mod polyak;
pub mod tape;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest};
pub use mlp::{mlp_eval, mlp_forward, MlpSpec};
pub use params::{Param, ParamStore};
pub use polyak::polyak_update;
pub use tape::{Activation, Gradients, Tape, Var};
