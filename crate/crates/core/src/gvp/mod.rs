//! The multi-scale network: geometric vector perceptrons over residue and
//! surface graphs, the output head, and reverse-mode gradients.

mod checkpoint;
mod config;
pub mod layers;
mod model;
mod params;
pub mod tape;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, CHECKPOINT_MAGIC};
pub use config::{EmbedderSpec, Mode, ModelConfig};
pub use model::{
    fuse_residue_surface, gvp_apply, masked_tokens, EmbeddingInput, ForwardInput, ForwardTrace, GvpState, Model,
    SurfaceInputs, N_CLASSES, TOY_WINDOW,
};
pub use params::{gvp_hidden, init_params, Params, HEAD_INIT};
pub use tensor::{gemm, matmul, Tensor};
