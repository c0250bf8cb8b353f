//! Masked-residue pre-training: corruption policy, optimizer, epoch loop,
//! corpus loading and checkpoints.

mod corpus;
mod masking;
mod optim;
mod trainer;

pub use corpus::{
    checkpoint_path, load_corpus, loss_log_csv, parse_loss_log, pretrain, PretrainOptions, PretrainOutput,
    CLOUD_EXTENSION, EMBEDDING_EXTENSION,
};
pub use masking::{apply_mask, MaskAction, MaskDraw, MaskingPolicy};
pub use optim::{clip_grad_norm, grad_norm, Optimizer, OptimizerConfig, OptimizerKind};
pub use trainer::{check_items, epoch_order, evaluate, item_rng, EpochStats, StepStats, TrainConfig, TrainItem, Trainer};
