pub mod encoder;
pub mod gradcheck;
pub mod loss;
pub mod params;
pub mod train;

pub use encoder::{backward, embed, encode, Forward};
pub use gradcheck::{grad_check, relative_error, sample_coordinates, GradCheckReport};
pub use loss::{
    clr_loss, cosine_sim, head_loss, mlm_loss, ntmlm_loss, total_loss, ClrLoss, ClrVariant,
    ContrastBatch, Head, HeadLoss, LossReport,
};
pub use params::{Checkpoint, LayerParams, ModelConfig, Params, TensorInfo};
pub use train::{
    batch_loss, embed_triplet, is_heldout, perplexity, split_heldout, train_loop, train_params,
    triplet_eval, Adam, Curves, EpochStats, Example, TrainConfig, Variant,
};
