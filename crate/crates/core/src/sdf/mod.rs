//! Neural signed-distance model: positional encoding, the weight-normalized MLP,
//! clamped L1 training with Adam, and checkpoints.

mod checkpoint;
mod encoding;
mod field;
mod loss;
mod model;
mod train;

pub use checkpoint::{
    load_checkpoint, metadata_path, quantize, read_model, save_checkpoint, write_model, CheckpointMetadata,
    CHECKPOINT_MAGIC,
};
pub use encoding::{positional_encode, EncodingConfig};
pub use field::SdfField;
pub use loss::{clamped_l1_loss, LossConfig};
pub use model::{Architecture, Gradients, Layer, SdfModel, CHUNK_ROWS, MIN_ROW_NORM, OUTPUT_GAIN_SCALE};
pub use train::{mix_seed, train, train_model, TrainConfig, TrainOutcome};
