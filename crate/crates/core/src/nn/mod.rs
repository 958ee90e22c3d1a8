//! Learned estimators: layers with hand-written gradients, the FC, LSTM and
//! Conv1D strain encoders, output heads, losses, Adam and the training loop.

mod adam;
mod gemm;
pub mod layers;
pub mod loss;
mod lstm;
mod model;
mod network;
mod tensor;
mod train;

pub use adam::{Adam, AdamConfig};
pub use layers::{sigmoid, Conv1d, Dense, Heads, Layer, MaxPool1d, Relu, Sigmoid};
pub use loss::{force_loss, joint_loss, mse, shape_loss, LossParts};
pub use lstm::{Lstm, LstmCache};
pub use model::{infer, rescale_labels, ModelParams, Prediction, MODEL_MAGIC, MODEL_VERSION};
pub use network::{encoder_ops, EncoderKind, Network, Op, OpCache, CONV_CHANNELS, FC_HIDDEN, LSTM_HIDDEN, LSTM_LAYERS};
pub use tensor::Tensor;
pub use train::{train, train_with, EpochStats, LrSchedule, TrainConfig, TrainHistory};
