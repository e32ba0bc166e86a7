//! A small feed-forward network whose prunable-layer units are the players
//! of an accuracy game.

mod data;
mod fixtures;
mod flat;
mod game;
mod model;
mod train;

pub use data::{gaussian_blobs, load_csv, load_idx, write_csv, LabeledDataset};
pub use fixtures::{
    append_dummy_unit, duplicate_unit, redundancy_network, toy_fixture, TOY_DUMMY_PLAYER,
};
pub use flat::{from_flat_bytes, load_model, save_model_flat, save_model_json, to_flat_bytes};
pub use game::{accuracy_char_fn, AccuracyFn};
pub use model::{Activation, Affine, Layer, ModelSpec, Norm, Tensor};
pub use train::{accuracy, train_toy_model, TrainConfig, MAX_TRAIN_LAYERS, MAX_TRAIN_UNITS};
