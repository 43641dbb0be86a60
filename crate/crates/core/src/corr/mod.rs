//! Intent/snippet correspondence model.

pub mod checkpoint;
pub mod model;
pub mod score;
pub mod tensor;
pub mod tokenize;
pub mod train;
pub mod vocab;

pub use model::{CellKind, Direction, EncDecModel, ModelDims, Params};
pub use score::{score_page, CorrRecord, CorrespondenceScores};
pub use tokenize::{tokenize, tokenize_code, tokenize_nl, TokenMode};
pub use train::{prepare_pairs, split_sizes, train, train_full, TokenPair, TrainConfig, TrainReport, Trained};
pub use vocab::Vocabulary;
