//! Manually differentiated layer set: GRU, 1-D convolution, global max
//! pooling, dense, dropout.

pub mod conv;
pub mod dense;
pub mod dropout;
pub mod gru;
pub mod pool;

pub use conv::{conv1d_backward, conv1d_forward, Conv1dCache, Conv1dLayer};
pub use dense::{dense_backward, dense_forward, DenseLayer};
pub use dropout::dropout_mask;
pub use gru::{gru_backward, gru_forward, GruCache, GruCell, GruGrads};
pub use pool::{global_max_pool, global_max_pool_backward};
