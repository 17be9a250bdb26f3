//! Euclidean feature transforms for prototype classifiers: l2
//! normalization, random projection, PCA and LDA, plus the streaming
//! moment accumulator PCA and LDA are fitted from.

mod lda;
mod normalize;
mod pca;
mod random;
mod stats;

pub use lda::{default_ridge, lda_apply, lda_fit, scatter_matrices, LdaModel};
pub use normalize::l2_normalize;
pub use pca::{pca_apply, pca_fit, PcaModel};
pub use random::{apply_random_projection, init_random_projection, RandomProj};
pub use stats::{update_stats, ClassStats, StreamStats};
