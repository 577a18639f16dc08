//! Block-sparse tensors with a U(1) charge symmetry.
//!
//! Each leg is split into charge sectors and carries a direction. A block
//! keyed by one charge per leg may be nonzero only when the signed sum of its
//! charges equals the tensor's total charge. Contractions, fusions and
//! factorizations act block by block and preserve this rule.

mod contract;
mod decomp;
mod dense;
mod error;
mod fuse;
pub mod io;
mod leg;
mod tensor;

pub use contract::{contract, contract_perm};
pub use decomp::{eigh, lq, pinv_hermitian, qr, truncated_svd, SvdResult, Truncation};
pub use error::{Result, TensorError};
pub use fuse::{fuse, fuse_with, split, FusedSlot, LegFusion};
pub use leg::{ChargeLeg, Direction};
pub use tensor::{Key, SymTensor};

pub type C64 = num_complex::Complex64;
