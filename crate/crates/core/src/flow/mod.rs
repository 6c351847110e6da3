//! Dense flow fields and their network-input encodings.

mod encode;
mod field;
pub mod wheel;

pub use encode::{encode, EncodeError, EncodingKind, FlowEncoding, NormStrategy};
pub use field::{direction, magnitude, FlowField};
