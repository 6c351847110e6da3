//! Flow-augmented semantic segmentation.
//!
//! The crate is organised around the data path of a segmentation experiment:
//!
//! * [`flow`] holds the dense flow field type and its network-input encodings.
//! * [`io`] reads and writes `.flo` files, 16-bit PNG flow and segmentation masks.
//! * [`estimate`] is a pyramidal dense Lucas–Kanade estimator.
//! * [`datasets`] ingests Virtual KITTI / Cityscapes style trees and generates
//!   synthetic scenes with exact ground-truth flow.
//! * [`nn`] implements the four encoder/decoder architectures (RGB, flow,
//!   early fusion, two-stream) with their training loss.
//! * [`metrics`] accumulates confusion matrices and derives IoU, precision,
//!   recall and F-score.
//! * [`harness`] wires the pieces into training, evaluation, comparison and
//!   report generation driven by flat key-value configs.

pub mod datasets;
pub mod estimate;
pub mod flow;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod nn;

mod mask;

pub use flow::{EncodingKind, FlowEncoding, FlowField, NormStrategy};
pub use mask::SegMask;
