//! Dense optical flow, `.flo` interchange, magnitude histograms and the
//! global-motion gate.

mod field;
pub mod flo;
mod histogram;
mod lk;
mod viz;

pub use field::{median, FlowField};
pub use flo::{decode_flo, encode_flo, load_flo, write_flo, FloError};
pub use histogram::{is_globally_alignable, magnitude_histogram, FlowHistogram, NoValidPixels};
pub use lk::{equalize_exposure, estimate_flow, estimate_flow_planes, FlowError, FlowParams};
pub use viz::flow_to_rgb;
