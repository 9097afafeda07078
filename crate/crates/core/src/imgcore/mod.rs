//! Image containers, gamma/linear conversion, mu-law tonemapping and PSNR.

mod image;
pub mod io;
mod metrics;

pub use self::image::{
    ExposureStack, HdrImage, ImageError, LdrImage, Mask, Plane, Raster, StackError, CHANNELS, LONG,
    REFERENCE, SHORT,
};
pub use self::metrics::{
    linearize, mse, mu_law, psnr, psnr_from_mse, psnr_mu, tonemap_mu, MetricConfig, MetricError,
};
