//! Homography estimation from dominant-motion flow and reference-frame warping.

mod homography;
mod ransac;
mod warp;

pub use homography::{fit_dlt, Homography};
pub use ransac::{
    dominant_correspondences, fit_homography_points, fit_homography_ransac, AlignError, HomographyFit,
    RansacParams,
};
pub use warp::warp;
