use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("image dimension {dim} is smaller than the patch size {patch}")]
pub struct ImageTooSmall {
    pub dim: usize,
    pub patch: usize,
}

/// Patch origins along one axis: `0, stride, 2 stride, ...` plus a final
/// origin at `dim - patch` when the regular grid does not reach the border.
pub fn grid_axis(dim: usize, patch: usize, stride: usize) -> Result<Vec<usize>, ImageTooSmall> {
    assert!(patch > 0 && stride > 0, "patch and stride must be positive");
    if dim < patch {
        return Err(ImageTooSmall { dim, patch });
    }
    let last = dim - patch;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if *out.last().expect("0 is always an origin") != last {
        out.push(last);
    }
    Ok(out)
}

/// Row-major patch origins `(x, y)` covering a `width` x `height` image.
pub fn extract_patch_grid(
    width: usize,
    height: usize,
    patch: usize,
    stride: usize,
) -> Result<Vec<(usize, usize)>, ImageTooSmall> {
    let xs = grid_axis(width, patch, stride)?;
    let ys = grid_axis(height, patch, stride)?;
    Ok(ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect())
}
