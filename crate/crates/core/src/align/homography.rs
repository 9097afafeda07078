use nalgebra::{Matrix3, SMatrix, SymmetricEigen, Vector3};

/// Projective map from source pixel coordinates to reference coordinates,
/// scaled so the bottom-right entry is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

const MIN_DET: f64 = 1e-10;

impl Homography {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self(Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0))
    }

    /// Normalizes and validates a raw matrix. `None` if it is singular or the
    /// bottom-right entry vanishes.
    pub fn from_matrix(m: Matrix3<f64>) -> Option<Self> {
        let s = m[(2, 2)];
        if !s.is_finite() || s.abs() < 1e-12 {
            return None;
        }
        let m = m / s;
        if !m.iter().all(|v| v.is_finite()) || m.determinant().abs() <= MIN_DET {
            return None;
        }
        Some(Self(m))
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Option<Self> {
        Self::from_matrix(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|r| std::array::from_fn(|c| self.0[(r, c)]))
    }

    pub fn inverse(&self) -> Option<Self> {
        self.0.try_inverse().and_then(Self::from_matrix)
    }

    pub fn compose(&self, first: &Homography) -> Option<Self> {
        Self::from_matrix(self.0 * first.0)
    }

    #[inline]
    pub fn apply(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        let v = self.0 * Vector3::new(p[0], p[1], 1.0);
        if v[2].abs() < 1e-12 {
            return None;
        }
        Some([v[0] / v[2], v[1] / v[2]])
    }

    /// Largest distance between where `self` and `other` send the four image
    /// corners.
    pub fn corner_error(&self, other: &Homography, width: usize, height: usize) -> f64 {
        let (w, h) = ((width - 1) as f64, (height - 1) as f64);
        [[0.0, 0.0], [w, 0.0], [0.0, h], [w, h]]
            .iter()
            .map(|c| match (self.apply(*c), other.apply(*c)) {
                (Some(a), Some(b)) => (a[0] - b[0]).hypot(a[1] - b[1]),
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }
}

/// Similarity transform taking points to zero mean and mean radius sqrt(2).
fn normalizer(points: &[[f64; 2]]) -> Matrix3<f64> {
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
    let (mx, my) = (mx / n, my / n);
    let mean_r = points.iter().map(|p| (p[0] - mx).hypot(p[1] - my)).sum::<f64>() / n;
    let s = if mean_r > 1e-12 {
        std::f64::consts::SQRT_2 / mean_r
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0)
}

/// Normalized direct linear transform over at least four correspondences.
pub fn fit_dlt(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Option<Homography> {
    debug_assert_eq!(src.len(), dst.len());
    if src.len() < 4 {
        return None;
    }
    let ts = normalizer(src);
    let td = normalizer(dst);
    let mut ata = SMatrix::<f64, 9, 9>::zeros();
    for (p, q) in src.iter().zip(dst) {
        let a = ts * Vector3::new(p[0], p[1], 1.0);
        let b = td * Vector3::new(q[0], q[1], 1.0);
        let (x, y) = (a[0], a[1]);
        let (u, v) = (b[0], b[1]);
        let r1 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r2 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for row in [r1, r2] {
            for i in 0..9 {
                for j in i..9 {
                    ata[(i, j)] += row[i] * row[j];
                }
            }
        }
    }
    for i in 0..9 {
        for j in 0..i {
            ata[(i, j)] = ata[(j, i)];
        }
    }
    let eig = SymmetricEigen::new(ata);
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let h = eig.eigenvectors.column(k);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let m = td.try_inverse()? * hn * ts;
    Homography::from_matrix(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_translation_apply() {
        assert_eq!(Homography::identity().apply([3.0, 4.0]), Some([3.0, 4.0]));
        assert_eq!(
            Homography::translation(5.0, -2.0).apply([1.0, 1.0]),
            Some([6.0, -1.0])
        );
    }

    #[test]
    fn singular_rejected() {
        assert!(Homography::from_rows([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1.0]]).is_none());
    }

    #[test]
    fn dlt_recovers_exact_projective() {
        let h = Homography::from_rows([[1.02, 0.03, 4.0], [-0.02, 0.98, -3.0], [1e-4, -5e-5, 1.0]]).unwrap();
        let src: Vec<[f64; 2]> = (0..20)
            .map(|i| [(i * 37 % 200) as f64, (i * 53 % 150) as f64])
            .collect();
        let dst: Vec<[f64; 2]> = src.iter().map(|p| h.apply(*p).unwrap()).collect();
        let fit = fit_dlt(&src, &dst).unwrap();
        assert!(fit.corner_error(&h, 200, 150) < 1e-6);
    }

    #[test]
    fn inverse_round_trip() {
        let h = Homography::from_rows([[1.1, 0.0, 3.0], [0.1, 0.9, 1.0], [0.0, 1e-4, 1.0]]).unwrap();
        let back = h.inverse().unwrap().compose(&h).unwrap();
        assert!(back.corner_error(&Homography::identity(), 100, 100) < 1e-9);
    }
}
