//! Discrete distributions on finite supports and squared-Euclidean ground costs.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Tolerance every constructed distribution is normalized to.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Finite set of `n` distinct points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportGrid {
    coords: Vec<f64>,
    dim: usize,
    /// `(rows, cols)` when the points are the integer lattice of an image, in row-major order.
    shape: Option<(usize, usize)>,
    spacing: f64,
}

impl SupportGrid {
    pub fn new(points: &[Vec<f64>]) -> Result<Self> {
        let first = points.first().ok_or(Error::Empty)?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("points must have dimension >= 1".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("non-finite coordinate".into()));
            }
            coords.extend_from_slice(p);
        }
        let grid = SupportGrid {
            coords,
            dim,
            shape: None,
            spacing: 0.0,
        };
        for i in 0..grid.len() {
            for j in 0..i {
                if grid.point(i) == grid.point(j) {
                    return Err(Error::InvalidParameter(format!(
                        "support points {j} and {i} coincide"
                    )));
                }
            }
        }
        Ok(grid)
    }

    /// `n` equally spaced points on `[lo, hi]`.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        if n > 1 && !(hi > lo) {
            return Err(Error::InvalidParameter(format!(
                "interval [{lo}, {hi}] is empty"
            )));
        }
        let coords = if n == 1 {
            vec![lo]
        } else {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| lo + step * i as f64).collect()
        };
        Ok(SupportGrid {
            coords,
            dim: 1,
            shape: None,
            spacing: 0.0,
        })
    }

    /// Integer pixel coordinates `(row, col)` of a `rows x cols` image, row-major.
    pub fn lattice(rows: usize, cols: usize) -> Result<Self> {
        Self::lattice_spaced(rows, cols, 1.0)
    }

    /// Pixel centers `spacing * (row, col)`, row-major.
    pub fn lattice_spaced(rows: usize, cols: usize, spacing: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty);
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::NonPositiveParameter("spacing"));
        }
        let mut coords = Vec::with_capacity(2 * rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                coords.push(r as f64 * spacing);
                coords.push(c as f64 * spacing);
            }
        }
        Ok(SupportGrid {
            coords,
            dim: 2,
            shape: Some((rows, cols)),
            spacing,
        })
    }

    /// Lattice covering the unit square, corner pixels at the corners.
    pub fn unit_square(rows: usize, cols: usize) -> Result<Self> {
        let span = rows.max(cols).saturating_sub(1).max(1);
        Self::lattice_spaced(rows, cols, 1.0 / span as f64)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn lattice_shape(&self) -> Option<(usize, usize)> {
        self.shape
    }

    /// Distance between neighboring lattice points, `None` off a lattice.
    pub fn lattice_spacing(&self) -> Option<f64> {
        self.shape.map(|_| self.spacing)
    }
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates against [`SIMPLEX_TOL`].
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        validate_simplex(weights, SIMPLEX_TOL)
    }

    /// Normalizes nonnegative masses to sum one.
    pub fn from_masses(mut masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::Empty);
        }
        if let Some((index, &value)) = masses
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
        {
            return Err(Error::NegativeWeight { index, value });
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NotNormalized { sum: total });
        }
        masses.iter_mut().for_each(|w| *w /= total);
        Ok(DiscreteDistribution { weights: masses })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_masses(vec![1.0; n])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `-sum p log p` with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -self
            .weights
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|&w| w * w.ln())
            .sum::<f64>()
    }

    /// Half the 1-norm distance.
    pub fn total_variation(&self, other: &DiscreteDistribution) -> f64 {
        total_variation(&self.weights, &other.weights)
    }
}

impl AsRef<[f64]> for DiscreteDistribution {
    fn as_ref(&self) -> &[f64] {
        &self.weights
    }
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Checks simplex membership without modifying the weights.
pub fn validate_simplex(v: Vec<f64>, tol: f64) -> Result<DiscreteDistribution> {
    if v.is_empty() {
        return Err(Error::Empty);
    }
    for (index, &value) in v.iter().enumerate() {
        if value.is_nan() || value < -tol {
            return Err(Error::NegativeWeight { index, value });
        }
    }
    let sum: f64 = v.iter().sum();
    if !((sum - 1.0).abs() <= tol) {
        return Err(Error::NotNormalized { sum });
    }
    Ok(DiscreteDistribution { weights: v })
}

/// Pointwise Gaussian density on a 1-D grid, renormalized.
pub fn discretize_truncated_gaussian(
    mu: f64,
    sigma: f64,
    grid: &SupportGrid,
) -> Result<DiscreteDistribution> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::NonPositiveParameter("sigma"));
    }
    if grid.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: grid.dim(),
        });
    }
    let masses: Vec<f64> = (0..grid.len())
        .map(|i| {
            let z = (grid.point(i)[0] - mu) / sigma;
            (-0.5 * z * z).exp()
        })
        .collect();
    if masses.iter().all(|&w| w == 0.0) {
        return Err(Error::DegenerateDensity);
    }
    DiscreteDistribution::from_masses(masses)
}

/// Pixel intensities normalized to unit mass on the image's integer lattice.
pub fn image_to_distribution(pixels: &Array2<f64>) -> Result<(DiscreteDistribution, SupportGrid)> {
    let (rows, cols) = pixels.dim();
    if pixels.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("pixel values must be finite and >= 0".into()));
    }
    if !pixels.iter().any(|&v| v > 0.0) {
        return Err(Error::AllZeroImage);
    }
    let masses: Vec<f64> = pixels.iter().copied().collect();
    let dist = DiscreteDistribution::from_masses(masses)?;
    Ok((dist, SupportGrid::lattice(rows, cols)?))
}

/// Symmetric nonnegative ground cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Array2<f64>,
}

impl CostMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, got: c });
        }
        if r == 0 {
            return Err(Error::Empty);
        }
        for i in 0..r {
            for j in 0..=i {
                let a = entries[[i, j]];
                if !(a >= 0.0) || !a.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "cost entry ({i}, {j}) = {a} is not a finite nonnegative number"
                    )));
                }
                if a != entries[[j, i]] {
                    return Err(Error::InvalidParameter(format!(
                        "cost matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(CostMatrix { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }
}

/// `M_ij = |x_i - x_j|^2`.
pub fn euclidean_cost_matrix(grid: &SupportGrid) -> CostMatrix {
    let n = grid.len();
    let mut entries = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..i {
            let d2: f64 = grid
                .point(i)
                .iter()
                .zip(grid.point(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            entries[[i, j]] = d2;
            entries[[j, i]] = d2;
        }
    }
    CostMatrix { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn simplex_validation() {
        assert!(validate_simplex(vec![0.5, 0.5], 1e-12).is_ok());
        assert!(matches!(
            validate_simplex(vec![0.3, 0.3], 1e-12),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            validate_simplex(vec![-0.1, 1.1], 1e-12),
            Err(Error::NegativeWeight { index: 0, .. })
        ));
        assert!(matches!(validate_simplex(vec![], 1e-12), Err(Error::Empty)));
    }

    #[test]
    fn gaussian_symmetric_on_symmetric_grid() {
        let grid = SupportGrid::linspace(-5.0, 5.0, 100).unwrap();
        let p = discretize_truncated_gaussian(0.0, 1.0, &grid).unwrap();
        let w = p.weights();
        for i in 0..100 {
            assert!((w[i] - w[99 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_peak_at_edge() {
        let grid = SupportGrid::linspace(-5.0, 5.0, 100).unwrap();
        let p = discretize_truncated_gaussian(5.0, 0.1, &grid).unwrap();
        let argmax = p
            .weights()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 99);
    }

    #[test]
    fn gaussian_three_points() {
        let grid = SupportGrid::new(&[vec![-1.0], vec![0.0], vec![1.0]]).unwrap();
        let p = discretize_truncated_gaussian(0.0, 0.5, &grid).unwrap();
        let e = (-2.0f64).exp();
        let z = 1.0 + 2.0 * e;
        let expect = [e / z, 1.0 / z, e / z];
        for (a, b) in p.weights().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_underflow_and_bad_sigma() {
        let grid = SupportGrid::linspace(-5.0, 5.0, 10).unwrap();
        assert!(matches!(
            discretize_truncated_gaussian(1e3, 0.1, &grid),
            Err(Error::DegenerateDensity)
        ));
        assert!(discretize_truncated_gaussian(0.0, 0.0, &grid).is_err());
        let g2 = SupportGrid::lattice(2, 2).unwrap();
        assert!(discretize_truncated_gaussian(0.0, 1.0, &g2).is_err());
    }

    #[test]
    fn images() {
        let (p, grid) = image_to_distribution(&Array2::ones((2, 2))).unwrap();
        assert_eq!(p.weights(), &[0.25; 4]);
        assert_eq!(grid.point(3), &[1.0, 1.0]);

        let img = ndarray::arr2(&[[0.0, 0.0], [0.0, 5.0]]);
        let (p, grid) = image_to_distribution(&img).unwrap();
        assert_eq!(p.weights(), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(grid.point(3), &[1.0, 1.0]);

        assert!(matches!(
            image_to_distribution(&Array2::zeros((3, 3))),
            Err(Error::AllZeroImage)
        ));

        let (_, grid) = image_to_distribution(&Array2::ones((56, 56))).unwrap();
        assert_eq!(grid.len(), 3136);
        assert_eq!(grid.lattice_shape(), Some((56, 56)));
    }

    #[test]
    fn cost_examples() {
        let grid = SupportGrid::new(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let m = euclidean_cost_matrix(&grid);
        assert_eq!(m.entries()[[0, 2]], 4.0);
        assert_eq!(m.entries()[[0, 1]], 1.0);
        let grid = SupportGrid::new(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(euclidean_cost_matrix(&grid).entries()[[0, 1]], 25.0);
    }

    #[test]
    fn duplicate_points_rejected() {
        assert!(SupportGrid::new(&[vec![1.0], vec![1.0]]).is_err());
    }

    proptest! {
        #[test]
        fn gaussian_reflection(mu in -5.0f64..5.0, sigma in 0.1f64..2.0) {
            let grid = SupportGrid::linspace(-5.0, 5.0, 41).unwrap();
            let p = discretize_truncated_gaussian(mu, sigma, &grid).unwrap();
            let q = discretize_truncated_gaussian(-mu, sigma, &grid).unwrap();
            prop_assert!(validate_simplex(p.weights().to_vec(), 1e-12).is_ok());
            for i in 0..41 {
                prop_assert!((p.weights()[i] - q.weights()[40 - i]).abs() < 1e-12);
            }
        }

        #[test]
        fn cost_is_a_squared_metric(
            pts in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 2), 3..8),
        ) {
            let Ok(grid) = SupportGrid::new(&pts) else { return Ok(()) };
            let m = euclidean_cost_matrix(&grid);
            let e = m.entries();
            let n = grid.len();
            for i in 0..n {
                prop_assert_eq!(e[[i, i]], 0.0);
                for j in 0..n {
                    prop_assert_eq!(e[[i, j]], e[[j, i]]);
                    for k in 0..n {
                        prop_assert!(e[[i, j]].sqrt() <= e[[i, k]].sqrt() + e[[k, j]].sqrt() + 1e-9);
                    }
                }
            }
        }
    }
}
