//! Voxel images with physical spacing.
//!
//! An [`Image`] is a 2D or 3D grid of real values together with the physical
//! size of a voxel and the position of voxel (0,0,0) relative to the scanner
//! isocenter. The value unit is contextual: phantoms are generated in
//! Hounsfield units (HU), the projector and the iterative solvers operate on
//! linear attenuation μ (1/mm), and the network operates on HU/1000. The
//! conversions live here so every module shares one convention.

use crate::error::{invalid, Result};

/// Linear attenuation of water, 1/mm. HU = (μ/μ_water − 1) · 1000.
pub const MU_WATER: f64 = 0.02;

/// Grid placement shared by images: shape, voxel spacing (mm) and the
/// offset of voxel (0,0,0)'s center from the isocenter (mm).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub shape: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl GridSpec {
    /// Centered grid: voxel centers symmetric about the isocenter.
    pub fn centered(nx: usize, ny: usize, nz: usize, spacing: [f64; 3]) -> Self {
        let origin = [
            -0.5 * (nx as f64 - 1.0) * spacing[0],
            -0.5 * (ny as f64 - 1.0) * spacing[1],
            -0.5 * (nz as f64 - 1.0) * spacing[2],
        ];
        GridSpec {
            shape: [nx, ny, nz],
            spacing,
            origin,
        }
    }

    pub fn centered_2d(n: usize, spacing: f64) -> Self {
        Self::centered(n, n, 1, [spacing, spacing, spacing])
    }

    pub fn n_voxels(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    /// Physical center of voxel (i, j, k).
    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
            self.origin[2] + k as f64 * self.spacing[2],
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape.iter().any(|&d| d == 0) {
            return Err(invalid("grid dimensions must all be >= 1"));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(invalid("grid spacing must be positive and finite"));
        }
        Ok(())
    }
}

/// A voxel grid of real values; `data` is laid out x-fastest, then y, then z.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    grid: GridSpec,
    data: Vec<f64>,
}

impl Image {
    pub fn new(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if data.len() != grid.n_voxels() {
            return Err(invalid(format!(
                "data length {} does not match grid {:?}",
                data.len(),
                grid.shape
            )));
        }
        Ok(Image { grid, data })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.n_voxels();
        Image {
            grid,
            data: vec![0.0; n],
        }
    }

    pub fn full(grid: GridSpec, value: f64) -> Self {
        let n = grid.n_voxels();
        Image {
            grid,
            data: vec![value; n],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn shape(&self) -> [usize; 3] {
        self.grid.shape
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.grid.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.grid.origin
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.grid.shape;
        (k * ny + j) * nx + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    /// One z-slice as a contiguous sub-slice (nx·ny values).
    pub fn slice(&self, k: usize) -> &[f64] {
        let [nx, ny, _] = self.grid.shape;
        let n = nx * ny;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn same_grid(&self, other: &Image) -> bool {
        self.grid == other.grid
    }

    /// Type invariants: dimensions >= 1, positive spacing, finite data.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("image contains non-finite values"));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            grid: self.grid.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// self += scale * other (grids must match).
    pub fn axpy(&mut self, scale: f64, other: &Image) {
        debug_assert!(self.same_grid(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn dot(&self, other: &Image) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// HU -> linear attenuation: μ = (HU + 1000)/1000 · μ_water.
pub fn hu_to_mu(hu: f64) -> f64 {
    (hu + 1000.0) / 1000.0 * MU_WATER
}

/// Linear attenuation -> HU.
pub fn mu_to_hu(mu: f64) -> f64 {
    mu / MU_WATER * 1000.0 - 1000.0
}

/// HU -> the HU/1000 normalization the network is trained in.
pub fn hu_to_norm(hu: f64) -> f64 {
    hu / 1000.0
}

pub fn norm_to_hu(v: f64) -> f64 {
    v * 1000.0
}

/// μ -> HU/1000 (affine; air maps to −1, water to 0).
pub fn mu_to_norm(mu: f64) -> f64 {
    mu / MU_WATER - 1.0
}

pub fn norm_to_mu(v: f64) -> f64 {
    (v + 1.0) * MU_WATER
}

impl Image {
    pub fn hu_to_mu(&self) -> Image {
        self.map(hu_to_mu)
    }

    pub fn mu_to_hu(&self) -> Image {
        self.map(mu_to_hu)
    }

    pub fn mu_to_norm(&self) -> Image {
        self.map(mu_to_norm)
    }

    pub fn norm_to_mu(&self) -> Image {
        self.map(norm_to_mu)
    }

    pub fn hu_to_norm(&self) -> Image {
        self.map(hu_to_norm)
    }

    pub fn norm_to_hu(&self) -> Image {
        self.map(norm_to_hu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_grid_is_symmetric() {
        let g = GridSpec::centered_2d(4, 2.0);
        let c0 = g.voxel_center(0, 0, 0);
        let c3 = g.voxel_center(3, 3, 0);
        assert_eq!(c0[0], -c3[0]);
        assert_eq!(c0[1], -c3[1]);
    }

    #[test]
    fn hu_mu_round_trip() {
        for hu in [-1000.0, -61.6, 0.0, 840.0] {
            assert!((mu_to_hu(hu_to_mu(hu)) - hu).abs() < 1e-9);
        }
        assert_eq!(hu_to_mu(-1000.0), 0.0);
        assert!((hu_to_mu(0.0) - MU_WATER).abs() < 1e-15);
    }

    #[test]
    fn norm_is_hu_over_1000() {
        let mu = hu_to_mu(250.0);
        assert!((mu_to_norm(mu) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(GridSpec::centered(0, 4, 1, [1.0; 3]).validate().is_err());
        let mut g = GridSpec::centered_2d(4, 1.0);
        g.spacing[1] = 0.0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn validate_catches_non_finite() {
        let mut img = Image::zeros(GridSpec::centered_2d(4, 1.0));
        img.data_mut()[3] = f64::NAN;
        assert!(img.validate().is_err());
    }
}
