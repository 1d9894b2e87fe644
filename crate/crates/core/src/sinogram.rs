//! Line-integral data and view down-sampling.

use crate::error::{invalid, Result};
use crate::geom::{FanBeamGeometry, SamplingPattern};

/// Measured (or simulated) line integrals: `n_views × n_slices × n_det`
/// values with detector index fastest, plus optional per-ray statistical
/// weights of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub geometry: FanBeamGeometry,
    n_slices: usize,
    data: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl Sinogram {
    pub fn new(geometry: FanBeamGeometry, n_slices: usize, data: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if n_slices == 0 {
            return Err(invalid("sinogram must have >= 1 slice"));
        }
        let expect = geometry.n_views() * n_slices * geometry.n_det;
        if data.len() != expect {
            return Err(invalid(format!(
                "sinogram data length {} does not match views {} x slices {} x det {}",
                data.len(),
                geometry.n_views(),
                n_slices,
                geometry.n_det
            )));
        }
        Ok(Sinogram {
            geometry,
            n_slices,
            data,
            weights: None,
        })
    }

    pub fn zeros(geometry: FanBeamGeometry, n_slices: usize) -> Result<Self> {
        let n = geometry.n_views() * n_slices * geometry.n_det;
        Self::new(geometry, n_slices, vec![0.0; n])
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.data.len() {
            return Err(invalid("weights must have the same shape as the data"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("weights must be finite and >= 0"));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn n_views(&self) -> usize {
        self.geometry.n_views()
    }

    pub fn n_det(&self) -> usize {
        self.geometry.n_det
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    pub fn n_rays(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Weights as a dense vector, defaulting to all-ones.
    pub fn weights_or_ones(&self) -> Vec<f64> {
        match &self.weights {
            Some(w) => w.clone(),
            None => vec![1.0; self.data.len()],
        }
    }

    #[inline]
    pub fn index(&self, view: usize, slice: usize, det: usize) -> usize {
        (view * self.n_slices + slice) * self.geometry.n_det + det
    }

    #[inline]
    pub fn get(&self, view: usize, slice: usize, det: usize) -> f64 {
        self.data[self.index(view, slice, det)]
    }

    /// Contiguous detector row for one (view, slice).
    pub fn row(&self, view: usize, slice: usize) -> &[f64] {
        let start = self.index(view, slice, 0);
        &self.data[start..start + self.geometry.n_det]
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sinogram contains non-finite values"));
        }
        if let Some(w) = &self.weights {
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(invalid("sinogram weights must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Restrict a sinogram (data, geometry angles, weights) to the views selected
/// by the pattern.
pub fn apply_sampling(sino: &Sinogram, pattern: &SamplingPattern) -> Result<Sinogram> {
    if pattern.selected.len() != sino.n_views() {
        return Err(invalid(format!(
            "sampling mask length {} does not match {} views",
            pattern.selected.len(),
            sino.n_views()
        )));
    }
    let views = pattern.selected_indices();
    let geometry = sino.geometry.restrict_views(&views)?;
    let row_len = sino.n_slices * sino.geometry.n_det;
    let mut data = Vec::with_capacity(views.len() * row_len);
    for &v in &views {
        let start = v * row_len;
        data.extend_from_slice(&sino.data[start..start + row_len]);
    }
    let mut out = Sinogram::new(geometry, sino.n_slices, data)?;
    if let Some(w) = &sino.weights {
        let mut wsel = Vec::with_capacity(views.len() * row_len);
        for &v in &views {
            let start = v * row_len;
            wsel.extend_from_slice(&w[start..start + row_len]);
        }
        out = out.with_weights(wsel)?;
    }
    Ok(out)
}
