//! Acquisition geometry: flat-panel fan beam and view-sampling patterns.

use crate::error::{invalid, Result};

/// Flat equispaced-detector fan-beam geometry. Rays are confined to each
/// slice plane; multi-slice data is a stack of identical fan-beam slices
/// separated by `slice_spacing`.
///
/// At view angle β the source sits at `dso · (cos β, sin β)` and the detector
/// panel is centered at `(dso − dsd) · (cos β, sin β)`, oriented along the
/// tangential direction `(−sin β, cos β)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FanBeamGeometry {
    /// Source-to-isocenter distance (mm).
    pub dso: f64,
    /// Source-to-detector distance (mm).
    pub dsd: f64,
    /// Detector element spacing on the flat panel (mm).
    pub det_pitch: f64,
    /// Number of detector elements.
    pub n_det: usize,
    /// View angles in radians, strictly increasing within one rotation.
    pub angles: Vec<f64>,
    /// Slice separation for multi-slice stacks (mm).
    pub slice_spacing: f64,
}

impl FanBeamGeometry {
    pub fn new(
        dso: f64,
        dsd: f64,
        det_pitch: f64,
        n_det: usize,
        angles: Vec<f64>,
        slice_spacing: f64,
    ) -> Result<Self> {
        let g = FanBeamGeometry {
            dso,
            dsd,
            det_pitch,
            n_det,
            angles,
            slice_spacing,
        };
        g.validate()?;
        Ok(g)
    }

    /// Uniformly spaced views covering `arc` radians starting at angle 0.
    /// The views are at `k · arc / n_views` (endpoint excluded), the usual
    /// convention for a full rotation without a duplicated view.
    pub fn with_uniform_views(
        dso: f64,
        dsd: f64,
        det_pitch: f64,
        n_det: usize,
        n_views: usize,
        arc: f64,
        slice_spacing: f64,
    ) -> Result<Self> {
        if n_views == 0 {
            return Err(invalid("n_views must be >= 1"));
        }
        let angles = (0..n_views)
            .map(|k| k as f64 * arc / n_views as f64)
            .collect();
        Self::new(dso, dsd, det_pitch, n_det, angles, slice_spacing)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dsd > self.dso && self.dso > 0.0) {
            return Err(invalid("geometry requires dsd > dso > 0"));
        }
        if !(self.det_pitch > 0.0) {
            return Err(invalid("det_pitch must be > 0"));
        }
        if self.n_det == 0 {
            return Err(invalid("n_det must be >= 1"));
        }
        if self.angles.is_empty() {
            return Err(invalid("at least one view angle required"));
        }
        if self.angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("view angles must be strictly increasing"));
        }
        let span = self.angles[self.angles.len() - 1] - self.angles[0];
        if span >= 2.0 * std::f64::consts::PI + 1e-9 {
            return Err(invalid("view angles must lie within one rotation"));
        }
        if !(self.slice_spacing > 0.0) {
            return Err(invalid("slice_spacing must be > 0"));
        }
        Ok(())
    }

    pub fn n_views(&self) -> usize {
        self.angles.len()
    }

    /// Signed offset of detector element `k` from the panel center (mm).
    #[inline]
    pub fn det_offset(&self, k: usize) -> f64 {
        (k as f64 - 0.5 * (self.n_det as f64 - 1.0)) * self.det_pitch
    }

    /// Fan angle of detector element `k`: tan γ = u / dsd.
    #[inline]
    pub fn fan_angle(&self, k: usize) -> f64 {
        (self.det_offset(k) / self.dsd).atan()
    }

    /// Largest absolute fan angle on the panel.
    pub fn max_fan_angle(&self) -> f64 {
        self.fan_angle(0).abs().max(self.fan_angle(self.n_det - 1).abs())
    }

    /// Angular span covered by the views including one trailing view step.
    pub fn arc_span(&self) -> f64 {
        let n = self.angles.len();
        if n == 1 {
            return 0.0;
        }
        let step = (self.angles[n - 1] - self.angles[0]) / (n - 1) as f64;
        self.angles[n - 1] - self.angles[0] + step
    }

    /// Per-view integration weight Δβ (half the distance between the two
    /// neighbouring views; one-sided at the ends). Uniform sampling gives the
    /// uniform step back.
    pub fn view_deltas(&self) -> Vec<f64> {
        let n = self.angles.len();
        if n == 1 {
            return vec![2.0 * std::f64::consts::PI];
        }
        (0..n)
            .map(|i| {
                if i == 0 {
                    self.angles[1] - self.angles[0]
                } else if i == n - 1 {
                    self.angles[n - 1] - self.angles[n - 2]
                } else {
                    0.5 * (self.angles[i + 1] - self.angles[i - 1])
                }
            })
            .collect()
    }

    /// Geometry restricted to a subset of views (indices must be increasing).
    pub fn restrict_views(&self, views: &[usize]) -> Result<FanBeamGeometry> {
        if views.is_empty() {
            return Err(invalid("cannot restrict geometry to zero views"));
        }
        if views.iter().any(|&v| v >= self.angles.len()) {
            return Err(invalid("view index out of range"));
        }
        let angles = views.iter().map(|&v| self.angles[v]).collect();
        FanBeamGeometry::new(
            self.dso,
            self.dsd,
            self.det_pitch,
            self.n_det,
            angles,
            self.slice_spacing,
        )
    }
}

/// Which views of a full acquisition are kept.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingKind {
    Full,
    /// Every `factor`-th view starting at index 0.
    Sparse(usize),
    /// The contiguous prefix of views spanning the given arc in degrees.
    Limited(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPattern {
    pub kind: SamplingKind,
    pub selected: Vec<bool>,
}

impl SamplingPattern {
    pub fn full(n_views: usize) -> SamplingPattern {
        SamplingPattern {
            kind: SamplingKind::Full,
            selected: vec![true; n_views],
        }
    }

    pub fn sparse(n_views: usize, factor: usize) -> Result<SamplingPattern> {
        if factor == 0 {
            return Err(invalid("sparse factor must be >= 1"));
        }
        let selected: Vec<bool> = (0..n_views).map(|v| v % factor == 0).collect();
        if !selected.iter().any(|&s| s) {
            return Err(invalid("sampling pattern selects no views"));
        }
        Ok(SamplingPattern {
            kind: SamplingKind::Sparse(factor),
            selected,
        })
    }

    /// Views whose angle lies strictly within `arc_degrees` of the first view.
    pub fn limited(geom: &FanBeamGeometry, arc_degrees: f64) -> Result<SamplingPattern> {
        if !(arc_degrees > 0.0) {
            return Err(invalid("limited arc must be > 0 degrees"));
        }
        let arc = arc_degrees.to_radians();
        let a0 = geom.angles[0];
        let selected: Vec<bool> = geom.angles.iter().map(|&a| a - a0 < arc).collect();
        if !selected.iter().any(|&s| s) {
            return Err(invalid("sampling pattern selects no views"));
        }
        Ok(SamplingPattern {
            kind: SamplingKind::Limited(arc_degrees),
            selected,
        })
    }

    pub fn n_views(&self) -> usize {
        self.selected.len()
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        self.selected
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i))
            .collect()
    }
}
