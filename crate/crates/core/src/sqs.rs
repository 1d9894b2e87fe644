//! Ordered-subsets separable-quadratic-surrogate sweeps.
//!
//! One sweep runs the M sub-iterations
//! x ← x − M·Aᵀ_m w_m (A_m x − b_m) / d with d = Aᵀ w A 1,
//! processing subsets in partition order. Voxels with d = 0 lie outside the
//! measured field of view and are left untouched. With M = 1 this is the
//! plain SQS step, which descends the weighted data cost monotonically.

use crate::error::{invalid, Error, Result};
use crate::image::{GridSpec, Image};
use crate::projector::{back_project_views, sqs_denominator, subset_residual, SubsetPartition};
use crate::sinogram::Sinogram;

/// Solver state for OS-SQS passes over one sinogram.
#[derive(Debug, Clone)]
pub struct OsSqsState {
    pub x: Image,
    /// d = Aᵀ w A 1, computed once for the geometry and weights.
    pub denom: Image,
    pub partition: SubsetPartition,
    /// Present iff Nesterov acceleration is enabled (previous iterate and
    /// momentum coefficient).
    pub momentum: Option<(Image, f64)>,
}

impl OsSqsState {
    /// Builds the state for `sino`, computing the denominator from the
    /// sinogram's weights (all-ones when absent).
    pub fn new(x0: Image, sino: &Sinogram, m_subsets: usize) -> Result<OsSqsState> {
        let partition = crate::projector::partition_subsets(sino.n_views(), m_subsets)?;
        let weights = sino.weights_or_ones();
        let denom = sqs_denominator(
            &sino.geometry,
            sino.n_slices(),
            x0.grid(),
            &weights,
        )?;
        Ok(OsSqsState {
            x: x0,
            denom,
            partition,
            momentum: None,
        })
    }
}

/// One full OS-SQS pass (all M subsets) starting from `state.x`; returns the
/// updated image without touching the state.
pub fn os_sqs_sweep(state: &OsSqsState, sino: &Sinogram) -> Result<Image> {
    if !state.x.same_grid(&state.denom) {
        return Err(invalid("iterate and denominator grids differ"));
    }
    if state.partition.n_views() != sino.n_views() {
        return Err(invalid(format!(
            "partition covers {} views but sinogram has {}",
            state.partition.n_views(),
            sino.n_views()
        )));
    }
    let m = state.partition.m() as f64;
    let mut x = state.x.clone();
    for (mi, views) in state.partition.subsets.iter().enumerate() {
        let (mut resid, weights) = subset_residual(&x, sino, views)?;
        for (r, w) in resid.iter_mut().zip(&weights) {
            *r *= w;
        }
        let grad = back_project_views(&resid, &sino.geometry, views, sino.n_slices(), x.grid())?;
        let mut max_resid = 0.0f64;
        for ((xv, g), d) in x
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(state.denom.data())
        {
            if *d > 0.0 {
                *xv -= m * g / d;
            }
            max_resid = max_resid.max(g.abs());
        }
        if x.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite iterate after subset {mi} (max |gradient| {max_resid:.3e})"
            )));
        }
    }
    Ok(x)
}

/// Convenience wrapper: builds the state and runs `n_sweeps` passes.
pub fn os_sqs_reconstruct(
    x0: Image,
    sino: &Sinogram,
    m_subsets: usize,
    n_sweeps: usize,
) -> Result<Image> {
    let mut state = OsSqsState::new(x0, sino, m_subsets)?;
    for _ in 0..n_sweeps {
        state.x = os_sqs_sweep(&state, sino)?;
    }
    Ok(state.x)
}

/// Grid accessor shared by the solvers.
pub fn grid_of(sino: &Sinogram, n: usize, spacing: f64) -> GridSpec {
    GridSpec::centered(n, n, sino.n_slices(), [spacing, spacing, spacing])
}
