//! Exact ray-driven system matrix via Siddon traversal.
//!
//! The forward projector integrates voxel values along each source→detector
//! segment with exact intersection lengths; the backprojector scatters along
//! the same traversal, so the pair is an exact adjoint up to floating-point
//! summation order. The matrix is never materialized.
//!
//! Voxel intervals are half-open (a voxel owns its low edge), which makes
//! rays through voxel corners and edges well defined.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geom::FanBeamGeometry;
use crate::image::{GridSpec, Image};
use crate::sinogram::Sinogram;

/// One z-slice of the reconstruction grid as seen by the 2D traversal.
#[derive(Debug, Clone, Copy)]
struct Grid2 {
    nx: usize,
    ny: usize,
    sx: f64,
    sy: f64,
    /// Low edge of voxel column 0 / row 0.
    bx: f64,
    by: f64,
}

impl Grid2 {
    fn from_grid(grid: &GridSpec) -> Grid2 {
        Grid2 {
            nx: grid.shape[0],
            ny: grid.shape[1],
            sx: grid.spacing[0],
            sy: grid.spacing[1],
            bx: grid.origin[0] - 0.5 * grid.spacing[0],
            by: grid.origin[1] - 0.5 * grid.spacing[1],
        }
    }
}

/// Walks the segment p0→p1 through the grid, calling `emit(ix, iy, length)`
/// for every voxel the segment crosses with positive length.
fn traverse(p0: [f64; 2], p1: [f64; 2], g: &Grid2, emit: &mut impl FnMut(usize, usize, f64)) {
    let dx = p1[0] - p0[0];
    let dy = p1[1] - p0[1];
    let len = (dx * dx + dy * dy).sqrt();
    if len == 0.0 {
        return;
    }

    // Clip the parameter range to the grid box.
    let mut t_enter = 0.0_f64;
    let mut t_exit = 1.0_f64;
    let x_hi = g.bx + g.nx as f64 * g.sx;
    let y_hi = g.by + g.ny as f64 * g.sy;
    if dx != 0.0 {
        let ta = (g.bx - p0[0]) / dx;
        let tb = (x_hi - p0[0]) / dx;
        t_enter = t_enter.max(ta.min(tb));
        t_exit = t_exit.min(ta.max(tb));
    } else if p0[0] < g.bx || p0[0] >= x_hi {
        return;
    }
    if dy != 0.0 {
        let ta = (g.by - p0[1]) / dy;
        let tb = (y_hi - p0[1]) / dy;
        t_enter = t_enter.max(ta.min(tb));
        t_exit = t_exit.min(ta.max(tb));
    } else if p0[1] < g.by || p0[1] >= y_hi {
        return;
    }
    if t_enter >= t_exit {
        return;
    }

    // Entry voxel; floor implements the half-open ownership.
    let xe = p0[0] + t_enter * dx;
    let ye = p0[1] + t_enter * dy;
    let mut ix = (((xe - g.bx) / g.sx).floor() as isize).clamp(0, g.nx as isize - 1);
    let mut iy = (((ye - g.by) / g.sy).floor() as isize).clamp(0, g.ny as isize - 1);

    let step_x: isize = if dx > 0.0 { 1 } else { -1 };
    let step_y: isize = if dy > 0.0 { 1 } else { -1 };

    // Parameter of the next axis plane in travel direction, recomputed from
    // the plane coordinate each step to avoid drift.
    let plane_tx = |ix: isize| -> f64 {
        if dx == 0.0 {
            return f64::INFINITY;
        }
        let plane = if dx > 0.0 { ix + 1 } else { ix };
        (g.bx + plane as f64 * g.sx - p0[0]) / dx
    };
    let plane_ty = |iy: isize| -> f64 {
        if dy == 0.0 {
            return f64::INFINITY;
        }
        let plane = if dy > 0.0 { iy + 1 } else { iy };
        (g.by + plane as f64 * g.sy - p0[1]) / dy
    };

    let mut t = t_enter;
    let mut tx = plane_tx(ix);
    let mut ty = plane_ty(iy);
    loop {
        let t_next = tx.min(ty).min(t_exit);
        if t_next > t {
            emit(ix as usize, iy as usize, (t_next - t) * len);
        }
        if t_next >= t_exit {
            return;
        }
        if tx <= t_next {
            ix += step_x;
            if ix < 0 || ix >= g.nx as isize {
                return;
            }
            tx = plane_tx(ix);
        }
        if ty <= t_next {
            iy += step_y;
            if iy < 0 || iy >= g.ny as isize {
                return;
            }
            ty = plane_ty(iy);
        }
        t = t_next;
    }
}

/// Source position and detector-element position for (view angle, element).
#[inline]
fn ray_endpoints(geom: &FanBeamGeometry, angle: f64, det: usize) -> ([f64; 2], [f64; 2]) {
    let (sin_b, cos_b) = angle.sin_cos();
    let src = [geom.dso * cos_b, geom.dso * sin_b];
    let center = [
        (geom.dso - geom.dsd) * cos_b,
        (geom.dso - geom.dsd) * sin_b,
    ];
    let u = geom.det_offset(det);
    let end = [center[0] - u * sin_b, center[1] + u * cos_b];
    (src, end)
}

fn check_slices(grid: &GridSpec, n_slices: usize) -> Result<()> {
    if grid.shape[2] != n_slices {
        return Err(invalid(format!(
            "image has {} slices but sinogram has {}",
            grid.shape[2], n_slices
        )));
    }
    Ok(())
}

/// Raw forward projection over an arbitrary view-index list (any order).
/// Output layout is (view-in-list, slice, detector), detector fastest.
pub fn project_views(img: &Image, geom: &FanBeamGeometry, views: &[usize]) -> Result<Vec<f64>> {
    if views.iter().any(|&v| v >= geom.n_views()) {
        return Err(invalid("view index out of range"));
    }
    let n_slices = img.shape()[2];
    let n_det = geom.n_det;
    let g2 = Grid2::from_grid(img.grid());
    let row_len = n_slices * n_det;

    let mut data = vec![0.0_f64; views.len() * row_len];
    data.par_chunks_mut(row_len)
        .zip(views.par_iter())
        .for_each(|(chunk, &view)| {
            let angle = geom.angles[view];
            for det in 0..n_det {
                let (src, end) = ray_endpoints(geom, angle, det);
                for z in 0..n_slices {
                    let plane = img.slice(z);
                    let mut acc = 0.0;
                    traverse(src, end, &g2, &mut |ix, iy, l| {
                        acc += l * plane[iy * g2.nx + ix];
                    });
                    chunk[z * n_det + det] = acc;
                }
            }
        });
    Ok(data)
}

/// Forward projection Ax restricted to the given (increasing) view indices.
/// The returned sinogram carries the restricted geometry. Rays that miss the
/// image contribute zero.
pub fn forward_project(img: &Image, geom: &FanBeamGeometry, views: &[usize]) -> Result<Sinogram> {
    let out_geom = geom.restrict_views(views)?;
    let data = project_views(img, geom, views)?;
    Sinogram::new(out_geom, img.shape()[2], data)
}

/// Forward projection over every view of the geometry.
pub fn forward_project_full(img: &Image, geom: &FanBeamGeometry) -> Result<Sinogram> {
    let views: Vec<usize> = (0..geom.n_views()).collect();
    forward_project(img, geom, &views)
}

/// Number of fixed reduction chunks for the scatter operations. Chunking is
/// independent of the thread count so the summation order (hence the result)
/// does not change with parallelism.
const SCATTER_CHUNKS: usize = 32;

fn scatter_views<F>(
    n_views: usize,
    grid: &GridSpec,
    per_view: F,
) -> Image
where
    F: Fn(usize, &mut Image) + Sync,
{
    let chunks = SCATTER_CHUNKS.min(n_views.max(1));
    let per_chunk = n_views.div_ceil(chunks);
    let partials: Vec<Image> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut part = Image::zeros(grid.clone());
            let lo = c * per_chunk;
            let hi = ((c + 1) * per_chunk).min(n_views);
            for v in lo..hi {
                per_view(v, &mut part);
            }
            part
        })
        .collect();
    let mut out = Image::zeros(grid.clone());
    for p in &partials {
        out.axpy(1.0, p);
    }
    out
}

/// Raw adjoint over an arbitrary view list: scatters `values` (laid out like
/// [`project_views`] output) into the voxels each ray crosses, weighted by
/// the intersection lengths.
pub fn back_project_views(
    values: &[f64],
    geom: &FanBeamGeometry,
    views: &[usize],
    n_slices: usize,
    grid: &GridSpec,
) -> Result<Image> {
    grid.validate()?;
    check_slices(grid, n_slices)?;
    if views.iter().any(|&v| v >= geom.n_views()) {
        return Err(invalid("view index out of range"));
    }
    let n_det = geom.n_det;
    if values.len() != views.len() * n_slices * n_det {
        return Err(invalid("value buffer does not match views x slices x det"));
    }
    let g2 = Grid2::from_grid(grid);
    let nxy = g2.nx * g2.ny;

    Ok(scatter_views(views.len(), grid, |vi, part| {
        let angle = geom.angles[views[vi]];
        for det in 0..n_det {
            let (src, end) = ray_endpoints(geom, angle, det);
            for z in 0..n_slices {
                let val = values[(vi * n_slices + z) * n_det + det];
                if val == 0.0 {
                    continue;
                }
                let plane = &mut part.data_mut()[z * nxy..(z + 1) * nxy];
                traverse(src, end, &g2, &mut |ix, iy, l| {
                    plane[iy * g2.nx + ix] += l * val;
                });
            }
        }
    }))
}

/// Exact transpose of [`forward_project`] applied to a whole sinogram. Any
/// residual / statistical weighting is the caller's job.
pub fn back_project(sino: &Sinogram, grid: &GridSpec) -> Result<Image> {
    let views: Vec<usize> = (0..sino.n_views()).collect();
    back_project_views(sino.data(), &sino.geometry, &views, sino.n_slices(), grid)
}

/// SQS denominator d = Aᵀ w A 1 for the all-ones image. Voxels never crossed
/// by a weighted ray end up exactly zero.
pub fn sqs_denominator(
    geom: &FanBeamGeometry,
    n_slices: usize,
    grid: &GridSpec,
    weights: &[f64],
) -> Result<Image> {
    grid.validate()?;
    check_slices(grid, n_slices)?;
    let n_det = geom.n_det;
    if weights.len() != geom.n_views() * n_slices * n_det {
        return Err(invalid("weights shape does not match geometry"));
    }
    let g2 = Grid2::from_grid(grid);
    let nxy = g2.nx * g2.ny;

    Ok(scatter_views(geom.n_views(), grid, |view, part| {
        let angle = geom.angles[view];
        for det in 0..n_det {
            let (src, end) = ray_endpoints(geom, angle, det);
            let mut raysum = 0.0;
            traverse(src, end, &g2, &mut |_, _, l| raysum += l);
            if raysum == 0.0 {
                continue;
            }
            for z in 0..n_slices {
                let w = weights[(view * n_slices + z) * n_det + det];
                if w == 0.0 {
                    continue;
                }
                let scale = w * raysum;
                let plane = &mut part.data_mut()[z * nxy..(z + 1) * nxy];
                traverse(src, end, &g2, &mut |ix, iy, l| {
                    plane[iy * g2.nx + ix] += l * scale;
                });
            }
        }
    }))
}

/// Statistical ray weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightModel {
    /// All ones (unweighted least squares).
    Uniform,
    /// w = exp(−p): proportional to the expected transmitted photon count.
    Transmission,
}

pub fn noise_weights(sino: &Sinogram, model: WeightModel) -> Result<Vec<f64>> {
    if sino.data().iter().any(|v| !v.is_finite()) {
        return Err(invalid("sinogram contains non-finite values"));
    }
    Ok(match model {
        WeightModel::Uniform => vec![1.0; sino.n_rays()],
        WeightModel::Transmission => sino.data().iter().map(|&p| (-p).exp()).collect(),
    })
}

/// Ordered-subset partition of the view indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetPartition {
    pub subsets: Vec<Vec<usize>>,
}

impl SubsetPartition {
    pub fn m(&self) -> usize {
        self.subsets.len()
    }

    pub fn n_views(&self) -> usize {
        self.subsets.iter().map(|s| s.len()).sum()
    }
}

/// View indices reordered by bit reversal over the smallest power of two
/// >= n_views (out-of-range values skipped).
pub fn bit_reversed_views(n_views: usize) -> Vec<usize> {
    let bits = usize::BITS - (n_views.max(1) - 1).leading_zeros();
    let total = 1usize << bits;
    let mut order = Vec::with_capacity(n_views);
    for k in 0..total {
        let mut r = 0usize;
        for b in 0..bits {
            if k & (1 << b) != 0 {
                r |= 1 << (bits - 1 - b);
            }
        }
        if r < n_views {
            order.push(r);
        }
    }
    order
}

/// True when the subsets are pairwise disjoint and exactly cover 0..n_views.
pub fn subset_cover_is_disjoint(p: &SubsetPartition, n_views: usize) -> bool {
    let mut seen = vec![false; n_views];
    for s in &p.subsets {
        for &v in s {
            if v >= n_views || seen[v] {
                return false;
            }
            seen[v] = true;
        }
    }
    seen.iter().all(|&s| s)
}

/// Splits the bit-reversed view order into M contiguous chunks. The chunks
/// are as even as possible (the first `n_views mod M` chunks get one extra).
pub fn partition_subsets(n_views: usize, m: usize) -> Result<SubsetPartition> {
    if m == 0 || m > n_views {
        return Err(invalid(format!(
            "subset count {m} must be within 1..={n_views}"
        )));
    }
    let order = bit_reversed_views(n_views);
    let q = n_views / m;
    let r = n_views % m;
    let mut subsets = Vec::with_capacity(m);
    let mut pos = 0;
    for c in 0..m {
        let size = q + usize::from(c < r);
        subsets.push(order[pos..pos + size].to_vec());
        pos += size;
    }
    Ok(SubsetPartition { subsets })
}

/// Residual helper for the solvers: r = A_m x − b_m over the subset views
/// (any order), returned alongside the matching weights.
pub(crate) fn subset_residual(
    x: &Image,
    sino: &Sinogram,
    views: &[usize],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut resid = project_views(x, &sino.geometry, views)?;
    let n_det = sino.n_det();
    let n_slices = sino.n_slices();
    let all_w = sino.weights();
    let mut weights = Vec::with_capacity(resid.len());
    for (vi, &view) in views.iter().enumerate() {
        for z in 0..n_slices {
            for d in 0..n_det {
                let idx = (view * n_slices + z) * n_det + d;
                resid[(vi * n_slices + z) * n_det + d] -= sino.data()[idx];
                weights.push(all_w.map_or(1.0, |w| w[idx]));
            }
        }
    }
    Ok((resid, weights))
}

/// Weighted data cost ‖Ax − b‖²_w over every view of the sinogram.
pub fn data_cost(x: &Image, sino: &Sinogram) -> Result<f64> {
    let views: Vec<usize> = (0..sino.n_views()).collect();
    let (resid, weights) = subset_residual(x, sino, &views)?;
    let cost = resid.iter().zip(&weights).map(|(r, w)| w * r * r).sum();
    if !f64::is_finite(cost) {
        return Err(Error::NumericalFailure(
            "non-finite weighted data cost".into(),
        ));
    }
    Ok(cost)
}
