//! Shared oracles for the integration suites. Everything here recomputes
//! expected values by an independent route (slab clipping, dense matrices,
//! analytic membership) so the library code under test never checks itself.

#![allow(dead_code)]

use tomorec_core::{FanBeamGeometry, GridSpec, Image, Sinogram};

/// Intersection length of segment p0→p1 with an axis-aligned box, via slab
/// clipping. Half-open on the low edges for axis-parallel rays so a ray
/// running exactly along a shared voxel edge is counted once.
pub fn segment_box_length(
    p0: [f64; 2],
    p1: [f64; 2],
    lo: [f64; 2],
    hi: [f64; 2],
) -> f64 {
    let d = [p1[0] - p0[0], p1[1] - p0[1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for ax in 0..2 {
        if d[ax] != 0.0 {
            let ta = (lo[ax] - p0[ax]) / d[ax];
            let tb = (hi[ax] - p0[ax]) / d[ax];
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        } else if p0[ax] < lo[ax] || p0[ax] >= hi[ax] {
            return 0.0;
        }
    }
    if t1 > t0 {
        (t1 - t0) * len
    } else {
        0.0
    }
}

/// Source / detector-element endpoints mirroring the production geometry
/// convention (independent re-derivation used by the dense oracle).
pub fn oracle_ray(geom: &FanBeamGeometry, view: usize, det: usize) -> ([f64; 2], [f64; 2]) {
    let beta = geom.angles[view];
    let src = [geom.dso * beta.cos(), geom.dso * beta.sin()];
    let u = (det as f64 - 0.5 * (geom.n_det as f64 - 1.0)) * geom.det_pitch;
    let cx = (geom.dso - geom.dsd) * beta.cos();
    let cy = (geom.dso - geom.dsd) * beta.sin();
    let end = [cx - u * beta.sin(), cy + u * beta.cos()];
    (src, end)
}

/// Dense system matrix for a single-slice grid: rows are rays in
/// (view, det) order, columns are voxels x-fastest. Built voxel by voxel
/// with slab clipping — no Siddon marching involved.
pub struct DenseMatrix {
    pub n_rays: usize,
    pub n_vox: usize,
    pub a: Vec<f64>,
}

impl DenseMatrix {
    pub fn build(geom: &FanBeamGeometry, grid: &GridSpec) -> DenseMatrix {
        assert_eq!(grid.shape[2], 1, "dense oracle is single-slice");
        let [nx, ny, _] = grid.shape;
        let [sx, sy, _] = grid.spacing;
        let bx = grid.origin[0] - 0.5 * sx;
        let by = grid.origin[1] - 0.5 * sy;
        let n_vox = nx * ny;
        let n_rays = geom.n_views() * geom.n_det;
        let mut a = vec![0.0; n_rays * n_vox];
        for view in 0..geom.n_views() {
            for det in 0..geom.n_det {
                let row = view * geom.n_det + det;
                let (p0, p1) = oracle_ray(geom, view, det);
                for j in 0..ny {
                    for i in 0..nx {
                        let lo = [bx + i as f64 * sx, by + j as f64 * sy];
                        let hi = [lo[0] + sx, lo[1] + sy];
                        let l = segment_box_length(p0, p1, lo, hi);
                        if l > 0.0 {
                            a[row * n_vox + j * nx + i] = l;
                        }
                    }
                }
            }
        }
        DenseMatrix { n_rays, n_vox, a }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_vox);
        (0..self.n_rays)
            .map(|r| {
                self.a[r * self.n_vox..(r + 1) * self.n_vox]
                    .iter()
                    .zip(x)
                    .map(|(a, x)| a * x)
                    .sum()
            })
            .collect()
    }

    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n_rays);
        let mut out = vec![0.0; self.n_vox];
        for r in 0..self.n_rays {
            let row = &self.a[r * self.n_vox..(r + 1) * self.n_vox];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * y[r];
            }
        }
        out
    }

    /// d = Aᵀ diag(w) A 1.
    pub fn sqs_denominator(&self, w: &[f64]) -> Vec<f64> {
        let a1 = self.matvec(&vec![1.0; self.n_vox]);
        let wy: Vec<f64> = a1.iter().zip(w).map(|(a, w)| a * w).collect();
        self.matvec_t(&wy)
    }
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    max_abs_diff(a, b) / scale
}

pub fn random_image(grid: GridSpec, seed: u64, lo: f64, hi: f64) -> Image {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n_voxels();
    let data = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    Image::new(grid, data).unwrap()
}

pub fn random_sinogram(geom: FanBeamGeometry, seed: u64) -> Sinogram {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = geom.n_views() * geom.n_det;
    let data = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Sinogram::new(geom, 1, data).unwrap()
}

/// Test geometry whose fan comfortably covers a centered grid of the given
/// extent (mm half-width).
pub fn cover_geom(n_det: usize, n_views: usize, half_width_mm: f64) -> FanBeamGeometry {
    let dso = 4.0 * half_width_mm;
    let dsd = 7.0 * half_width_mm;
    // Panel sized so the fan circumscribes the grid diagonal.
    let need = 1.55 * half_width_mm * dsd / dso;
    let pitch = 2.0 * need / n_det as f64;
    FanBeamGeometry::with_uniform_views(
        dso,
        dsd,
        pitch,
        n_det,
        n_views,
        2.0 * std::f64::consts::PI,
        1.0,
    )
    .unwrap()
}
