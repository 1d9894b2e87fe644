//! Filtered backprojection for flat-detector fan-beam data.
//!
//! Cosine pre-weighting, per-view redundancy weighting, ramp filtering via
//! zero-padded FFT (optionally Hann-apodized), and distance-weighted
//! backprojection with the 1/L² magnification factor, per slice. The whole
//! pipeline is linear in the sinogram.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};
use crate::geom::FanBeamGeometry;
use crate::image::{GridSpec, Image};
use crate::sinogram::Sinogram;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbpFilter {
    RamLak,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitedWeighting {
    /// 0.5 for full scans, 1 otherwise; no angular feathering.
    None,
    /// Partition-of-unity cos² weights over conjugate-redundant regions with
    /// a bounded over-weighting ramp at missing-data boundaries.
    SmoothRedundancy,
}

#[derive(Debug, Clone)]
pub struct FbpConfig {
    pub filter: FbpFilter,
    pub limited_weighting: LimitedWeighting,
    /// FFT zero-padding multiple (>= 2).
    pub pad_factor: usize,
}

impl Default for FbpConfig {
    fn default() -> Self {
        FbpConfig {
            filter: FbpFilter::Hann,
            limited_weighting: LimitedWeighting::SmoothRedundancy,
            pad_factor: 2,
        }
    }
}

impl FbpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pad_factor < 2 {
            return Err(invalid("fbp pad_factor must be >= 2"));
        }
        Ok(())
    }
}

const FULL_SCAN_TOL: f64 = 1e-6;

fn is_full_scan(geom: &FanBeamGeometry) -> bool {
    geom.arc_span() >= 2.0 * std::f64::consts::PI - FULL_SCAN_TOL
}

/// sin²-ramp reaching 1 at t >= 1.
fn edge_ramp(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    let s = (0.5 * std::f64::consts::PI * t).sin();
    s * s
}

/// Continuous redundancy weight for a ray at relative view angle `beta`
/// (measured from the first view) and fan angle `gamma`.
///
/// Full scans return the exact 1/2 conjugate-pair normalization. Short and
/// limited arcs get smooth cos² partition-of-unity weights wherever the
/// conjugate ray is measured — w(γ, β) + w(−γ, β + π − 2γ) = 1 — and an
/// over-weighting ramp in [1, 1.25] toward the arc boundary where the
/// conjugate is missing.
pub fn redundancy_weight(geom: &FanBeamGeometry, beta: f64, gamma: f64) -> f64 {
    if is_full_scan(geom) {
        return 0.5;
    }
    let span = geom.angles[geom.n_views() - 1] - geom.angles[0];
    let gamma_max = geom.max_fan_angle();
    let width = (0.5 * span).min((2.0 * gamma_max).max(10f64.to_radians()));
    let theta = |b: f64| edge_ramp(b.min(span - b) / width);
    let measured = |b: f64| (-1e-12..=span + 1e-12).contains(&b);

    let pi = std::f64::consts::PI;
    let conj = [beta + pi - 2.0 * gamma, beta - pi - 2.0 * gamma];
    let conj_in = conj.into_iter().find(|&b| measured(b));
    match conj_in {
        Some(bc) => {
            let a = theta(beta);
            let b = theta(bc);
            if a + b == 0.0 {
                0.5
            } else {
                a / (a + b)
            }
        }
        None => {
            const EPS_BOOST: f64 = 0.25;
            1.0 + EPS_BOOST * (1.0 - theta(beta))
        }
    }
}

/// Redundancy weights sampled on the (view, detector) grid.
pub fn redundancy_weights(geom: &FanBeamGeometry) -> Vec<f64> {
    let b0 = geom.angles[0];
    let mut w = Vec::with_capacity(geom.n_views() * geom.n_det);
    for &beta in &geom.angles {
        for k in 0..geom.n_det {
            w.push(redundancy_weight(geom, beta - b0, geom.fan_angle(k)));
        }
    }
    w
}

/// Real spectrum of the band-limited ramp kernel on an `nf`-point grid with
/// sample spacing `tau`, optionally Hann-apodized. The DC value comes from
/// the analytic space-domain kernel, which avoids the cupping a naive |f|
/// sampling would give.
pub fn ramp_spectrum(nf: usize, tau: f64, hann: bool) -> Vec<f64> {
    let mut kernel = vec![Complex::new(0.0, 0.0); nf];
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    kernel[0].re = 1.0 / (4.0 * tau * tau);
    for n in (1..nf / 2).step_by(2) {
        let v = -1.0 / (pi2 * (n * n) as f64 * tau * tau);
        kernel[n].re = v;
        kernel[nf - n].re = v;
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nf);
    fft.process(&mut kernel);
    let mut spec: Vec<f64> = kernel.iter().map(|c| c.re.max(0.0)).collect();
    if hann {
        for (k, s) in spec.iter_mut().enumerate() {
            let f = k.min(nf - k) as f64 / (nf as f64 / 2.0);
            *s *= 0.5 * (1.0 + (std::f64::consts::PI * f).cos());
        }
    }
    spec
}

/// Flat fan-beam FBP. Input line integrals (∫μ dl), output in the same value
/// unit per length unit (μ if the input is a μ sinogram).
pub fn fbp(sino: &Sinogram, grid: &GridSpec, cfg: &FbpConfig) -> Result<Image> {
    cfg.validate()?;
    grid.validate()?;
    let geom = &sino.geometry;
    if geom.n_views() < 2 {
        return Err(invalid("fbp requires at least two views"));
    }
    if grid.shape[2] != sino.n_slices() {
        return Err(invalid("grid slice count must match the sinogram"));
    }

    let n_det = geom.n_det;
    let scale = geom.dso / geom.dsd;
    let tau = geom.det_pitch * scale;
    let nf = (n_det * cfg.pad_factor).next_power_of_two();
    let spectrum = ramp_spectrum(nf, tau, cfg.filter == FbpFilter::Hann);

    // Per-element cosine pre-weight on the isocenter-scaled panel.
    let cosw: Vec<f64> = (0..n_det)
        .map(|k| {
            let u = geom.det_offset(k) * scale;
            geom.dso / (geom.dso * geom.dso + u * u).sqrt()
        })
        .collect();
    let red: Vec<f64> = match cfg.limited_weighting {
        LimitedWeighting::SmoothRedundancy => redundancy_weights(geom),
        LimitedWeighting::None => {
            let w = if is_full_scan(geom) { 0.5 } else { 1.0 };
            vec![w; geom.n_views() * n_det]
        }
    };

    // Filter every (view, slice) row: weight, zero-pad, FFT, ramp, inverse.
    let n_views = geom.n_views();
    let n_slices = sino.n_slices();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nf);
    let inv = planner.plan_fft_inverse(nf);
    let filtered: Vec<Vec<f64>> = (0..n_views * n_slices)
        .into_par_iter()
        .map(|vs| {
            let (view, slice) = (vs / n_slices, vs % n_slices);
            let row = sino.row(view, slice);
            let mut buf = vec![Complex::new(0.0, 0.0); nf];
            for k in 0..n_det {
                buf[k].re = row[k] * cosw[k] * red[view * n_det + k];
            }
            fwd.process(&mut buf);
            for (b, s) in buf.iter_mut().zip(&spectrum) {
                *b *= s;
            }
            inv.process(&mut buf);
            // rustfft's inverse is unnormalized; fold 1/nf into the
            // convolution scale τ.
            let s = tau / nf as f64;
            buf[..n_det].iter().map(|c| c.re * s).collect()
        })
        .collect();

    let deltas = geom.view_deltas();
    let trig: Vec<(f64, f64)> = geom.angles.iter().map(|a| a.sin_cos()).collect();
    let [nx, ny, _] = grid.shape;
    let nxy = nx * ny;
    let c_det = 0.5 * (n_det as f64 - 1.0);

    let mut out = Image::zeros(grid.clone());
    let grid_c = grid.clone();
    for z in 0..n_slices {
        let plane: &mut [f64] = &mut out.data_mut()[z * nxy..(z + 1) * nxy];
        plane.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
            for (i, pix) in row.iter_mut().enumerate() {
                let c = grid_c.voxel_center(i, j, z);
                let (x, y) = (c[0], c[1]);
                let mut acc = 0.0;
                for v in 0..n_views {
                    let (sin_b, cos_b) = trig[v];
                    let upart = dso_u(geom.dso, x, y, sin_b, cos_b);
                    let Some((u_iso, inv_l2)) = upart else { continue };
                    let pos = u_iso / tau + c_det;
                    if pos < 0.0 || pos > (n_det - 1) as f64 {
                        continue;
                    }
                    let i0 = pos.floor() as usize;
                    let frac = pos - i0 as f64;
                    let q = &filtered[v * n_slices + z];
                    let val = if i0 + 1 < n_det {
                        q[i0] * (1.0 - frac) + q[i0 + 1] * frac
                    } else {
                        q[i0]
                    };
                    acc += deltas[v] * inv_l2 * val;
                }
                *pix = acc;
            }
        });
    }
    Ok(out)
}

/// Isocenter-scaled detector coordinate of the ray through (x, y) at a view,
/// and the dso²/U² magnification weight. None when the point is at or behind
/// the source.
#[inline]
fn dso_u(dso: f64, x: f64, y: f64, sin_b: f64, cos_b: f64) -> Option<(f64, f64)> {
    let u_axis = dso - (x * cos_b + y * sin_b);
    if u_axis <= 1e-9 * dso {
        return None;
    }
    let t = -x * sin_b + y * cos_b;
    let u_iso = dso * t / u_axis;
    let r = dso / u_axis;
    Some((u_iso, r * r))
}
