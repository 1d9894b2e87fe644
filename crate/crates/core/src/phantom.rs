//! Synthetic phantoms in Hounsfield units.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::image::{GridSpec, Image};

/// An ellipse in normalized coordinates (the grid's physical half-width maps
/// to 1). Rotation is stored as (cos φ, sin φ) so mirrored pairs can be built
/// with exactly negated sine terms.
#[derive(Debug, Clone, Copy)]
pub struct Ellipse {
    pub value: f64,
    pub a: f64,
    pub b: f64,
    pub cx: f64,
    pub cy: f64,
    pub cos_phi: f64,
    pub sin_phi: f64,
}

impl Ellipse {
    pub fn axis_aligned(value: f64, a: f64, b: f64, cx: f64, cy: f64) -> Ellipse {
        Ellipse {
            value,
            a,
            b,
            cx,
            cy,
            cos_phi: 1.0,
            sin_phi: 0.0,
        }
    }

    pub fn rotated_deg(value: f64, a: f64, b: f64, cx: f64, cy: f64, phi_deg: f64) -> Ellipse {
        let phi = phi_deg.to_radians();
        Ellipse {
            value,
            a,
            b,
            cx,
            cy,
            cos_phi: phi.cos(),
            sin_phi: phi.sin(),
        }
    }

    /// Mirror image about the vertical axis (x -> −x).
    pub fn mirrored(&self) -> Ellipse {
        Ellipse {
            cx: -self.cx,
            sin_phi: -self.sin_phi,
            ..*self
        }
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.cx;
        let dy = y - self.cy;
        let u = dx * self.cos_phi + dy * self.sin_phi;
        let v = -dx * self.sin_phi + dy * self.cos_phi;
        let ru = u / self.a;
        let rv = v / self.b;
        ru * ru + rv * rv <= 1.0
    }
}

/// The ten Shepp-Logan ellipses with the original intensity column. The two
/// lateral cavities and the two off-center bottom dots are stored as exact
/// mirror pairs so the phantom is symmetric about the vertical axis.
pub fn shepp_logan_ellipses() -> Vec<Ellipse> {
    let cavity = Ellipse::rotated_deg(-0.02, 0.1100, 0.3100, 0.22, 0.0, -18.0);
    let bottom_dot = Ellipse::axis_aligned(0.01, 0.0460, 0.0230, -0.08, -0.605);
    vec![
        Ellipse::axis_aligned(2.00, 0.6900, 0.9200, 0.0, 0.0),
        Ellipse::axis_aligned(-0.98, 0.6624, 0.8740, 0.0, -0.0184),
        cavity,
        cavity.mirrored(),
        Ellipse::axis_aligned(0.01, 0.2100, 0.2500, 0.0, 0.35),
        Ellipse::axis_aligned(0.01, 0.0460, 0.0460, 0.0, 0.10),
        Ellipse::axis_aligned(0.01, 0.0460, 0.0460, 0.0, -0.10),
        bottom_dot,
        Ellipse::axis_aligned(0.01, 0.0230, 0.0230, 0.0, -0.605),
        bottom_dot.mirrored(),
    ]
}

/// Maps the summed ellipse intensity to HU: air (sum 0) is −1000 HU and the
/// outer shell (sum 2) lands at +840 HU.
pub const SHEPP_LOGAN_HU_SLOPE: f64 = 920.0;

pub fn shepp_logan_hu(intensity_sum: f64) -> f64 {
    SHEPP_LOGAN_HU_SLOPE * intensity_sum - 1000.0
}

/// Standard 10-ellipse Shepp-Logan phantom on an `n × n` centered grid,
/// point-sampled at voxel centers and expressed in HU.
pub fn make_shepp_logan(n: usize, spacing: f64) -> Result<Image> {
    if n < 16 {
        return Err(invalid("Shepp-Logan grid must be at least 16 voxels"));
    }
    let grid = GridSpec::centered_2d(n, spacing);
    let half = 0.5 * n as f64 * spacing;
    let ellipses = shepp_logan_ellipses();
    let mut img = Image::zeros(grid);
    for j in 0..n {
        for i in 0..n {
            let c = img.grid().voxel_center(i, j, 0);
            let x = c[0] / half;
            let y = c[1] / half;
            let mut sum = 0.0;
            for e in &ellipses {
                if e.contains(x, y) {
                    sum += e.value;
                }
            }
            img.set(i, j, 0, shepp_logan_hu(sum));
        }
    }
    Ok(img)
}

/// Configuration for the reproducible random soft-tissue phantom.
#[derive(Debug, Clone)]
pub struct EllipsePhantomConfig {
    pub seed: u64,
    pub n: usize,
    pub spacing: f64,
    pub n_slices: usize,
    pub n_ellipses: usize,
    /// Low-contrast disks (|contrast| in [10, 50] HU) for visibility checks.
    pub n_lesions: usize,
}

impl EllipsePhantomConfig {
    pub fn new(seed: u64, n: usize, spacing: f64, n_ellipses: usize) -> Self {
        EllipsePhantomConfig {
            seed,
            n,
            spacing,
            n_slices: 1,
            n_ellipses,
            n_lesions: 0,
        }
    }

    pub fn with_lesions(mut self, n: usize) -> Self {
        self.n_lesions = n;
        self
    }

    pub fn with_slices(mut self, n: usize) -> Self {
        self.n_slices = n;
        self
    }
}

fn bounding_radius(e: &Ellipse) -> f64 {
    e.a.max(e.b)
}

fn fits_inside_body(body: &Ellipse, e: &Ellipse) -> bool {
    // Conservative: the insert's bounding circle, shrunk into the body's
    // shorter semi-axis.
    let dx = e.cx - body.cx;
    let dy = e.cy - body.cy;
    let r = (dx * dx + dy * dy).sqrt();
    r + bounding_radius(e) <= 0.95 * body.a.min(body.b)
}

fn overlaps(a: &Ellipse, b: &Ellipse) -> bool {
    let dx = a.cx - b.cx;
    let dy = a.cy - b.cy;
    let d = (dx * dx + dy * dy).sqrt();
    d < bounding_radius(a) + bounding_radius(b) + 0.01
}

fn draw_insert(
    rng: &mut ChaCha8Rng,
    body: &Ellipse,
    placed: &[Ellipse],
    value: f64,
    ax_lo: f64,
    ax_hi: f64,
    round: bool,
) -> Ellipse {
    let mut a = rng.gen_range(ax_lo..ax_hi);
    let mut b = if round { a } else { rng.gen_range(ax_lo..ax_hi) };
    loop {
        for _ in 0..100 {
            let rad = rng.gen_range(0.0..0.75_f64);
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let cx = body.cx + rad * body.a * theta.cos();
            let cy = body.cy + rad * body.b * theta.sin();
            let phi_deg = rng.gen_range(0.0..180.0);
            let e = if round {
                Ellipse::axis_aligned(value, a, b, cx, cy)
            } else {
                Ellipse::rotated_deg(value, a, b, cx, cy, phi_deg)
            };
            if fits_inside_body(body, &e) && placed.iter().all(|p| !overlaps(p, &e)) {
                return e;
            }
        }
        // Crowded layout: shrink and try again.
        a *= 0.8;
        b *= 0.8;
    }
}

/// Reproducible random phantom: a body ellipse near 0 HU containing
/// `n_ellipses` non-overlapping random ellipses with contrast in
/// [−200, 200] HU, plus optional low-contrast lesion disks. Voxels are 2×2
/// supersampled so edges are softened; interior values stay exact. The same
/// configuration always produces a bitwise identical image.
pub fn make_ellipse_phantom(cfg: &EllipsePhantomConfig) -> Result<Image> {
    if cfg.n < 16 {
        return Err(invalid("phantom grid must be at least 16 voxels"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let body_hu = rng.gen_range(-50.0..50.0);
    let body = Ellipse::axis_aligned(
        body_hu,
        rng.gen_range(0.70..0.85),
        rng.gen_range(0.70..0.85),
        0.0,
        0.0,
    );

    let mut inserts: Vec<Ellipse> = Vec::new();
    for _ in 0..cfg.n_ellipses {
        let contrast = rng.gen_range(-200.0..200.0);
        let e = draw_insert(&mut rng, &body, &inserts, contrast, 0.06, 0.25, false);
        inserts.push(e);
    }
    let mut lesions: Vec<Ellipse> = Vec::new();
    for _ in 0..cfg.n_lesions {
        let mag = rng.gen_range(10.0..50.0);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let e = draw_insert(&mut rng, &body, &lesions, sign * mag, 0.02, 0.05, true);
        lesions.push(e);
    }

    let grid = GridSpec::centered(
        cfg.n,
        cfg.n,
        cfg.n_slices,
        [cfg.spacing, cfg.spacing, cfg.spacing],
    );
    let half = 0.5 * cfg.n as f64 * cfg.spacing;
    let mut img = Image::zeros(grid);

    let sample = |x: f64, y: f64| -> f64 {
        if !body.contains(x, y) {
            return -1000.0;
        }
        let mut hu = body.value;
        for e in &inserts {
            if e.contains(x, y) {
                hu += e.value;
            }
        }
        for e in &lesions {
            if e.contains(x, y) {
                hu += e.value;
            }
        }
        hu
    };

    let sub = 0.25 * cfg.spacing / half;
    for j in 0..cfg.n {
        for i in 0..cfg.n {
            let c = img.grid().voxel_center(i, j, 0);
            let x = c[0] / half;
            let y = c[1] / half;
            let v = 0.25
                * (sample(x - sub, y - sub)
                    + sample(x + sub, y - sub)
                    + sample(x - sub, y + sub)
                    + sample(x + sub, y + sub));
            img.set(i, j, 0, v);
        }
    }
    // Multi-slice phantoms repeat the slice; the slice axis exists so the
    // multi-slice pipeline has data to chew on.
    if cfg.n_slices > 1 {
        let plane: Vec<f64> = img.slice(0).to_vec();
        let nxy = plane.len();
        for k in 1..cfg.n_slices {
            img.data_mut()[k * nxy..(k + 1) * nxy].copy_from_slice(&plane);
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shepp_logan_background_is_air() {
        let img = make_shepp_logan(128, 2.0).unwrap();
        // Far outside all ellipses.
        assert_eq!(img.get(0, 0, 0), -1000.0);
        assert_eq!(img.get(127, 0, 0), -1000.0);
    }

    #[test]
    fn shepp_logan_mirror_symmetric() {
        let img = make_shepp_logan(128, 2.0).unwrap();
        let n = 128;
        for j in 0..n {
            for i in 0..n {
                assert_eq!(
                    img.get(i, j, 0),
                    img.get(n - 1 - i, j, 0),
                    "asymmetry at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn shepp_logan_rejects_tiny_grid() {
        assert!(make_shepp_logan(8, 1.0).is_err());
    }

    #[test]
    fn shepp_logan_shell_value() {
        let img = make_shepp_logan(256, 1.0);
        let img = img.unwrap();
        // A point inside ellipse 1 but outside ellipse 2: x = 0, y near the
        // top of the shell. y_norm ~ 0.90 lies between 0.874 - 0.0184 shifted
        // boundary and 0.92.
        let n = 256;
        let half = 0.5 * 256.0;
        let y_norm = 0.90;
        let j = ((y_norm * half - img.origin()[1]) / img.spacing()[1]).round() as usize;
        let v = img.get(n / 2, j, 0);
        assert_eq!(v, shepp_logan_hu(2.0));
        assert!((v - 840.0).abs() < 1e-9);
    }

    #[test]
    fn ellipse_phantom_deterministic() {
        let cfg = EllipsePhantomConfig::new(7, 64, 2.0, 4).with_lesions(2);
        let a = make_ellipse_phantom(&cfg).unwrap();
        let b = make_ellipse_phantom(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn body_only_phantom_is_flat_inside() {
        let cfg = EllipsePhantomConfig::new(1, 64, 2.0, 0);
        let img = make_ellipse_phantom(&cfg).unwrap();
        // Center region voxels are strictly interior: all equal body HU.
        let c = img.get(32, 32, 0);
        for j in 28..36 {
            for i in 28..36 {
                assert_eq!(img.get(i, j, 0), c);
            }
        }
        assert!((-50.0..50.0).contains(&c));
    }

    #[test]
    fn ellipse_phantom_values_bounded() {
        let cfg = EllipsePhantomConfig::new(7, 128, 2.0, 5).with_lesions(3);
        let img = make_ellipse_phantom(&cfg).unwrap();
        for &v in img.data() {
            assert!((-1000.0..=1100.0).contains(&v), "value {v} out of range");
        }
    }
}
