//! Synthetic degradations with known ground truth, reference baselines and
//! corpus statistics for checking the priors.
//!
//! Clean scenes come from a seeded dead-leaves generator: occluding discs with
//! power-law radii, which reproduces the scale-invariant spectra and sharp
//! edges of natural photographs without any dataset dependency.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SfpError};
use crate::freq::{fft2, low_freq_percentage_with, RhoNorm};
use crate::image::{PlanarImage, ScalarMap};
use crate::spatial::{self, SpatialParams};

/// Retained-haze factor of the dark-channel baseline.
pub const DCP_OMEGA: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepthProfile {
    /// Far at the top row, near at the bottom row.
    LinearRamp,
    /// Far at the center, near at the corners.
    Radial,
    /// Smooth multi-octave value noise.
    PerlinLike,
}

impl DepthProfile {
    pub const ALL: [DepthProfile; 3] = [
        DepthProfile::LinearRamp,
        DepthProfile::Radial,
        DepthProfile::PerlinLike,
    ];
}

impl std::str::FromStr for DepthProfile {
    type Err = SfpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear-ramp" => Ok(Self::LinearRamp),
            "radial" => Ok(Self::Radial),
            "perlin-like" => Ok(Self::PerlinLike),
            other => Err(SfpError::Param(format!("unknown depth profile {other:?}"))),
        }
    }
}

/// A clean image, its scattering parameters and the resulting degraded image.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub clean: PlanarImage,
    pub t_gt: ScalarMap,
    pub airlight: [f64; 3],
    pub degraded: PlanarImage,
    pub seed: u64,
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn value_noise(width: usize, height: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973_65);
    let mut out = vec![0.0; width * height];
    let mut amplitude = 1.0;
    for octave in 0..4 {
        let cells = 2usize << octave;
        let grid: Vec<f64> = (0..(cells + 1) * (cells + 1))
            .map(|_| rng.gen::<f64>())
            .collect();
        for y in 0..height {
            let gy = y as f64 / height as f64 * cells as f64;
            let (iy, fy) = (gy.floor() as usize, smoothstep(gy.fract()));
            for x in 0..width {
                let gx = x as f64 / width as f64 * cells as f64;
                let (ix, fx) = (gx.floor() as usize, smoothstep(gx.fract()));
                let at = |i: usize, j: usize| grid[j * (cells + 1) + i];
                let top = at(ix, iy) * (1.0 - fx) + at(ix + 1, iy) * fx;
                let bottom = at(ix, iy + 1) * (1.0 - fx) + at(ix + 1, iy + 1) * fx;
                out[y * width + x] += amplitude * (top * (1.0 - fy) + bottom * fy);
            }
        }
        amplitude *= 0.5;
    }
    let (lo, hi) = out
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = (hi - lo).max(1e-12);
    out.iter().map(|v| (v - lo) / span).collect()
}

/// Normalized depth in `[0, 1]`.
pub fn depth_map(width: usize, height: usize, profile: DepthProfile, seed: u64) -> ScalarMap {
    match profile {
        DepthProfile::LinearRamp => {
            let denom = (height.max(2) - 1) as f64;
            ScalarMap::from_fn(width, height, |_, y| 1.0 - y as f64 / denom)
        }
        DepthProfile::Radial => {
            let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
            let rmax = (cx * cx + cy * cy).sqrt().max(1e-12);
            ScalarMap::from_fn(width, height, |x, y| {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                1.0 - (dx * dx + dy * dy).sqrt() / rmax
            })
        }
        DepthProfile::PerlinLike => ScalarMap::new(width, height, value_noise(width, height, seed))
            .expect("noise sized from dims"),
    }
}

/// `I = J t + A (1 - t)` for a given transmission map.
pub fn apply_scattering(
    clean: &PlanarImage,
    t: &ScalarMap,
    airlight: [f64; 3],
) -> Result<PlanarImage> {
    clean.check_same_dims(t.width(), t.height(), "transmission")?;
    let planes = [0, 1, 2].map(|c| {
        clean
            .plane(c)
            .iter()
            .zip(t.data())
            .map(|(&j, &tt)| j * tt + airlight[c] * (1.0 - tt))
            .collect::<Vec<_>>()
    });
    PlanarImage::from_planes_clamped(clean.width(), clean.height(), planes)
}

/// Hazes `clean` with `t = exp(-beta_s · d)` for the chosen depth profile.
pub fn synthesize_haze(
    clean: &PlanarImage,
    profile: DepthProfile,
    beta_s: f64,
    airlight: [f64; 3],
    seed: u64,
) -> Result<SyntheticScene> {
    if !(beta_s > 0.0) || !beta_s.is_finite() {
        return Err(SfpError::Param(format!(
            "scattering coefficient must be positive, got {beta_s}"
        )));
    }
    if airlight.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
        return Err(SfpError::Param(format!(
            "airlight components must lie in (0, 1], got {airlight:?}"
        )));
    }
    let depth = depth_map(clean.width(), clean.height(), profile, seed);
    let t_gt = depth.map(|d| (-beta_s * d).exp());
    let degraded = apply_scattering(clean, &t_gt, airlight)?;
    Ok(SyntheticScene {
        clean: clean.clone(),
        t_gt,
        airlight,
        degraded,
        seed,
    })
}

/// Seeded dead-leaves scene: occluding discs with radii drawn from `p(r) ∝ r⁻³`,
/// muted natural colors, a soft illumination falloff, mild optical blur and grain.
pub fn dead_leaves(width: usize, height: usize, seed: u64) -> PlanarImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = width * height;
    let r_min = 1.5f64;
    let r_max = (width.min(height) as f64 / 4.0).max(r_min * 2.0);
    let (inv_lo, inv_hi) = (r_min.powi(-2), r_max.powi(-2));

    let mut covered = vec![false; n];
    let mut remaining = n;
    let mut color = vec![[0.0f64; 3]; n];
    let mut leaves = 0usize;
    // front-to-back: a leaf only paints pixels no earlier leaf has claimed
    while remaining > 0 && leaves < 4_000_000 {
        leaves += 1;
        let u: f64 = rng.gen();
        let r = (inv_lo - u * (inv_lo - inv_hi)).powf(-0.5);
        let cx = rng.gen_range(-r..width as f64 + r);
        let cy = rng.gen_range(-r..height as f64 + r);
        let base: f64 = rng.gen_range(0.08..0.85);
        let tint = [
            rng.gen_range(-0.18..0.18),
            rng.gen_range(-0.12..0.12),
            rng.gen_range(-0.18..0.18),
        ];
        let rgb = tint.map(|t| (base + t).clamp(0.0, 1.0));

        let x0 = (cx - r).floor().max(0.0) as usize;
        let x1 = ((cx + r).ceil() as isize).min(width as isize - 1);
        let y0 = (cy - r).floor().max(0.0) as usize;
        let y1 = ((cy + r).ceil() as isize).min(height as isize - 1);
        if x1 < 0 || y1 < 0 {
            continue;
        }
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                let i = y * width + x;
                if !covered[i] && dx * dx + dy * dy <= r * r {
                    covered[i] = true;
                    color[i] = rgb;
                    remaining -= 1;
                }
            }
        }
    }

    let light_dir = rng.gen_range(0.0..std::f64::consts::TAU);
    let (lx, ly) = (light_dir.cos(), light_dir.sin());
    let mut planes = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for c in 0..3 {
        let raw = ScalarMap::from_raw(width, height, color.iter().map(|p| p[c]).collect());
        let blurred = crate::image::box_mean(&raw, 1);
        for y in 0..height {
            for x in 0..width {
                let (u, v) = (
                    x as f64 / width as f64 - 0.5,
                    y as f64 / height as f64 - 0.5,
                );
                let shade = 0.85 + 0.15 * (u * lx + v * ly) * 2.0;
                planes[c][y * width + x] = blurred.get(x, y) * shade;
            }
        }
    }
    for plane in &mut planes {
        for v in plane.iter_mut() {
            let grain: f64 = rng.gen_range(-0.004..0.004);
            *v += grain;
        }
    }
    PlanarImage::from_planes_clamped(width, height, planes).expect("generator dims")
}

/// Size of the bundled clear sample images.
pub const SAMPLE_SIZE: (usize, usize) = (1024, 768);
pub const SAMPLE_COUNT: usize = 10;

/// One of the ten bundled clear sample images (full resolution, deterministic).
pub fn clear_sample(index: usize) -> PlanarImage {
    assert!(index < SAMPLE_COUNT, "sample index {index} out of range");
    dead_leaves(SAMPLE_SIZE.0, SAMPLE_SIZE.1, 0x5f9_0000 + index as u64)
}

/// Hazy counterpart of [`clear_sample`].
pub fn degraded_sample(index: usize) -> SyntheticScene {
    let clean = clear_sample(index);
    let profile = DepthProfile::ALL[index % 3];
    synthesize_haze(
        &clean,
        profile,
        1.2,
        [0.85, 0.86, 0.88],
        0x5f9_0000 + index as u64,
    )
    .expect("valid parameters")
}

/// Haze density of a synthetic corpus, as a `beta_s` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazeRange {
    pub beta_lo: f64,
    pub beta_hi: f64,
}

impl HazeRange {
    /// Light to dense haze.
    pub const DEFAULT: HazeRange = HazeRange {
        beta_lo: 0.6,
        beta_hi: 1.8,
    };
    /// Light to moderate haze.
    pub const MODERATE: HazeRange = HazeRange {
        beta_lo: 0.3,
        beta_hi: 1.0,
    };
}

/// Recipe for a deterministic synthetic corpus of square scenes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub count: usize,
    pub size: usize,
    pub seed: u64,
    pub achromatic: bool,
    pub haze: HazeRange,
}

impl CorpusSpec {
    /// Corpus used for the transmission and end-to-end comparisons.
    pub const DEFAULT: CorpusSpec = CorpusSpec {
        count: 20,
        size: 128,
        seed: 2024,
        achromatic: false,
        haze: HazeRange::DEFAULT,
    };
    /// Corpus used for the DC-prior statistic.
    pub const DC_PRIOR: CorpusSpec = CorpusSpec {
        count: 100,
        size: 64,
        seed: 77,
        achromatic: true,
        haze: HazeRange::MODERATE,
    };

    /// Scattering parameters of scene `index`: profile cycles through
    /// [`DepthProfile::ALL`], `beta_s` uniform in the haze range, gray airlight
    /// in `[0.7, 1.0]` with a tint of at most ±0.03 (none if `achromatic`).
    pub fn parameters(&self, index: usize) -> (DepthProfile, f64, [f64; 3]) {
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(index as u64),
        );
        let beta_s = rng.gen_range(self.haze.beta_lo..self.haze.beta_hi);
        let gray: f64 = rng.gen_range(0.7..1.0);
        let airlight = if self.achromatic {
            [gray; 3]
        } else {
            [0; 3].map(|_| (gray + rng.gen_range(-0.03..0.03)).clamp(0.05, 1.0))
        };
        (DepthProfile::ALL[index % 3], beta_s, airlight)
    }

    pub fn scene(&self, index: usize) -> SyntheticScene {
        let scene_seed = self.seed.wrapping_add(1000 * index as u64 + 17);
        let clean = dead_leaves(self.size, self.size, scene_seed);
        let (profile, beta_s, airlight) = self.parameters(index);
        synthesize_haze(&clean, profile, beta_s, airlight, scene_seed)
            .expect("corpus parameters are valid")
    }

    pub fn scenes(&self) -> Vec<SyntheticScene> {
        (0..self.count).map(|i| self.scene(i)).collect()
    }
}

pub fn transmission_mse(t_est: &ScalarMap, t_gt: &ScalarMap) -> Result<f64> {
    t_est.check_same_dims(t_gt, "transmission maps")?;
    let sum: f64 = t_est
        .data()
        .iter()
        .zip(t_gt.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / t_est.len() as f64)
}

pub fn psnr(a: &PlanarImage, b: &PlanarImage) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(SfpError::Dimension("psnr operands differ in size".into()));
    }
    let mut sum = 0.0;
    for c in 0..3 {
        sum += a
            .plane(c)
            .iter()
            .zip(b.plane(c))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>();
    }
    let mse = sum / (3 * a.pixel_count()) as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    })
}

/// Separable min filter over `(2r+1)²` replicated-border windows.
fn min_filter(map: &ScalarMap, radius: usize) -> ScalarMap {
    let (w, h) = map.dims();
    let r = radius as isize;
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut m = f64::INFINITY;
            for k in -r..=r {
                m = m.min(map.get_clamped(x as isize + k, y as isize));
            }
            rows[y * w + x] = m;
        }
    }
    let rows = ScalarMap::from_raw(w, h, rows);
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut m = f64::INFINITY;
            for k in -r..=r {
                m = m.min(rows.get_clamped(x as isize, y as isize + k));
            }
            out[y * w + x] = m;
        }
    }
    ScalarMap::from_raw(w, h, out)
}

/// Patch minimum over all three channels.
pub fn dark_channel(img: &PlanarImage, patch_radius: usize) -> ScalarMap {
    let pixel_min = (0..img.pixel_count())
        .map(|i| {
            let p = img.pixel(i);
            p[0].min(p[1]).min(p[2])
        })
        .collect();
    min_filter(
        &ScalarMap::from_raw(img.width(), img.height(), pixel_min),
        patch_radius,
    )
}

/// Airlight from the brightest 0.1% of the dark channel (mean image color there).
pub fn dark_channel_airlight(img: &PlanarImage, dark: &ScalarMap) -> [f64; 3] {
    let n = img.pixel_count();
    let k = ((0.001 * n as f64).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dark.data()[b].total_cmp(&dark.data()[a]));
    let mut sum = [0.0; 3];
    for &i in &order[..k] {
        let p = img.pixel(i);
        for c in 0..3 {
            sum[c] += p[c];
        }
    }
    sum.map(|s| (s / k as f64).clamp(spatial::AIRLIGHT_FLOOR, 1.0))
}

/// Dark-channel transmission `1 - ω · dark(I / A)`, without refinement.
pub fn dark_channel_baseline(img: &PlanarImage, patch_radius: usize) -> ScalarMap {
    let airlight = dark_channel_airlight(img, &dark_channel(img, patch_radius));
    let normalized = PlanarImage::from_planes_clamped(
        img.width(),
        img.height(),
        [0, 1, 2].map(|c| img.plane(c).iter().map(|v| v / airlight[c]).collect()),
    )
    .expect("same dims");
    dark_channel(&normalized, patch_radius).map(|d| (1.0 - DCP_OMEGA * d).clamp(0.0, 1.0))
}

/// Transmission error of the spectral-direction estimate and of the
/// dark-channel baseline on one scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionComparison {
    pub scene: usize,
    pub mse_sdp: f64,
    pub mse_dcp: f64,
}

pub fn compare_transmission(
    index: usize,
    scene: &SyntheticScene,
    params: &SpatialParams,
) -> Result<TransmissionComparison> {
    let dir =
        spatial::spectral_direction_with(&scene.degraded, params.patch_radius, params.gradient)?;
    let t_sdp = spatial::estimate_transmission(&scene.degraded, &dir)?;
    let t_dcp = dark_channel_baseline(&scene.degraded, params.patch_radius);
    Ok(TransmissionComparison {
        scene: index,
        mse_sdp: transmission_mse(&t_sdp.map, &scene.t_gt)?,
        mse_dcp: transmission_mse(&t_dcp, &scene.t_gt)?,
    })
}

/// One row of the DC-prior statistic: `|DC_clean,C - μ_degraded|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcDifference {
    pub pair: usize,
    pub channel: usize,
    pub dc_clean: f64,
    pub mu_degraded: f64,
    pub abs_diff: f64,
    /// Fraction of all rows whose difference is at most this one.
    pub cdf: f64,
}

pub fn dc_difference_stats(pairs: &[(PlanarImage, PlanarImage)]) -> Vec<DcDifference> {
    let mut rows = Vec::with_capacity(3 * pairs.len());
    for (k, (degraded, clean)) in pairs.iter().enumerate() {
        let dc_deg = [0, 1, 2].map(|c| fft2(&degraded.channel(c)).dc().re);
        let mu = (dc_deg[0] + dc_deg[1] + dc_deg[2]) / 3.0;
        for c in 0..3 {
            let dc_clean = fft2(&clean.channel(c)).dc().re;
            rows.push(DcDifference {
                pair: k,
                channel: c,
                dc_clean,
                mu_degraded: mu,
                abs_diff: (dc_clean - mu).abs(),
                cdf: 0.0,
            });
        }
    }
    let mut sorted: Vec<f64> = rows.iter().map(|r| r.abs_diff).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    for row in &mut rows {
        let at_most = sorted.partition_point(|&d| d <= row.abs_diff);
        row.cdf = at_most as f64 / n;
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialStat {
    pub image: usize,
    pub channel: usize,
    pub phi: f64,
}

pub fn radial_stats(images: &[PlanarImage], thresh: f64, norm: RhoNorm) -> Result<Vec<RadialStat>> {
    let mut rows = Vec::with_capacity(3 * images.len());
    for (k, img) in images.iter().enumerate() {
        for c in 0..3 {
            let phi = low_freq_percentage_with(&fft2(&img.channel(c)), thresh, norm)?;
            rows.push(RadialStat {
                image: k,
                channel: c,
                phi,
            });
        }
    }
    Ok(rows)
}
