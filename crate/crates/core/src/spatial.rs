//! Spatial-domain restoration.
//!
//! The transmission is read off the projection of the inverted image `1 - I`
//! onto the local spectral direction (the patch-averaged, normalized triple of
//! per-channel gradient magnitudes). The atmospheric light is the mean color of
//! the lowest-transmission pixels and the scene radiance follows from inverting
//! `I = J t + A (1 - t)` with a guided-filter-refined transmission.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SfpError};
use crate::image::{box_mean, luminance, PlanarImage, ScalarMap};

/// Direction used where the gradient triple vanishes.
pub const FALLBACK_DIRECTION: [f64; 3] = [
    0.577_350_269_189_625_8,
    0.577_350_269_189_625_8,
    0.577_350_269_189_625_8,
];

const DEGENERATE_NORM: f64 = 1e-12;

/// Fraction of darkest-transmission pixels averaged for the atmospheric light.
pub const AIRLIGHT_FRACTION: f64 = 0.001;
/// Fraction of lowest transmissions averaged into `t_min`.
pub const T_MIN_FRACTION: f64 = 0.05;
pub const T_MIN_FLOOR: f64 = 0.01;
pub const AIRLIGHT_FLOOR: f64 = 0.05;

/// How the three per-channel 2-D gradients are collapsed into one 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientOperator {
    /// Euclidean magnitude `sqrt(gx² + gy²)` of the central difference.
    #[default]
    Magnitude,
    /// `|gx| + |gy|`.
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialParams {
    pub patch_radius: usize,
    pub gf_radius: usize,
    pub gf_eps: f64,
    pub gradient: GradientOperator,
}

impl Default for SpatialParams {
    fn default() -> Self {
        Self {
            patch_radius: 7,
            gf_radius: 16,
            gf_eps: 1e-3,
            gradient: GradientOperator::Magnitude,
        }
    }
}

/// Per-pixel unit 3-vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionField {
    width: usize,
    height: usize,
    vectors: Vec<[f64; 3]>,
    degenerate: bool,
}

impl DirectionField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn vectors(&self) -> &[[f64; 3]] {
        &self.vectors
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.vectors[y * self.width + x]
    }

    /// Set when the whole image had no gradient and every pixel carries the
    /// fallback direction.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atmosphere(pub [f64; 3]);

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionMap {
    pub map: ScalarMap,
    pub t_min: f64,
}

impl TransmissionMap {
    /// Wraps a known transmission; values are clamped to `[0, 1]` and `t_min`
    /// is computed the same way as for estimates.
    pub fn from_map(map: &ScalarMap) -> Self {
        let map = map.clamped(0.0, 1.0);
        let t_min = lower_bound(map.data());
        Self { map, t_min }
    }
}

/// Per-channel gradient triple at every pixel, central differences with
/// replicated borders.
fn gradient_triples(img: &PlanarImage, op: GradientOperator) -> Vec<[f64; 3]> {
    let (w, h) = img.dims();
    let mut out = vec![[0.0; 3]; w * h];
    for c in 0..3 {
        let p = img.plane(c);
        for y in 0..h {
            let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
            for x in 0..w {
                let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
                let gx = 0.5 * (p[y * w + xr] - p[y * w + xl]);
                let gy = 0.5 * (p[yd * w + x] - p[yu * w + x]);
                out[y * w + x][c] = match op {
                    GradientOperator::Magnitude => gx.hypot(gy),
                    GradientOperator::L1 => gx.abs() + gy.abs(),
                };
            }
        }
    }
    out
}

#[inline]
pub(crate) fn normalize_or_fallback(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n < DEGENERATE_NORM {
        FALLBACK_DIRECTION
    } else {
        [v[0] / n, v[1] / n, v[2] / n]
    }
}

pub fn spectral_direction(img: &PlanarImage, patch_radius: usize) -> Result<DirectionField> {
    spectral_direction_with(img, patch_radius, GradientOperator::Magnitude)
}

pub fn spectral_direction_with(
    img: &PlanarImage,
    patch_radius: usize,
    op: GradientOperator,
) -> Result<DirectionField> {
    if patch_radius < 1 {
        return Err(SfpError::Param("patch radius must be at least 1".into()));
    }
    let (w, h) = img.dims();
    let triples = gradient_triples(img, op);
    let degenerate = triples
        .iter()
        .all(|t| (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt() < DEGENERATE_NORM);
    if degenerate {
        return Ok(DirectionField {
            width: w,
            height: h,
            vectors: vec![FALLBACK_DIRECTION; w * h],
            degenerate,
        });
    }

    let unit: Vec<[f64; 3]> = triples.into_iter().map(normalize_or_fallback).collect();
    let averaged: Vec<ScalarMap> = (0..3)
        .map(|c| {
            let comp = ScalarMap::from_raw(w, h, unit.iter().map(|v| v[c]).collect());
            box_mean(&comp, patch_radius)
        })
        .collect();
    let vectors = (0..w * h)
        .map(|i| {
            normalize_or_fallback([
                averaged[0].data()[i],
                averaged[1].data()[i],
                averaged[2].data()[i],
            ])
        })
        .collect();
    Ok(DirectionField {
        width: w,
        height: h,
        vectors,
        degenerate,
    })
}

/// Mean of the lowest `T_MIN_FRACTION` of `values`, floored at `T_MIN_FLOOR`.
fn lower_bound(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((T_MIN_FRACTION * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let mean = sorted[..k].iter().sum::<f64>() / k as f64;
    mean.clamp(T_MIN_FLOOR, 1.0)
}

/// Projects `1 - I` onto the spectral direction and averages the projected
/// vector's components.
pub fn estimate_transmission(img: &PlanarImage, dir: &DirectionField) -> Result<TransmissionMap> {
    img.check_same_dims(dir.width, dir.height, "direction field")?;
    let data: Vec<f64> = (0..img.pixel_count())
        .map(|i| {
            let s = dir.vectors[i];
            let p = img.pixel(i);
            let proj = s[0] * (1.0 - p[0]) + s[1] * (1.0 - p[1]) + s[2] * (1.0 - p[2]);
            let t = (proj * s[0] + proj * s[1] + proj * s[2]) / 3.0;
            t.clamp(0.0, 1.0)
        })
        .collect();
    let t_min = lower_bound(&data);
    Ok(TransmissionMap {
        map: ScalarMap::from_raw(img.width(), img.height(), data),
        t_min,
    })
}

/// Mean color over the `⌈0.001·N⌉` lowest-transmission pixels, ties broken by
/// row-major index.
pub fn estimate_atmospheric_light(img: &PlanarImage, t: &TransmissionMap) -> Result<Atmosphere> {
    img.check_same_dims(t.map.width(), t.map.height(), "transmission")?;
    let n = img.pixel_count();
    let k = ((AIRLIGHT_FRACTION * n as f64).ceil() as usize).clamp(1, n);
    let values = t.map.data();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps row-major order among equal transmissions
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut sum = [0.0; 3];
    for &i in &order[..k] {
        let p = img.pixel(i);
        for c in 0..3 {
            sum[c] += p[c];
        }
    }
    Ok(Atmosphere(
        sum.map(|s| (s / k as f64).clamp(AIRLIGHT_FLOOR, 1.0)),
    ))
}

/// Grayscale guided filter over `(2r+1)²` replicated-border windows.
pub fn guided_filter(
    p: &ScalarMap,
    guide: &ScalarMap,
    radius: usize,
    eps: f64,
) -> Result<ScalarMap> {
    p.check_same_dims(guide, "guided filter")?;
    if radius < 1 {
        return Err(SfpError::Param(
            "guided filter radius must be at least 1".into(),
        ));
    }
    if !(eps > 0.0) {
        return Err(SfpError::Param(format!(
            "guided filter eps must be positive, got {eps}"
        )));
    }
    let (w, h) = p.dims();
    let zip = |f: fn(f64, f64) -> f64, a: &ScalarMap, b: &ScalarMap| {
        ScalarMap::from_raw(
            w,
            h,
            a.data()
                .iter()
                .zip(b.data())
                .map(|(&x, &y)| f(x, y))
                .collect(),
        )
    };

    let mean_i = box_mean(guide, radius);
    let mean_p = box_mean(p, radius);
    let corr_ii = box_mean(&zip(|a, b| a * b, guide, guide), radius);
    let corr_ip = box_mean(&zip(|a, b| a * b, guide, p), radius);

    let mut a = Vec::with_capacity(w * h);
    let mut b = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let mi = mean_i.data()[i];
        let mp = mean_p.data()[i];
        let var = corr_ii.data()[i] - mi * mi;
        let cov = corr_ip.data()[i] - mi * mp;
        let ai = cov / (var + eps);
        a.push(ai);
        b.push(mp - ai * mi);
    }
    let mean_a = box_mean(&ScalarMap::from_raw(w, h, a), radius);
    let mean_b = box_mean(&ScalarMap::from_raw(w, h, b), radius);
    let q = (0..w * h)
        .map(|i| mean_a.data()[i] * guide.data()[i] + mean_b.data()[i])
        .collect();
    ScalarMap::new(w, h, q)
}

/// Algebraic inversion `J = (I - A) / max(t, floor) + A`, unclamped.
///
/// Written as `I + (I - A)(1/t - 1)` so a unit transmission returns `I`
/// bit-for-bit.
pub fn recover_radiance(
    img: &PlanarImage,
    t: &ScalarMap,
    airlight: Atmosphere,
    floor: f64,
) -> Result<[Vec<f64>; 3]> {
    img.check_same_dims(t.width(), t.height(), "transmission")?;
    let mut planes = [
        Vec::with_capacity(img.pixel_count()),
        Vec::with_capacity(img.pixel_count()),
        Vec::with_capacity(img.pixel_count()),
    ];
    for i in 0..img.pixel_count() {
        let tt = t.data()[i].max(floor);
        let gain = 1.0 / tt - 1.0;
        let p = img.pixel(i);
        for c in 0..3 {
            planes[c].push(p[c] + (p[c] - airlight.0[c]) * gain);
        }
    }
    Ok(planes)
}

/// Refines `max(t, t_min)` with a luminance-guided filter. The result is
/// floored at `t_min` and capped at 1.
pub fn refine_transmission(
    img: &PlanarImage,
    t: &TransmissionMap,
    gf_radius: usize,
    gf_eps: f64,
) -> Result<ScalarMap> {
    let floored = t.map.map(|v| v.max(t.t_min));
    let refined = guided_filter(&floored, &luminance(img), gf_radius, gf_eps)?;
    Ok(refined.clamped(t.t_min, 1.0))
}

pub fn invert_asm(
    img: &PlanarImage,
    t: &TransmissionMap,
    airlight: Atmosphere,
    gf_radius: usize,
    gf_eps: f64,
) -> Result<PlanarImage> {
    let refined = refine_transmission(img, t, gf_radius, gf_eps)?;
    let planes = recover_radiance(img, &refined, airlight, t.t_min)?;
    PlanarImage::from_planes_clamped(img.width(), img.height(), planes)
}

/// Everything the spatial branch produces for one image.
#[derive(Debug, Clone)]
pub struct SpatialRestoration {
    pub direction_degenerate: bool,
    pub transmission: TransmissionMap,
    pub refined: ScalarMap,
    pub airlight: Atmosphere,
    pub restored: PlanarImage,
}

pub fn restore(img: &PlanarImage, params: &SpatialParams) -> Result<SpatialRestoration> {
    let dir = spectral_direction_with(img, params.patch_radius, params.gradient)?;
    let transmission = estimate_transmission(img, &dir)?;
    let airlight = estimate_atmospheric_light(img, &transmission)?;
    let refined = refine_transmission(img, &transmission, params.gf_radius, params.gf_eps)?;
    let planes = recover_radiance(img, &refined, airlight, transmission.t_min)?;
    let restored = PlanarImage::from_planes_clamped(img.width(), img.height(), planes)?;
    Ok(SpatialRestoration {
        direction_degenerate: dir.is_degenerate(),
        transmission,
        refined,
        airlight,
        restored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, w: usize, h: usize) -> PlanarImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PlanarImage::from_fn(w, h, |_, _| [rng.gen(), rng.gen(), rng.gen()]).unwrap()
    }

    fn norm(v: [f64; 3]) -> f64 {
        (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
    }

    #[test]
    fn constant_image_is_degenerate() {
        let img = PlanarImage::filled(12, 10, [0.4; 3]).unwrap();
        let dir = spectral_direction(&img, 2).unwrap();
        assert!(dir.is_degenerate());
        assert!(dir.vectors().iter().all(|v| *v == FALLBACK_DIRECTION));
        assert!((norm(FALLBACK_DIRECTION) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn red_ramp_points_along_red() {
        let img = PlanarImage::from_fn(16, 16, |x, _| [x as f64 / 15.0, 0.3, 0.6]).unwrap();
        let dir = spectral_direction(&img, 3).unwrap();
        assert!(!dir.is_degenerate());
        for y in 3..13 {
            for x in 3..13 {
                let v = dir.get(x, y);
                assert!((v[0] - 1.0).abs() < 1e-9 && v[1].abs() < 1e-9 && v[2].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn directions_are_unit_and_radius_zero_is_rejected() {
        let img = random_image(4, 20, 14);
        for op in [GradientOperator::Magnitude, GradientOperator::L1] {
            let dir = spectral_direction_with(&img, 2, op).unwrap();
            assert!(dir.vectors().iter().all(|v| (norm(*v) - 1.0).abs() < 1e-9));
        }
        assert!(matches!(
            spectral_direction(&img, 0),
            Err(SfpError::Param(_))
        ));
    }

    #[test]
    fn transmission_formula_on_single_direction() {
        let img = PlanarImage::filled(8, 8, [0.5, 0.7, 0.8]).unwrap();
        let dir = DirectionField {
            width: 8,
            height: 8,
            vectors: vec![[1.0, 0.0, 0.0]; 64],
            degenerate: false,
        };
        let t = estimate_transmission(&img, &dir).unwrap();
        assert!((t.map.get(2, 5) - 0.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pure_haze_pixel_has_zero_transmission() {
        let img = PlanarImage::filled(8, 8, [1.0; 3]).unwrap();
        let dir = spectral_direction(&img, 1).unwrap();
        let t = estimate_transmission(&img, &dir).unwrap();
        assert!(t.map.data().iter().all(|&v| v == 0.0));
        assert_eq!(t.t_min, T_MIN_FLOOR);
    }

    #[test]
    fn transmission_rejects_mismatched_field() {
        let img = random_image(1, 8, 8);
        let dir = spectral_direction(&random_image(2, 9, 8), 1).unwrap();
        assert!(matches!(
            estimate_transmission(&img, &dir),
            Err(SfpError::Dimension(_))
        ));
    }

    #[test]
    fn t_min_is_mean_of_lowest_five_percent() {
        let values: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        // lowest five: 0.00..0.04, mean 0.02
        assert!((lower_bound(&values) - 0.02).abs() < 1e-15);
        assert_eq!(lower_bound(&[0.0; 40]), T_MIN_FLOOR);
    }

    #[test]
    fn airlight_from_lowest_transmission_region() {
        let img = PlanarImage::from_fn(40, 40, |x, y| {
            if x < 4 && y < 4 {
                [0.9, 0.8, 0.7]
            } else {
                [0.2, 0.3, 0.1]
            }
        })
        .unwrap();
        let t = ScalarMap::from_fn(40, 40, |x, y| if x < 4 && y < 4 { 0.05 } else { 0.8 });
        let a = estimate_atmospheric_light(&img, &TransmissionMap::from_map(&t)).unwrap();
        // ⌈0.001·1600⌉ = 2 pixels, both inside the bright block
        for (got, want) in a.0.iter().zip([0.9, 0.8, 0.7]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn airlight_tie_break_is_row_major() {
        let img = random_image(8, 50, 40);
        let t = TransmissionMap::from_map(&ScalarMap::filled(50, 40, 0.5));
        let a = estimate_atmospheric_light(&img, &t).unwrap();
        let k = (0.001f64 * 2000.0).ceil() as usize;
        for c in 0..3 {
            let want =
                (img.plane(c)[..k].iter().sum::<f64>() / k as f64).clamp(AIRLIGHT_FLOOR, 1.0);
            assert_eq!(a.0[c], want);
        }
    }

    #[test]
    fn airlight_is_floored() {
        let img = PlanarImage::filled(10, 10, [0.0, 0.01, 0.5]).unwrap();
        let t = TransmissionMap::from_map(&ScalarMap::filled(10, 10, 0.3));
        let a = estimate_atmospheric_light(&img, &t).unwrap();
        assert_eq!(a.0, [AIRLIGHT_FLOOR, AIRLIGHT_FLOOR, 0.5]);
    }

    #[test]
    fn guided_filter_constant_and_self_guided() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let guide = ScalarMap::from_fn(24, 24, |_, _| rng.gen::<f64>());
        let c = ScalarMap::filled(24, 24, 0.37);
        let out = guided_filter(&c, &guide, 3, 1e-3).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.37).abs() < 1e-12));

        let out = guided_filter(&guide, &guide, 2, 1e-12).unwrap();
        for y in 2..22 {
            for x in 2..22 {
                assert!((out.get(x, y) - guide.get(x, y)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn guided_filter_parameter_errors() {
        let m = ScalarMap::filled(8, 8, 0.5);
        assert!(matches!(
            guided_filter(&m, &ScalarMap::filled(9, 8, 0.5), 1, 1e-3),
            Err(SfpError::Dimension(_))
        ));
        assert!(matches!(
            guided_filter(&m, &m, 0, 1e-3),
            Err(SfpError::Param(_))
        ));
        assert!(matches!(
            guided_filter(&m, &m, 1, 0.0),
            Err(SfpError::Param(_))
        ));
    }

    #[test]
    fn unit_transmission_is_identity() {
        let img = random_image(6, 20, 20);
        let t = TransmissionMap {
            map: ScalarMap::filled(20, 20, 1.0),
            t_min: 1.0,
        };
        let out = invert_asm(&img, &t, Atmosphere([0.8, 0.85, 0.9]), 4, 1e-3).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn algebraic_inversion_recovers_radiance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (w, h) = (16, 12);
        let clean = random_image(22, w, h);
        let t = ScalarMap::from_fn(w, h, |_, _| rng.gen_range(0.3..1.0));
        let a = [0.85, 0.9, 0.95];
        let hazy = PlanarImage::from_fn(w, h, |x, y| {
            let j = clean.get(x, y);
            let tt = t.get(x, y);
            [0, 1, 2].map(|c| j[c] * tt + a[c] * (1.0 - tt))
        })
        .unwrap();
        let planes = recover_radiance(&hazy, &t, Atmosphere(a), 0.01).unwrap();
        for c in 0..3 {
            for (got, want) in planes[c].iter().zip(clean.plane(c)) {
                assert!((got - want).abs() < 1e-6);
            }
        }
    }
}
