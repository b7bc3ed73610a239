//! Lab-space fusion of the input, the spatial restoration and the frequency
//! enhancement, followed by gamma and highlight compression.
//!
//! Chroma (`a`, `b`) is blended with per-channel weights that favour sources
//! whose channel mean is closest to neutral. Lightness keeps the Haar
//! approximation band of the spatial restoration and takes the largest-magnitude
//! detail coefficient from any source.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SfpError};
use crate::image::{lab_to_rgb, luminance, rgb_to_lab, LabImage, PlanarImage, ScalarMap};

const HDR_WHITE_QUANTILE: f64 = 0.98;
const HDR_WHITE_FLOOR: f64 = 0.01;
const GAMMA_RANGE: (f64, f64) = (0.5, 2.5);

/// Weights of the (input, spatial, frequency) sources for the `a` and `b` channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub a: [f64; 3],
    pub b: [f64; 3],
}

fn softmax_neg_abs(means: [f64; 3]) -> [f64; 3] {
    // shift by the smallest |m| so the largest exponent is exactly 0
    let shift = means.iter().map(|m| m.abs()).fold(f64::INFINITY, f64::min);
    let e = means.map(|m| (-(m.abs() - shift)).exp());
    let total = e[0] + e[1] + e[2];
    e.map(|v| v / total)
}

/// Each argument is `[mean a, mean b]` of one source.
pub fn fusion_weights(means_i: [f64; 2], means_j: [f64; 2], means_e: [f64; 2]) -> FusionWeights {
    FusionWeights {
        a: softmax_neg_abs([means_i[0], means_j[0], means_e[0]]),
        b: softmax_neg_abs([means_i[1], means_j[1], means_e[1]]),
    }
}

fn check_lab_dims(images: [&LabImage; 3]) -> Result<()> {
    let (w, h) = (images[0].width, images[0].height);
    if images.iter().any(|im| (im.width, im.height) != (w, h)) {
        return Err(SfpError::Dimension("fusion sources differ in size".into()));
    }
    Ok(())
}

/// Weighted `a`/`b` planes and the weights used.
pub fn fuse_ab(
    i: &LabImage,
    j: &LabImage,
    e: &LabImage,
) -> Result<(Vec<f64>, Vec<f64>, FusionWeights)> {
    check_lab_dims([i, j, e])?;
    let weights = fusion_weights(
        [i.mean_a(), i.mean_b()],
        [j.mean_a(), j.mean_b()],
        [e.mean_a(), e.mean_b()],
    );
    let blend = |w: [f64; 3], planes: [&[f64]; 3]| -> Vec<f64> {
        (0..planes[0].len())
            .map(|k| w[0] * planes[0][k] + w[1] * planes[1][k] + w[2] * planes[2][k])
            .collect()
    };
    let a = blend(weights.a, [&i.a, &j.a, &e.a]);
    let b = blend(weights.b, [&i.b, &j.b, &e.b]);
    Ok((a, b, weights))
}

/// One-level orthonormal Haar decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletBands {
    pub ll: ScalarMap,
    /// Vertical detail (row differences).
    pub lh: ScalarMap,
    /// Horizontal detail (column differences).
    pub hl: ScalarMap,
    pub hh: ScalarMap,
    /// Size of the plane before replicate-padding to even dimensions.
    pub width: usize,
    pub height: usize,
}

pub fn dwt_haar(plane: &ScalarMap) -> WaveletBands {
    let (w, h) = plane.dims();
    let (bw, bh) = (w.div_ceil(2), h.div_ceil(2));
    let mut bands = [
        vec![0.0; bw * bh],
        vec![0.0; bw * bh],
        vec![0.0; bw * bh],
        vec![0.0; bw * bh],
    ];
    for by in 0..bh {
        for bx in 0..bw {
            let (x, y) = (2 * bx as isize, 2 * by as isize);
            let p00 = plane.get_clamped(x, y);
            let p01 = plane.get_clamped(x + 1, y);
            let p10 = plane.get_clamped(x, y + 1);
            let p11 = plane.get_clamped(x + 1, y + 1);
            let k = by * bw + bx;
            bands[0][k] = 0.5 * (p00 + p01 + p10 + p11);
            bands[1][k] = 0.5 * (p00 + p01 - p10 - p11);
            bands[2][k] = 0.5 * (p00 - p01 + p10 - p11);
            bands[3][k] = 0.5 * (p00 - p01 - p10 + p11);
        }
    }
    let [ll, lh, hl, hh] = bands.map(|b| ScalarMap::from_raw(bw, bh, b));
    WaveletBands {
        ll,
        lh,
        hl,
        hh,
        width: w,
        height: h,
    }
}

pub fn idwt_haar(bands: &WaveletBands) -> ScalarMap {
    let (bw, bh) = bands.ll.dims();
    let (w, h) = (bands.width, bands.height);
    let mut out = vec![0.0; w * h];
    let put = |out: &mut Vec<f64>, x: usize, y: usize, v: f64| {
        if x < w && y < h {
            out[y * w + x] = v;
        }
    };
    for by in 0..bh {
        for bx in 0..bw {
            let (ll, lh, hl, hh) = (
                bands.ll.get(bx, by),
                bands.lh.get(bx, by),
                bands.hl.get(bx, by),
                bands.hh.get(bx, by),
            );
            let (x, y) = (2 * bx, 2 * by);
            put(&mut out, x, y, 0.5 * (ll + lh + hl + hh));
            put(&mut out, x + 1, y, 0.5 * (ll + lh - hl - hh));
            put(&mut out, x, y + 1, 0.5 * (ll - lh + hl - hh));
            put(&mut out, x + 1, y + 1, 0.5 * (ll - lh - hl + hh));
        }
    }
    ScalarMap::from_raw(w, h, out)
}

fn max_abs(a: &ScalarMap, b: &ScalarMap, c: &ScalarMap) -> ScalarMap {
    let data = (0..a.len())
        .map(|k| {
            let (x, y, z) = (a.data()[k], b.data()[k], c.data()[k]);
            let mut best = x;
            if y.abs() > best.abs() {
                best = y;
            }
            if z.abs() > best.abs() {
                best = z;
            }
            best
        })
        .collect();
    ScalarMap::from_raw(a.width(), a.height(), data)
}

/// Band-wise fusion of the lightness planes, clamped to `[0, 100]`.
pub fn fuse_l_bands(i_l: &ScalarMap, j_l: &ScalarMap, e_l: &ScalarMap) -> Result<WaveletBands> {
    i_l.check_same_dims(j_l, "lightness fusion")?;
    i_l.check_same_dims(e_l, "lightness fusion")?;
    let (bi, bj, be) = (dwt_haar(i_l), dwt_haar(j_l), dwt_haar(e_l));
    Ok(WaveletBands {
        lh: max_abs(&bi.lh, &bj.lh, &be.lh),
        hl: max_abs(&bi.hl, &bj.hl, &be.hl),
        hh: max_abs(&bi.hh, &bj.hh, &be.hh),
        ll: bj.ll,
        width: bj.width,
        height: bj.height,
    })
}

pub fn fuse_l(i_l: &ScalarMap, j_l: &ScalarMap, e_l: &ScalarMap) -> Result<ScalarMap> {
    Ok(idwt_haar(&fuse_l_bands(i_l, j_l, e_l)?).clamped(0.0, 100.0))
}

/// Gamma exponent and HDR white point chosen for an image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneParams {
    pub gamma: f64,
    pub white: f64,
}

/// `γ = clamp(ln 0.5 / ln(mean + 1e-6), 0.5, 2.5)`.
pub fn adaptive_gamma(mean_luminance: f64) -> f64 {
    let g = 0.5f64.ln() / (mean_luminance + 1e-6).ln();
    if g.is_finite() {
        g.clamp(GAMMA_RANGE.0, GAMMA_RANGE.1)
    } else {
        // mean ≈ 1 - 1e-6 puts the log at zero
        GAMMA_RANGE.1
    }
}

/// Highlight compression `s (1 + s/w²) / (1 + s)`, which maps `w` to 1.
#[inline]
pub fn hdr_compress(s: f64, white: f64) -> f64 {
    (s * (1.0 + s / (white * white)) / (1.0 + s)).clamp(0.0, 1.0)
}

fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = (q * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx]
}

/// Tone parameters that [`postprocess`] would use on `img`.
pub fn tone_params(img: &PlanarImage) -> ToneParams {
    let gamma = adaptive_gamma(luminance(img).mean());
    let corrected = apply_gamma(img, gamma);
    let white = quantile(luminance(&corrected).data(), HDR_WHITE_QUANTILE).max(HDR_WHITE_FLOOR);
    ToneParams { gamma, white }
}

fn apply_gamma(img: &PlanarImage, gamma: f64) -> PlanarImage {
    let planes = img
        .planes()
        .clone()
        .map(|p| p.into_iter().map(|s| s.powf(gamma)).collect());
    PlanarImage::from_planes_clamped(img.width(), img.height(), planes).expect("same dims")
}

/// Applies the tone curve for fixed parameters.
pub fn apply_tone(img: &PlanarImage, tone: ToneParams) -> PlanarImage {
    let planes = img.planes().clone().map(|p| {
        p.into_iter()
            .map(|s| hdr_compress(s.powf(tone.gamma), tone.white))
            .collect()
    });
    PlanarImage::from_planes_clamped(img.width(), img.height(), planes).expect("same dims")
}

pub fn postprocess(img: &PlanarImage) -> PlanarImage {
    postprocess_with_params(img).0
}

pub fn postprocess_with_params(img: &PlanarImage) -> (PlanarImage, ToneParams) {
    let tone = tone_params(img);
    (apply_tone(img, tone), tone)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FusionOptions {
    /// Plain per-pixel Lab average instead of weighted chroma and Haar lightness.
    pub naive: bool,
    pub skip_postprocess: bool,
}

#[derive(Debug, Clone)]
pub struct FusionOutput {
    pub image: PlanarImage,
    /// Present unless the naive average was used.
    pub weights: Option<FusionWeights>,
    /// Present unless post-processing was skipped.
    pub tone: Option<ToneParams>,
}

pub fn fuse(
    i: &PlanarImage,
    j: &PlanarImage,
    e: &PlanarImage,
    options: FusionOptions,
) -> Result<FusionOutput> {
    if i.dims() != j.dims() || i.dims() != e.dims() {
        return Err(SfpError::Dimension("fusion sources differ in size".into()));
    }
    let (li, lj, le) = (rgb_to_lab(i), rgb_to_lab(j), rgb_to_lab(e));
    let (l, a, b, weights) = if options.naive {
        let avg = |p: [&[f64]; 3]| -> Vec<f64> {
            (0..p[0].len())
                .map(|k| (p[0][k] + p[1][k] + p[2][k]) / 3.0)
                .collect()
        };
        (
            avg([&li.l, &lj.l, &le.l]),
            avg([&li.a, &lj.a, &le.a]),
            avg([&li.b, &lj.b, &le.b]),
            None,
        )
    } else {
        let (a, b, weights) = fuse_ab(&li, &lj, &le)?;
        let l = fuse_l(&li.l_map(), &lj.l_map(), &le.l_map())?;
        (l.into_data(), a, b, Some(weights))
    };
    let fused = lab_to_rgb(&LabImage {
        width: i.width(),
        height: i.height(),
        l,
        a,
        b,
    });
    if options.skip_postprocess {
        return Ok(FusionOutput {
            image: fused,
            weights,
            tone: None,
        });
    }
    let (image, tone) = postprocess_with_params(&fused);
    Ok(FusionOutput {
        image,
        weights,
        tone: Some(tone),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(seed: u64, w: usize, h: usize, scale: f64) -> ScalarMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarMap::from_fn(w, h, |_, _| scale * rng.gen::<f64>())
    }

    #[test]
    fn weights_symmetry_and_arithmetic() {
        let w = fusion_weights([3.0, -1.0], [3.0, 1.0], [-3.0, -1.0]);
        for v in w.a.iter().chain(&w.b) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let w = fusion_weights([0.0, 0.0], [10.0, 10.0], [-10.0, 10.0]);
        let expected = 1.0 / (1.0 + 2.0 * (-10f64).exp());
        assert!((w.a[0] - expected).abs() < 1e-15);
        assert!((w.a[0] - 0.999909).abs() < 1e-6);
    }

    #[test]
    fn haar_constant_plane() {
        let b = dwt_haar(&ScalarMap::filled(8, 6, 0.7));
        assert!(b.ll.data().iter().all(|&v| (v - 1.4).abs() < 1e-15));
        for band in [&b.lh, &b.hl, &b.hh] {
            assert!(band.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn haar_odd_dims_round_trip() {
        let x = random_map(4, 9, 7, 1.0);
        let b = dwt_haar(&x);
        assert_eq!(b.ll.dims(), (5, 4));
        let back = idwt_haar(&b);
        assert_eq!(back.dims(), (9, 7));
        for (a, c) in x.data().iter().zip(back.data()) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn fuse_l_keeps_spatial_base_and_strongest_detail() {
        let j = ScalarMap::filled(16, 16, 50.0);
        let i = ScalarMap::from_fn(16, 16, |x, _| if x < 7 { 20.0 } else { 80.0 });
        let e = random_map(2, 16, 16, 1.0).map(|v| 50.0 + v);
        let bands = fuse_l_bands(&i, &j, &e).unwrap();
        let bj = dwt_haar(&j);
        assert_eq!(bands.ll, bj.ll);
        // the edge between columns 6 and 7 lands inside block 3 of the horizontal band
        let bi = dwt_haar(&i);
        for y in 0..8 {
            assert_eq!(bands.hl.get(3, y), bi.hl.get(3, y));
            assert!(bi.hl.get(3, y).abs() > 50.0);
        }
        let out = fuse_l(&i, &j, &e).unwrap();
        assert!(out.data().iter().all(|v| (0.0..=100.0).contains(v)));
        assert!((out.get(6, 3) - out.get(7, 3)).abs() > 50.0);
    }

    #[test]
    fn fuse_l_identical_inputs() {
        let x = random_map(7, 12, 10, 100.0);
        let out = fuse_l(&x, &x, &x).unwrap();
        for (a, b) in x.data().iter().zip(out.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn fuse_rejects_mismatch() {
        let a = ScalarMap::filled(8, 8, 1.0);
        let b = ScalarMap::filled(10, 8, 1.0);
        assert!(matches!(fuse_l(&a, &b, &a), Err(SfpError::Dimension(_))));
        let x = PlanarImage::filled(8, 8, [0.5; 3]).unwrap();
        let y = PlanarImage::filled(8, 9, [0.5; 3]).unwrap();
        assert!(fuse(&x, &y, &x, FusionOptions::default()).is_err());
    }

    #[test]
    fn gamma_rule() {
        assert!((adaptive_gamma(0.5) - 1.0).abs() < 1e-5);
        // ln 0.5 / ln 0.1 ≈ 0.301 lies below the lower clamp
        assert_eq!(adaptive_gamma(0.1), 0.5);
        assert!((adaptive_gamma(0.3) - 0.5f64.ln() / 0.300001f64.ln()).abs() < 1e-12);
        assert_eq!(adaptive_gamma(0.95), 2.5);
    }

    #[test]
    fn hdr_maps_white_point_to_one_and_is_monotone() {
        assert!((hdr_compress(0.8, 0.8) - 1.0).abs() < 1e-15);
        let mut prev = 0.0;
        for k in 0..=1000 {
            let v = hdr_compress(k as f64 / 1000.0, 0.9);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn postprocess_brightens_dark_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img =
            PlanarImage::from_fn(16, 16, |_, _| [0; 3].map(|_| rng.gen_range(0.0..0.2))).unwrap();
        let out = postprocess(&img);
        assert!(luminance(&out).mean() > luminance(&img).mean());
    }

    #[test]
    fn fuse_identical_inputs_is_postprocess() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = PlanarImage::from_fn(20, 18, |_, _| [rng.gen(), rng.gen(), rng.gen()]).unwrap();
        let fused = fuse(&x, &x, &x, FusionOptions::default()).unwrap();
        let pp = postprocess(&x);
        for c in 0..3 {
            for (a, b) in fused.image.plane(c).iter().zip(pp.plane(c)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn neutral_sources_pull_chroma_toward_zero() {
        let (w, h) = (16, 16);
        let colored = PlanarImage::filled(w, h, [0.8, 0.3, 0.2]).unwrap();
        let gray = PlanarImage::filled(w, h, [0.5; 3]).unwrap();
        let (li, lg) = (rgb_to_lab(&colored), rgb_to_lab(&gray));
        let (a, b, weights) = fuse_ab(&li, &lg, &lg).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&a).abs() < li.mean_a().abs());
        assert!(mean(&b).abs() < li.mean_b().abs());
        assert!(weights.a[0] < weights.a[1]);
    }
}
