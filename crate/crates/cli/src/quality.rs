//! UCIQE, a no-reference colour quality score.

use sfp_core::image::rgb_to_lab;
use sfp_core::PlanarImage;

/// Weights of chroma spread, lightness contrast and mean saturation from the
/// metric's original publication.
pub const UCIQE_COEFFS: [f64; 3] = [0.4680, 0.2745, 0.2576];

/// Nearest-rank percentile of unsorted data, `p` in `[0, 100]`.
fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// `c1·σ_C + c2·con_L + c3·μ_S` with chroma `C = √(a² + b²) / 100`, lightness
/// contrast `(L₉₉ − L₁) / 100` and saturation `C / √(C² + L²)` in Lab units.
pub fn uciqe(img: &PlanarImage, coeffs: [f64; 3]) -> f64 {
    let lab = rgb_to_lab(img);
    let n = lab.l.len() as f64;
    let chroma: Vec<f64> = lab.a.iter().zip(&lab.b).map(|(a, b)| a.hypot(*b)).collect();
    let mean_c = chroma.iter().sum::<f64>() / n;
    let var_c = chroma
        .iter()
        .map(|c| (c - mean_c) * (c - mean_c))
        .sum::<f64>()
        / n;
    let sigma_c = var_c.sqrt() / 100.0;
    let contrast = (percentile(&lab.l, 99.0) - percentile(&lab.l, 1.0)) / 100.0;
    let saturation = chroma
        .iter()
        .zip(&lab.l)
        .map(|(c, l)| {
            let r = c.hypot(*l);
            if r > 1e-9 {
                c / r
            } else {
                0.0
            }
        })
        .sum::<f64>()
        / n;
    coeffs[0] * sigma_c + coeffs[1] * contrast + coeffs[2] * saturation
}
