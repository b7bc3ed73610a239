//! Frequency-domain enhancement.
//!
//! Each channel is multiplied in the Fourier domain by a radial mask
//! `M(ρ) = α - exp(-(ρ/β)²)`. `α` pins the enhanced DC coefficient to the
//! cross-channel mean DC `μ` (since `M(0) = α - 1`), and `β` is searched so
//! the share of spectral magnitude at low radial frequency lands near 1%.
//!
//! Spectra use the unshifted layout (DC at `(0, 0)`) and the forward transform
//! is scaled by `1/(H·W)`, so the DC coefficient equals the spatial mean.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SfpError};
use crate::image::{PlanarImage, ScalarMap};
use crate::minimize::brent_bounded;

pub const DEFAULT_RHO_THRESHOLD: f64 = 0.001;
pub const DEFAULT_PHI_TARGET: f64 = 0.01;
/// Channel means below this make `α = μ / DC + 1` meaningless.
pub const MIN_CHANNEL_MEAN: f64 = 1e-4;
/// Number of non-DC bins added to the low set when the threshold selects DC only.
pub const FALLBACK_NEIGHBOURS: usize = 8;

const IMAG_TOLERANCE: f64 = 1e-9;
const SCAN_POINTS: usize = 24;

/// Normalization of the radial frequency coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoNorm {
    /// Cycles per pixel on each axis: `ρ = sqrt((u/W)² + (v/H)²) ∈ [0, √2/2]`.
    #[default]
    Cycles,
    /// Isotropic bin distance divided by the half-diagonal, `ρ ∈ [0, 1]`.
    Diagonal,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    width: usize,
    height: usize,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(width: usize, height: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != width * height || width == 0 || height == 0 {
            return Err(SfpError::Dimension(format!(
                "spectrum {width}x{height} with {} coefficients",
                coeffs.len()
            )));
        }
        Ok(Self {
            width,
            height,
            coeffs,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, u: usize, v: usize) -> Complex64 {
        self.coeffs[v * self.width + u]
    }

    pub fn dc(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// Pointwise product with a real mask of the same size.
    pub fn masked(&self, mask: &FreqMask) -> Result<Spectrum> {
        if (mask.width, mask.height) != (self.width, self.height) {
            return Err(SfpError::Dimension("mask and spectrum sizes differ".into()));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&mask.values)
            .map(|(c, m)| c * m)
            .collect();
        Ok(Spectrum {
            width: self.width,
            height: self.height,
            coeffs,
        })
    }
}

fn transform_2d(width: usize, height: usize, data: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (
            planner.plan_fft_inverse(width),
            planner.plan_fft_inverse(height),
        )
    } else {
        (
            planner.plan_fft_forward(width),
            planner.plan_fft_forward(height),
        )
    };
    for row in data.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = data[y * width + x];
        }
        col_fft.process(&mut column);
        for y in 0..height {
            data[y * width + x] = column[y];
        }
    }
}

pub fn fft2(channel: &ScalarMap) -> Spectrum {
    let (w, h) = channel.dims();
    let mut data: Vec<Complex64> = channel
        .data()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    transform_2d(w, h, &mut data, false);
    let scale = 1.0 / (w * h) as f64;
    for c in &mut data {
        *c *= scale;
    }
    Spectrum {
        width: w,
        height: h,
        coeffs: data,
    }
}

/// Inverse transform; fails if the result is not real within `1e-9`.
pub fn ifft2(spec: &Spectrum) -> Result<ScalarMap> {
    let mut data = spec.coeffs.clone();
    transform_2d(spec.width, spec.height, &mut data, true);
    let worst = data.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if worst > IMAG_TOLERANCE {
        return Err(SfpError::Numerical(format!(
            "inverse transform has imaginary residue {worst:e}; spectrum is not conjugate-symmetric"
        )));
    }
    ScalarMap::new(
        spec.width,
        spec.height,
        data.into_iter().map(|c| c.re).collect(),
    )
}

/// Signed frequency index in `[-n/2, n/2)`.
#[inline]
pub fn signed_index(i: usize, n: usize) -> isize {
    if i >= n.div_ceil(2) {
        i as isize - n as isize
    } else {
        i as isize
    }
}

/// Radial frequency of every bin, unshifted layout.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    width: usize,
    height: usize,
    rho: Vec<f64>,
}

impl RadialGrid {
    pub fn new(width: usize, height: usize, norm: RhoNorm) -> Self {
        let mut rho = Vec::with_capacity(width * height);
        let half_diag = ((width as f64 / 2.0).powi(2) + (height as f64 / 2.0).powi(2)).sqrt();
        for v in 0..height {
            let sv = signed_index(v, height) as f64;
            for u in 0..width {
                let su = signed_index(u, width) as f64;
                rho.push(match norm {
                    RhoNorm::Cycles => {
                        ((su / width as f64).powi(2) + (sv / height as f64).powi(2)).sqrt()
                    }
                    RhoNorm::Diagonal => (su * su + sv * sv).sqrt() / half_diag,
                });
            }
        }
        Self { width, height, rho }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.rho[v * self.width + u]
    }

    /// Bins counted as "low frequency": `ρ < thresh`, or DC plus its
    /// [`FALLBACK_NEIGHBOURS`] nearest bins when the threshold admits DC alone.
    pub fn low_set(&self, thresh: f64) -> Vec<bool> {
        let mut low: Vec<bool> = self.rho.iter().map(|&r| r < thresh).collect();
        low[0] = true;
        if low.iter().filter(|&&b| b).count() == 1 {
            let mut order: Vec<usize> = (1..self.rho.len()).collect();
            order.sort_by(|&a, &b| self.rho[a].total_cmp(&self.rho[b]));
            for &i in order.iter().take(FALLBACK_NEIGHBOURS) {
                low[i] = true;
            }
        }
        low
    }
}

/// Real, nonnegative frequency-domain gain.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqMask {
    width: usize,
    height: usize,
    values: Vec<f64>,
    alpha: f64,
    beta: f64,
}

impl FreqMask {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

#[inline]
pub fn mask_value(rho: f64, alpha: f64, beta: f64) -> f64 {
    let r = rho / beta;
    alpha - (-(r * r)).exp()
}

pub fn build_mask(width: usize, height: usize, alpha: f64, beta: f64) -> Result<FreqMask> {
    build_mask_on(
        &RadialGrid::new(width, height, RhoNorm::Cycles),
        alpha,
        beta,
    )
}

pub fn build_mask_on(grid: &RadialGrid, alpha: f64, beta: f64) -> Result<FreqMask> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(SfpError::Param(format!(
            "mask beta must be positive, got {beta}"
        )));
    }
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(SfpError::Param(format!(
            "mask alpha must be at least 1, got {alpha}"
        )));
    }
    let values = grid
        .rho
        .iter()
        .map(|&r| mask_value(r, alpha, beta))
        .collect();
    Ok(FreqMask {
        width: grid.width,
        height: grid.height,
        values,
        alpha,
        beta,
    })
}

pub fn low_freq_percentage(spec: &Spectrum, thresh: f64) -> Result<f64> {
    low_freq_percentage_with(spec, thresh, RhoNorm::Cycles)
}

/// Share of total spectral magnitude in the low-frequency set (DC included).
pub fn low_freq_percentage_with(spec: &Spectrum, thresh: f64, norm: RhoNorm) -> Result<f64> {
    let grid = RadialGrid::new(spec.width, spec.height, norm);
    let low = grid.low_set(thresh);
    let (mut num, mut den) = (0.0, 0.0);
    for (c, &is_low) in spec.coeffs.iter().zip(&low) {
        let m = c.norm();
        den += m;
        if is_low {
            num += m;
        }
    }
    if !(den > 0.0) {
        return Err(SfpError::DegenerateInput(
            "spectrum has zero total magnitude".into(),
        ));
    }
    Ok(num / den)
}

/// `α_C = μ / DC_C + 1` with `μ` the mean of the three DC coefficients.
pub fn alpha_from_dc(img: &PlanarImage) -> Result<[f64; 3]> {
    let dc = [0, 1, 2].map(|c| fft2(&img.channel(c)).dc().re);
    alpha_from_dc_values(dc)
}

pub fn alpha_from_dc_values(dc: [f64; 3]) -> Result<[f64; 3]> {
    if let Some(c) = dc.iter().position(|&d| d < MIN_CHANNEL_MEAN) {
        return Err(SfpError::DegenerateInput(format!(
            "channel {c} mean {:e} is below {MIN_CHANNEL_MEAN:e}",
            dc[c]
        )));
    }
    let mu = (dc[0] + dc[1] + dc[2]) / 3.0;
    Ok(dc.map(|d| mu / d + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqParams {
    pub rho_norm: RhoNorm,
    pub rho_threshold: f64,
    pub phi_target: f64,
    pub beta_lo: f64,
    pub beta_hi: f64,
    /// Relative bracket width at which the β search stops.
    pub tol: f64,
    pub max_evals: usize,
}

impl Default for FreqParams {
    fn default() -> Self {
        Self {
            rho_norm: RhoNorm::Cycles,
            rho_threshold: DEFAULT_RHO_THRESHOLD,
            phi_target: DEFAULT_PHI_TARGET,
            beta_lo: 1e-4,
            beta_hi: 0.75,
            tol: 1e-4,
            max_evals: 200,
        }
    }
}

impl FreqParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_lo > 0.0 && self.beta_lo < self.beta_hi && self.beta_hi.is_finite()) {
            return Err(SfpError::Param(format!(
                "beta bounds must satisfy 0 < lo < hi, got [{}, {}]",
                self.beta_lo, self.beta_hi
            )));
        }
        if !(self.rho_threshold > 0.0) || !(0.0..=1.0).contains(&self.phi_target) {
            return Err(SfpError::Param(
                "rho threshold must be positive and target in [0, 1]".into(),
            ));
        }
        if !(self.tol > 0.0) || self.max_evals < SCAN_POINTS + 1 {
            return Err(SfpError::Param(format!(
                "tol must be positive and the budget at least {} evaluations",
                SCAN_POINTS + 1
            )));
        }
        Ok(())
    }
}

/// Result of the β search for one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub beta: f64,
    /// `|Φ(β) - target|` at the returned β.
    pub objective: f64,
    /// `Φ` of the masked spectrum at the returned β.
    pub phi: f64,
    pub evaluations: usize,
    pub at_bound: bool,
}

/// Precomputed per-spectrum state for evaluating `Φ` of masked spectra.
///
/// `ρ²` splits into a column term plus a row term under both normalizations,
/// so each evaluation needs only `W + H` exponentials.
pub struct PhiObjective {
    width: usize,
    magnitude: Vec<f64>,
    col_sq: Vec<f64>,
    row_sq: Vec<f64>,
    low: Vec<bool>,
    alpha: f64,
}

fn axis_terms(width: usize, height: usize, norm: RhoNorm) -> (Vec<f64>, Vec<f64>) {
    let (sx, sy) = match norm {
        RhoNorm::Cycles => (width as f64, height as f64),
        RhoNorm::Diagonal => {
            let half_diag = ((width as f64 / 2.0).powi(2) + (height as f64 / 2.0).powi(2)).sqrt();
            (half_diag, half_diag)
        }
    };
    let col = (0..width)
        .map(|u| (signed_index(u, width) as f64 / sx).powi(2))
        .collect();
    let row = (0..height)
        .map(|v| (signed_index(v, height) as f64 / sy).powi(2))
        .collect();
    (col, row)
}

impl PhiObjective {
    pub fn new(spec: &Spectrum, alpha: f64, params: &FreqParams) -> Self {
        let grid = RadialGrid::new(spec.width, spec.height, params.rho_norm);
        let (col_sq, row_sq) = axis_terms(spec.width, spec.height, params.rho_norm);
        Self {
            width: spec.width,
            magnitude: spec.coeffs.iter().map(|c| c.norm()).collect(),
            col_sq,
            row_sq,
            low: grid.low_set(params.rho_threshold),
            alpha,
        }
    }

    /// `Φ` of the spectrum after masking with `β`.
    pub fn phi(&self, beta: f64) -> f64 {
        let inv = 1.0 / (beta * beta);
        let ex: Vec<f64> = self.col_sq.iter().map(|a| (-a * inv).exp()).collect();
        let (mut num, mut den) = (0.0, 0.0);
        for (v, b) in self.row_sq.iter().enumerate() {
            let ey = (-b * inv).exp();
            let row = v * self.width;
            for (u, e) in ex.iter().enumerate() {
                let m = self.magnitude[row + u] * (self.alpha - e * ey);
                den += m;
                if self.low[row + u] {
                    num += m;
                }
            }
        }
        if den > 0.0 {
            num / den
        } else {
            1.0
        }
    }
}

/// Searches `β ∈ [beta_lo, beta_hi]` minimizing `|Φ(mask(β)·F) - target|`.
///
/// A log-spaced scan picks the most promising bracket, which is then refined
/// with golden-section/parabolic steps until it is narrower than
/// `tol·(beta_hi - beta_lo)`.
pub fn optimize_beta_spectrum(spec: &Spectrum, alpha: f64, params: &FreqParams) -> Result<BetaFit> {
    params.validate()?;
    if !(alpha >= 1.0) {
        return Err(SfpError::Param(format!(
            "alpha must be at least 1, got {alpha}"
        )));
    }
    let objective = PhiObjective::new(spec, alpha, params);
    let g = |beta: f64| (objective.phi(beta) - params.phi_target).abs();
    let (lo, hi) = (params.beta_lo, params.beta_hi);

    let ratio = (hi / lo).ln() / (SCAN_POINTS - 1) as f64;
    let scan: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| {
            if i == SCAN_POINTS - 1 {
                hi
            } else {
                lo * (ratio * i as f64).exp()
            }
        })
        .collect();
    let scores: Vec<f64> = scan.iter().map(|&b| g(b)).collect();
    let best = (0..SCAN_POINTS).fold(0, |k, i| if scores[i] < scores[k] { i } else { k });

    let xtol = params.tol * (hi - lo);
    let bracket = (
        scan[best.saturating_sub(1)],
        scan[(best + 1).min(SCAN_POINTS - 1)],
    );
    let refined = brent_bounded(
        g,
        bracket.0,
        bracket.1,
        xtol,
        params.max_evals - SCAN_POINTS,
    );

    let (beta, value) = if refined.fx <= scores[best] {
        (refined.x, refined.fx)
    } else {
        (scan[best], scores[best])
    };
    let at_bound = beta - lo <= xtol || hi - beta <= xtol;
    Ok(BetaFit {
        beta,
        objective: value,
        phi: objective.phi(beta),
        evaluations: SCAN_POINTS + refined.evaluations,
        at_bound,
    })
}

pub fn optimize_beta(channel: &ScalarMap, alpha: f64, params: &FreqParams) -> Result<BetaFit> {
    optimize_beta_spectrum(&fft2(channel), alpha, params)
}

/// Per-channel record of the frequency branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelFdp {
    pub alpha: f64,
    pub beta: f64,
    pub phi_before: f64,
    pub phi_after: f64,
    pub beta_at_bound: bool,
    pub beta_evaluations: usize,
    /// DC of the enhanced channel before clamping to `[0, 1]`.
    pub dc_unclamped: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdpParams {
    pub mu: f64,
    pub channels: [ChannelFdp; 3],
}

/// Enhanced channels before clamping, with the per-channel record.
pub fn enhance_unclamped(
    img: &PlanarImage,
    params: &FreqParams,
) -> Result<([ScalarMap; 3], FdpParams)> {
    params.validate()?;
    let spectra = [0, 1, 2].map(|c| fft2(&img.channel(c)));
    let dc = [0, 1, 2].map(|c| spectra[c].dc().re);
    let alpha = alpha_from_dc_values(dc)?;
    let mu = (dc[0] + dc[1] + dc[2]) / 3.0;
    let grid = RadialGrid::new(img.width(), img.height(), params.rho_norm);

    let mut planes = Vec::with_capacity(3);
    let mut records = Vec::with_capacity(3);
    for c in 0..3 {
        let fit = optimize_beta_spectrum(&spectra[c], alpha[c], params)?;
        let mask = build_mask_on(&grid, alpha[c], fit.beta)?;
        let masked = spectra[c].masked(&mask)?;
        let phi_before =
            low_freq_percentage_with(&spectra[c], params.rho_threshold, params.rho_norm)?;
        let phi_after = low_freq_percentage_with(&masked, params.rho_threshold, params.rho_norm)?;
        let plane = ifft2(&masked)?;
        records.push(ChannelFdp {
            alpha: alpha[c],
            beta: fit.beta,
            phi_before,
            phi_after,
            beta_at_bound: fit.at_bound,
            beta_evaluations: fit.evaluations,
            dc_unclamped: masked.dc().re,
        });
        planes.push(plane);
    }
    let planes: [ScalarMap; 3] = planes.try_into().expect("three channels");
    let channels: [ChannelFdp; 3] = records.try_into().expect("three channels");
    Ok((planes, FdpParams { mu, channels }))
}

pub fn enhance(img: &PlanarImage, params: &FreqParams) -> Result<(PlanarImage, FdpParams)> {
    let (planes, record) = enhance_unclamped(img, params)?;
    let out = PlanarImage::from_maps_clamped([&planes[0], &planes[1], &planes[2]])?;
    Ok((out, record))
}
