//! Brute-force reference implementations for cross-checking the library.
//! Written for clarity over speed: direct sums and explicit window loops.
#![allow(dead_code)]

use sfp_core::{PlanarImage, ScalarMap};

pub type C64 = (f64, f64);

fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Direct 2D DFT, scaled by `1/(W·H)`, unshifted, row-major `(u, v)`.
pub fn dft2(map: &ScalarMap) -> Vec<C64> {
    let (w, h) = map.dims();
    let mut out = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let phase = -2.0
                        * std::f64::consts::PI
                        * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                    let s = map.get(x, y);
                    re += s * phase.cos();
                    im += s * phase.sin();
                }
            }
            let n = (w * h) as f64;
            out.push((re / n, im / n));
        }
    }
    out
}

/// Inverse of [`dft2`]: unscaled synthesis sum.
pub fn idft2(coeffs: &[C64], w: usize, h: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for v in 0..h {
                for u in 0..w {
                    let phase = 2.0
                        * std::f64::consts::PI
                        * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                    let (cr, ci) = coeffs[v * w + u];
                    re += cr * phase.cos() - ci * phase.sin();
                    im += cr * phase.sin() + ci * phase.cos();
                }
            }
            out.push((re, im));
        }
    }
    out
}

/// Mean of `f` over the `(2r+1)²` window at `(x, y)`, borders replicated.
pub fn window_mean(
    w: usize,
    h: usize,
    x: usize,
    y: usize,
    r: usize,
    f: impl Fn(usize, usize) -> f64,
) -> f64 {
    let r = r as isize;
    let mut sum = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            sum += f(
                clamp_index(x as isize + dx, w),
                clamp_index(y as isize + dy, h),
            );
        }
    }
    sum / ((2 * r + 1) * (2 * r + 1)) as f64
}

/// Guided filter with every window statistic computed by an explicit loop.
pub fn guided_filter(p: &ScalarMap, guide: &ScalarMap, r: usize, eps: f64) -> Vec<f64> {
    let (w, h) = p.dims();
    let mut a = vec![0.0; w * h];
    let mut b = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mi = window_mean(w, h, x, y, r, |i, j| guide.get(i, j));
            let mp = window_mean(w, h, x, y, r, |i, j| p.get(i, j));
            let mii = window_mean(w, h, x, y, r, |i, j| guide.get(i, j) * guide.get(i, j));
            let mip = window_mean(w, h, x, y, r, |i, j| guide.get(i, j) * p.get(i, j));
            let k = (mip - mi * mp) / (mii - mi * mi + eps);
            a[y * w + x] = k;
            b[y * w + x] = mp - k * mi;
        }
    }
    let mut q = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let ma = window_mean(w, h, x, y, r, |i, j| a[j * w + i]);
            let mb = window_mean(w, h, x, y, r, |i, j| b[j * w + i]);
            q[y * w + x] = ma * guide.get(x, y) + mb;
        }
    }
    q
}

fn unit_or_gray(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n < 1e-12 {
        [1.0 / 3f64.sqrt(); 3]
    } else {
        v.map(|c| c / n)
    }
}

/// Spectral direction by direct patch loops over normalized gradient triples.
pub fn spectral_direction(img: &PlanarImage, r: usize) -> Vec<[f64; 3]> {
    let (w, h) = img.dims();
    let grad = |x: usize, y: usize| -> [f64; 3] {
        let at = |c: usize, i: isize, j: isize| img.get(clamp_index(i, w), clamp_index(j, h))[c];
        let (xi, yi) = (x as isize, y as isize);
        [0, 1, 2].map(|c| {
            let gx = (at(c, xi + 1, yi) - at(c, xi - 1, yi)) / 2.0;
            let gy = (at(c, xi, yi + 1) - at(c, xi, yi - 1)) / 2.0;
            (gx * gx + gy * gy).sqrt()
        })
    };
    let units: Vec<[f64; 3]> = (0..w * h)
        .map(|i| unit_or_gray(grad(i % w, i / w)))
        .collect();
    let flat = (0..w * h).all(|i| {
        let g = grad(i % w, i / w);
        (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt() < 1e-12
    });
    if flat {
        return vec![unit_or_gray([0.0; 3]); w * h];
    }
    (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            unit_or_gray([0, 1, 2].map(|c| window_mean(w, h, x, y, r, |a, b| units[b * w + a][c])))
        })
        .collect()
}

/// `t = ⟨S, 1 − I⟩ · ΣS / 3`, clamped to `[0, 1]`.
pub fn projected_transmission(img: &PlanarImage, dirs: &[[f64; 3]]) -> Vec<f64> {
    (0..img.pixel_count())
        .map(|i| {
            let (s, p) = (dirs[i], img.pixel(i));
            let dot: f64 = (0..3).map(|c| s[c] * (1.0 - p[c])).sum();
            (dot * (s[0] + s[1] + s[2]) / 3.0).clamp(0.0, 1.0)
        })
        .collect()
}

/// Dark channel of `I / A` (each ratio capped at 1) by explicit window minima.
pub fn dark_channel_ratio(img: &PlanarImage, airlight: [f64; 3], r: usize) -> Vec<f64> {
    let (w, h) = img.dims();
    let r = r as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut m = f64::INFINITY;
            for dy in -r..=r {
                for dx in -r..=r {
                    let p = img.get(
                        clamp_index(x as isize + dx, w),
                        clamp_index(y as isize + dy, h),
                    );
                    for c in 0..3 {
                        m = m.min((p[c] / airlight[c]).min(1.0));
                    }
                }
            }
            out[y * w + x] = m;
        }
    }
    out
}

/// Mean squared difference: a first pass for the mean, a second pass to
/// fold in the rounding residue.
pub fn mse_two_pass(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
    let m = sq.iter().sum::<f64>() / n;
    m + sq.iter().map(|s| s - m).sum::<f64>() / n
}

fn signed(i: usize, n: usize) -> f64 {
    if 2 * i > n {
        i as f64 - n as f64
    } else {
        i as f64
    }
}

/// Cycles-per-pixel radial frequency of bin `(u, v)`.
pub fn rho(u: usize, v: usize, w: usize, h: usize) -> f64 {
    ((signed(u, w) / w as f64).powi(2) + (signed(v, h) / h as f64).powi(2)).sqrt()
}

/// Low set: `ρ < thresh`; if only DC qualifies, DC and its 8 nearest bins.
pub fn low_set(w: usize, h: usize, thresh: f64) -> Vec<bool> {
    let rhos: Vec<f64> = (0..w * h).map(|i| rho(i % w, i / w, w, h)).collect();
    let mut low: Vec<bool> = rhos.iter().map(|&r| r < thresh).collect();
    low[0] = true;
    if low.iter().filter(|&&l| l).count() == 1 {
        let mut order: Vec<usize> = (1..w * h).collect();
        order.sort_by(|&a, &b| rhos[a].partial_cmp(&rhos[b]).unwrap());
        for &i in &order[..8] {
            low[i] = true;
        }
    }
    low
}

/// Low-frequency share of `|M · F|` with `M = α − exp(−(ρ/β)²)`.
pub fn masked_phi(coeffs: &[C64], w: usize, h: usize, alpha: f64, beta: f64, thresh: f64) -> f64 {
    PhiTable::new(coeffs, w, h, thresh).phi(alpha, beta)
}

/// Magnitudes, radii and low-set membership of one spectrum.
pub struct PhiTable {
    mag: Vec<f64>,
    rho: Vec<f64>,
    low: Vec<bool>,
}

impl PhiTable {
    pub fn new(coeffs: &[C64], w: usize, h: usize, thresh: f64) -> Self {
        Self {
            mag: coeffs
                .iter()
                .map(|c| (c.0 * c.0 + c.1 * c.1).sqrt())
                .collect(),
            rho: (0..w * h).map(|i| rho(i % w, i / w, w, h)).collect(),
            low: low_set(w, h, thresh),
        }
    }

    pub fn phi(&self, alpha: f64, beta: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..self.mag.len() {
            let m = alpha - (-(self.rho[i] / beta).powi(2)).exp();
            let v = self.mag[i] * m.abs();
            den += v;
            if self.low[i] {
                num += v;
            }
        }
        num / den
    }

    /// Minimum of `|Φ(β) − target|` over `β = lo, lo + step, …` and `hi`.
    pub fn grid_min(&self, alpha: f64, target: f64, lo: f64, hi: f64, step: f64) -> f64 {
        let count = ((hi - lo) / step).floor() as usize;
        (0..=count)
            .map(|k| lo + k as f64 * step)
            .chain([hi])
            .map(|b| (self.phi(alpha, b) - target).abs())
            .fold(f64::INFINITY, f64::min)
    }
}
