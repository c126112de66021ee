//! Rayleigh pointing jitter, the induced densities of `h_p`, and Monte Carlo
//! checks of those densities.

use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::models::PointApproxParams;
use crate::quadrature::{integrate, integrate_to_infinity, QuadratureSpec};

/// Samples per independently seeded chunk. Results do not depend on the
/// number of worker threads.
pub const CHUNK_SIZE: usize = 1 << 16;

/// Nodes of a tabulated CDF.
pub const CDF_NODES: usize = 10_000;

/// Isotropic Gaussian jitter of the beam centre, giving a Rayleigh radial
/// displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterSpec {
    pub sigma_s: f64,
}

impl JitterSpec {
    pub fn new(sigma_s: f64) -> Result<Self> {
        ensure_positive("sigma_s", sigma_s)?;
        Ok(Self { sigma_s })
    }
}

pub fn rayleigh_pdf(r: f64, sigma_s: f64) -> Result<f64> {
    ensure_non_negative("r", r)?;
    ensure_positive("sigma_s", sigma_s)?;
    let s2 = sigma_s * sigma_s;
    Ok(r / s2 * (-r * r / (2.0 * s2)).exp())
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn rayleigh_draw(rng: &mut ChaCha8Rng, sigma_s: f64) -> f64 {
    let u: f64 = rng.random();
    sigma_s * (-2.0 * (-u).ln_1p()).sqrt()
}

fn chunk_bounds(count: usize) -> impl IndexedParallelIterator<Item = (usize, usize)> {
    let chunks = count.div_ceil(CHUNK_SIZE);
    (0..chunks)
        .into_par_iter()
        .map(move |c| (c, CHUNK_SIZE.min(count - c * CHUNK_SIZE)))
}

/// Inverse-transform Rayleigh samples `r = sigma sqrt(-2 ln(1 - u))`.
pub fn rayleigh_sample(sigma_s: f64, seed: u64, count: usize) -> Result<Vec<f64>> {
    ensure_positive("sigma_s", sigma_s)?;
    if count == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    let chunks: Vec<Vec<f64>> = chunk_bounds(count)
        .map(|(c, len)| {
            let mut rng = chunk_rng(seed, c);
            (0..len).map(|_| rayleigh_draw(&mut rng, sigma_s)).collect()
        })
        .collect();
    Ok(chunks.concat())
}

/// `model(r)` for Rayleigh-distributed `r`.
pub fn sample_hp<F>(model: F, sigma_s: f64, seed: u64, count: usize) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64 + Sync,
{
    let mut r = rayleigh_sample(sigma_s, seed, count)?;
    r.par_iter_mut().for_each(|x| *x = model(*x));
    Ok(r)
}

/// Fixed-width histogram over `(lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn uniform(bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::Domain("histogram needs at least one bin".into()));
        }
        if !(hi > lo) {
            return Err(Error::Domain(format!("histogram range ({lo}, {hi}] is empty")));
        }
        let width = (hi - lo) / bins as f64;
        let mut bin_edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        bin_edges[bins] = hi;
        Ok(Self {
            bin_edges,
            counts: vec![0; bins],
            total: 0,
        })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Bin index of `x`; values outside the range land in the edge bins.
    pub fn bin_of(&self, x: f64) -> usize {
        let lo = self.bin_edges[0];
        let hi = self.bin_edges[self.bins()];
        let pos = (x - lo) / (hi - lo) * self.bins() as f64;
        // ceil(pos) - 1 makes bins right-closed.
        let idx = pos.ceil() - 1.0;
        if idx.is_nan() || idx < 0.0 {
            0
        } else {
            (idx as usize).min(self.bins() - 1)
        }
    }

    pub fn add(&mut self, x: f64) {
        let i = self.bin_of(x);
        self.counts[i] += 1;
        self.total += 1;
    }

    /// Add the counts of a histogram with identical edges.
    pub fn merge(&mut self, other: &Histogram) {
        debug_assert_eq!(self.bin_edges, other.bin_edges);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }

    /// Counts normalized to a density.
    pub fn density(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(&c, w)| c as f64 / (self.total as f64 * (w[1] - w[0])))
            .collect()
    }
}

/// Histogram of `model(r)` over `(0, 1]` for Rayleigh-distributed `r`.
pub fn monte_carlo_hp_hist<F>(model: F, sigma_s: f64, count: usize, bins: usize, seed: u64) -> Result<Histogram>
where
    F: Fn(f64) -> f64 + Sync,
{
    ensure_positive("sigma_s", sigma_s)?;
    if count == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    let empty = Histogram::uniform(bins, 0.0, 1.0)?;
    let parts: Vec<Histogram> = chunk_bounds(count)
        .map(|(c, len)| {
            let mut rng = chunk_rng(seed, c);
            let mut hist = empty.clone();
            for _ in 0..len {
                hist.add(model(rayleigh_draw(&mut rng, sigma_s)));
            }
            hist
        })
        .collect();
    let mut hist = empty;
    for part in &parts {
        hist.merge(part);
    }
    Ok(hist)
}

/// Density of `h_p` induced by Rayleigh jitter through one of the
/// closed-form models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HpDensity {
    /// `h = c1 exp(-c2 r^2)`, density `gamma^2 / c1^gamma^2 h^(gamma^2 - 1)`
    /// on `(0, c1]` with `gamma^2 = 1 / (2 sigma^2 c2)`.
    ExpFamily { c1: f64, c2: f64, sigma_s: f64 },
    /// Logistic model with `k = 1`. The density vanishes above
    /// `1 / (1 + exp(-alpha))`, the value at `r = 0`.
    PointApprox { ra: f64, alpha: f64, sigma_s: f64 },
    /// `h = 2^(-(r/Ra)^lambda)` on `(0, 1)`.
    SecondReduced { ra: f64, lambda: f64, sigma_s: f64 },
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl HpDensity {
    pub fn exp_family(c1: f64, c2: f64, sigma_s: f64) -> Result<Self> {
        if !(c1 > 0.0 && c1 <= 1.0) {
            return Err(Error::Domain(format!("c1 must lie in (0, 1], got {c1}")));
        }
        ensure_positive("c2", c2)?;
        ensure_positive("sigma_s", sigma_s)?;
        Ok(Self::ExpFamily { c1, c2, sigma_s })
    }

    pub fn point_approx(ra: f64, alpha: f64, sigma_s: f64) -> Result<Self> {
        ensure_positive("ra", ra)?;
        ensure_positive("alpha", alpha)?;
        ensure_positive("sigma_s", sigma_s)?;
        Ok(Self::PointApprox { ra, alpha, sigma_s })
    }

    pub fn second_reduced(ra: f64, lambda: f64, sigma_s: f64) -> Result<Self> {
        ensure_positive("ra", ra)?;
        ensure_positive("lambda", lambda)?;
        ensure_positive("sigma_s", sigma_s)?;
        Ok(Self::SecondReduced { ra, lambda, sigma_s })
    }

    /// Largest attainable `h_p`, reached at `r = 0`.
    pub fn support_max(&self) -> f64 {
        match *self {
            HpDensity::ExpFamily { c1, .. } => c1,
            HpDensity::PointApprox { alpha, .. } => 1.0 / (1.0 + (-alpha).exp()),
            HpDensity::SecondReduced { .. } => 1.0,
        }
    }

    /// The model whose push-forward this density describes.
    pub fn model(&self, r: f64) -> f64 {
        match *self {
            HpDensity::ExpFamily { c1, c2, .. } => c1 * (-c2 * r * r).exp(),
            HpDensity::PointApprox { ra, alpha, .. } => PointApproxParams { alpha, k: 1, ra }.eval(r),
            HpDensity::SecondReduced { ra, lambda, .. } => (-(r / ra).powf(lambda)).exp2(),
        }
    }

    /// `ln(f(h) w(h))` from `ln h` and `ln(1 - h)`, for `h` inside the
    /// support, where the weight `w` is `h (1 - h)` for the logistic model and
    /// `h` otherwise. Dropping the `1/w` factor avoids cancelling huge logs
    /// near the support ends.
    fn log_weighted_pdf(&self, ln_h: f64, ln_1mh: f64) -> f64 {
        match *self {
            HpDensity::ExpFamily { c1, c2, sigma_s } => {
                let g2 = 1.0 / (2.0 * sigma_s * sigma_s * c2);
                g2.ln() + g2 * (ln_h - c1.ln())
            }
            HpDensity::PointApprox { ra, alpha, sigma_s } => {
                let beta = ra * ra / (2.0 * alpha * sigma_s * sigma_s);
                beta.ln() + beta * (ln_h - alpha - ln_1mh)
            }
            HpDensity::SecondReduced { ra, lambda, sigma_s } => {
                let s2 = sigma_s * sigma_s;
                let u = -ln_h;
                let e = 2.0 / lambda;
                (ra * ra / (s2 * lambda)).ln() - e * LN_2.ln() - ra * ra / (2.0 * s2) * (u / LN_2).powf(e)
                    + (e - 1.0) * u.ln()
            }
        }
    }

    fn log_weight(&self, ln_h: f64, ln_1mh: f64) -> f64 {
        match self {
            HpDensity::PointApprox { .. } => ln_h + ln_1mh,
            _ => ln_h,
        }
    }

    fn in_support(&self, h: f64) -> bool {
        match *self {
            HpDensity::ExpFamily { c1, .. } => h > 0.0 && h <= c1,
            HpDensity::PointApprox { alpha, .. } => h > 0.0 && h < 1.0 && h.ln() - (-h).ln_1p() <= alpha,
            HpDensity::SecondReduced { .. } => h > 0.0 && h < 1.0,
        }
    }

    /// Density at `h`; zero outside the support.
    pub fn pdf(&self, h: f64) -> f64 {
        if !self.in_support(h) {
            return 0.0;
        }
        let (ln_h, ln_1mh) = (h.ln(), (-h).ln_1p());
        (self.log_weighted_pdf(ln_h, ln_1mh) - self.log_weight(ln_h, ln_1mh)).exp()
    }

    // Each family is integrated in a reference variable `s >= 0` with
    // `h = g(s)` decreasing from `support_max` and `f(g(s)) |g'(s)|` smooth.

    fn to_reference(&self, h: f64) -> f64 {
        match *self {
            HpDensity::ExpFamily { c1, .. } => (c1 / h).ln().max(0.0),
            HpDensity::PointApprox { alpha, .. } => (alpha - (h.ln() - (-h).ln_1p())).max(0.0),
            HpDensity::SecondReduced { lambda, .. } => (-h.ln()).max(0.0).powf(2.0 / lambda),
        }
    }

    fn reference_density(&self, s: f64) -> f64 {
        let log_rho = match *self {
            HpDensity::ExpFamily { c1, .. } => {
                let ln_h = c1.ln() - s;
                self.log_weighted_pdf(ln_h, 0.0)
            }
            HpDensity::PointApprox { alpha, .. } => {
                let t = alpha - s;
                let (ln_h, ln_1mh) = (-softplus(-t), -softplus(t));
                self.log_weighted_pdf(ln_h, ln_1mh)
            }
            HpDensity::SecondReduced { lambda, .. } => {
                if s <= 0.0 {
                    return 0.0;
                }
                let p = 0.5 * lambda;
                self.log_weighted_pdf(-s.powf(p), 0.0) + p.ln() + (p - 1.0) * s.ln()
            }
        };
        let rho = log_rho.exp();
        if rho.is_finite() {
            rho
        } else {
            0.0
        }
    }

    /// Numerical integral of the density over its support.
    pub fn total_mass(&self, spec: &QuadratureSpec) -> Result<f64> {
        integrate_to_infinity(|s| self.reference_density(s), 0.0, spec)
    }

    /// CDF tabulated on `nodes` points of `[0, support_max]` by integrating
    /// the density cell by cell. Nodes are geometric towards both ends, where
    /// the CDF can vary on a logarithmic scale, and uniform in between.
    pub fn tabulated_cdf(&self, nodes: usize, spec: &QuadratureSpec) -> Result<TabulatedCdf> {
        if nodes < 10 {
            return Err(Error::Domain(format!("a tabulated CDF needs at least 10 nodes, got {nodes}")));
        }
        let h = cdf_nodes(self.support_max(), nodes);
        let s: Vec<f64> = h.iter().map(|&v| self.to_reference(v)).collect();

        let mut cells = vec![0.0; h.len()];
        cells[1..]
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(j, cell)| -> Result<()> {
                let i = j + 1;
                *cell = if i == 1 {
                    integrate_to_infinity(|t| self.reference_density(t), s[1], spec)?
                } else {
                    integrate(|t| self.reference_density(t), s[i], s[i - 1], spec)?
                };
                Ok(())
            })?;

        let mut cdf = Vec::with_capacity(nodes);
        let mut acc = 0.0;
        for c in cells {
            acc += c;
            cdf.push(acc);
        }
        Ok(TabulatedCdf { h, cdf })
    }
}

const CDF_LOG_FLOOR: f64 = -300.0;
const CDF_LOG_EDGE: f64 = -2.0;
const CDF_LOG_CEIL: f64 = -16.0;

/// `0`, then 30% of the nodes log-spaced over `[1e-300, 1e-2] h_max`, 40%
/// uniform, and 30% with `h_max - h` log-spaced down to `1e-16 h_max`, then
/// `h_max`.
fn cdf_nodes(h_max: f64, nodes: usize) -> Vec<f64> {
    let inner = nodes - 2;
    let n_lo = inner * 3 / 10;
    let n_hi = inner * 3 / 10;
    let n_mid = inner - n_lo - n_hi;
    let lerp = |a: f64, b: f64, i: usize, n: usize| a + (b - a) * i as f64 / (n - 1) as f64;
    let edge = 10f64.powf(CDF_LOG_EDGE);

    let mut h = Vec::with_capacity(nodes);
    h.push(0.0);
    h.extend((0..n_lo).map(|i| h_max * 10f64.powf(lerp(CDF_LOG_FLOOR, CDF_LOG_EDGE, i, n_lo))));
    h.extend((1..=n_mid).map(|i| h_max * lerp(edge, 1.0 - edge, i, n_mid + 2)));
    h.extend((0..n_hi).map(|i| h_max * (1.0 - 10f64.powf(lerp(CDF_LOG_EDGE, CDF_LOG_CEIL, i, n_hi)))));
    h.push(h_max);
    h.dedup();
    h
}

/// Piecewise-linear CDF through tabulated nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCdf {
    h: Vec<f64>,
    cdf: Vec<f64>,
}

impl TabulatedCdf {
    pub fn nodes(&self) -> &[f64] {
        &self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.cdf
    }

    /// Accumulated probability at the top of the support.
    pub fn total(&self) -> f64 {
        self.cdf[self.cdf.len() - 1]
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.h[0] {
            return self.cdf[0];
        }
        let n = self.h.len();
        if x >= self.h[n - 1] {
            return self.cdf[n - 1];
        }
        let j = self.h.partition_point(|&v| v <= x);
        let (x0, x1) = (self.h[j - 1], self.h[j]);
        let (y0, y1) = (self.cdf[j - 1], self.cdf[j]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `samples` and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Density of `c1 exp(-c2 r^2)` under Rayleigh jitter; zero outside `(0, c1]`.
pub fn hp_pdf_exp_family(hp: f64, c1: f64, c2: f64, sigma_s: f64) -> Result<f64> {
    Ok(HpDensity::exp_family(c1, c2, sigma_s)?.pdf(hp))
}

/// Density of the `k = 1` point approximation under Rayleigh jitter.
pub fn hp_pdf_point_approx(hp: f64, ra: f64, sigma_s: f64, alpha: f64) -> Result<f64> {
    ensure_open_unit("hp", hp)?;
    Ok(HpDensity::point_approx(ra, alpha, sigma_s)?.pdf(hp))
}

/// Density of `2^(-(r/Ra)^lambda)` under Rayleigh jitter.
pub fn hp_pdf_second_reduced(hp: f64, ra: f64, sigma_s: f64, lambda: f64) -> Result<f64> {
    ensure_open_unit("hp", hp)?;
    Ok(HpDensity::second_reduced(ra, lambda, sigma_s)?.pdf(hp))
}

fn ensure_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in (0, 1), got {v}")))
    }
}
