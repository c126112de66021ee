//! Closed-form approximations of the pointing-error transmission efficiency.
//!
//! Wide beams (`wz >> Ra`) are served by the exponential family
//! `c1 exp(-c2 r^2)`: intensity-uniform, modified intensity-uniform,
//! linearized, Farid and first reduced Vasylyev. Narrow beams (`Ra >> wz`)
//! are served by the logistic point approximation and the second reduced
//! Vasylyev model. The full Vasylyev model covers both regimes.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::geometry::beam_intensity_unchecked;
use crate::oracle::collected_fraction;
use crate::special::{bessel_i1e, erf, one_minus_bessel_i0e};

/// Every model this crate knows how to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Farid,
    FirstReducedVasylyev,
    ModifiedIntensityUniform,
    Linearized,
    IntensityUniform,
    Vasylyev,
    PointApprox,
    SecondReducedVasylyev,
}

impl ModelKind {
    /// Rows of the wide-beam NMSE table, in table order.
    pub const WIDE_BEAM: [ModelKind; 5] = [
        ModelKind::Farid,
        ModelKind::FirstReducedVasylyev,
        ModelKind::ModifiedIntensityUniform,
        ModelKind::Linearized,
        ModelKind::IntensityUniform,
    ];

    /// Columns of the narrow-beam NMSE table.
    pub const NARROW_BEAM: [ModelKind; 2] = [ModelKind::PointApprox, ModelKind::SecondReducedVasylyev];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Farid => "farid",
            ModelKind::FirstReducedVasylyev => "first-reduced-vasylyev",
            ModelKind::ModifiedIntensityUniform => "modified-intensity-uniform",
            ModelKind::Linearized => "linearized",
            ModelKind::IntensityUniform => "intensity-uniform",
            ModelKind::Vasylyev => "vasylyev",
            ModelKind::PointApprox => "point-approx",
            ModelKind::SecondReducedVasylyev => "second-reduced-vasylyev",
        }
    }

    pub fn all() -> [ModelKind; 8] {
        [
            ModelKind::Farid,
            ModelKind::FirstReducedVasylyev,
            ModelKind::ModifiedIntensityUniform,
            ModelKind::Linearized,
            ModelKind::IntensityUniform,
            ModelKind::Vasylyev,
            ModelKind::PointApprox,
            ModelKind::SecondReducedVasylyev,
        ]
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.to_ascii_lowercase().as_str() {
            "farid" => ModelKind::Farid,
            "first-reduced-vasylyev" | "first-reduced" | "frv" => ModelKind::FirstReducedVasylyev,
            "modified-intensity-uniform" | "modified-iu" | "miu" => ModelKind::ModifiedIntensityUniform,
            "linearized" | "lin" => ModelKind::Linearized,
            "intensity-uniform" | "iu" => ModelKind::IntensityUniform,
            "vasylyev" | "vasylyev-full" => ModelKind::Vasylyev,
            "point-approx" | "point" => ModelKind::PointApprox,
            "second-reduced-vasylyev" | "second-reduced" | "srv" => ModelKind::SecondReducedVasylyev,
            other => return Err(Error::Domain(format!("unknown model '{other}'"))),
        };
        Ok(kind)
    }
}

/// Parameters of a model `c1 exp(-c2 r^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFamilyParams {
    pub c1: f64,
    pub c2: f64,
    pub label: ModelKind,
}

impl ExpFamilyParams {
    pub fn new(c1: f64, c2: f64, label: ModelKind) -> Result<Self> {
        if !(c1 > 0.0 && c1 <= 1.0) {
            return Err(Error::Domain(format!("c1 must lie in (0, 1], got {c1}")));
        }
        ensure_positive("c2", c2)?;
        Ok(Self { c1, c2, label })
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.c1 * (-self.c2 * r * r).exp()
    }
}

/// `h_p = c1 exp(-c2 r^2)`.
pub fn exp_family_eval(p: &ExpFamilyParams, r: f64) -> Result<f64> {
    ensure_non_negative("r", r)?;
    Ok(p.eval(r))
}

/// Stretched-exponential parameters `eta exp(-(r/R)^lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VasylyevParams {
    pub eta: f64,
    pub lambda: f64,
    pub r_scale: f64,
}

impl VasylyevParams {
    pub fn eval(&self, r: f64) -> f64 {
        self.eta * (-(r / self.r_scale).powf(self.lambda)).exp()
    }
}

/// `h_p = eta exp(-(r/R)^lambda)`.
pub fn vasylyev_eval(p: &VasylyevParams, r: f64) -> Result<f64> {
    ensure_non_negative("r", r)?;
    Ok(p.eval(r))
}

/// Logistic point-approximation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointApproxParams {
    pub alpha: f64,
    pub k: u32,
    pub ra: f64,
}

impl PointApproxParams {
    pub fn new(alpha: f64, k: u32, ra: f64) -> Result<Self> {
        ensure_positive("alpha", alpha)?;
        ensure_positive("ra", ra)?;
        if k == 0 {
            return Err(Error::Domain("k must be a positive integer".into()));
        }
        Ok(Self { alpha, k, ra })
    }

    /// `1 - 1 / (1 + exp(-t))` with `t = alpha ((r/Ra)^(2k) - 1)`, which is
    /// `1 / (1 + exp(t))`; the branch keeps the exponential argument non-positive.
    pub fn eval(&self, r: f64) -> f64 {
        let s = (r / self.ra).powi(2 * self.k as i32);
        let t = self.alpha * (s - 1.0);
        if t > 0.0 {
            let e = (-t).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + t.exp())
        }
    }
}

pub fn point_approx_eval(p: &PointApproxParams, r: f64) -> Result<f64> {
    ensure_non_negative("r", r)?;
    Ok(p.eval(r))
}

/// Equal-space partition settings for the linearized model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedSpec {
    pub n: usize,
    pub r0: f64,
}

impl LinearizedSpec {
    pub fn new(n: usize, r0: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("number of splits must be at least 2, got {n}")));
        }
        ensure_positive("r0", r0)?;
        Ok(Self { n, r0 })
    }
}

/// How the point-approximation steepness is derived from the geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaMode {
    /// `alpha = 2 sqrt(2) Ra / (sqrt(pi) k wz)` (large-argument Bessel asymptote).
    #[default]
    Asymptotic,
    /// `alpha = 8 Ra^2 / (k wz^2) e^(-x) I1(x)`, `x = 4 Ra^2 / wz^2`.
    ExactBessel,
}

impl FromStr for AlphaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asymptotic" => Ok(AlphaMode::Asymptotic),
            "exact-bessel" | "exact" => Ok(AlphaMode::ExactBessel),
            other => Err(Error::Domain(format!("unknown alpha mode '{other}'"))),
        }
    }
}

fn check_geometry(wz: f64, ra: f64) -> Result<()> {
    ensure_positive("wz", wz)?;
    ensure_positive("ra", ra)
}

/// Detector-centre intensity times aperture area: `c1 = 2 Ra^2/wz^2`, `c2 = 2/wz^2`.
///
/// Fails when `c1 > 1`, i.e. when the beam is too narrow for this model.
pub fn intensity_uniform_params(wz: f64, ra: f64) -> Result<ExpFamilyParams> {
    check_geometry(wz, ra)?;
    let c1 = 2.0 * ra * ra / (wz * wz);
    if c1 > 1.0 {
        return Err(Error::Domain(format!(
            "intensity-uniform model invalid for wz/ra = {}: c1 = {c1} exceeds 1",
            wz / ra
        )));
    }
    ExpFamilyParams::new(c1, 2.0 / (wz * wz), ModelKind::IntensityUniform)
}

/// `c1 = eta`, `c2 = eta / Ra^2`.
pub fn modified_intensity_uniform_params(wz: f64, ra: f64) -> Result<ExpFamilyParams> {
    check_geometry(wz, ra)?;
    let eta = collected_fraction(wz, ra);
    ExpFamilyParams::new(eta, eta / (ra * ra), ModelKind::ModifiedIntensityUniform)
}

/// Partition sum `Q` of the linearized model: the beam intensity is
/// replaced by a piecewise-linear profile along one axis over the square of
/// equal area to the aperture, centred at `r0`, and integrated exactly.
pub fn linearized_partition_sum(wz: f64, ra: f64, n: usize, r0: f64) -> f64 {
    let side = (PI * ra * ra).sqrt();
    let delta = side / n as f64;
    let half_side = (PI * ra * ra / 4.0).sqrt();
    let mut q = 0.0;
    for i in 0..n {
        let x_i = r0 - side / 2.0 + delta * i as f64;
        let left = beam_intensity_unchecked(x_i, wz);
        let right = beam_intensity_unchecked(x_i + delta, wz);
        let k_i = (right - left) / delta;
        let b_i = left - k_i * x_i;
        q += half_side * delta * (k_i * delta + 2.0 * k_i * x_i + 2.0 * b_i);
    }
    q
}

/// Linearized model: `c1 = eta`, `c2 = -ln(Q / c1) / r0^2`.
pub fn linearized_c2(wz: f64, ra: f64, spec: &LinearizedSpec) -> Result<ExpFamilyParams> {
    check_geometry(wz, ra)?;
    let spec = LinearizedSpec::new(spec.n, spec.r0)?;
    let c1 = collected_fraction(wz, ra);
    let q = linearized_partition_sum(wz, ra, spec.n, spec.r0);
    if !(q > 0.0 && q < c1) {
        return Err(Error::Calibration { q, c1, r0: spec.r0 });
    }
    let c2 = -(q / c1).ln() / (spec.r0 * spec.r0);
    ExpFamilyParams::new(c1, c2, ModelKind::Linearized)
}

/// Farid model, `A0 exp(-2 r^2 / wz_eq^2)`.
pub fn farid_params(wz: f64, ra: f64) -> Result<ExpFamilyParams> {
    check_geometry(wz, ra)?;
    let v = PI.sqrt() * ra / (2f64.sqrt() * wz);
    let erf_v = erf(v);
    let wz_eq2 = wz * wz * PI.sqrt() * erf_v / (2.0 * v * (-v * v).exp());
    ExpFamilyParams::new(erf_v * erf_v, 2.0 / wz_eq2, ModelKind::Farid)
}

/// `c1 = eta`, `c2 = 2 / wz^2`.
pub fn first_reduced_vasylyev_params(wz: f64, ra: f64) -> Result<ExpFamilyParams> {
    check_geometry(wz, ra)?;
    ExpFamilyParams::new(collected_fraction(wz, ra), 2.0 / (wz * wz), ModelKind::FirstReducedVasylyev)
}

/// Full Vasylyev shape and scale parameters.
pub fn vasylyev_full_params(wz: f64, ra: f64) -> Result<VasylyevParams> {
    check_geometry(wz, ra)?;
    let x = 4.0 * ra * ra / (wz * wz);
    let eta = collected_fraction(wz, ra);
    if x == 0.0 {
        return Ok(VasylyevParams {
            eta,
            lambda: 2.0,
            r_scale: wz / 2.0,
        });
    }
    let d = one_minus_bessel_i0e(x);
    let log_term = if x < 1e-2 {
        // 2 eta - d, summed as a series to avoid cancellation
        let diff = x * x
            * (0.5 + x * (-3.0 / 8.0 + x * (17.0 / 96.0 + x * (-25.0 / 384.0 + x * (461.0 / 23040.0 - x * 49.0 / 9216.0)))));
        (diff / d).ln_1p()
    } else {
        (2.0 * eta / d).ln()
    };
    let lambda = 2.0 * x * bessel_i1e(x) / d / log_term;
    let r_scale = ra * log_term.powf(-1.0 / lambda);
    Ok(VasylyevParams { eta, lambda, r_scale })
}

/// Logistic steepness for the point approximation.
pub fn point_approx_params(wz: f64, ra: f64, k: u32, mode: AlphaMode) -> Result<PointApproxParams> {
    check_geometry(wz, ra)?;
    if k == 0 {
        return Err(Error::Domain("k must be a positive integer".into()));
    }
    let kf = f64::from(k);
    let alpha = match mode {
        AlphaMode::Asymptotic => 2.0 * 2f64.sqrt() * ra / (PI.sqrt() * kf * wz),
        AlphaMode::ExactBessel => {
            let x = 4.0 * ra * ra / (wz * wz);
            2.0 * x / kf * bessel_i1e(x)
        }
    };
    PointApproxParams::new(alpha, k, ra)
}

/// Narrow-beam limit of the Vasylyev parameters: `eta = 1`,
/// `lambda = 2 sqrt(2) Ra / (sqrt(pi) wz ln 2)`, `R = Ra ln(2)^(-1/lambda)`.
pub fn second_reduced_vasylyev_params(wz: f64, ra: f64) -> Result<VasylyevParams> {
    check_geometry(wz, ra)?;
    let lambda = 2.0 * 2f64.sqrt() * ra / (PI.sqrt() * wz * LN_2);
    Ok(VasylyevParams {
        eta: 1.0,
        lambda,
        r_scale: ra * LN_2.powf(-1.0 / lambda),
    })
}

/// A fully parameterized model ready for evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointingModel {
    Exp(ExpFamilyParams),
    Vasylyev(VasylyevParams),
    PointApprox(PointApproxParams),
    /// Evaluated as `2^(-(r/Ra)^lambda)`, which is exactly 1/2 at the rim.
    SecondReduced { params: VasylyevParams, ra: f64 },
}

impl PointingModel {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            PointingModel::Exp(p) => p.eval(r),
            PointingModel::Vasylyev(p) => p.eval(r),
            PointingModel::PointApprox(p) => p.eval(r),
            PointingModel::SecondReduced { params, ra } => (-(r / ra).powf(params.lambda)).exp2(),
        }
    }
}

/// Extra knobs needed by some models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    /// Splits and calibration distance for the linearized model.
    pub linearized: Option<LinearizedSpec>,
    /// Exponent `k` of the point approximation.
    pub k: u32,
    pub alpha_mode: AlphaMode,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            linearized: None,
            k: 1,
            alpha_mode: AlphaMode::Asymptotic,
        }
    }
}

/// Build a model of the given kind for geometry `(wz, ra)`.
///
/// The linearized model needs `options.linearized`; see
/// [`crate::metrics::optimize_r0`] for choosing `r0`.
pub fn build_model(kind: ModelKind, wz: f64, ra: f64, options: &ModelOptions) -> Result<PointingModel> {
    let model = match kind {
        ModelKind::IntensityUniform => PointingModel::Exp(intensity_uniform_params(wz, ra)?),
        ModelKind::ModifiedIntensityUniform => PointingModel::Exp(modified_intensity_uniform_params(wz, ra)?),
        ModelKind::Linearized => {
            let spec = options.linearized.ok_or_else(|| {
                Error::Domain("linearized model requires a calibration distance r0".into())
            })?;
            PointingModel::Exp(linearized_c2(wz, ra, &spec)?)
        }
        ModelKind::Farid => PointingModel::Exp(farid_params(wz, ra)?),
        ModelKind::FirstReducedVasylyev => PointingModel::Exp(first_reduced_vasylyev_params(wz, ra)?),
        ModelKind::Vasylyev => PointingModel::Vasylyev(vasylyev_full_params(wz, ra)?),
        ModelKind::PointApprox => {
            PointingModel::PointApprox(point_approx_params(wz, ra, options.k, options.alpha_mode)?)
        }
        ModelKind::SecondReducedVasylyev => PointingModel::SecondReduced {
            params: second_reduced_vasylyev_params(wz, ra)?,
            ra,
        },
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn intensity_uniform_values_and_validity() {
        let p = intensity_uniform_params(2.0, 1.0).unwrap();
        assert_eq!(p.c1, 0.5);
        assert_eq!(p.c2, 0.5);
        // wz/ra = 6 at r = 0: 2/36 against 1 - exp(-2/36)
        let iu = intensity_uniform_params(6.0, 1.0).unwrap().eval(0.0);
        let exact = collected_fraction(6.0, 1.0);
        assert_relative_eq!((iu - exact) / exact, 0.028_034_966_194_303_149, epsilon = 1e-12);
        assert!(matches!(intensity_uniform_params(1.4, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn modified_intensity_uniform_identity() {
        let p = modified_intensity_uniform_params(2.0, 1.0).unwrap();
        assert_relative_eq!(p.c1, 1.0 - (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(p.c1, 0.393_469_340_287_366_6, epsilon = 1e-15);
        for ra in [0.3, 1.0, 2.5] {
            let p = modified_intensity_uniform_params(1.7 * ra, ra).unwrap();
            assert_relative_eq!(p.c2 * ra * ra, p.c1, max_relative = 2.0 * f64::EPSILON);
        }
    }

    #[test]
    fn farid_limits() {
        let v = PI.sqrt() / 2f64.sqrt();
        let p = farid_params(1.0, 1.0).unwrap();
        assert_relative_eq!(p.c1, erf(v) * erf(v), epsilon = 1e-15);
        let p = farid_params(50.0, 1.0).unwrap();
        let ratio = p.c1 / (2.0 / 2500.0);
        assert!((ratio - 1.0).abs() < 0.01);
    }

    #[test]
    fn first_reduced_identities() {
        let p = first_reduced_vasylyev_params(3.0, 1.0).unwrap();
        assert_eq!(p.c1, collected_fraction(3.0, 1.0));
        assert_eq!(p.c2 * 9.0, 2.0);
    }

    #[test]
    fn exp_family_evaluation() {
        let p = ExpFamilyParams::new(0.4, 0.3, ModelKind::Farid).unwrap();
        assert_eq!(exp_family_eval(&p, 0.0).unwrap(), 0.4);
        let half = (LN_2 / 0.3).sqrt();
        assert_relative_eq!(p.eval(half), 0.2, epsilon = 1e-15);
        assert!(p.eval(1.0) > p.eval(1.1));
        assert!(exp_family_eval(&p, -1.0).is_err());
        assert!(ExpFamilyParams::new(1.2, 0.3, ModelKind::Farid).is_err());
    }

    #[test]
    fn partition_sum_matches_direct_resummation() {
        // Independent re-summation: integrate each linear piece exactly over
        // [x_i, x_i + delta] x [-l/2, l/2] using its endpoint values.
        for (wz, n, r0) in [(2.0, 4, 4.05), (4.0, 6, 12.9), (6.0, 8, 27.0), (2.0, 2, 0.5)] {
            let l = PI.sqrt();
            let d = l / n as f64;
            let mut direct = 0.0;
            for i in 0..n {
                let a = r0 - l / 2.0 + d * i as f64;
                let fa = 2.0 / (PI * wz * wz) * (-2.0 * a * a / (wz * wz)).exp();
                let b = a + d;
                let fb = 2.0 / (PI * wz * wz) * (-2.0 * b * b / (wz * wz)).exp();
                direct += l * d * 0.5 * (fa + fb);
            }
            let q = linearized_partition_sum(wz, 1.0, n, r0);
            assert_relative_eq!(q, direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn linearized_calibration() {
        let p = linearized_c2(2.0, 1.0, &LinearizedSpec::new(4, 4.05).unwrap()).unwrap();
        assert_eq!(p.c1, collected_fraction(2.0, 1.0));
        assert!(p.c2 > 0.0);
        // r0 = 0.05: square straddles the beam centre and Q exceeds c1
        let err = linearized_c2(2.0, 1.0, &LinearizedSpec::new(4, 0.05).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Calibration { .. }));
        assert!(LinearizedSpec::new(1, 1.0).is_err());
        assert!(LinearizedSpec::new(4, 0.0).is_err());
    }

    #[test]
    fn vasylyev_limits() {
        // Wide beams: lambda -> 2 and R -> wz / sqrt(2), the scale for which
        // exp(-(r/R)^2) = exp(-2 r^2 / wz^2).
        let p = vasylyev_full_params(50.0, 1.0).unwrap();
        assert!((p.lambda - 2.0).abs() < 0.01);
        let limit = 50.0 / 2f64.sqrt();
        assert!(((p.r_scale - limit) / p.r_scale).abs() < 0.01);

        let wz = 0.02;
        let p = vasylyev_full_params(wz, 1.0).unwrap();
        let asym = 2.0 * 2f64.sqrt() / (PI.sqrt() * wz * LN_2);
        assert!((p.lambda / asym - 1.0).abs() < 0.01);
        assert!((p.r_scale / LN_2.powf(-1.0 / p.lambda) - 1.0).abs() < 0.01);

        let p = vasylyev_full_params(1.0, 1.0).unwrap();
        assert!(p.lambda.is_finite() && p.lambda > 0.0);
        assert!(p.r_scale.is_finite() && p.r_scale > 0.0);
        assert_eq!(p.eval(0.0), collected_fraction(1.0, 1.0));
    }

    #[test]
    fn vasylyev_small_argument_branch_is_continuous() {
        // x = 4 (ra/wz)^2 straddles the series switch at 1e-2
        let lo = vasylyev_full_params(1.0 / (1e-2f64 / 4.0).sqrt() * (1.0 + 1e-9), 1.0).unwrap();
        let hi = vasylyev_full_params(1.0 / (1e-2f64 / 4.0).sqrt() * (1.0 - 1e-9), 1.0).unwrap();
        assert_relative_eq!(lo.lambda, hi.lambda, max_relative = 1e-9);
        let tiny = vasylyev_full_params(1e6, 1.0).unwrap();
        assert_relative_eq!(tiny.lambda, 2.0, max_relative = 1e-6);
        assert_relative_eq!(tiny.r_scale, 1e6 / 2f64.sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn vasylyev_evaluation() {
        let p = VasylyevParams {
            eta: 0.8,
            lambda: 2.0,
            r_scale: 1.5,
        };
        assert_eq!(vasylyev_eval(&p, 0.0).unwrap(), 0.8);
        assert_relative_eq!(p.eval(1.5), 0.8 / std::f64::consts::E, epsilon = 1e-15);
        assert_relative_eq!(p.eval(3.0), 0.8 * (-4.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn point_approx_parameters() {
        let p = point_approx_params(0.1, 1.0, 1, AlphaMode::Asymptotic).unwrap();
        assert_relative_eq!(p.alpha, 2.0 * 2f64.sqrt() / (PI.sqrt() * 0.1), epsilon = 1e-12);
        assert!((p.alpha - 15.96).abs() < 0.01);
        let p2 = point_approx_params(0.1, 1.0, 2, AlphaMode::Asymptotic).unwrap();
        assert_relative_eq!(p2.alpha, p.alpha / 2.0, epsilon = 1e-15);
        for wz in [0.1, 0.05, 0.02] {
            let a = point_approx_params(wz, 1.0, 1, AlphaMode::Asymptotic).unwrap().alpha;
            let e = point_approx_params(wz, 1.0, 1, AlphaMode::ExactBessel).unwrap().alpha;
            assert!((a / e - 1.0).abs() < 0.01, "wz={wz}: {a} vs {e}");
        }
        assert!(point_approx_params(0.1, 1.0, 0, AlphaMode::Asymptotic).is_err());
    }

    #[test]
    fn point_approx_evaluation() {
        let p = PointApproxParams::new(15.96, 1, 1.0).unwrap();
        assert_eq!(p.eval(1.0), 0.5);
        assert_relative_eq!(p.eval(0.0), 1.0 - 1.0 / (1.0 + 15.96f64.exp()), epsilon = 1e-16);
        assert!((1.0 - p.eval(0.0) - 1.2e-7).abs() < 1e-8);
        // far outside: no overflow, value underflows gracefully
        assert!(p.eval(100.0) >= 0.0 && p.eval(100.0) < 1e-300);
        let steep = PointApproxParams::new(1e3, 3, 2.0).unwrap();
        assert_eq!(steep.eval(2.0), 0.5);
    }

    #[test]
    fn second_reduced_forms_agree() {
        let params = second_reduced_vasylyev_params(0.3, 1.0).unwrap();
        let model = PointingModel::SecondReduced { params, ra: 1.0 };
        assert_eq!(model.eval(1.0), 0.5);
        for r in [0.0f64, 0.3, 0.9, 1.0, 1.1, 1.5] {
            let direct = 2f64.powf(-r.powf(params.lambda));
            assert_relative_eq!(model.eval(r), direct, max_relative = 1e-14);
            assert_relative_eq!(params.eval(r), direct, max_relative = 1e-13);
        }
    }

    #[test]
    fn model_names_round_trip() {
        for kind in ModelKind::all() {
            assert_eq!(kind.name().parse::<ModelKind>().unwrap(), kind);
        }
        assert_eq!("modified-iu".parse::<ModelKind>().unwrap(), ModelKind::ModifiedIntensityUniform);
        assert!("nope".parse::<ModelKind>().is_err());
    }

    #[test]
    fn linearized_requires_spec() {
        let err = build_model(ModelKind::Linearized, 2.0, 1.0, &ModelOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }
}
