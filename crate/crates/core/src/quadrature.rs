//! Adaptive Gauss-Kronrod (G10/K21) quadrature with global interval bisection.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision, clippy::unreadable_literal)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision, clippy::unreadable_literal)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision, clippy::unreadable_literal)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Tolerances and subdivision budget for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_rel_tol(self, rel_tol: f64) -> Self {
        Self { rel_tol, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Domain(format!(
                "quadrature tolerances must be positive (rel {}, abs {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Domain("max_subdivisions must be at least 1".into()));
        }
        Ok(())
    }
}

/// Value and error estimate of a quadrature, whether or not it converged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
    pub converged: bool,
}

impl Estimate {
    pub fn into_result(self) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::Accuracy {
                value: self.value,
                error_estimate: self.error,
                subdivisions: self.subdivisions,
            })
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut res_k = WGK[10] * f_center;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        // Gauss nodes sit at the odd Kronrod indices.
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let abs_half = half.abs();
    let value = res_k * half;
    res_abs *= abs_half;
    res_asc *= abs_half;

    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }

    Segment { a, b, value, error: err }
}

/// Adaptive integration over the intervals delimited by `points`
/// (ascending, at least two), returning the estimate even on failure.
pub fn integrate_estimate<F>(f: F, points: &[f64], spec: &QuadratureSpec) -> Estimate
where
    F: Fn(f64) -> f64,
{
    debug_assert!(points.len() >= 2);
    let mut heap = BinaryHeap::with_capacity(spec.max_subdivisions + points.len());
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod21(&f, w[0], w[1]));
        }
    }
    let mut subdivisions = heap.len();

    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        if !value.is_finite() || error.is_nan() {
            return Estimate {
                value,
                error,
                subdivisions,
                converged: false,
            };
        }
        let target = spec.abs_tol.max(spec.rel_tol * value.abs());
        if error <= target {
            return Estimate {
                value,
                error,
                subdivisions,
                converged: true,
            };
        }
        let worst = match heap.peek() {
            Some(s) => *s,
            None => {
                return Estimate {
                    value: 0.0,
                    error: 0.0,
                    subdivisions,
                    converged: true,
                }
            }
        };
        let mid = 0.5 * (worst.a + worst.b);
        let unsplittable = mid <= worst.a || mid >= worst.b;
        if subdivisions >= spec.max_subdivisions || unsplittable {
            return Estimate {
                value,
                error,
                subdivisions,
                converged: false,
            };
        }
        heap.pop();
        heap.push(kronrod21(&f, worst.a, mid));
        heap.push(kronrod21(&f, mid, worst.b));
        subdivisions += 1;
    }
}

/// Integrate `f` over `[a, b]`.
pub fn integrate<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_estimate(f, &[a, b], spec).into_result()
}

/// Integrate `f` over `[a, b]` with extra breakpoints where the integrand
/// changes character. Breakpoints outside `(a, b)` are ignored.
pub fn integrate_with_breaks<F>(f: F, a: f64, b: f64, breaks: &[f64], spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut points = Vec::with_capacity(breaks.len() + 2);
    points.push(a);
    points.extend(breaks.iter().copied().filter(|&p| p > a && p < b));
    points.push(b);
    points.sort_by(f64::total_cmp);
    points.dedup();
    integrate_estimate(f, &points, spec).into_result()
}

/// Integrate `f` over `[a, inf)` through the map `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F>(f: F, a: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let g = |t: f64| {
        let s = 1.0 - t;
        let x = a + t / s;
        let v = f(x) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_estimate(g, &[0.0, 1.0], spec).into_result()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_is_exact_for_polynomials_up_to_degree_31() {
        let spec = QuadratureSpec::default();
        for deg in 0..=31 {
            let got = integrate(|x: f64| x.powi(deg), 0.0, 1.0, &spec).unwrap();
            let want = 1.0 / (deg as f64 + 1.0);
            assert!((got - want).abs() < 1e-14, "degree {deg}: {got}");
        }
    }

    #[test]
    fn gauss_subset_weights_sum_to_two() {
        let s: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((s - 2.0).abs() < 1e-14);
        let k: f64 = WGK[10] + 2.0 * WGK[..10].iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sharp_peak_with_breakpoint() {
        let spec = QuadratureSpec::default();
        let w = 1e-3;
        let f = |x: f64| (-(x - 0.3) * (x - 0.3) / (w * w)).exp();
        let got = integrate_with_breaks(f, 0.0, 1.0, &[0.3], &spec).unwrap();
        let want = w * std::f64::consts::PI.sqrt();
        assert!(((got - want) / want).abs() < 1e-10);
    }

    #[test]
    fn semi_infinite_exponential() {
        let spec = QuadratureSpec::default();
        let got = integrate_to_infinity(|x: f64| (-2.0 * x).exp(), 1.0, &spec).unwrap();
        let want = 0.5 * (-2.0f64).exp();
        assert!(((got - want) / want).abs() < 1e-10);
    }

    #[test]
    fn reports_non_convergence() {
        let spec = QuadratureSpec::new(1e-14, 1e-300, 3).unwrap();
        let err = integrate(|x: f64| x.sqrt().recip(), 0.0, 1.0, &spec).unwrap_err();
        assert!(matches!(err, Error::Accuracy { subdivisions: 3, .. }));
        let err = integrate(|x: f64| x.abs().sqrt().recip(), -1.0, 1.0, &spec).unwrap_err();
        assert!(matches!(err, Error::Accuracy { .. }));
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(QuadratureSpec::new(0.0, 1e-13, 10).is_err());
        assert!(QuadratureSpec::new(1e-10, 1e-13, 0).is_err());
    }
}
