//! Model accuracy against the exact oracle.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::models::{build_model, linearized_c2, AlphaMode, LinearizedSpec, ModelKind, ModelOptions};
use crate::oracle::{hp_exact_radial, QuadratureSpec};

/// Uniform, endpoint-inclusive radial sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub count: usize,
}

impl EvalGrid {
    pub fn new(r_min: f64, r_max: f64, count: usize) -> Result<Self> {
        ensure_non_negative("r_min", r_min)?;
        ensure_positive("r_max", r_max)?;
        if r_max <= r_min {
            return Err(Error::Domain(format!("r_max ({r_max}) must exceed r_min ({r_min})")));
        }
        if count < 2 {
            return Err(Error::Domain(format!("grid needs at least 2 points, got {count}")));
        }
        Ok(Self { r_min, r_max, count })
    }

    pub fn points(&self) -> Vec<f64> {
        let step = (self.r_max - self.r_min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.r_max
                } else {
                    self.r_min + step * i as f64
                }
            })
            .collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            r_min: self.r_min * s,
            r_max: self.r_max * s,
            count: self.count,
        }
    }
}

/// Default sampling per regime: `[0, 3 wz]` when `wz >= Ra`, `[0, 2 Ra]`
/// otherwise, 1000 points. `max_mult` overrides the 3 or 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPolicy {
    pub max_mult: Option<f64>,
    pub points: usize,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self {
            max_mult: None,
            points: 1000,
        }
    }
}

impl GridPolicy {
    pub const WIDE_BEAM_MULT: f64 = 3.0;
    pub const NARROW_BEAM_MULT: f64 = 2.0;

    pub fn grid_for(&self, wz: f64, ra: f64) -> Result<EvalGrid> {
        let r_max = if wz >= ra {
            self.max_mult.unwrap_or(Self::WIDE_BEAM_MULT) * wz
        } else {
            self.max_mult.unwrap_or(Self::NARROW_BEAM_MULT) * ra
        };
        EvalGrid::new(0.0, r_max, self.points)
    }
}

/// Oracle values sampled on a grid, reusable across many model evaluations.
#[derive(Debug, Clone)]
pub struct OracleCurve {
    pub wz: f64,
    pub ra: f64,
    pub grid: EvalGrid,
    pub spec: QuadratureSpec,
    radii: Vec<f64>,
    values: Vec<f64>,
    energy: f64,
}

impl OracleCurve {
    pub fn new(wz: f64, ra: f64, grid: EvalGrid, spec: &QuadratureSpec) -> Result<Self> {
        let radii = grid.points();
        let values = radii
            .par_iter()
            .map(|&r| hp_exact_radial(r, wz, ra, spec))
            .collect::<Result<Vec<f64>>>()?;
        let energy = values.iter().map(|h| h * h).sum();
        Ok(Self {
            wz,
            ra,
            grid,
            spec: *spec,
            radii,
            values,
            energy,
        })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `sum (h - h_hat)^2 / sum h^2` over the grid.
    pub fn nmse<F: Fn(f64) -> f64>(&self, model: F) -> f64 {
        let err: f64 = self
            .radii
            .iter()
            .zip(&self.values)
            .map(|(&r, &h)| {
                let d = h - model(r);
                d * d
            })
            .sum();
        err / self.energy
    }

    pub fn report<F: Fn(f64) -> f64>(&self, label: &str, model: F) -> NmseReport {
        NmseReport {
            model_label: label.to_string(),
            wz_over_ra: self.wz / self.ra,
            nmse: self.nmse(model),
            grid: self.grid,
            oracle_tol: self.spec,
            linearized_r0: None,
        }
    }
}

/// Accuracy of one model at one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct NmseReport {
    pub model_label: String,
    pub wz_over_ra: f64,
    pub nmse: f64,
    pub grid: EvalGrid,
    pub oracle_tol: QuadratureSpec,
    /// Calibration distance used when the model is the linearized one.
    pub linearized_r0: Option<f64>,
}

/// NMSE of an arbitrary model against the exact oracle on `grid`.
pub fn nmse<F: Fn(f64) -> f64>(
    label: &str,
    model: F,
    wz: f64,
    ra: f64,
    grid: &EvalGrid,
    spec: &QuadratureSpec,
) -> Result<NmseReport> {
    let curve = OracleCurve::new(wz, ra, *grid, spec)?;
    Ok(curve.report(label, model))
}

/// Minimizer of the linearized-model NMSE over the calibration distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct R0Optimum {
    pub r0_star: f64,
    pub nmse: f64,
    /// Best point of the coarse scan, before refinement.
    pub scan_r0: f64,
    pub scan_nmse: f64,
}

const SCAN_POINTS: usize = 200;
const GOLDEN_REL_WIDTH: f64 = 1e-6;

/// Upper end of the r0 search bracket, `3 (wz/Ra)^2 Ra`.
pub fn r0_search_upper(wz: f64, ra: f64) -> f64 {
    let ratio = wz / ra;
    3.0 * ratio * ratio * ra
}

/// Optimize `r0` for `n` splits against a precomputed oracle curve: a
/// 200-point scan over `(0, r0_search_upper]` followed by golden-section
/// refinement around the best scan point.
pub fn optimize_r0_on(curve: &OracleCurve, n: usize) -> Result<R0Optimum> {
    if n < 2 {
        return Err(Error::Domain(format!("number of splits must be at least 2, got {n}")));
    }
    let (wz, ra) = (curve.wz, curve.ra);
    let objective = |r0: f64| -> f64 {
        match linearized_c2(wz, ra, &LinearizedSpec { n, r0 }) {
            Ok(p) => curve.nmse(|r| p.eval(r)),
            Err(_) => f64::INFINITY,
        }
    };

    let upper = r0_search_upper(wz, ra);
    let step = upper / SCAN_POINTS as f64;
    let scan: Vec<(f64, f64)> = (1..=SCAN_POINTS)
        .into_par_iter()
        .map(|j| {
            let r0 = step * j as f64;
            (r0, objective(r0))
        })
        .collect();

    // Strict comparison keeps the smallest r0 among ties.
    let mut best = 0;
    for (i, &(_, v)) in scan.iter().enumerate() {
        if v < scan[best].1 {
            best = i;
        }
    }
    let (scan_r0, scan_nmse) = scan[best];
    if !scan_nmse.is_finite() {
        return Err(Error::Optimization(format!(
            "no calibratable r0 in (0, {upper}] for wz/ra = {}, n = {n}",
            wz / ra
        )));
    }

    let lo = if best == 0 { step * 1e-6 } else { scan[best - 1].0 };
    let hi = if best + 1 == scan.len() { upper } else { scan[best + 1].0 };
    let (g_r0, g_nmse) = golden_section(objective, lo, hi, GOLDEN_REL_WIDTH);

    let (r0_star, nmse) = if g_nmse < scan_nmse || (g_nmse == scan_nmse && g_r0 < scan_r0) {
        (g_r0, g_nmse)
    } else {
        (scan_r0, scan_nmse)
    };
    Ok(R0Optimum {
        r0_star,
        nmse,
        scan_r0,
        scan_nmse,
    })
}

pub fn optimize_r0(wz: f64, ra: f64, n: usize, grid: &EvalGrid, spec: &QuadratureSpec) -> Result<R0Optimum> {
    let curve = OracleCurve::new(wz, ra, *grid, spec)?;
    optimize_r0_on(&curve, n)
}

/// Golden-section search for a minimum of `f` on `[a, b]`; returns the best
/// probed point.
fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, rel_width: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fd < fc { (d, fd) } else { (c, fc) };
    while (b - a) > rel_width * 0.5 * (a + b).abs() {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
            if fc < best.1 || (fc == best.1 && c < best.0) {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
            if fd < best.1 {
                best = (d, fd);
            }
        }
    }
    best
}

/// `y = a2 x^2 + a1 x + a0` from ordinary least squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFit {
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    pub r_squared: f64,
}

impl QuadraticFit {
    pub fn eval(&self, x: f64) -> f64 {
        (self.a2 * x + self.a1) * x + self.a0
    }
}

pub fn quadratic_fit(xs: &[f64], ys: &[f64]) -> Result<QuadraticFit> {
    if xs.len() != ys.len() {
        return Err(Error::Fit(format!("{} abscissae but {} ordinates", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", xs.len())));
    }
    let design = DMatrix::from_fn(xs.len(), 3, |i, j| xs[i].powi(j as i32));
    let rhs = DVector::from_column_slice(ys);
    let svd = design.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_min > s_max * 1e-12) {
        return Err(Error::Fit("design matrix is rank deficient (need 3 distinct abscissae)".into()));
    }
    let coef = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Fit(e.to_string()))?;

    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let fitted = &design * &coef;
    let ss_res: f64 = ys.iter().zip(fitted.iter()).map(|(y, f)| (y - f) * (y - f)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(QuadraticFit {
        a2: coef[2],
        a1: coef[1],
        a0: coef[0],
        r_squared,
    })
}

/// How the linearized model picks its calibration distance in a table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearizedR0 {
    /// Minimize the NMSE on the table grid.
    Optimize,
    /// Use the published quadratic relation for the number of splits; see
    /// [`LinearizedR0::published_fit`].
    FittedRelation,
    /// Fixed `r0 / Ra`.
    Fixed(f64),
}

impl LinearizedR0 {
    /// Published `r0*/Ra` as a quadratic in `wz/Ra`, available for 4 and 6
    /// splits.
    pub fn published_fit(splits: usize) -> Option<QuadraticFit> {
        let (a2, a1, a0) = match splits {
            4 => (0.72, 0.08, 1.01),
            6 => (0.52, 0.30, 0.93),
            _ => return None,
        };
        Some(QuadraticFit {
            a2,
            a1,
            a0,
            r_squared: 1.0,
        })
    }
}

/// Settings shared by every cell of an NMSE table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TablePolicy {
    pub ra: f64,
    pub grid: GridPolicy,
    pub spec: QuadratureSpec,
    pub splits: usize,
    pub linearized_r0: LinearizedR0,
    pub k: u32,
    pub alpha_mode: AlphaMode,
}

impl Default for TablePolicy {
    fn default() -> Self {
        Self {
            ra: 1.0,
            grid: GridPolicy::default(),
            spec: QuadratureSpec::default(),
            splits: 4,
            linearized_r0: LinearizedR0::Optimize,
            k: 1,
            alpha_mode: AlphaMode::Asymptotic,
        }
    }
}

/// One cell of an NMSE table; failures stay in the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TableCell {
    pub model: ModelKind,
    pub wz_over_ra: f64,
    pub result: Result<NmseReport>,
}

/// Evaluate every `(model, wz/Ra)` case. Cells are computed in parallel and
/// returned sorted by model, then ratio.
pub fn nmse_table(cases: &[(ModelKind, f64)], policy: &TablePolicy) -> Vec<TableCell> {
    let mut ratios: Vec<f64> = cases.iter().map(|c| c.1).collect();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();

    let curves: Vec<(f64, Result<OracleCurve>)> = ratios
        .par_iter()
        .map(|&ratio| {
            let curve = ensure_positive("wz_over_ra", ratio).and_then(|_| {
                let wz = ratio * policy.ra;
                let grid = policy.grid.grid_for(wz, policy.ra)?;
                OracleCurve::new(wz, policy.ra, grid, &policy.spec)
            });
            (ratio, curve)
        })
        .collect();

    let mut cells: Vec<TableCell> = cases
        .par_iter()
        .map(|&(model, ratio)| {
            let curve = &curves
                .iter()
                .find(|(r, _)| r.total_cmp(&ratio).is_eq())
                .expect("every ratio has a curve")
                .1;
            let result = match curve {
                Ok(curve) => table_cell(model, curve, policy),
                Err(e) => Err(e.clone()),
            };
            TableCell {
                model,
                wz_over_ra: ratio,
                result,
            }
        })
        .collect();
    cells.sort_by(|a, b| a.model.cmp(&b.model).then(a.wz_over_ra.total_cmp(&b.wz_over_ra)));
    cells
}

fn table_cell(model: ModelKind, curve: &OracleCurve, policy: &TablePolicy) -> Result<NmseReport> {
    let (wz, ra) = (curve.wz, curve.ra);
    let mut options = ModelOptions {
        linearized: None,
        k: policy.k,
        alpha_mode: policy.alpha_mode,
    };
    if model == ModelKind::Linearized {
        let r0 = match policy.linearized_r0 {
            LinearizedR0::Optimize => optimize_r0_on(curve, policy.splits)?.r0_star,
            LinearizedR0::FittedRelation => {
                let fit = LinearizedR0::published_fit(policy.splits).ok_or_else(|| {
                    Error::Domain(format!("no published r0 relation for {} splits", policy.splits))
                })?;
                fit.eval(wz / ra) * ra
            }
            LinearizedR0::Fixed(r0_over_ra) => r0_over_ra * ra,
        };
        options.linearized = Some(LinearizedSpec::new(policy.splits, r0)?);
    }
    let built = build_model(model, wz, ra, &options)?;
    let mut report = curve.report(model.name(), |r| built.eval(r));
    report.linearized_r0 = options.linearized.map(|s| s.r0);
    Ok(report)
}
