//! Statistical estimators: Lévy constants along best-approximation
//! sequences, the limit distribution of βₙ, and surface-measure integrals.

use std::f64::consts::{LN_2, PI};

use num_rational::BigRational;
use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bestapprox::{beta_sequence, chain_engine, sample_theta_stream, ApproxSequence, ThetaMatrix};
use crate::dynamics::{same_up_to_sign, surface_membership_s};
use crate::error::{Error, Result};
use crate::geometry::{minkowski_bound, Split};
use crate::lattice::{unit_vector, LatticeBasis};
use crate::par::{map_indexed, Execution};
use crate::scalar::ratio;

/// Re-samples allowed per trial when θ resonates before the requested depth.
pub const MAX_RESAMPLES: u32 = 32;

/// Indices discarded at the start of each trial when pooling β.
pub const BETA_TRANSIENT: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSlopes {
    pub trial: usize,
    pub resamples: u32,
    pub l_hat: f64,
    pub l_star_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevyEstimate {
    pub l_hat: f64,
    pub l_star_hat: f64,
    pub trials: usize,
    pub depth: usize,
    /// Standard error of `l_hat`.
    pub stderr: f64,
    /// Standard error of `l_star_hat`.
    pub stderr_star: f64,
    /// `c·L̂ − d·L̂*`
    pub duality_residual: f64,
    /// `sqrt(c²·stderr² + d²·stderr_star²)`
    pub duality_stderr: f64,
    pub resamples: u64,
    pub per_trial: Vec<TrialSlopes>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialConfig {
    pub split: Split,
    pub trials: usize,
    pub depth: usize,
    pub bits: u32,
    pub seed: u64,
    pub exec: Execution,
}

impl TrialConfig {
    pub fn new(split: Split, trials: usize, depth: usize, bits: u32, seed: u64) -> Self {
        TrialConfig { split, trials, depth, bits, seed, exec: Execution::available() }
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }
}

/// The θ of one trial and its first `count` records, re-sampling on early resonance.
pub fn trial_sequence(split: Split, bits: u32, seed: u64, trial: usize, count: usize) -> Result<(ThetaMatrix, ApproxSequence, u32)> {
    for attempt in 0..MAX_RESAMPLES {
        let stream = trial as u64 | ((attempt as u64) << 40);
        let theta = sample_theta_stream(split, bits, seed, stream)?;
        let seq = chain_engine(&theta, count)?;
        if seq.records.len() == count && !seq.records.last().is_some_and(|r| num_traits::Zero::is_zero(&r.r_sq)) {
            return Ok((theta, seq, attempt));
        }
    }
    Err(Error::Resonance(format!("trial {trial}: {MAX_RESAMPLES} samples all resonated before the requested depth")))
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Tail-slope estimates of `lim ln qₙ / n` and `lim −ln rₙ / n` over random θ.
pub fn levy_ergodic(split: Split, trials: usize, depth: usize, bits: u32, seed: u64) -> Result<LevyEstimate> {
    levy_ergodic_with(&TrialConfig::new(split, trials, depth, bits, seed))
}

pub fn levy_ergodic_with(cfg: &TrialConfig) -> Result<LevyEstimate> {
    if cfg.trials == 0 || cfg.depth < 2 {
        return Err(Error::InvalidArgument("need at least one trial and depth ≥ 2".into()));
    }
    let (split, depth) = (cfg.split, cfg.depth);
    let half = depth / 2;
    let span = (depth - half) as f64;
    let results = map_indexed(cfg.exec, cfg.trials, |t| -> Result<TrialSlopes> {
        let (_, seq, resamples) = trial_sequence(split, cfg.bits, cfg.seed, t, depth + 1)?;
        let (hi, lo) = (&seq.records[depth], &seq.records[half]);
        Ok(TrialSlopes {
            trial: t,
            resamples,
            l_hat: (hi.ln_q() - lo.ln_q()) / span,
            l_star_hat: -(hi.ln_r() - lo.ln_r()) / span,
        })
    });
    let per_trial: Vec<TrialSlopes> = results.into_iter().collect::<Result<_>>()?;
    let l: Vec<f64> = per_trial.iter().map(|s| s.l_hat).collect();
    let ls: Vec<f64> = per_trial.iter().map(|s| s.l_star_hat).collect();
    let (l_hat, stderr) = mean_stderr(&l);
    let (l_star_hat, stderr_star) = mean_stderr(&ls);
    let (c, d) = (split.c as f64, split.d as f64);
    Ok(LevyEstimate {
        l_hat,
        l_star_hat,
        trials: cfg.trials,
        depth,
        stderr,
        stderr_star,
        duality_residual: c * l_hat - d * l_star_hat,
        duality_stderr: (c * c * stderr * stderr + d * d * stderr_star * stderr_star).sqrt(),
        resamples: per_trial.iter().map(|s| s.resamples as u64).sum(),
        per_trial,
    })
}

/// Right-continuous empirical distribution function.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidArgument("NaN in sample".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|s| *s <= x) as f64 / self.sorted.len() as f64
    }
}

/// Two-sided Kolmogorov–Smirnov distance to a continuous reference CDF.
pub fn ks_distance(ecdf: &EmpiricalCdf, oracle: impl Fn(f64) -> f64) -> Result<f64> {
    let xs = ecdf.samples();
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let f = oracle(x);
        d = d.max((j as f64 / n - f).abs()).max((f - i as f64 / n).abs());
        i = j;
    }
    Ok(d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BjwSample {
    pub ecdf: EmpiricalCdf,
    /// For `d = c = 1`: pooled terms with `β² ∉ [1/4, 1]`, decided exactly.
    pub support_violations: usize,
    /// Terms with `β > C_{d,c}` or `β ≤ 0`, decided exactly.
    pub minkowski_violations: usize,
    pub resamples: u64,
}

/// Pooled `β_k` for `k ≥ 10` over random θ.
pub fn bjw_empirical(split: Split, trials: usize, depth: usize, bits: u32, seed: u64) -> Result<BjwSample> {
    bjw_empirical_with(&TrialConfig::new(split, trials, depth, bits, seed))
}

pub fn bjw_empirical_with(cfg: &TrialConfig) -> Result<BjwSample> {
    if cfg.depth <= BETA_TRANSIENT + 1 {
        return Err(Error::InvalidArgument(format!("depth must exceed {}", BETA_TRANSIENT + 1)));
    }
    let split = cfg.split;
    let bound = minkowski_bound(split.d, split.c);
    let one_d = split.d == 1 && split.c == 1;
    let (quarter, one) = (ratio(1, 4), ratio(1, 1));
    let per_trial = map_indexed(cfg.exec, cfg.trials, |t| -> Result<(Vec<f64>, usize, usize, u32)> {
        let (_, seq, resamples) = trial_sequence(split, cfg.bits, cfg.seed, t, cfg.depth + 1)?;
        let betas = beta_sequence(split, &seq.records)?;
        let (mut support, mut mink) = (0, 0);
        let mut vals = Vec::new();
        for k in BETA_TRANSIENT..betas.beta_sq.len() {
            let b2: &BigRational = &betas.beta_sq[k];
            if !b2.is_positive() || bound.certify_le_sq(b2) != Some(true) {
                mink += 1;
            }
            if one_d && (*b2 < quarter || *b2 > one) {
                support += 1;
            }
            vals.push(betas.value(k));
        }
        Ok((vals, support, mink, resamples))
    });
    let mut pooled = Vec::new();
    let (mut support_violations, mut minkowski_violations, mut resamples) = (0, 0, 0u64);
    for r in per_trial {
        let (vals, s, m, rs) = r?;
        pooled.extend(vals);
        support_violations += s;
        minkowski_violations += m;
        resamples += rs as u64;
    }
    Ok(BjwSample { ecdf: EmpiricalCdf::new(pooled)?, support_violations, minkowski_violations, resamples })
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `f(x, y) = (1 + xy)^{-2}` on one sign sheet of the chart.
pub fn surface_density_1d(x: f64, y: f64) -> f64 {
    let s = 1.0 + x * y;
    1.0 / (s * s)
}

/// `2 ∬_{(0,1)²} f` by nested adaptive quadrature (both sign sheets).
pub fn surface_measure_1d_quadrature() -> f64 {
    let inner = |y: f64| adaptive_simpson(&|x| surface_density_1d(x, y), 0.0, 1.0, 1e-13);
    2.0 * adaptive_simpson(&inner, 0.0, 1.0, 1e-12)
}

/// CDF of the limit law of βₙ for `d = c = 1`, by quadrature of the chart
/// density over `{1/(1+xy) ≤ t}` (inner integral in closed form).
pub fn bjw_oracle_cdf_1d(t: f64) -> f64 {
    if t <= 0.5 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let u = 1.0 / t - 1.0;
    let a = 1.0 / (1.0 + u);
    let g = |y: f64| (a - 1.0 / (1.0 + y)) / y;
    (adaptive_simpson(&g, u, 1.0, 1e-12) / LN_2).clamp(0.0, 1.0)
}

/// `ζ(2)` by direct summation plus an Euler–Maclaurin tail.
pub fn zeta2() -> f64 {
    let n = 1000u32;
    let mut s = 0.0;
    for k in (1..=n).rev() {
        let k = k as f64;
        s += 1.0 / (k * k);
    }
    let nf = n as f64;
    let tail = 1.0 / nf - 1.0 / (2.0 * nf * nf) + 1.0 / (6.0 * nf.powi(3)) - 1.0 / (30.0 * nf.powi(5)) + 1.0 / (42.0 * nf.powi(7));
    s + tail
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevyClosedForm {
    /// `π²/(12 ln 2)`
    pub value: f64,
    /// `ζ(2)/(2 ln 2)` with `ζ(2)` summed independently.
    pub zeta_form: f64,
    /// Khintchin–Lévy constant `e^{value}`.
    pub khinchin_levy: f64,
}

pub fn levy_closed_form_1d() -> LevyClosedForm {
    let value = PI * PI / (12.0 * LN_2);
    let zeta_form = zeta2() / (2.0 * LN_2);
    assert!((value - zeta_form).abs() < 1e-12, "closed forms disagree");
    LevyClosedForm { value, zeta_form, khinchin_levy: value.exp() }
}

/// A chart point near S for `d = 2, c = 1`: columns `u₁ = (1, 0, n31)`,
/// `u₂ = (n12, n22, 1)`, `u₃ = (n13, n23, n33)` and a horizontal rotation `φ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint2D {
    pub phi: f64,
    pub n31: f64,
    pub n12: f64,
    pub n22: f64,
    pub n13: f64,
    pub n23: f64,
    pub n33: f64,
    pub det_n: f64,
}

impl SurfacePoint2D {
    /// `N·Z³` without rotation or normalization; S-membership does not depend on either.
    pub fn chart_lattice(&self) -> Result<LatticeBasis> {
        let split = Split { d: 2, c: 1 };
        LatticeBasis::from_f64_columns(
            split,
            &[vec![1.0, 0.0, self.n31], vec![self.n12, self.n22, 1.0], vec![self.n13, self.n23, self.n33]],
        )
    }

    /// `(det N)^{-1/3} k(φ) N Z³`.
    pub fn lattice(&self) -> Result<LatticeBasis> {
        let (s, c) = self.phi.sin_cos();
        let rot = |x: f64, y: f64| (c * x - s * y, s * x + c * y);
        let cols: Vec<Vec<f64>> = [(1.0, 0.0, self.n31), (self.n12, self.n22, 1.0), (self.n13, self.n23, self.n33)]
            .iter()
            .map(|&(x, y, z)| {
                let (a, b) = rot(x, y);
                vec![a, b, z]
            })
            .collect();
        Ok(LatticeBasis::from_f64_columns(Split { d: 2, c: 1 }, &cols)?.normalized())
    }

    /// The chart density `(det N)^{-3}`.
    pub fn density(&self) -> f64 {
        self.det_n.powi(-3)
    }
}

/// Does `N·Z³` lie in S with `v₀ = ±u₁`, `v₁ = ±u₂`? Ambiguous inputs surface as errors.
pub fn chart_point_on_s(p: &SurfacePoint2D) -> Result<bool> {
    let b = p.chart_lattice()?;
    let m = surface_membership_s(&b)?;
    Ok(m.on_surface
        && m.v0.is_some_and(|v| same_up_to_sign(&v.y, &unit_vector(3, 0)))
        && m.v1.is_some_and(|v| same_up_to_sign(&v.y, &unit_vector(3, 1))))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMc {
    pub mu_s_hat: f64,
    pub stderr: f64,
    pub accept_rate: f64,
    pub samples: usize,
    /// Samples dropped because membership could not be decided.
    pub discarded: usize,
    pub h_box: f64,
    pub trace: Vec<McTraceRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McTraceRow {
    pub sample: usize,
    pub accepted: bool,
    pub weight: f64,
}

pub const DEFAULT_H_BOX: f64 = 4.0;

/// Monte Carlo estimate of the surface measure of S for `d = 2, c = 1` in the
/// `dφ ⊗ Lebesgue` normalization with density `(det N)^{-3}`.
///
/// The third column is sampled in coordinates adapted to the plane of `u₁, u₂`:
/// `u₃ = a·u₁ + b·u₂ + h·n̂` with `a, b ∈ [-1/2, 1/2)` (a fundamental domain for
/// the translations `u₃ ↦ u₃ + Z u₁ + Z u₂`) and `h ∈ (0, h_box]`. For `h > h_box ≥ √2`
/// every point off the plane has mixed norm above 1, so membership reduces to
/// the planar condition and that tail is integrated in closed form.
pub fn surface_mc_2d(samples: usize, seed: u64, h_box: f64) -> Result<SurfaceMc> {
    surface_mc_2d_with(samples, seed, h_box, Execution::available())
}

pub fn surface_mc_2d_with(samples: usize, seed: u64, h_box: f64, exec: Execution) -> Result<SurfaceMc> {
    if samples == 0 {
        return Err(Error::EmptySample);
    }
    if !(h_box >= std::f64::consts::SQRT_2) {
        return Err(Error::BoxTooSmall(format!("h_box = {h_box} < √2 leaves off-plane points inside the unit ball")));
    }
    let rows = map_indexed(exec, samples, |i| -> Result<Option<(bool, f64)>> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let n31: f64 = rng.gen::<f64>();
        let rad = rng.gen::<f64>().sqrt();
        let ang = 2.0 * PI * rng.gen::<f64>();
        let (n12, n22) = (rad * ang.cos(), rad * ang.sin());
        let a = rng.gen::<f64>() - 0.5;
        let b = rng.gen::<f64>() - 0.5;
        let h = h_box * (1.0 - rng.gen::<f64>());
        let phi = 2.0 * PI * rng.gen::<f64>();
        let u1 = [1.0, 0.0, n31];
        let u2 = [n12, n22, 1.0];
        let cross = [u1[1] * u2[2] - u1[2] * u2[1], u1[2] * u2[0] - u1[0] * u2[2], u1[0] * u2[1] - u1[1] * u2[0]];
        let s = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        let unit = cross.map(|x| x / s);
        let third = |h: f64| [0, 1, 2].map(|k| a * u1[k] + b * u2[k] + h * unit[k]);
        let point = |h: f64| {
            let u3 = third(h);
            SurfacePoint2D { phi, n31, n12, n22, n13: u3[0], n23: u3[1], n33: u3[2], det_n: h * s }
        };
        let inside = match chart_point_on_s(&point(h)) {
            Ok(v) => v,
            Err(Error::NonGeneric(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let planar = match chart_point_on_s(&point(4.0 * h_box)) {
            Ok(v) => v,
            Err(Error::NonGeneric(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let mut w = 0.0;
        if inside {
            w += h_box * h.powi(-3) / (s * s);
        }
        if planar {
            w += 1.0 / (2.0 * h_box * h_box * s * s);
        }
        Ok(Some((inside, w)))
    });
    let mut trace = Vec::with_capacity(samples);
    let mut weights = Vec::with_capacity(samples);
    let (mut accepted, mut discarded) = (0usize, 0usize);
    for (i, r) in rows.into_iter().enumerate() {
        match r? {
            Some((acc, w)) => {
                accepted += acc as usize;
                weights.push(w);
                trace.push(McTraceRow { sample: i, accepted: acc, weight: w });
            }
            None => {
                discarded += 1;
                trace.push(McTraceRow { sample: i, accepted: false, weight: f64::NAN });
            }
        }
    }
    if weights.is_empty() {
        return Err(Error::EmptySample);
    }
    // φ ∈ [0, 2π), n31 ∈ [0, 1), (n12, n22) in the unit disk, (a, b) in the unit square
    let volume = 2.0 * PI * PI;
    let (mean, se) = mean_stderr(&weights);
    Ok(SurfaceMc {
        mu_s_hat: volume * mean,
        stderr: volume * se,
        accept_rate: accepted as f64 / weights.len() as f64,
        samples,
        discarded,
        h_box,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn density_values() {
        assert_eq!(surface_density_1d(0.0, 0.0), 1.0);
        assert_eq!(surface_density_1d(1.0, 1.0), 0.25);
        let p = SurfacePoint2D { phi: 0.0, n31: 0.0, n12: 0.0, n22: 0.0, n13: 0.0, n23: 0.0, n33: 1.0, det_n: 1.0 };
        assert_eq!(p.density(), 1.0);
    }

    #[test]
    fn oracle_cdf_endpoints() {
        assert_eq!(bjw_oracle_cdf_1d(0.5), 0.0);
        assert_eq!(bjw_oracle_cdf_1d(1.0), 1.0);
        assert!(bjw_oracle_cdf_1d(0.999_999) > 0.999);
    }

    #[test]
    fn zeta_matches_closed_form() {
        assert_relative_eq!(zeta2(), PI * PI / 6.0, epsilon = 1e-14);
        let l = levy_closed_form_1d();
        assert_relative_eq!(l.value, 1.186_569_110_415_625, epsilon = 1e-12);
    }

    #[test]
    fn ks_basics() {
        let e = EmpiricalCdf::new(vec![0.1, 0.2, 0.2, 0.9]).unwrap();
        assert_eq!(e.eval(0.2), 0.75);
        assert_eq!(e.eval(0.05), 0.0);
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        let d = ks_distance(&e, uniform).unwrap();
        assert_relative_eq!(d, 0.55, epsilon = 1e-12);
        assert!(EmpiricalCdf::new(vec![]).is_err());
    }

    #[test]
    fn mc_box_must_cover_the_ball() {
        assert!(matches!(surface_mc_2d(10, 1, 1.0), Err(Error::BoxTooSmall(_))));
    }
}
