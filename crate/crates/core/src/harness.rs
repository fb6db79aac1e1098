//! Monte Carlo experiment campaigns: size studies, power ladders and
//! weak-convergence studies, with deterministic parallel execution.
//!
//! Stream layout: scenario `s` (row-major over the n-grid, alternatives
//! fastest) assigns replication `r` the stream id
//! `s * REP_STREAM_BLOCK + r`. Limit-law paths live at
//! [`crate::rng::LIMIT_STREAM_BASE`], empirical-hypothesis runs at
//! [`HYP_STREAM`], and the transformed-norm limit draws at
//! [`NORM_LIMIT_STREAM_BASE`], so no two stages ever share a stream.
//! Replications are merged in index order, which makes every report a
//! bit-deterministic function of (spec, root seed) for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion_gof::{cvm_statistic_of_process, u_process, DiffusionHypothesis};
use crate::error::{Error, Result};
use crate::l2core::StepFunction;
use crate::limitlaws::{default_limit_seed, sample_limit_law, LimitFunctional};
use crate::rng::{derive_stream, SeedSpec, DEFAULT_ROOT_SEED, LIMIT_STREAM_BASE};
use crate::sde::{euler_maruyama, make_scheme, stationary_start, DiffusionModel, LAW_RESOLUTION};
use crate::ts_gof::{
    ad_statistic_of_process, build_sign_process, Noise, NoiseKind, TimeSeriesModel, TsHypothesis,
};

/// Streams reserved per scenario; replication counts must stay below this.
pub const REP_STREAM_BLOCK: u64 = 1 << 20;
/// Stream id used by simulation-based hypothesis construction.
pub const HYP_STREAM: u64 = 1 << 33;
/// First stream id of the transformed-norm limit draws.
pub const NORM_LIMIT_STREAM_BASE: u64 = 1 << 34;

/// Kind of campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    Size,
    Power,
    Convergence,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Size => "size",
            StudyKind::Power => "power",
            StudyKind::Convergence => "convergence",
        }
    }
}

/// Which test the campaign exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    /// Drift test for diffusions (Cramer-von Mises type).
    CvmDiffusion,
    /// Sign test for time series (Anderson-Darling type).
    AdSign,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::CvmDiffusion => "cvm-diffusion",
            TestKind::AdSign => "ad-sign",
        }
    }

    pub fn limit_functional(self) -> LimitFunctional {
        match self {
            TestKind::CvmDiffusion => LimitFunctional::Cvm,
            TestKind::AdSign => LimitFunctional::Ad,
        }
    }
}

/// Catalog model selection with parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Ornstein-Uhlenbeck diffusion.
    Ou { theta: f64, sigma: f64 },
    /// Diffusion with bounded-nonlinearity drift -theta x + a tanh x.
    Tanh { theta: f64, a: f64, sigma: f64 },
    /// Linear autoregression X_i = rho X_{i-1} + sigma eps_i.
    Ar1 { rho: f64, sigma: f64, noise: NoiseKind },
    /// Nonlinear autoregression with drift rho x + a tanh x.
    TanhAr { rho: f64, a: f64, sigma: f64, noise: NoiseKind },
}

impl ModelSpec {
    pub fn is_diffusion(&self) -> bool {
        matches!(self, ModelSpec::Ou { .. } | ModelSpec::Tanh { .. })
    }

    pub fn build_diffusion(&self) -> Option<DiffusionModel<f64>> {
        match *self {
            ModelSpec::Ou { theta, sigma } => Some(DiffusionModel::ornstein_uhlenbeck(theta, sigma)),
            ModelSpec::Tanh { theta, a, sigma } => Some(DiffusionModel::tanh_drift(theta, a, sigma)),
            _ => None,
        }
    }

    pub fn build_ts(&self) -> Option<Result<TimeSeriesModel>> {
        match *self {
            ModelSpec::Ar1 { rho, sigma, noise } => {
                Some(TimeSeriesModel::ar1(rho, sigma, Noise::centered(noise)))
            }
            ModelSpec::TanhAr { rho, a, sigma, noise } => {
                Some(TimeSeriesModel::tanh_ar(rho, a, sigma, Noise::centered(noise)))
            }
            _ => None,
        }
    }
}

/// Full description of a campaign; serialized verbatim into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: StudyKind,
    pub test: TestKind,
    pub model: ModelSpec,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub alpha: f64,
    pub root_seed: u64,
    /// Scheme exponent: observation spacing c * n^(-beta), diffusion only.
    pub beta: f64,
    /// Scheme spacing constant, diffusion only.
    pub c: f64,
    /// Internal Euler refinement per observation interval.
    pub substeps: usize,
    /// Discarded transient of time-series simulations.
    pub burn_in: usize,
    /// Alternative magnitudes: drift shifts (diffusion) or noise median
    /// deltas (time series). Power studies only.
    pub ladder: Vec<f64>,
    pub psi_floor: f64,
    pub atoms: usize,
    pub law_resolution: usize,
    pub domain: (f64, f64),
    pub limit_k: usize,
    pub limit_paths: usize,
}

impl ExperimentSpec {
    /// Desk-scale defaults for a test kind under its catalog null model.
    pub fn defaults(kind: StudyKind, test: TestKind) -> Self {
        let model = match test {
            TestKind::CvmDiffusion => ModelSpec::Ou { theta: 1.0, sigma: 1.0 },
            TestKind::AdSign => ModelSpec::Ar1 { rho: 0.5, sigma: 1.0, noise: NoiseKind::Normal },
        };
        // largest documented rung is sized so the rejection rate saturates
        // at n = 1e4 under the default scheme
        let ladder = match (kind, test) {
            (StudyKind::Power, TestKind::CvmDiffusion) => vec![0.0, 0.5, 1.5],
            (StudyKind::Power, TestKind::AdSign) => vec![0.0, 0.02, 0.1],
            _ => Vec::new(),
        };
        Self {
            kind,
            test,
            model,
            n_grid: vec![10_000],
            replications: 1_000,
            alpha: 0.05,
            root_seed: DEFAULT_ROOT_SEED,
            beta: 2.0 / 3.0,
            c: 1.0,
            substeps: 10,
            burn_in: 500,
            ladder,
            psi_floor: crate::ts_gof::DEFAULT_PSI_FLOOR,
            atoms: 1 << 12,
            law_resolution: LAW_RESOLUTION,
            domain: (-10.0, 10.0),
            limit_k: test.limit_functional().default_grid(),
            limit_paths: crate::limitlaws::TEST_PATHS,
        }
    }

    fn magnitudes(&self) -> Vec<f64> {
        match self.kind {
            StudyKind::Power => self.ladder.clone(),
            _ => vec![0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(msg));
        if self.replications == 0 {
            return fail("replications must be at least 1".into());
        }
        if self.replications as u64 >= REP_STREAM_BLOCK {
            return fail(format!("replications must be below {REP_STREAM_BLOCK}"));
        }
        if self.n_grid.is_empty() {
            return fail("n_grid must be non-empty".into());
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return fail("n_grid must be strictly increasing".into());
        }
        if self.n_grid.iter().any(|&n| n < 2) {
            return fail("every n must be at least 2".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha = {} outside (0, 1)", self.alpha));
        }
        match self.kind {
            StudyKind::Power => {
                if self.ladder.is_empty() {
                    return fail("power study needs a non-empty ladder".into());
                }
                if self.test == TestKind::AdSign && self.ladder.iter().any(|d| d.abs() >= 0.5) {
                    return fail("noise deltas must lie in (-1/2, 1/2)".into());
                }
            }
            _ => {
                if !self.ladder.is_empty() {
                    return fail("ladder is only meaningful for power studies".into());
                }
            }
        }
        let scenarios = (self.n_grid.len() * self.magnitudes().len()) as u64;
        if scenarios * REP_STREAM_BLOCK >= LIMIT_STREAM_BASE {
            return fail("too many scenarios for the stream layout".into());
        }
        let ts_model = matches!(self.model, ModelSpec::Ar1 { .. } | ModelSpec::TanhAr { .. });
        match self.test {
            TestKind::CvmDiffusion => {
                if ts_model {
                    return fail("cvm-diffusion needs a diffusion model (ou, tanh)".into());
                }
                if !(self.beta > 0.5 && self.beta < 1.0) {
                    return fail(format!("beta = {} outside (1/2, 1)", self.beta));
                }
                if !(self.c > 0.0) {
                    return fail("c must be positive".into());
                }
                if self.substeps == 0 {
                    return fail("substeps must be at least 1".into());
                }
            }
            TestKind::AdSign => {
                if !ts_model {
                    return fail("ad-sign needs a time-series model (ar1, tanh-ar)".into());
                }
            }
        }
        if self.atoms < 2 {
            return fail("atoms must be at least 2".into());
        }
        if !(self.psi_floor >= 0.0) {
            return fail("psi_floor must be non-negative".into());
        }
        if self.limit_k < 2 || self.limit_paths == 0 {
            return fail("limit law needs k >= 2 and at least one path".into());
        }
        Ok(())
    }
}

/// One (n, magnitude) cell of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub study: StudyKind,
    pub test: TestKind,
    pub n: usize,
    pub magnitude: f64,
    pub replications: usize,
    pub failures: usize,
    pub rejections: usize,
    pub reject_rate: f64,
    pub reject_se: f64,
    pub stat_mean: f64,
    pub stat_var: f64,
    /// KS distance between statistic replications and the limit-law draws.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_stat: Option<f64>,
    /// KS distance of the unweighted squared norm to its Gaussian limit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_norm: Option<f64>,
    /// KS distance of the 1/sqrt(psi)-weighted squared norm to its limit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_norm_weighted: Option<f64>,
}

/// Campaign output: the spec echo plus one row per (n, magnitude).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub rows: Vec<ReportRow>,
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

impl ExperimentReport {
    /// Stable CSV rendering; floats carry 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "study,test,n,magnitude,replications,failures,rejections,reject_rate,reject_se,stat_mean,stat_var,ks_stat,ks_norm,ks_norm_weighted\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.study.name(),
                r.test.name(),
                r.n,
                fmt_float(r.magnitude),
                r.replications,
                r.failures,
                r.rejections,
                fmt_float(r.reject_rate),
                fmt_float(r.reject_se),
                fmt_float(r.stat_mean),
                fmt_float(r.stat_var),
                fmt_opt(r.ks_stat),
                fmt_opt(r.ks_norm),
                fmt_opt(r.ks_norm_weighted),
            ));
        }
        out
    }
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.partial_cmp(q).expect("finite"));
    y.sort_by(|p, q| p.partial_cmp(q).expect("finite"));
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup: f64 = 0.0;
    while i < x.len() || j < y.len() {
        let xv = x.get(i).copied().unwrap_or(f64::INFINITY);
        let yv = y.get(j).copied().unwrap_or(f64::INFINITY);
        let t = xv.min(yv);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}

/// Per-replication outcome of one scenario.
struct RepOutcome {
    stat: f64,
    norm: f64,
    weighted_norm: f64,
}

enum Engine {
    Diffusion {
        model: DiffusionModel<f64>,
        hyp: DiffusionHypothesis,
        beta: f64,
        c: f64,
        substeps: usize,
    },
    Ts {
        model: TimeSeriesModel,
        hyp: TsHypothesis,
        burn_in: usize,
    },
}

impl Engine {
    fn replicate(&self, n: usize, seed: SeedSpec) -> Result<RepOutcome> {
        let mut stream = derive_stream(seed);
        match self {
            Engine::Diffusion { model, hyp, beta, c, substeps } => {
                let scheme = make_scheme(n, *beta, *c)?;
                let x0 = stationary_start(hyp.law(), &mut stream);
                let sample = euler_maruyama(model, &scheme, x0, &mut stream, *substeps)?;
                let process = u_process(&sample, |x| hyp.s0(x))?;
                Ok(outcome_diffusion(&process, hyp)?)
            }
            Engine::Ts { model, hyp, burn_in } => {
                let series = crate::ts_gof::simulate_ts(model, n, *burn_in, &mut stream)?;
                let process = build_sign_process(&series, |x| hyp.s0(x))?;
                Ok(outcome_ts(&process, hyp)?)
            }
        }
    }
}

fn outcome_diffusion(process: &StepFunction<f64>, hyp: &DiffusionHypothesis) -> Result<RepOutcome> {
    let stat = cvm_statistic_of_process(process, hyp)?;
    let tab = process.eval_sorted(hyp.measure().atoms());
    let mut norm = 0.0;
    let mut weighted = 0.0;
    for ((&x, &w), &v) in hyp.measure().atoms().iter().zip(hyp.measure().weights()).zip(&tab) {
        norm += v * v * w;
        let p = hyp.psi().eval(x);
        if p > 0.0 {
            weighted += v * v / p * w;
        }
    }
    Ok(RepOutcome { stat, norm, weighted_norm: weighted })
}

fn outcome_ts(process: &StepFunction<f64>, hyp: &TsHypothesis) -> Result<RepOutcome> {
    let stat = ad_statistic_of_process(process, hyp)?;
    let tab = process.eval_sorted(hyp.mu().atoms());
    let mut norm = 0.0;
    for (&w, &v) in hyp.mu().weights().iter().zip(&tab) {
        norm += v * v * w;
    }
    Ok(RepOutcome { stat, norm, weighted_norm: stat })
}

/// Gaussian limit draws of the squared norm: B evaluated exactly at the
/// variance-profile values of the measure atoms, squared, optionally
/// weighted by 1/psi, integrated against the measure.
fn sample_norm_limit(
    psi_at_atoms: &[f64],
    weights: &[f64],
    psi_floor_for_weight: Option<f64>,
    n_draws: usize,
    seed: SeedSpec,
) -> Vec<f64> {
    (0..n_draws as u64)
        .into_par_iter()
        .map(|i| {
            let mut stream = derive_stream(seed.stream(seed.stream_id + i));
            let mut b = 0.0f64;
            let mut prev_p = 0.0f64;
            let mut total = 0.0f64;
            for (&p, &w) in psi_at_atoms.iter().zip(weights) {
                let dp = (p - prev_p).max(0.0);
                b += dp.sqrt() * stream.standard_normal();
                prev_p = prev_p.max(p);
                match psi_floor_for_weight {
                    Some(floor) => {
                        if p >= floor && p > 0.0 {
                            total += b * b / p * w;
                        }
                    }
                    None => total += b * b * w,
                }
            }
            total
        })
        .collect()
}

struct Scenario {
    n: usize,
    magnitude: f64,
    engine: Engine,
}

/// Run any campaign; dispatches on the spec kind.
pub fn run_study(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    match spec.kind {
        StudyKind::Size => run_size_study(spec),
        StudyKind::Power => run_power_study(spec),
        StudyKind::Convergence => run_convergence_study(spec),
    }
}

/// Null rejection rates across the n-grid.
pub fn run_size_study(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    expect_kind(spec, StudyKind::Size)?;
    let scenarios = null_scenarios(spec)?;
    run_scenarios(spec, scenarios, false)
}

/// Rejection rates across the alternative ladder.
pub fn run_power_study(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    expect_kind(spec, StudyKind::Power)?;
    let mut scenarios = Vec::new();
    for &n in &spec.n_grid {
        for &magnitude in &spec.ladder {
            let engine = match spec.test {
                TestKind::CvmDiffusion => {
                    let truth = spec
                        .model
                        .build_diffusion()
                        .ok_or_else(|| Error::InvalidSpec("diffusion model required".into()))?;
                    // the hypothesized drift is the truth shifted by the
                    // rung; its own invariant law drives the measure
                    let null_model = truth.with_drift_shift(magnitude);
                    let hyp = DiffusionHypothesis::from_model(
                        &null_model,
                        spec.domain,
                        spec.law_resolution,
                        spec.atoms,
                    )?;
                    Engine::Diffusion {
                        model: truth,
                        hyp,
                        beta: spec.beta,
                        c: spec.c,
                        substeps: spec.substeps,
                    }
                }
                TestKind::AdSign => {
                    let null = spec
                        .model
                        .build_ts()
                        .ok_or_else(|| Error::InvalidSpec("time-series model required".into()))??;
                    // data is generated with the noise median shifted by
                    // the rung; the null hypothesis stays centered
                    let data_model = null.with_noise_delta(magnitude)?;
                    let hyp = ts_hypothesis_for(spec, &null)?;
                    Engine::Ts { model: data_model, hyp, burn_in: spec.burn_in }
                }
            };
            scenarios.push(Scenario { n, magnitude, engine });
        }
    }
    run_scenarios(spec, scenarios, false)
}

/// Distribution of the statistic and process norms against their limits
/// across the n-grid.
pub fn run_convergence_study(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    expect_kind(spec, StudyKind::Convergence)?;
    let scenarios = null_scenarios(spec)?;
    run_scenarios(spec, scenarios, true)
}

fn expect_kind(spec: &ExperimentSpec, kind: StudyKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::InvalidSpec(format!(
            "spec kind is {}, expected {}",
            spec.kind.name(),
            kind.name()
        )));
    }
    Ok(())
}

fn ts_hypothesis_for(spec: &ExperimentSpec, null: &TimeSeriesModel) -> Result<TsHypothesis> {
    match spec.model {
        ModelSpec::Ar1 { rho, sigma, noise: NoiseKind::Normal } => {
            TsHypothesis::ar1_normal(rho, sigma, spec.atoms, spec.psi_floor)
        }
        _ => {
            // no analytic invariant law: long-run empirical plug-in
            let mut stream = derive_stream(SeedSpec::new(spec.root_seed, HYP_STREAM));
            TsHypothesis::from_simulation(
                null,
                200_000,
                1_000,
                &mut stream,
                spec.atoms,
                spec.psi_floor,
            )
        }
    }
}

fn null_scenarios(spec: &ExperimentSpec) -> Result<Vec<Scenario>> {
    let mut scenarios = Vec::new();
    for &n in &spec.n_grid {
        let engine = match spec.test {
            TestKind::CvmDiffusion => {
                let model = spec
                    .model
                    .build_diffusion()
                    .ok_or_else(|| Error::InvalidSpec("diffusion model required".into()))?;
                let hyp = DiffusionHypothesis::from_model(
                    &model,
                    spec.domain,
                    spec.law_resolution,
                    spec.atoms,
                )?;
                Engine::Diffusion {
                    model,
                    hyp,
                    beta: spec.beta,
                    c: spec.c,
                    substeps: spec.substeps,
                }
            }
            TestKind::AdSign => {
                let model = spec
                    .model
                    .build_ts()
                    .ok_or_else(|| Error::InvalidSpec("time-series model required".into()))??;
                let hyp = ts_hypothesis_for(spec, &model)?;
                Engine::Ts { model, hyp, burn_in: spec.burn_in }
            }
        };
        scenarios.push(Scenario { n, magnitude: 0.0, engine });
    }
    Ok(scenarios)
}

/// Draw count for the transformed-norm limit comparisons.
const NORM_LIMIT_DRAWS: usize = 10_000;

fn run_scenarios(
    spec: &ExperimentSpec,
    scenarios: Vec<Scenario>,
    with_norms: bool,
) -> Result<ExperimentReport> {
    let limit = sample_limit_law(
        spec.test.limit_functional(),
        spec.limit_k,
        spec.limit_paths,
        default_limit_seed(spec.root_seed),
    )?;
    let critical = limit.critical_value(spec.alpha)?;

    // limits of the norm functionals, shared across the n-grid (the
    // hypothesis, hence the measure and profile, is the same null)
    let norm_limits = if with_norms {
        let engine = &scenarios[0].engine;
        let (psi_at_atoms, weights, floor): (Vec<f64>, Vec<f64>, Option<f64>) = match engine {
            Engine::Diffusion { hyp, .. } => (
                hyp.measure().atoms().iter().map(|&x| hyp.psi().eval(x)).collect(),
                hyp.measure().weights().to_vec(),
                Some(0.0),
            ),
            Engine::Ts { hyp, .. } => (
                hyp.mu().atoms().iter().map(|&x| hyp.psi(x)).collect(),
                hyp.mu().weights().to_vec(),
                Some(hyp.psi_floor()),
            ),
        };
        let unweighted = sample_norm_limit(
            &psi_at_atoms,
            &weights,
            None,
            NORM_LIMIT_DRAWS,
            SeedSpec::new(spec.root_seed, NORM_LIMIT_STREAM_BASE),
        );
        let weighted = sample_norm_limit(
            &psi_at_atoms,
            &weights,
            floor,
            NORM_LIMIT_DRAWS,
            SeedSpec::new(spec.root_seed, NORM_LIMIT_STREAM_BASE + NORM_LIMIT_DRAWS as u64),
        );
        Some((unweighted, weighted))
    } else {
        None
    };

    let mut rows = Vec::with_capacity(scenarios.len());
    for (idx, scenario) in scenarios.iter().enumerate() {
        let scenario_index = idx as u64;
        let outcomes: Vec<Result<RepOutcome>> = (0..spec.replications as u64)
            .into_par_iter()
            .map(|r| {
                let seed =
                    SeedSpec::new(spec.root_seed, scenario_index * REP_STREAM_BLOCK + r);
                scenario.engine.replicate(scenario.n, seed)
            })
            .collect();

        let mut stats = Vec::with_capacity(outcomes.len());
        let mut norms = Vec::with_capacity(outcomes.len());
        let mut weighted_norms = Vec::with_capacity(outcomes.len());
        let mut failures = 0usize;
        let mut first_error: Option<String> = None;
        for o in outcomes {
            match o {
                Ok(out) => {
                    stats.push(out.stat);
                    norms.push(out.norm);
                    weighted_norms.push(out.weighted_norm);
                }
                Err(e) => {
                    failures += 1;
                    if first_error.is_none() {
                        first_error = Some(e.to_string());
                    }
                }
            }
        }
        let budget = spec.replications / 100;
        if failures > budget {
            return Err(Error::ReplicationBudgetExceeded {
                failed: failures,
                total: spec.replications,
                budget,
                first: first_error.unwrap_or_default(),
            });
        }
        let completed = stats.len();
        let rejections = stats.iter().filter(|&&s| s > critical).count();
        let rate = rejections as f64 / completed as f64;
        let mean = stats.iter().sum::<f64>() / completed as f64;
        let var = stats.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / completed as f64;
        rows.push(ReportRow {
            study: spec.kind,
            test: spec.test,
            n: scenario.n,
            magnitude: scenario.magnitude,
            replications: completed,
            failures,
            rejections,
            reject_rate: rate,
            reject_se: (rate * (1.0 - rate) / completed as f64).sqrt(),
            stat_mean: mean,
            stat_var: var,
            ks_stat: Some(two_sample_ks(&stats, limit.draws())),
            ks_norm: norm_limits.as_ref().map(|(u, _)| two_sample_ks(&norms, u)),
            ks_norm_weighted: norm_limits
                .as_ref()
                .map(|(_, w)| two_sample_ks(&weighted_norms, w)),
        });
    }
    Ok(ExperimentReport { spec: spec.clone(), rows })
}
