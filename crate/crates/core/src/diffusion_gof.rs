//! Cramer-von Mises type test for the drift of a diffusion observed at
//! high frequency.
//!
//! The residual-marked process attaches mark
//! `(X_{t_i} - X_{t_{i-1}} - S0(X_{t_{i-1}}) dt_i) / sqrt(horizon)` to
//! anchor `X_{t_{i-1}}`. The statistic integrates the squared process
//! against the normalized variance-profile measure of the hypothesized
//! model and is compared with Monte Carlo quantiles of the integral of
//! squared Brownian motion.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::l2core::{build_marked_process, l2_inner, MarkedSample, QuadratureMeasure, StepFunction};
use crate::limitlaws::{LimitFunctional, LimitLawSample};
use crate::scalar::Real;
use crate::sde::{invariant_law, psi_function, DiffusionModel, DiscreteSample, InvariantLaw, PsiFunction};

use crate::decision::{SchemeMeta, TestMetadata, TestResult};

/// Quantile range kept when the variance-profile measure is discretized.
pub const MEASURE_TAIL: f64 = 5e-4;
/// Default atom count of the integration measure.
pub const DEFAULT_ATOMS: usize = 1 << 12;

/// The residual process of observations against a hypothesized drift.
pub fn u_process<R: Real>(
    sample: &DiscreteSample<R>,
    s0: impl Fn(R) -> R,
) -> Result<StepFunction<R>> {
    let marked = u_marks(sample, s0)?;
    build_marked_process(&marked)
}

/// Anchors and marks of the residual process.
pub fn u_marks<R: Real>(
    sample: &DiscreteSample<R>,
    s0: impl Fn(R) -> R,
) -> Result<MarkedSample<R>> {
    let horizon = sample.scheme().horizon();
    if !(horizon > R::zero()) {
        return Err(Error::ZeroHorizon);
    }
    let scale = horizon.sqrt().recip();
    let times = sample.scheme().times();
    let states = sample.states();
    let n = sample.n();
    let mut anchors = Vec::with_capacity(n);
    let mut marks = Vec::with_capacity(n);
    for i in 1..=n {
        let prev = states[i - 1];
        let dt = times[i] - times[i - 1];
        anchors.push(prev);
        marks.push((states[i] - prev - s0(prev) * dt) * scale);
    }
    MarkedSample::new(anchors, marks)
}

/// Driving-noise process of the same observations: marks
/// `sigma(X_{t_{i-1}}) dW_i / sqrt(horizon)`. Proof-device counterpart of
/// [`u_process`], reconstructible only when the simulator recorded its
/// Brownian increments.
pub fn noise_process<R: Real>(
    sample: &DiscreteSample<R>,
    noise: &[R],
    sigma: impl Fn(R) -> R,
) -> Result<StepFunction<R>> {
    let horizon = sample.scheme().horizon();
    if !(horizon > R::zero()) {
        return Err(Error::ZeroHorizon);
    }
    if noise.len() != sample.n() {
        return Err(Error::LengthMismatch { anchors: sample.n(), marks: noise.len() });
    }
    let scale = horizon.sqrt().recip();
    let states = sample.states();
    let anchors: Vec<R> = states[..sample.n()].to_vec();
    let marks: Vec<R> =
        anchors.iter().zip(noise).map(|(&x, &dw)| sigma(x) * dw * scale).collect();
    build_marked_process(&MarkedSample::new(anchors, marks)?)
}

/// Null hypothesis for the drift test: the hypothesized drift, its known
/// diffusion coefficient, the variance profile of the hypothesized model
/// and the normalized integration measure derived from it.
#[derive(Clone)]
pub struct DiffusionHypothesis {
    name: String,
    s0: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    sigma: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    law: InvariantLaw<f64>,
    psi: PsiFunction<f64>,
    measure: QuadratureMeasure<f64>,
}

impl std::fmt::Debug for DiffusionHypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffusionHypothesis").field("name", &self.name).finish()
    }
}

impl DiffusionHypothesis {
    /// Build the hypothesis from the model under the null: invariant law
    /// by speed-measure quadrature, variance profile by cumulative
    /// quadrature, integration measure discretized to `atoms` atoms on the
    /// law's central quantile range and normalized to unit mass.
    pub fn from_model(
        model: &DiffusionModel<f64>,
        domain: (f64, f64),
        law_resolution: usize,
        atoms: usize,
    ) -> Result<Self> {
        if atoms < 2 {
            return Err(Error::GridTooSmall { min: 2 });
        }
        let law = invariant_law(model, domain, law_resolution)?;
        let psi = psi_function(model, &law);
        let lo = law.quantile(MEASURE_TAIL);
        let hi = law.quantile(1.0 - MEASURE_TAIL);
        let cell = (hi - lo) / (atoms - 1) as f64;
        let grid: Vec<f64> = (0..atoms).map(|k| lo + cell * k as f64).collect();
        let weighted_density: Vec<f64> = grid
            .iter()
            .map(|&x| {
                let s = model.diffusion(x);
                s * s * law.density_at(x)
            })
            .collect();
        let measure =
            QuadratureMeasure::from_density_grid(grid, weighted_density)?.normalized_to(1.0)?;
        Ok(Self {
            name: model.name().to_string(),
            s0: model.drift_fn(),
            sigma: model.diffusion_fn(),
            law,
            psi,
            measure,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn s0(&self, x: f64) -> f64 {
        (self.s0)(x)
    }

    pub fn sigma(&self, x: f64) -> f64 {
        (self.sigma)(x)
    }

    pub fn law(&self) -> &InvariantLaw<f64> {
        &self.law
    }

    pub fn psi(&self) -> &PsiFunction<f64> {
        &self.psi
    }

    /// Normalized integration measure (unit total mass).
    pub fn measure(&self) -> &QuadratureMeasure<f64> {
        &self.measure
    }

    /// Full-domain variance-profile mass.
    pub fn psi_inf(&self) -> f64 {
        self.psi.total_mass()
    }
}

/// Statistic of a residual process against a hypothesis: quadrature of
/// the squared process over the normalized profile measure, scaled by the
/// profile's total mass.
pub fn cvm_statistic_of_process(
    process: &StepFunction<f64>,
    hyp: &DiffusionHypothesis,
) -> Result<f64> {
    let psi_inf = hyp.psi_inf();
    if !(psi_inf > 0.0) {
        return Err(Error::NonPositivePsiMass(psi_inf));
    }
    let tab = process.eval_sorted(hyp.measure.atoms());
    Ok(l2_inner(&tab, &tab, &hyp.measure)? / psi_inf)
}

/// The drift test statistic of discrete observations.
pub fn cvm_statistic(sample: &DiscreteSample<f64>, hyp: &DiffusionHypothesis) -> Result<f64> {
    let s0 = hyp.s0.clone();
    let process = u_process(sample, move |x| s0(x))?;
    cvm_statistic_of_process(&process, hyp)
}

/// Run the drift test at level `alpha` against a sample of the limit law.
pub fn diffusion_test(
    sample: &DiscreteSample<f64>,
    hyp: &DiffusionHypothesis,
    alpha: f64,
    limit: &LimitLawSample,
    data_seed: Option<crate::rng::SeedSpec>,
) -> Result<TestResult> {
    if limit.functional() != LimitFunctional::Cvm {
        return Err(Error::WrongLimitLaw { expected: "cvm", got: limit.functional().name() });
    }
    let statistic = cvm_statistic(sample, hyp)?;
    let metadata = TestMetadata {
        n: sample.n(),
        hypothesis: hyp.name.clone(),
        data_seed,
        scheme: Some(SchemeMeta {
            n: sample.n(),
            horizon: sample.scheme().horizon(),
            delta_max: sample.scheme().delta_max(),
        }),
        psi_floor: None,
        limit: limit.id(),
    };
    TestResult::from_statistic("cvm-diffusion", statistic, alpha, limit, metadata)
}

/// Direct double-sum evaluation of the statistic for cross-checking the
/// quadrature path: sum_{i,j} m_i m_j W(max(x_i, x_j)) / psi_inf where
/// W(t) is the measure mass at or above t. Quadratic cost; test oracle.
pub fn cvm_statistic_brute_force(
    marks: &MarkedSample<f64>,
    measure: &QuadratureMeasure<f64>,
    psi_inf: f64,
) -> f64 {
    let tail_mass = |t: f64| -> f64 {
        measure
            .atoms()
            .iter()
            .zip(measure.weights())
            .filter(|(&a, _)| a >= t)
            .map(|(_, &w)| w)
            .sum()
    };
    let anchors = marks.anchors();
    let m = marks.marks();
    let mut total = 0.0;
    for i in 0..anchors.len() {
        for j in 0..anchors.len() {
            total += m[i] * m[j] * tail_mass(anchors[i].max(anchors[j]));
        }
    }
    total / psi_inf
}
