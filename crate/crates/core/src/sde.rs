//! Diffusion model catalog, invariant-law machinery, high-frequency
//! sampling schemes and Euler-Maruyama simulation.
//!
//! The invariant density of `dX = S(X)dt + sigma(X)dW` is computed from
//! the speed-measure formula `density(x) ~ exp(int_0^x 2S/sigma^2) / sigma^2(x)`,
//! normalized by quadrature on a bounded domain. Catalog models keep
//! Lipschitz drift and strictly positive diffusion so the formula applies.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::scalar::Real;

type ScalarFn<R> = Arc<dyn Fn(R) -> R + Send + Sync>;

/// One-dimensional diffusion `dX = S(X) dt + sigma(X) dW`.
#[derive(Clone)]
pub struct DiffusionModel<R: Real> {
    name: String,
    drift: ScalarFn<R>,
    diffusion: ScalarFn<R>,
    lipschitz_hint: Option<R>,
}

impl<R: Real> std::fmt::Debug for DiffusionModel<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffusionModel").field("name", &self.name).finish()
    }
}

impl<R: Real> DiffusionModel<R> {
    pub fn new(
        name: impl Into<String>,
        drift: impl Fn(R) -> R + Send + Sync + 'static,
        diffusion: impl Fn(R) -> R + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            lipschitz_hint: None,
        }
    }

    /// Ornstein-Uhlenbeck: S(x) = -theta x, constant diffusion. Invariant
    /// law N(0, sigma^2 / (2 theta)).
    pub fn ornstein_uhlenbeck(theta: R, sigma: R) -> Self {
        let mut m = Self::new(
            format!("ou(theta={theta},sigma={sigma})"),
            move |x| -theta * x,
            move |_| sigma,
        );
        m.lipschitz_hint = Some(theta.abs());
        m
    }

    /// Mean-reverting drift with a bounded nonlinearity:
    /// S(x) = -theta x + a tanh(x), constant diffusion.
    pub fn tanh_drift(theta: R, a: R, sigma: R) -> Self {
        let mut m = Self::new(
            format!("tanh(theta={theta},a={a},sigma={sigma})"),
            move |x| -theta * x + a * x.tanh(),
            move |_| sigma,
        );
        m.lipschitz_hint = Some(theta.abs() + a.abs());
        m
    }

    /// Same diffusion with a constant added to the drift; used to build
    /// misspecified null hypotheses in power studies.
    pub fn with_drift_shift(&self, shift: R) -> Self {
        let base = self.drift.clone();
        Self {
            name: format!("{}+shift({shift})", self.name),
            drift: Arc::new(move |x| base(x) + shift),
            diffusion: self.diffusion.clone(),
            lipschitz_hint: self.lipschitz_hint,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn drift(&self, x: R) -> R {
        (self.drift)(x)
    }

    pub fn diffusion(&self, x: R) -> R {
        (self.diffusion)(x)
    }

    pub fn drift_fn(&self) -> ScalarFn<R> {
        self.drift.clone()
    }

    pub fn diffusion_fn(&self) -> ScalarFn<R> {
        self.diffusion.clone()
    }

    pub fn lipschitz_hint(&self) -> Option<R> {
        self.lipschitz_hint
    }
}

/// Observation times 0 = t_0 < t_1 < ... < t_n. Spacing and horizon are
/// recomputed from the times on demand, never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingScheme<R: Real> {
    times: Vec<R>,
}

impl<R: Real> SamplingScheme<R> {
    /// Validate and wrap explicit observation times starting at 0.
    pub fn from_times(times: Vec<R>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::GridTooSmall { min: 2 });
        }
        if times[0] != R::zero() {
            return Err(Error::NonIncreasingTimes { index: 0 });
        }
        if let Some(i) = times.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::NonIncreasingTimes { index: i + 1 });
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[R] {
        &self.times
    }

    /// Number of observation intervals.
    pub fn n(&self) -> usize {
        self.times.len() - 1
    }

    /// Largest spacing.
    pub fn delta_max(&self) -> R {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(R::zero(), |a, b| if b > a { b } else { a })
    }

    /// Final observation time.
    pub fn horizon(&self) -> R {
        *self.times.last().expect("times nonempty")
    }
}

/// Uniform high-frequency scheme with spacing `c * n^(-beta)`. The range
/// `1/2 < beta < 1` is exactly what makes the horizon diverge while
/// `n * delta^2` vanishes.
pub fn make_scheme<R: Real>(n: usize, beta: f64, c: f64) -> Result<SamplingScheme<R>> {
    if !(beta > 0.5 && beta < 1.0) {
        return Err(Error::InvalidScheme { beta });
    }
    if !(c > 0.0) {
        return Err(Error::OutOfRange { name: "c", value: c, range: "(0, inf)" });
    }
    if n == 0 {
        return Err(Error::GridTooSmall { min: 1 });
    }
    let delta = c * (n as f64).powf(-beta);
    let times = (0..=n).map(|i| R::from_f64_lossy(i as f64 * delta)).collect();
    Ok(SamplingScheme { times })
}

/// Discrete observations of a trajectory on a sampling scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSample<R: Real> {
    scheme: SamplingScheme<R>,
    states: Vec<R>,
}

impl<R: Real> DiscreteSample<R> {
    pub fn new(scheme: SamplingScheme<R>, states: Vec<R>) -> Result<Self> {
        if states.len() != scheme.times().len() {
            return Err(Error::LengthMismatch {
                anchors: scheme.times().len(),
                marks: states.len(),
            });
        }
        if states.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite { context: "discrete sample states" });
        }
        Ok(Self { scheme, states })
    }

    pub fn scheme(&self) -> &SamplingScheme<R> {
        &self.scheme
    }

    pub fn states(&self) -> &[R] {
        &self.states
    }

    pub fn n(&self) -> usize {
        self.scheme.n()
    }

    /// CSV rendering with columns `t,X`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,X")?;
        for (t, x) in self.scheme.times().iter().zip(&self.states) {
            writeln!(w, "{:.16e},{:.16e}", t.to_f64_lossy(), x.to_f64_lossy())?;
        }
        Ok(())
    }
}

const DIVERGENCE_GUARD: f64 = 1e12;

/// Euler-Maruyama simulation observed at the scheme times, refining each
/// observation interval into `substeps` internal steps. Also returns the
/// Brownian increment aggregated over each observation interval, which
/// test code uses to reconstruct the driving-noise process.
pub fn euler_maruyama_with_noise<R: Real>(
    model: &DiffusionModel<R>,
    scheme: &SamplingScheme<R>,
    x0: R,
    stream: &mut Stream,
    substeps: usize,
) -> Result<(DiscreteSample<R>, Vec<R>)> {
    if substeps == 0 {
        return Err(Error::OutOfRange { name: "substeps", value: 0.0, range: "[1, inf)" });
    }
    let guard = R::from_f64_lossy(DIVERGENCE_GUARD);
    let mut states = Vec::with_capacity(scheme.times().len());
    let mut noise = Vec::with_capacity(scheme.n());
    let mut x = x0;
    states.push(x);
    let sub = R::from_count(substeps);
    for (i, window) in scheme.times().windows(2).enumerate() {
        let h = (window[1] - window[0]) / sub;
        let sqrt_h = h.sqrt();
        let mut w_inc = R::zero();
        for _ in 0..substeps {
            let xi = R::from_f64_lossy(stream.standard_normal());
            let dw = sqrt_h * xi;
            x = x + model.drift(x) * h + model.diffusion(x) * dw;
            w_inc += dw;
        }
        if !x.is_finite() || x.abs() > guard {
            return Err(Error::TrajectoryDiverged { step: i + 1 });
        }
        states.push(x);
        noise.push(w_inc);
    }
    Ok((DiscreteSample { scheme: scheme.clone(), states }, noise))
}

/// Euler-Maruyama simulation observed at the scheme times.
pub fn euler_maruyama<R: Real>(
    model: &DiffusionModel<R>,
    scheme: &SamplingScheme<R>,
    x0: R,
    stream: &mut Stream,
    substeps: usize,
) -> Result<DiscreteSample<R>> {
    euler_maruyama_with_noise(model, scheme, x0, stream, substeps).map(|(s, _)| s)
}

/// Plain Euler burn-in for models without an invariant-law oracle:
/// advances `x0` through `n_steps` steps of width `h` and returns the
/// final state.
pub fn burn_in<R: Real>(
    model: &DiffusionModel<R>,
    x0: R,
    h: R,
    n_steps: usize,
    stream: &mut Stream,
) -> Result<R> {
    let guard = R::from_f64_lossy(DIVERGENCE_GUARD);
    let sqrt_h = h.sqrt();
    let mut x = x0;
    for i in 0..n_steps {
        let xi = R::from_f64_lossy(stream.standard_normal());
        x = x + model.drift(x) * h + model.diffusion(x) * sqrt_h * xi;
        if !x.is_finite() || x.abs() > guard {
            return Err(Error::TrajectoryDiverged { step: i + 1 });
        }
    }
    Ok(x)
}

/// Default grid resolution for invariant-law quadrature.
pub const LAW_RESOLUTION: usize = 1 << 14;

/// Tabulated stationary law: density, distribution function, quantile and
/// absolute moments on a bounded domain.
#[derive(Debug, Clone)]
pub struct InvariantLaw<R: Real> {
    grid: Vec<R>,
    density: Vec<R>,
    cdf: Vec<R>,
    abs_moment2: R,
    abs_moment3: R,
}

impl<R: Real> InvariantLaw<R> {
    pub fn support(&self) -> (R, R) {
        (self.grid[0], *self.grid.last().expect("grid nonempty"))
    }

    pub fn grid(&self) -> &[R] {
        &self.grid
    }

    pub fn density_values(&self) -> &[R] {
        &self.density
    }

    pub fn abs_moment2(&self) -> R {
        self.abs_moment2
    }

    pub fn abs_moment3(&self) -> R {
        self.abs_moment3
    }

    fn cell(&self) -> R {
        self.grid[1] - self.grid[0]
    }

    /// Density at `x` (0 outside the domain).
    pub fn density_at(&self, x: R) -> R {
        interp(&self.grid, &self.density, x, R::zero(), R::zero())
    }

    /// Distribution function at `x` (0 and 1 outside the domain).
    pub fn cdf_at(&self, x: R) -> R {
        interp(&self.grid, &self.cdf, x, R::zero(), R::one())
    }

    /// Quantile by monotone inversion of the tabulated CDF, `p` in (0,1).
    pub fn quantile(&self, p: R) -> R {
        assert!(p > R::zero() && p < R::one(), "quantile needs p in (0,1)");
        let idx = self.cdf.partition_point(|&v| v < p);
        if idx == 0 {
            return self.grid[0];
        }
        if idx >= self.cdf.len() {
            return *self.grid.last().expect("grid nonempty");
        }
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        let (x0, x1) = (self.grid[idx - 1], self.grid[idx]);
        if c1 > c0 {
            x0 + (p - c0) / (c1 - c0) * (x1 - x0)
        } else {
            x0
        }
    }
}

/// Linear interpolation of tabulated values with constant extrapolation.
fn interp<R: Real>(grid: &[R], values: &[R], x: R, left: R, right: R) -> R {
    let last = *grid.last().expect("grid nonempty");
    if x < grid[0] {
        return left;
    }
    if x > last {
        return right;
    }
    if x == last {
        return values[values.len() - 1];
    }
    let idx = grid.partition_point(|&g| g <= x);
    let (x0, x1) = (grid[idx - 1], grid[idx]);
    let (v0, v1) = (values[idx - 1], values[idx]);
    v0 + (x - x0) / (x1 - x0) * (v1 - v0)
}

/// Invariant law of an ergodic diffusion on a bounded domain by the
/// speed-measure formula, normalized numerically.
pub fn invariant_law<R: Real>(
    model: &DiffusionModel<R>,
    domain: (R, R),
    resolution: usize,
) -> Result<InvariantLaw<R>> {
    if resolution < 16 {
        return Err(Error::GridTooSmall { min: 16 });
    }
    let (lo, hi) = domain;
    if !(hi > lo) {
        return Err(Error::OutOfRange {
            name: "domain",
            value: (hi - lo).to_f64_lossy(),
            range: "(0, inf) width",
        });
    }
    let m = resolution;
    let cell = (hi - lo) / R::from_count(m - 1);
    let grid: Vec<R> = (0..m).map(|k| lo + cell * R::from_count(k)).collect();

    // log unnormalized density: -2 ln sigma + int 2S/sigma^2, cumulative
    // trapezoid from the left edge (the base point only shifts the constant)
    let two = R::from_f64_lossy(2.0);
    let half = R::from_f64_lossy(0.5);
    let ratio: Vec<R> = grid
        .iter()
        .map(|&x| {
            let s = model.diffusion(x);
            two * model.drift(x) / (s * s)
        })
        .collect();
    let mut log_density = Vec::with_capacity(m);
    let mut acc = R::zero();
    for k in 0..m {
        if k > 0 {
            acc += half * (ratio[k - 1] + ratio[k]) * cell;
        }
        let s = model.diffusion(grid[k]);
        log_density.push(acc - (s * s).ln());
    }
    let max_log = log_density.iter().copied().fold(R::neg_infinity(), R::max);
    if !max_log.is_finite() {
        return Err(Error::NotPositiveRecurrent { reason: "log-density not finite on domain" });
    }
    let density_raw: Vec<R> = log_density.iter().map(|&l| (l - max_log).exp()).collect();

    // decay at the truncation boundary is what certifies positive
    // recurrence on the chosen domain
    let edge_tol = R::from_f64_lossy(1e-6);
    if density_raw[0] > edge_tol || density_raw[m - 1] > edge_tol {
        return Err(Error::NotPositiveRecurrent {
            reason: "density does not vanish at the domain boundary",
        });
    }

    let mass = trapezoid_mass(&density_raw, cell);
    if !mass.is_finite() || !(mass > R::zero()) {
        return Err(Error::NotPositiveRecurrent { reason: "non-integrable density on domain" });
    }
    let density: Vec<R> = density_raw.iter().map(|&d| d / mass).collect();

    let mut cdf = Vec::with_capacity(m);
    let mut acc = R::zero();
    cdf.push(R::zero());
    for k in 1..m {
        acc += half * (density[k - 1] + density[k]) * cell;
        cdf.push(acc.min(R::one()));
    }
    let last = *cdf.last().expect("cdf nonempty");
    // the tail mass outside the grid is below the edge tolerance; pin the
    // endpoint so quantile inversion is total on (0,1)
    if (last - R::one()).abs() > R::from_f64_lossy(1e-6) {
        return Err(Error::NotPositiveRecurrent { reason: "cdf does not reach 1 on domain" });
    }
    *cdf.last_mut().expect("cdf nonempty") = R::one();

    let moment = |p: i32| {
        let vals: Vec<R> = grid.iter().zip(&density).map(|(&x, &d)| x.abs().powi(p) * d).collect();
        trapezoid_mass(&vals, cell)
    };
    let abs_moment2 = moment(2);
    let abs_moment3 = moment(3);

    Ok(InvariantLaw { grid, density, cdf, abs_moment2, abs_moment3 })
}

fn trapezoid_mass<R: Real>(values: &[R], cell: R) -> R {
    let half = R::from_f64_lossy(0.5);
    let inner: R = values[1..values.len() - 1].iter().copied().sum();
    (inner + half * (values[0] + values[values.len() - 1])) * cell
}

/// Cumulative diffusion-weighted mass `x -> int_{-inf}^x sigma^2 d mu`,
/// tabulated on the law's grid, with its total mass.
#[derive(Debug, Clone)]
pub struct PsiFunction<R: Real> {
    grid: Vec<R>,
    values: Vec<R>,
}

impl<R: Real> PsiFunction<R> {
    pub fn eval(&self, x: R) -> R {
        interp(&self.grid, &self.values, x, R::zero(), self.total_mass())
    }

    /// Psi at +infinity.
    pub fn total_mass(&self) -> R {
        *self.values.last().expect("values nonempty")
    }

    pub fn grid(&self) -> &[R] {
        &self.grid
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }
}

/// Build the variance profile of a diffusion hypothesis.
pub fn psi_function<R: Real>(model: &DiffusionModel<R>, law: &InvariantLaw<R>) -> PsiFunction<R> {
    let half = R::from_f64_lossy(0.5);
    let cell = law.cell();
    let weighted: Vec<R> = law
        .grid
        .iter()
        .zip(&law.density)
        .map(|(&x, &d)| {
            let s = model.diffusion(x);
            s * s * d
        })
        .collect();
    let mut values = Vec::with_capacity(weighted.len());
    let mut acc = R::zero();
    values.push(R::zero());
    for k in 1..weighted.len() {
        acc += half * (weighted[k - 1] + weighted[k]) * cell;
        values.push(acc);
    }
    PsiFunction { grid: law.grid.clone(), values }
}

/// Draw from the invariant law by quantile inversion of one uniform.
pub fn stationary_start<R: Real>(law: &InvariantLaw<R>, stream: &mut Stream) -> R {
    stationary_start_from_uniform(law, R::from_f64_lossy(stream.uniform()))
}

/// Deterministic quantile-transform hook used by tests.
pub fn stationary_start_from_uniform<R: Real>(law: &InvariantLaw<R>, u: R) -> R {
    law.quantile(u)
}
