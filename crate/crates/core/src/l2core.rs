//! Marked empirical processes as step functions, and L2 inner products
//! against a finite Borel measure represented by atoms and weights.
//!
//! The central object is the process
//! `x -> sum_i 1{anchor_i <= x} * mark_i`, a right-continuous step
//! function with jumps at the distinct anchors. Indicators follow the
//! closed-interval convention: an anchor exactly equal to `x` counts.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Observed pairs (anchor, mark) carrying a marked empirical process.
///
/// Anchors are the lagged states `X_{i-1}`, marks the martingale
/// differences `m_i` attached to them.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedSample<R: Real> {
    anchors: Vec<R>,
    marks: Vec<R>,
}

impl<R: Real> MarkedSample<R> {
    pub fn new(anchors: Vec<R>, marks: Vec<R>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::EmptySample);
        }
        if anchors.len() != marks.len() {
            return Err(Error::LengthMismatch { anchors: anchors.len(), marks: marks.len() });
        }
        if anchors.iter().chain(marks.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "marked sample" });
        }
        Ok(Self { anchors, marks })
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn anchors(&self) -> &[R] {
        &self.anchors
    }

    pub fn marks(&self) -> &[R] {
        &self.marks
    }

    /// Pointwise scaling of all marks.
    pub fn scale_marks(&self, factor: R) -> Self {
        Self {
            anchors: self.anchors.clone(),
            marks: self.marks.iter().map(|&m| m * factor).collect(),
        }
    }

    /// Sum of |m_i|^(2+delta); empirical proxy for the Lyapunov-type
    /// negligibility of the marks.
    pub fn lyapunov_diagnostic(&self, delta: R) -> Result<R> {
        if delta <= R::zero() {
            return Err(Error::OutOfRange {
                name: "delta",
                value: delta.to_f64_lossy(),
                range: "(0, inf)",
            });
        }
        let p = R::from_f64_lossy(2.0) + delta;
        Ok(self.marks.iter().map(|m| m.abs().powf(p)).sum())
    }
}

/// Right-continuous step function: value is 0 left of the first jump and
/// `values[k]` on `[jumps[k], jumps[k+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction<R: Real> {
    jumps: Vec<R>,
    values: Vec<R>,
}

impl<R: Real> StepFunction<R> {
    /// Build from jump locations (strictly increasing) and the cumulative
    /// values attained at them.
    pub fn from_parts(jumps: Vec<R>, values: Vec<R>) -> Result<Self> {
        if jumps.len() != values.len() {
            return Err(Error::LengthMismatch { anchors: jumps.len(), marks: values.len() });
        }
        if jumps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::NonIncreasingTimes { index: 0 });
        }
        Ok(Self { jumps, values })
    }

    pub fn jump_points(&self) -> &[R] {
        &self.jumps
    }

    pub fn cumulative_values(&self) -> &[R] {
        &self.values
    }

    /// Value at `x`.
    pub fn eval(&self, x: R) -> R {
        let idx = self.jumps.partition_point(|&j| j <= x);
        if idx == 0 {
            R::zero()
        } else {
            self.values[idx - 1]
        }
    }

    /// Values at each point of a sorted grid; single forward merge pass.
    pub fn eval_sorted(&self, grid: &[R]) -> Vec<R> {
        debug_assert!(grid.windows(2).all(|w| w[0] <= w[1]), "grid must be sorted");
        let mut out = Vec::with_capacity(grid.len());
        let mut k = 0usize;
        for &x in grid {
            while k < self.jumps.len() && self.jumps[k] <= x {
                k += 1;
            }
            out.push(if k == 0 { R::zero() } else { self.values[k - 1] });
        }
        out
    }

    /// CSV rendering with columns `x,value` for plotting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,value")?;
        for (x, v) in self.jumps.iter().zip(&self.values) {
            writeln!(w, "{:.16e},{:.16e}", x.to_f64_lossy(), v.to_f64_lossy())?;
        }
        Ok(())
    }
}

/// The marked empirical process of a sample: jump points are the sorted
/// distinct anchors, ties merged with summed marks.
pub fn build_marked_process<R: Real>(sample: &MarkedSample<R>) -> Result<StepFunction<R>> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut pairs: Vec<(R, R)> =
        sample.anchors.iter().copied().zip(sample.marks.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("anchors are finite"));

    let mut jumps: Vec<R> = Vec::with_capacity(pairs.len());
    let mut values: Vec<R> = Vec::with_capacity(pairs.len());
    let mut running = R::zero();
    for (anchor, mark) in pairs {
        running += mark;
        match jumps.last() {
            Some(&last) if last == anchor => {
                *values.last_mut().expect("values nonempty with jumps") = running;
            }
            _ => {
                jumps.push(anchor);
                values.push(running);
            }
        }
    }
    Ok(StepFunction { jumps, values })
}

/// Cumulative conditional-variance process `x -> sum 1{anchor_i <= x} v_i`
/// for model-supplied conditional variances `v_i`; compared against a
/// reference variance profile by the caller.
pub fn variance_process_diagnostic<R: Real>(
    anchors: &[R],
    cond_variances: &[R],
) -> Result<StepFunction<R>> {
    if let Some(index) = cond_variances.iter().position(|v| *v < R::zero()) {
        return Err(Error::NegativeVariance { index });
    }
    let sample = MarkedSample::new(anchors.to_vec(), cond_variances.to_vec())?;
    build_marked_process(&sample)
}

/// Strictly positive weight applied pointwise to a process.
pub struct WeightFunction<R: Real> {
    evaluator: Box<dyn Fn(R) -> R + Send + Sync>,
    description: String,
}

impl<R: Real> WeightFunction<R> {
    pub fn new(description: impl Into<String>, evaluator: impl Fn(R) -> R + Send + Sync + 'static) -> Self {
        Self { evaluator: Box::new(evaluator), description: description.into() }
    }

    pub fn eval(&self, x: R) -> R {
        (self.evaluator)(x)
    }

    pub fn description(&self) -> &str {
        &self.description
    }
}

/// Tabulate `w(x) * process(x)` on a sorted grid.
pub fn apply_weight<R: Real>(
    process: &StepFunction<R>,
    w: &WeightFunction<R>,
    eval_grid: &[R],
) -> Result<Vec<R>> {
    let base = process.eval_sorted(eval_grid);
    eval_grid
        .iter()
        .zip(base)
        .map(|(&x, v)| {
            let wx = w.eval(x);
            if !(wx > R::zero()) || !wx.is_finite() {
                return Err(Error::InvalidWeight { x: x.to_f64_lossy(), value: wx.to_f64_lossy() });
            }
            Ok(wx * v)
        })
        .collect()
}

/// How the atoms of a [`QuadratureMeasure`] were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    /// Caller-supplied atom/weight pairs.
    DiscreteAtoms,
    /// Density tabulated on a grid and lumped into atom weights.
    DensityOnGrid,
}

/// Finite Borel measure as a sorted list of atoms with non-negative
/// weights. Every integral in the crate reduces to a weighted sum over
/// these atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureMeasure<R: Real> {
    kind: MeasureKind,
    atoms: Vec<R>,
    weights: Vec<R>,
}

impl<R: Real> QuadratureMeasure<R> {
    /// Discrete measure from atom/weight pairs; atoms are sorted, ties kept.
    pub fn from_atoms(mut atoms: Vec<R>, weights: Vec<R>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptySample);
        }
        if atoms.len() != weights.len() {
            return Err(Error::LengthMismatch { anchors: atoms.len(), marks: weights.len() });
        }
        let mut idx: Vec<usize> = (0..atoms.len()).collect();
        idx.sort_by(|&i, &j| atoms[i].partial_cmp(&atoms[j]).expect("atoms are finite"));
        let sorted_weights: Vec<R> = idx.iter().map(|&i| weights[i]).collect();
        atoms.sort_by(|a, b| a.partial_cmp(b).expect("atoms are finite"));
        if let Some(index) = sorted_weights.iter().position(|w| *w < R::zero()) {
            return Err(Error::NegativeMeasureWeight { index });
        }
        Ok(Self { kind: MeasureKind::DiscreteAtoms, atoms, weights: sorted_weights })
    }

    /// Lump a density tabulated on a sorted grid into atom weights
    /// (trapezoid cells: half-cells at the ends).
    pub fn from_density_grid(grid: Vec<R>, density: Vec<R>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::GridTooSmall { min: 2 });
        }
        if grid.len() != density.len() {
            return Err(Error::LengthMismatch { anchors: grid.len(), marks: density.len() });
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::NonIncreasingTimes { index: 0 });
        }
        let half = R::from_f64_lossy(0.5);
        let n = grid.len();
        let weights: Vec<R> = (0..n)
            .map(|k| {
                let cell = if k == 0 {
                    half * (grid[1] - grid[0])
                } else if k == n - 1 {
                    half * (grid[n - 1] - grid[n - 2])
                } else {
                    half * (grid[k + 1] - grid[k - 1])
                };
                density[k] * cell
            })
            .collect();
        if let Some(index) = weights.iter().position(|w| *w < R::zero()) {
            return Err(Error::NegativeMeasureWeight { index });
        }
        Ok(Self { kind: MeasureKind::DensityOnGrid, atoms: grid, weights })
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn atoms(&self) -> &[R] {
        &self.atoms
    }

    pub fn weights(&self) -> &[R] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> R {
        self.weights.iter().copied().sum()
    }

    /// Rescale weights so the total mass is exactly `target`.
    pub fn normalized_to(mut self, target: R) -> Result<Self> {
        let mass = self.total_mass();
        if !(mass > R::zero()) {
            return Err(Error::NonPositivePsiMass(mass.to_f64_lossy()));
        }
        let factor = target / mass;
        for w in &mut self.weights {
            *w *= factor;
        }
        Ok(self)
    }

    /// Mass-preserving coarsening: adjacent atom pairs merged at their
    /// weighted mean position. Used by resolution-doubling diagnostics.
    pub fn coarsened(&self) -> Self {
        let mut atoms = Vec::with_capacity(self.len().div_ceil(2));
        let mut weights = Vec::with_capacity(self.len().div_ceil(2));
        let mut k = 0;
        while k < self.len() {
            if k + 1 < self.len() {
                let w = self.weights[k] + self.weights[k + 1];
                let pos = if w > R::zero() {
                    (self.atoms[k] * self.weights[k] + self.atoms[k + 1] * self.weights[k + 1]) / w
                } else {
                    self.atoms[k]
                };
                atoms.push(pos);
                weights.push(w);
            } else {
                atoms.push(self.atoms[k]);
                weights.push(self.weights[k]);
            }
            k += 2;
        }
        Self { kind: self.kind, atoms, weights }
    }
}

/// Inner product of two tabulations against the measure's atoms.
pub fn l2_inner<R: Real>(f: &[R], g: &[R], nu: &QuadratureMeasure<R>) -> Result<R> {
    if f.len() != nu.len() {
        return Err(Error::TabulationMismatch { values: f.len(), atoms: nu.len() });
    }
    if g.len() != nu.len() {
        return Err(Error::TabulationMismatch { values: g.len(), atoms: nu.len() });
    }
    Ok(f.iter().zip(g).zip(&nu.weights).map(|((&a, &b), &w)| a * b * w).sum())
}

/// Norm induced by [`l2_inner`].
pub fn l2_norm<R: Real>(f: &[R], nu: &QuadratureMeasure<R>) -> Result<R> {
    l2_inner(f, f, nu).map(|v| v.sqrt())
}

/// Squared norm of a step process under `nu`, by tabulation + quadrature.
pub fn step_norm_sq<R: Real>(process: &StepFunction<R>, nu: &QuadratureMeasure<R>) -> Result<R> {
    let tab = process.eval_sorted(nu.atoms());
    l2_inner(&tab, &tab, nu)
}
