//! Central finite-difference checks for tape gradients.
//!
//! The numeric side only ever runs forward passes on detached tapes, so it
//! shares no code with `backward`.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tape::{Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Step for `(f(x+h) − f(x−h)) / 2h`.
    pub step: f64,
    /// Coordinates to probe across all inputs; every coordinate when the inputs hold fewer.
    pub samples: usize,
    pub seed: u64,
    /// Smallest denominator of the relative error, so near-zero gradients are
    /// compared absolutely.
    pub floor: f64,
    pub tolerance: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { step: 1e-5, samples: 128, seed: 0, floor: 1e-6, tolerance: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub input: usize,
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub probes: Vec<Probe>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn checked(&self) -> usize {
        self.probes.len()
    }

    pub fn worst(&self) -> Option<&Probe> {
        self.probes.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }

    pub fn max_rel_error(&self) -> f64 {
        self.worst().map_or(0.0, |p| p.rel_error)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `backward` gradients of the scalar built by `f` against central
/// differences, for sampled coordinates of `inputs`.
pub fn check<F>(inputs: &[Array2<f64>], config: &GradCheckConfig, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let mut grads = tape.backward(loss)?;
    let analytic: Vec<Array2<f64>> = vars.iter().zip(inputs).map(|(&v, x)| grads.take_or_zeros(v, x.dim())).collect();

    let eval = |xs: &[Array2<f64>]| -> Result<f64> {
        let mut t = Tape::detached();
        let vs: Vec<Var> = xs.iter().map(|x| t.leaf(x.clone())).collect();
        let out = f(&mut t, &vs)?;
        match t.value(out).dim() {
            (1, 1) => Ok(t.value(out)[[0, 0]]),
            d => Err(Error::Tape(format!("checked function returned {d:?}, not a scalar"))),
        }
    };

    let total: usize = inputs.iter().map(|x| x.len()).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut picks: Vec<usize> =
        if total <= config.samples { (0..total).collect() } else { sample(&mut rng, total, config.samples).into_vec() };
    picks.sort_unstable();

    let mut work: Vec<Array2<f64>> = inputs.to_vec();
    let mut probes = Vec::with_capacity(picks.len());
    for flat in picks {
        let (mut input, mut offset) = (0, flat);
        while offset >= inputs[input].len() {
            offset -= inputs[input].len();
            input += 1;
        }
        let cols = inputs[input].ncols();
        let (row, col) = (offset / cols, offset % cols);
        let x0 = inputs[input][[row, col]];
        work[input][[row, col]] = x0 + config.step;
        let up = eval(&work)?;
        work[input][[row, col]] = x0 - config.step;
        let down = eval(&work)?;
        work[input][[row, col]] = x0;
        let numeric = (up - down) / (2.0 * config.step);
        let a = analytic[input][[row, col]];
        probes.push(Probe {
            input,
            row,
            col,
            analytic: a,
            numeric,
            rel_error: relative_error(a, numeric, config.floor),
        });
    }
    Ok(GradCheckReport { probes, tolerance: config.tolerance })
}
