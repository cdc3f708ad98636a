//! Admission probability over a grid of prover positions, from ranging
//! alone: a witness passes when its distance estimate is within `d_acc`,
//! and a position is admitted when at least `k` witnesses pass.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::range_estimate;
use crate::error::ConfigError;
use crate::geometry::{distance, Vector3, ZoneConfig};
use crate::stats::at_least_k_of;

const MAX_CELLS: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x_min: -20.0,
            x_max: 20.0,
            y_min: -20.0,
            y_max: 20.0,
            step: 0.5,
        }
    }
}

fn axis_len(min: f64, max: f64, step: f64) -> usize {
    ((max - min) / step + 1e-9).floor() as usize + 1
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max, self.step]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.step <= 0.0 {
            return Err(ConfigError::invalid("step", "must be positive and finite"));
        }
        if self.x_max < self.x_min || self.y_max < self.y_min {
            return Err(ConfigError::invalid("bounds", "max must not be below min"));
        }
        let cells = axis_len(self.x_min, self.x_max, self.step)
            .checked_mul(axis_len(self.y_min, self.y_max, self.step))
            .unwrap_or(usize::MAX);
        if cells > MAX_CELLS {
            return Err(ConfigError::invalid("step", format!("grid of {cells} cells is too large")));
        }
        Ok(())
    }

    /// Cell centers, row by row with y ascending, x ascending within a row.
    pub fn points(&self) -> Vec<Vector3> {
        let nx = axis_len(self.x_min, self.x_max, self.step);
        let ny = axis_len(self.y_min, self.y_max, self.step);
        (0..ny)
            .flat_map(|j| {
                (0..nx).map(move |i| {
                    Vector3::planar(self.x_min + i as f64 * self.step, self.y_min + j as f64 * self.step)
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapMode {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub x: f64,
    pub y: f64,
    pub p: f64,
    /// 1 inside the noise-free effective zone.
    pub overlay: u8,
}

/// Exact admission probability at `point`.
pub fn admission_probability(zone: &ZoneConfig, point: Vector3) -> f64 {
    let probs: Vec<f64> = zone
        .witness_positions
        .iter()
        .map(|w| zone.channel.gate_pass_probability(distance(*w, point), zone.d_acc))
        .collect();
    at_least_k_of(&probs, zone.quorum_k)
}

/// Fraction of `samples` simulated claims at `point` that reach quorum.
pub fn simulate_admission<R: Rng + ?Sized>(zone: &ZoneConfig, point: Vector3, samples: usize, rng: &mut R) -> f64 {
    let dists: Vec<f64> = zone.witness_positions.iter().map(|w| distance(*w, point)).collect();
    let admitted = (0..samples)
        .filter(|_| {
            let passing = dists
                .iter()
                .filter(|&&d| range_estimate("", d, &zone.channel, rng).estimate <= zone.d_acc)
                .count();
            passing >= zone.quorum_k
        })
        .count();
    admitted as f64 / samples.max(1) as f64
}

/// Random stream for cell `index`; cells are independent of evaluation order.
pub fn cell_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn heatmap(
    zone: &ZoneConfig,
    grid: &GridSpec,
    mode: HeatmapMode,
    samples: usize,
    seed: u64,
) -> Result<Vec<HeatmapCell>, ConfigError> {
    grid.validate()?;
    if mode == HeatmapMode::MonteCarlo && samples == 0 {
        return Err(ConfigError::invalid("samples", "must be at least 1"));
    }
    let points = grid.points();
    Ok(points
        .par_iter()
        .enumerate()
        .map(|(i, &pt)| HeatmapCell {
            x: pt.x,
            y: pt.y,
            p: match mode {
                HeatmapMode::Analytic => admission_probability(zone, pt),
                HeatmapMode::MonteCarlo => simulate_admission(zone, pt, samples, &mut cell_rng(seed, i)),
            },
            overlay: zone.in_effective_zone(pt) as u8,
        })
        .collect())
}

pub fn write_csv<W: Write>(cells: &[HeatmapCell], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for c in cells {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<HeatmapCell>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}
