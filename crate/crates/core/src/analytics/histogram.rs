use crate::error::{Error, Result};
use crate::types::TIME_RESOLUTION_NS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Counts,
    /// Bin contents sum to one.
    Probability,
    /// Bin contents integrate to one.
    Density,
}

/// Fixed-width histogram over times or delays in ns.
///
/// Times live on a 2 ns grid, so the default bins are 2 ns wide and centred
/// on the grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    /// Raw counts, never rescaled.
    pub counts: Vec<f64>,
    /// Sum of every filled weight, including entries outside the range.
    pub total_weight: f64,
    pub normalization: Normalization,
    /// Divisor applied on top of the raw counts for display, e.g. the number of
    /// ready events.
    pub scale: f64,
}

impl Histogram {
    /// Bins centred on the 2 ns grid covering `[-half_width, half_width]`.
    pub fn on_grid(half_width_ns: f64) -> Self {
        let step = TIME_RESOLUTION_NS as f64;
        let n = (half_width_ns / step).floor() as i64;
        let edges = (-n..=n + 1).map(|i| (i as f64 - 0.5) * step).collect();
        Self::with_edges(edges)
    }

    pub fn with_edges(bin_edges: Vec<f64>) -> Self {
        let n = bin_edges.len().saturating_sub(1);
        Histogram {
            bin_edges,
            counts: vec![0.0; n],
            total_weight: 0.0,
            normalization: Normalization::Counts,
            scale: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn bin_width(&self, i: usize) -> f64 {
        self.bin_edges[i + 1] - self.bin_edges[i]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let first = *self.bin_edges.first()?;
        let last = *self.bin_edges.last()?;
        if !(x >= first && x < last) {
            return None;
        }
        let i = self.bin_edges.partition_point(|&e| e <= x);
        Some(i - 1)
    }

    pub fn fill(&mut self, x: f64) {
        self.fill_weighted(x, 1.0);
    }

    pub fn fill_weighted(&mut self, x: f64, weight: f64) {
        self.total_weight += weight;
        if let Some(i) = self.bin_of(x) {
            self.counts[i] += weight;
        }
    }

    pub fn in_range(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Adds another histogram with identical binning.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.bin_edges != other.bin_edges {
            return Err(Error::invalid("bin_edges", "histograms have different binning"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_weight += other.total_weight;
        Ok(())
    }

    pub fn normalized(&self, normalization: Normalization) -> Self {
        Histogram {
            normalization,
            ..self.clone()
        }
    }

    /// Bin values under the current normalization.
    pub fn values(&self) -> Vec<f64> {
        let sum = self.in_range();
        (0..self.len())
            .map(|i| match self.normalization {
                Normalization::Counts => self.counts[i] / self.scale,
                Normalization::Probability if sum > 0.0 => self.counts[i] / sum,
                Normalization::Density if sum > 0.0 => self.counts[i] / (sum * self.bin_width(i)),
                _ => 0.0,
            })
            .collect()
    }

    /// `sqrt(C)` errors under the current normalization.
    pub fn errors(&self) -> Vec<f64> {
        let values = self.values();
        (0..self.len())
            .map(|i| {
                let c = self.counts[i];
                if c > 0.0 {
                    values[i] / c.sqrt()
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn integral(&self) -> f64 {
        self.values()
            .iter()
            .enumerate()
            .map(|(i, v)| match self.normalization {
                Normalization::Density => v * self.bin_width(i),
                _ => *v,
            })
            .sum()
    }

    /// Raw counts with centres in `[-half, half]`.
    pub fn counts_within(&self, half_width_ns: f64) -> f64 {
        self.centers()
            .iter()
            .zip(&self.counts)
            .filter(|(c, _)| c.abs() <= half_width_ns)
            .map(|(_, n)| n)
            .sum()
    }
}
