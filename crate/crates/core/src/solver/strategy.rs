use crate::portfolio::StrategyVector;

use super::SolutionTable;

/// Piecewise-constant feedback control: `vectors[c]` applies on
/// `[breakpoints[c], breakpoints[c + 1])`, and the last cell extends to
/// infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyTable {
    pub breakpoints: Vec<f64>,
    pub vectors: Vec<StrategyVector>,
}

impl StrategyTable {
    pub fn new(breakpoints: Vec<f64>, vectors: Vec<StrategyVector>) -> Result<Self, String> {
        if breakpoints.is_empty() || breakpoints.len() != vectors.len() {
            return Err("strategy table needs one vector per breakpoint".into());
        }
        if breakpoints[0] != 0.0 {
            return Err(format!("first breakpoint must be 0 (got {})", breakpoints[0]));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err("breakpoints must be strictly increasing".into());
        }
        Ok(Self { breakpoints, vectors })
    }

    /// A single cell applying `s` everywhere.
    pub fn constant(s: StrategyVector) -> Self {
        Self {
            breakpoints: vec![0.0],
            vectors: vec![s],
        }
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    /// Index of the cell containing `x`; `None` below zero.
    pub fn cell_index(&self, x: f64) -> Option<usize> {
        if !(x >= 0.0) {
            return None;
        }
        Some(self.breakpoints.partition_point(|b| *b <= x) - 1)
    }

    pub fn lookup(&self, x: f64) -> Option<&StrategyVector> {
        self.cell_index(x).map(|c| &self.vectors[c])
    }
}

/// Merges runs of equal minimizers into cells. Grid point `x_i` owns
/// `[x_i, x_{i+1})`.
pub fn extract_strategy(table: &SolutionTable) -> StrategyTable {
    let mut breakpoints = Vec::new();
    let mut vectors: Vec<StrategyVector> = Vec::new();
    for (x, s) in table.grid.iter().zip(&table.strategy) {
        if vectors.last() != Some(s) {
            breakpoints.push(*x);
            vectors.push(s.clone());
        }
    }
    StrategyTable { breakpoints, vectors }
}
