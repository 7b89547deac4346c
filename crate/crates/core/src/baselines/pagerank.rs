use crate::error::{Error, Result};

pub const RESTART_PROBABILITY: f64 = 0.15;
pub const PAGERANK_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 10_000;

/// Pearson correlation; 0 when either series has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n == 0 {
        return 0.0;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x[..n].iter().zip(&y[..n]) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Row-stochastic matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub size: usize,
    pub rows: Vec<f64>,
}

impl TransitionMatrix {
    /// Normalizes non-negative weights row by row; an all-zero row becomes
    /// uniform.
    pub fn from_weights(size: usize, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != size * size {
            return Err(Error::Shape(format!("{} weights for {size} nodes", weights.len())));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Validation(format!("transition weight {w} is negative or not finite")));
        }
        for row in weights.chunks_mut(size.max(1)) {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|w| *w /= total);
            } else {
                row.iter_mut().for_each(|w| *w = 1.0 / size as f64);
            }
        }
        Ok(Self { size, rows: weights })
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.rows[from * self.size + to]
    }
}

/// Stationary distribution of the walk that follows `p` and jumps to a
/// uniformly chosen node with probability `restart`.
pub fn personalized_pagerank(p: &TransitionMatrix, restart: f64) -> Result<Vec<f64>> {
    let n = p.size;
    if n == 0 {
        return Ok(Vec::new());
    }
    if !(restart > 0.0 && restart <= 1.0) {
        return Err(Error::InvalidArgument(format!("restart probability {restart}")));
    }
    let teleport = restart / n as f64;
    let mut x = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..MAX_ITERATIONS {
        next.iter_mut().for_each(|v| *v = teleport);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let mass = (1.0 - restart) * xi;
            for (nj, &pij) in next.iter_mut().zip(&p.rows[i * n..(i + 1) * n]) {
                *nj += mass * pij;
            }
        }
        let change: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if change < PAGERANK_TOLERANCE {
            return Ok(x);
        }
    }
    Err(Error::Validation("personalized PageRank did not converge".into()))
}
