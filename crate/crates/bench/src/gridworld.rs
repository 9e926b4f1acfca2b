//! Slippery gridworld with reflecting walls.

use clare_core::{Dims, TabularMdp};

use crate::error::{BenchError, Result};

pub const UP: usize = 0;
pub const RIGHT: usize = 1;
pub const DOWN: usize = 2;
pub const LEFT: usize = 3;

/// State index of cell `(x, y)`.
pub fn cell(width: usize, x: usize, y: usize) -> usize {
    y * width + x
}

fn moved(width: usize, height: usize, x: usize, y: usize, action: usize) -> (usize, usize) {
    match action {
        UP if y > 0 => (x, y - 1),
        RIGHT if x + 1 < width => (x + 1, y),
        DOWN if y + 1 < height => (x, y + 1),
        LEFT if x > 0 => (x - 1, y),
        _ => (x, y),
    }
}

/// Four-action gridworld: the intended move happens with probability
/// `1 - slip`, each lateral move with `slip / 2`, and moves into a wall
/// stay put. The reward of a pair is the probability of landing on the
/// goal, and the start distribution is uniform.
pub fn gen_gridworld(width: usize, height: usize, slip: f64, goal: (usize, usize), gamma: f64) -> Result<TabularMdp<f64>> {
    if width < 2 || height < 2 {
        return Err(BenchError::Config(format!("grid must be at least 2x2, got {width}x{height}")));
    }
    if !(0.0..1.0).contains(&slip) {
        return Err(BenchError::Config(format!("slip must lie in [0, 1), got {slip}")));
    }
    if goal.0 >= width || goal.1 >= height {
        return Err(BenchError::Config(format!("goal {goal:?} is outside the {width}x{height} grid")));
    }
    let ns = width * height;
    let dims = Dims::new(ns, 4);
    let mut t = vec![0.0; dims.pairs() * ns];
    for y in 0..height {
        for x in 0..width {
            let s = cell(width, x, y);
            for a in 0..4 {
                let row = &mut t[(s * 4 + a) * ns..(s * 4 + a + 1) * ns];
                let outcomes = [(a, 1.0 - slip), ((a + 1) % 4, slip / 2.0), ((a + 3) % 4, slip / 2.0)];
                for (dir, p) in outcomes {
                    let (nx, ny) = moved(width, height, x, y, dir);
                    row[cell(width, nx, ny)] += p;
                }
            }
        }
    }
    let g = cell(width, goal.0, goal.1);
    let reward = (0..dims.pairs()).map(|i| t[i * ns + g]).collect();
    Ok(TabularMdp::new(dims, t, reward, vec![1.0 / ns as f64; ns], gamma)?)
}
