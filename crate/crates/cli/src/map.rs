//! Two-dimensional violation maps over a property's input box.

use std::fmt::Write;

use anyhow::bail;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use saferl_core::interval::{Interval, IntervalBox};
use saferl_core::verifier::{verify, VerifyConfig, VerifyError};
use saferl_core::{Network, SafetyProperty};

use crate::table::csv_field;

/// Observation component names for the 8-input policies.
pub const OBS_NAMES: [&str; 8] = ["g", "px", "py", "pz", "gx", "gy", "gz", "d"];

pub fn dim_name(input_dim: usize, d: usize) -> String {
    if input_dim == OBS_NAMES.len() {
        OBS_NAMES[d].to_string()
    } else {
        format!("x{d}")
    }
}

/// `values[a][b]` is the largest violation rate found, over all draws of the
/// remaining inputs, in cell `a` along `dims.0` and cell `b` along `dims.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationMap {
    pub property: String,
    pub dims: (usize, usize),
    pub names: (String, String),
    pub range: (Interval, Interval),
    pub grid: usize,
    pub values: Vec<Vec<f64>>,
}

fn cell(iv: Interval, grid: usize, k: usize) -> Interval {
    let at = |k: usize| {
        if k == grid {
            iv.hi()
        } else {
            iv.lo() + iv.width() * (k as f64 / grid as f64)
        }
    };
    Interval::new(at(k), at(k + 1)).expect("ordered cell bounds")
}

impl ViolationMap {
    pub fn cell_center(&self, axis: usize, k: usize) -> f64 {
        let iv = if axis == 0 { self.range.0 } else { self.range.1 };
        cell(iv, self.grid, k).midpoint()
    }

    /// Cell containing `(a, b)`, if inside the mapped range. Points on a
    /// shared edge go to the upper cell.
    pub fn locate(&self, a: f64, b: f64) -> Option<(usize, usize)> {
        let idx = |iv: Interval, v: f64| {
            if !iv.contains(v) {
                return None;
            }
            let k = ((v - iv.lo()) / iv.width() * self.grid as f64).floor() as usize;
            Some(k.min(self.grid - 1))
        };
        Some((idx(self.range.0, a)?, idx(self.range.1, b)?))
    }

    pub fn is_marked(&self, a: usize, b: usize) -> bool {
        self.values[a][b] > 0.0
    }

    /// CSV: the corner cell names both dimensions (`row\column`), the header
    /// row holds column-cell centres and each row starts with its cell centre.
    pub fn to_csv(&self) -> String {
        let mut s = csv_field(&format!("{}\\{}", self.names.0, self.names.1));
        for b in 0..self.grid {
            write!(s, ",{}", self.cell_center(1, b)).unwrap();
        }
        s.push('\n');
        for a in 0..self.grid {
            write!(s, "{}", self.cell_center(0, a)).unwrap();
            for b in 0..self.grid {
                write!(s, ",{}", self.values[a][b]).unwrap();
            }
            s.push('\n');
        }
        s
    }
}

/// Draws the inputs outside `dims` `fixed_samples` times (normal around the
/// box centre with standard deviation a quarter of the width, clamped into
/// the box; zero-width inputs keep their value), verifies every cell of a
/// `grid × grid` partition of the two mapped inputs for each draw, and keeps
/// the largest violation rate per cell.
pub fn violation_map(
    network: &Network,
    property: &SafetyProperty,
    dims: (usize, usize),
    fixed_samples: usize,
    grid: usize,
    seed: u64,
    config: &VerifyConfig,
) -> anyhow::Result<ViolationMap> {
    let b = &property.input_box;
    let n = b.dim();
    let (i, j) = dims;
    if i >= n || j >= n || i == j {
        bail!("invalid map dimensions ({i}, {j}) for {n} inputs");
    }
    if b.get(i).width() == 0.0 || b.get(j).width() == 0.0 {
        bail!("map dimensions must have positive width in property {}", property.name);
    }
    if grid == 0 || fixed_samples == 0 {
        bail!("grid and fixed-samples must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![vec![0.0f64; grid]; grid];
    for _ in 0..fixed_samples {
        let mut fixed = b.dims().to_vec();
        for (d, iv) in fixed.iter_mut().enumerate() {
            if d == i || d == j || iv.width() == 0.0 {
                continue;
            }
            let normal = Normal::new(iv.midpoint(), iv.width() / 4.0).expect("positive deviation");
            *iv = Interval::point(normal.sample(&mut rng).clamp(iv.lo(), iv.hi()));
        }
        for (a, row) in values.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                let mut dims = fixed.clone();
                dims[i] = cell(b.get(i), grid, a);
                dims[j] = cell(b.get(j), grid, c);
                let sub = SafetyProperty {
                    input_box: IntervalBox::new(dims)?,
                    ..property.clone()
                };
                let report = verify(network, &sub, config).map_err(|e: VerifyError| anyhow::anyhow!(e))?;
                *v = v.max(report.violation_rate);
            }
        }
    }
    Ok(ViolationMap {
        property: property.name.clone(),
        dims,
        names: (dim_name(n, i), dim_name(n, j)),
        range: (b.get(i), b.get(j)),
        grid,
        values,
    })
}
