//! Multiplicity histogram by forward rasterization.
//!
//! A cell-centered source grid is mapped forward and each image is binned into
//! a target cell. Within a cell the preimage samples are split into clusters of
//! 8-adjacent grid points; the number of clusters estimates `N_h` for that cell.
//! Preimages of connected sets under monotone maps are connected, so a
//! collapsing map still has one cluster per cell; collapse shows up instead as
//! a preimage that is much wider than the cell.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{PlanarMap, VerifyError};
use crate::geometry::Point2;

/// A cell counts as collapsed when its preimage samples spread over more than
/// this many target-cell diagonals.
pub const COLLAPSE_FACTOR: f64 = 4.0;

pub const DEFAULT_SAMPLES: usize = 2048;
pub const DEFAULT_CELLS: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicityHistogram {
    pub samples_per_axis: usize,
    pub cells_per_axis: usize,
    /// Number of target cells with each cluster count `N` (including `N = 0`).
    pub counts: BTreeMap<usize, usize>,
    /// Cells with `N = 1` among the cells with `N ≥ 1`.
    pub fraction_n1: f64,
    pub collapse_cells: usize,
    /// Largest preimage diameter in units of the target-cell diagonal.
    pub max_preimage_ratio: f64,
    /// Target cells (column, row) whose preimage is collapsed, in row order.
    pub collapse_list: Vec<(usize, usize)>,
}

impl MultiplicityHistogram {
    pub fn total_cells(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn cells_with(&self, n: usize) -> usize {
        self.counts.get(&n).copied().unwrap_or(0)
    }

    pub fn cells_with_at_least(&self, n: usize) -> usize {
        self.counts.range(n..).map(|(_, c)| c).sum()
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        parent[hi as usize] = lo;
    }
}

const NONE: u32 = u32::MAX;

pub fn injectivity_count(map: &dyn PlanarMap, samples: usize, cells: usize) -> Result<MultiplicityHistogram, VerifyError> {
    if cells == 0 || samples < 2 * cells {
        return Err(VerifyError::Resolution { samples, cells });
    }
    if samples.checked_mul(samples).map_or(true, |n| n >= NONE as usize) || cells * cells >= NONE as usize {
        return Err(VerifyError::BadSetting("resolution too large".into()));
    }
    let dom = map.domain_bounds();
    let img = map.image_bounds();
    let (sx, sy) = (dom.width() / samples as f64, dom.height() / samples as f64);
    let (cx, cy) = (img.width() / cells as f64, img.height() / cells as f64);
    let source = |k: usize| Point2::new(dom.xmin + ((k % samples) as f64 + 0.5) * sx, dom.ymin + ((k / samples) as f64 + 0.5) * sy);
    let bin = |v: f64, lo: f64, w: f64| -> Option<usize> {
        let t = (v - lo) / w * cells as f64;
        if t >= 0.0 && t <= cells as f64 {
            Some((t.floor() as usize).min(cells - 1))
        } else {
            None
        }
    };
    let cell_of: Vec<u32> = (0..samples * samples)
        .into_par_iter()
        .map(|k| {
            let p = source(k);
            if !map.in_domain(p) {
                return NONE;
            }
            match map.apply(p) {
                Some(q) => match (bin(q.x, img.xmin, img.width()), bin(q.y, img.ymin, img.height())) {
                    (Some(i), Some(j)) => (j * cells + i) as u32,
                    _ => NONE,
                },
                None => NONE,
            }
        })
        .collect();

    let n = samples;
    let mut parent: Vec<u32> = (0..(n * n) as u32).collect();
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            let c = cell_of[k];
            if c == NONE {
                continue;
            }
            let mut link = |k2: usize| {
                if cell_of[k2] == c {
                    union(&mut parent, k as u32, k2 as u32);
                }
            };
            if i + 1 < n {
                link(k + 1);
            }
            if j + 1 < n {
                link(k + n);
                if i + 1 < n {
                    link(k + n + 1);
                }
                if i > 0 {
                    link(k + n - 1);
                }
            }
        }
    }

    let nc = cells * cells;
    let mut bbox = vec![[f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY]; nc];
    let mut pairs = Vec::with_capacity(n * n);
    for k in 0..n * n {
        let c = cell_of[k];
        if c == NONE {
            continue;
        }
        pairs.push((c, find(&mut parent, k as u32)));
        let p = source(k);
        let b = &mut bbox[c as usize];
        b[0] = b[0].min(p.x);
        b[1] = b[1].max(p.x);
        b[2] = b[2].min(p.y);
        b[3] = b[3].max(p.y);
    }
    pairs.par_sort_unstable();
    pairs.dedup();
    let mut per_cell = vec![0usize; nc];
    for (c, _) in &pairs {
        per_cell[*c as usize] += 1;
    }

    let mut counts = BTreeMap::new();
    for &m in &per_cell {
        *counts.entry(m).or_insert(0) += 1;
    }
    let diag = (cx * cx + cy * cy).sqrt();
    let mut collapse_list = Vec::new();
    let mut max_ratio = 0.0f64;
    for (c, b) in bbox.iter().enumerate() {
        if per_cell[c] == 0 {
            continue;
        }
        let d = ((b[1] - b[0]).powi(2) + (b[3] - b[2]).powi(2)).sqrt() / diag;
        max_ratio = max_ratio.max(d);
        if d > COLLAPSE_FACTOR {
            collapse_list.push((c % cells, c / cells));
        }
    }
    let covered: usize = per_cell.iter().filter(|&&m| m >= 1).count();
    let ones = per_cell.iter().filter(|&&m| m == 1).count();
    Ok(MultiplicityHistogram {
        samples_per_axis: samples,
        cells_per_axis: cells,
        counts,
        fraction_n1: if covered == 0 { 0.0 } else { ones as f64 / covered as f64 },
        collapse_cells: collapse_list.len(),
        max_preimage_ratio: max_ratio,
        collapse_list,
    })
}
