//! Marching-squares iso-lines of a scalar field sampled on a rectilinear grid.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
}

/// Grid edge a contour point sits on: horizontal edges run along x from node (i, j),
/// vertical ones along y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Contour of `values` at `level`.
///
/// `values[i][j]` sits at `(xs[i], ys[j])`. A node counts as inside when its value is
/// strictly above `level`. Crossings are placed by linear interpolation along cell edges;
/// ambiguous saddle cells are split according to the mean of their four corners.
pub fn extract_contour(xs: &[f64], ys: &[f64], values: &[Vec<f64>], level: f64) -> Result<Vec<Polyline>> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::InvalidInput("contour needs at least a 2x2 grid".into()));
    }
    if values.len() != xs.len() || values.iter().any(|col| col.len() != ys.len()) {
        return Err(Error::InvalidInput("value grid does not match its axes".into()));
    }
    if values.iter().flatten().any(|v| v.is_nan()) || level.is_nan() {
        return Err(Error::InvalidInput("NaN in contour input".into()));
    }

    let point = |e: Edge| -> [f64; 2] {
        let frac = |a: f64, b: f64| if a == b { 0.5 } else { (level - a) / (b - a) };
        match e {
            Edge::H(i, j) => {
                let t = frac(values[i][j], values[i + 1][j]);
                [xs[i] + t * (xs[i + 1] - xs[i]), ys[j]]
            }
            Edge::V(i, j) => {
                let t = frac(values[i][j], values[i][j + 1]);
                [xs[i], ys[j] + t * (ys[j + 1] - ys[j])]
            }
        }
    };

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for i in 0..xs.len() - 1 {
        for j in 0..ys.len() - 1 {
            let (a, b, c, d) = (values[i][j], values[i + 1][j], values[i + 1][j + 1], values[i][j + 1]);
            let case = (a > level) as u8 | ((b > level) as u8) << 1 | ((c > level) as u8) << 2 | ((d > level) as u8) << 3;
            let (bottom, right, top, left) = (Edge::H(i, j), Edge::V(i + 1, j), Edge::H(i, j + 1), Edge::V(i, j));
            let centre_in = (a + b + c + d) / 4.0 > level;
            match case {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((right, top)),
                6 | 9 => segments.push((bottom, top)),
                7 | 8 => segments.push((left, top)),
                5 => {
                    if centre_in {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                10 => {
                    if centre_in {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    } else {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    // chain segments through shared edges
    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, &(p, q)) in segments.iter().enumerate() {
        by_edge.entry(p).or_default().push(k);
        by_edge.entry(q).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    let next_from = |edge: Edge, used: &[bool]| -> Option<usize> {
        by_edge[&edge].iter().copied().find(|&k| !used[k])
    };
    // open chains start at edges touched once; closed loops are picked up afterwards
    let mut starts: Vec<usize> = (0..segments.len())
        .filter(|&k| {
            let (p, q) = segments[k];
            by_edge[&p].len() == 1 || by_edge[&q].len() == 1
        })
        .collect();
    starts.extend(0..segments.len());
    for k0 in starts {
        if used[k0] {
            continue;
        }
        used[k0] = true;
        let (p, q) = segments[k0];
        let (first, mut tail) = if by_edge[&q].len() == 1 && by_edge[&p].len() != 1 { (q, p) } else { (p, q) };
        let mut chain = vec![first, tail];
        while let Some(k) = next_from(tail, &used) {
            used[k] = true;
            let (a, b) = segments[k];
            tail = if a == tail { b } else { a };
            chain.push(tail);
        }
        lines.push(Polyline {
            points: chain.into_iter().map(point).collect(),
        });
    }
    Ok(lines)
}
