//! Force terms of the overdamped Magnus equation of motion and the velocity solve.
//!
//! Positions are in a periodic square box; every separation uses the minimum image.

use crate::bessel::{bessel_k1, k0_k1};
use crate::error::{Error, Result};
use crate::params::{ModelParams, PinModel};
use crate::vec2::{min_image, Vec2};

/// Separations below this are treated as coincident particles.
pub const SINGULAR_SEPARATION: f64 = 1e-9;

/// Smooth switch: 1 up to `r_cut - width`, 0 from `r_cut` on, C1 in between.
pub fn cutoff_switch(r: f64, r_cut: f64, width: f64) -> f64 {
    if r >= r_cut {
        return 0.0;
    }
    let start = r_cut - width;
    if r <= start {
        return 1.0;
    }
    let x = (r - start) / width;
    1.0 - x * x * (3.0 - 2.0 * x)
}

/// Force on skyrmion `i` at `r_i` from skyrmion `j` at `r_j`, evaluated with the exact Bessel function.
///
/// Repulsive: directed along the minimum-image unit vector from `j` to `i`. The magnitude is
/// `f_s0 * K1(R / xi_s)`, switched smoothly to zero over the last `cutoff_taper` before `r_cut`
/// so the force has no jump for Euler steps to chatter across.
pub fn pair_force(r_i: Vec2, r_j: Vec2, params: &ModelParams) -> Result<Vec2> {
    let sep = min_image(r_i, r_j, params.box_l);
    let dist = sep.norm_sq().sqrt();
    if dist < SINGULAR_SEPARATION {
        return Err(Error::Singular {
            i: 0,
            j: 1,
            separation: dist,
        });
    }
    if dist > params.r_cut {
        return Ok(Vec2::ZERO);
    }
    let mag = params.f_s0
        * bessel_k1(dist / params.xi_s)?
        * cutoff_switch(dist, params.r_cut, params.cutoff_taper);
    Ok(sep * (mag / dist))
}

/// Velocity `v` solving `alpha_d v + alpha_m z x v = F`.
///
/// With `alpha_d^2 + alpha_m^2 = 1` the response is a pure rotation by `-atan(alpha_m/alpha_d)`.
pub fn solve_velocity(f: Vec2, params: &ModelParams) -> Vec2 {
    let (a, m) = (params.alpha_d, params.alpha_m);
    Vec2::new(a * f.x + m * f.y, -m * f.x + a * f.y)
}

/// Tapered `f_s0 * K1(r / xi_s)` and its slope at separation `r`.
fn tapered_magnitude(r: f64, params: &ModelParams) -> (f64, f64) {
    let (f_s0, xi) = (params.f_s0, params.xi_s);
    let (r_cut, width) = (params.r_cut, params.cutoff_taper);
    let x = r / xi;
    let (k0, k1) = k0_k1(x);
    // d/dr K1(r/xi) = -(K0(x) + K1(x)/x) / xi
    let (value, slope) = (f_s0 * k1, -f_s0 * (k0 + k1 / x) / xi);
    let sw = cutoff_switch(r, r_cut, width);
    let dsw = if r > r_cut - width && r < r_cut {
        let u = (r - (r_cut - width)) / width;
        -6.0 * u * (1.0 - u) / width
    } else {
        0.0
    };
    (value * sw, slope * sw + value * dsw)
}

/// Pair-force magnitude divided by separation, tabulated in the squared separation.
///
/// Multiplying the table value by the separation vector gives the force without a square
/// root or division. Cubic Hermite interpolation keeps the relative error below 1e-9 for
/// `r >= TABLE_MIN_R`; closer pairs use the exact Bessel evaluation.
#[derive(Debug, Clone)]
pub struct PairKernel {
    params: ModelParams,
    r_cut: f64,
    table: HermiteTable,
}

const TABLE_MIN_R: f64 = 1.0;
const TABLE_STEP: f64 = 1e-2;

#[derive(Debug, Clone)]
struct HermiteTable {
    start: f64,
    inv_step: f64,
    /// (value, slope * step) per node
    nodes: Vec<[f64; 2]>,
}

impl HermiteTable {
    fn build(start: f64, end: f64, step: f64, f: impl Fn(f64) -> (f64, f64)) -> Self {
        let n = ((end - start) / step).ceil() as usize + 2;
        let nodes = (0..n)
            .map(|k| {
                let (v, d) = f(start + k as f64 * step);
                [v, d * step]
            })
            .collect();
        HermiteTable {
            start,
            inv_step: 1.0 / step,
            nodes,
        }
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let s = (x - self.start) * self.inv_step;
        let k = (s as usize).min(self.nodes.len() - 2);
        let t = s - k as f64;
        let [y0, m0] = self.nodes[k];
        let [y1, m1] = self.nodes[k + 1];
        // Hermite basis in nested form
        let d = y1 - y0;
        y0 + t * (m0 + t * ((3.0 * d - 2.0 * m0 - m1) + t * (m0 + m1 - 2.0 * d)))
    }
}

impl PairKernel {
    pub fn new(params: &ModelParams) -> Self {
        let p = params.clone();
        let over_r = move |s: f64| {
            let r = s.sqrt();
            let (m, dm) = tapered_magnitude(r, &p);
            // d/ds (m / r) with ds = 2 r dr
            (m / r, (dm * r - m) / (r * r) / (2.0 * r))
        };
        let lo = TABLE_MIN_R * TABLE_MIN_R;
        let hi = params.r_cut * params.r_cut;
        PairKernel {
            params: params.clone(),
            r_cut: params.r_cut,
            table: HermiteTable::build(lo, hi.max(lo), TABLE_STEP, over_r),
        }
    }

    /// Force magnitude over separation, as a function of the squared separation.
    #[inline]
    pub fn over_r(&self, r2: f64) -> f64 {
        if r2 >= TABLE_MIN_R * TABLE_MIN_R {
            self.table.eval(r2)
        } else {
            let r = r2.sqrt();
            tapered_magnitude(r, &self.params).0 / r
        }
    }

    /// Force magnitude at separation `r` (`0 < r <= r_cut`).
    pub fn magnitude(&self, r: f64) -> f64 {
        self.over_r(r * r) * r
    }

    pub fn r_cut(&self) -> f64 {
        self.r_cut
    }
}

/// Uniform cell grid over the periodic box; each cell knows the distinct cells within reach.
#[derive(Debug, Clone)]
pub struct CellGrid {
    box_l: f64,
    n_side: usize,
    cell_size: f64,
    neighbors: Vec<Vec<usize>>,
}

impl CellGrid {
    /// Cells of side at least `min_cell` whose stencil covers `reach`.
    pub fn new(box_l: f64, min_cell: f64, reach: f64) -> Self {
        let n_side = ((box_l / min_cell).floor() as usize).max(1);
        let cell_size = box_l / n_side as f64;
        let span = (reach / cell_size).ceil() as i64;
        let n = n_side as i64;
        let mut neighbors = Vec::with_capacity(n_side * n_side);
        for cy in 0..n {
            for cx in 0..n {
                let mut list: Vec<usize> = Vec::new();
                for dy in -span..=span {
                    for dx in -span..=span {
                        let x = (cx + dx).rem_euclid(n);
                        let y = (cy + dy).rem_euclid(n);
                        list.push((y * n + x) as usize);
                    }
                }
                list.sort_unstable();
                list.dedup();
                neighbors.push(list);
            }
        }
        CellGrid {
            box_l,
            n_side,
            cell_size,
            neighbors,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_side * self.n_side
    }

    pub fn cell_of(&self, p: Vec2) -> usize {
        let cx = ((p.x / self.cell_size) as usize).min(self.n_side - 1);
        let cy = ((p.y / self.cell_size) as usize).min(self.n_side - 1);
        cy * self.n_side + cx
    }

    pub fn neighbors(&self, cell: usize) -> &[usize] {
        &self.neighbors[cell]
    }

    /// Bucket point indices by cell, preserving index order within each cell.
    pub fn bin(&self, points: &[Vec2]) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.n_cells()];
        for (i, &p) in points.iter().enumerate() {
            cells[self.cell_of(p)].push(i);
        }
        cells
    }

    pub fn box_l(&self) -> f64 {
        self.box_l
    }
}

/// Randomly placed, non-overlapping pinning traps.
#[derive(Debug, Clone)]
pub struct PinningLandscape {
    pub centers: Vec<Vec2>,
    pub radius: f64,
    pub strength: f64,
    pub model: PinModel,
    grid: CellGrid,
    buckets: Vec<Vec<usize>>,
}

impl PinningLandscape {
    pub fn new(centers: Vec<Vec2>, radius: f64, strength: f64, model: PinModel, box_l: f64) -> Self {
        let reach = Self::cutoff_for(model, radius);
        let grid = CellGrid::new(box_l, reach, reach);
        let buckets = grid.bin(&centers);
        PinningLandscape {
            centers,
            radius,
            strength,
            model,
            grid,
            buckets,
        }
    }

    fn cutoff_for(model: PinModel, radius: f64) -> f64 {
        match model {
            PinModel::Harmonic => radius,
            PinModel::Exponential => 6.0 * radius,
        }
    }

    pub fn cutoff(&self) -> f64 {
        Self::cutoff_for(self.model, self.radius)
    }

    pub fn box_l(&self) -> f64 {
        self.grid.box_l()
    }

    /// Smallest minimum-image distance between any two trap centres.
    pub fn min_center_distance(&self) -> f64 {
        let l = self.box_l();
        let mut best = f64::INFINITY;
        for (i, &a) in self.centers.iter().enumerate() {
            for &b in &self.centers[i + 1..] {
                best = best.min(min_image(a, b, l).norm());
            }
        }
        best
    }
}

/// Pinning force on a skyrmion at `r`.
pub fn pinning_force(r: Vec2, landscape: &PinningLandscape) -> Vec2 {
    if landscape.strength == 0.0 || landscape.centers.is_empty() {
        return Vec2::ZERO;
    }
    let l = landscape.box_l();
    let cutoff = landscape.cutoff();
    let mut total = Vec2::ZERO;
    for &cell in landscape.grid.neighbors(landscape.grid.cell_of(r)) {
        for &k in &landscape.buckets[cell] {
            // sep points from the centre to the skyrmion; the force points back
            let sep = min_image(r, landscape.centers[k], l);
            let d2 = sep.norm_sq();
            match landscape.model {
                PinModel::Harmonic => {
                    if d2 < landscape.radius * landscape.radius {
                        total -= sep * (landscape.strength / landscape.radius);
                    }
                }
                PinModel::Exponential => {
                    if d2 <= cutoff * cutoff && d2 > 0.0 {
                        let d = d2.sqrt();
                        total -= sep * (landscape.strength * (-d / landscape.radius).exp() / d);
                    }
                }
            }
        }
    }
    total
}

/// Precomputed interaction kernel and neighbor grid for one parameter set.
#[derive(Debug, Clone)]
pub struct ForceField {
    kernel: PairKernel,
    grid: CellGrid,
    box_l: f64,
    drive: Vec2,
}

impl ForceField {
    pub fn new(params: &ModelParams) -> Self {
        ForceField {
            kernel: PairKernel::new(params),
            grid: CellGrid::new(params.box_l, params.r_cut / 3.0, params.r_cut),
            box_l: params.box_l,
            drive: Vec2::new(params.f_d, 0.0),
        }
    }

    pub fn kernel(&self) -> &PairKernel {
        &self.kernel
    }

    pub fn drive(&self) -> Vec2 {
        self.drive
    }

    #[inline]
    fn pair(&self, i: usize, j: usize, positions: &[Vec2]) -> Result<Option<Vec2>> {
        let r_cut = self.kernel.r_cut;
        let sep = min_image(positions[i], positions[j], self.box_l);
        let d2 = sep.norm_sq();
        if d2 >= r_cut * r_cut {
            return Ok(None);
        }
        if d2 < SINGULAR_SEPARATION * SINGULAR_SEPARATION {
            return Err(Error::Singular {
                i,
                j,
                separation: d2.sqrt(),
            });
        }
        Ok(Some(sep * self.kernel.over_r(d2)))
    }

    /// Pair-interaction force on every particle, written into `out`.
    ///
    /// Each unordered pair is evaluated once and applied with opposite signs, in a
    /// fixed order, so the result does not depend on how runs are scheduled.
    /// Positions must already be wrapped into the box.
    pub fn interaction_forces(&self, positions: &[Vec2], out: &mut [Vec2]) -> Result<()> {
        out.iter_mut().for_each(|f| *f = Vec2::ZERO);
        if self.grid.neighbors(0).len() == self.grid.n_cells() {
            self.all_pairs(positions, out)
        } else {
            let buckets = self.grid.bin(positions);
            for i in 0..positions.len() {
                for &cell in self.grid.neighbors(self.grid.cell_of(positions[i])) {
                    for &j in &buckets[cell] {
                        if j <= i {
                            continue;
                        }
                        if let Some(f) = self.pair(i, j, positions)? {
                            out[i] += f;
                            out[j] -= f;
                        }
                    }
                }
            }
            Ok(())
        }
    }

    fn all_pairs(&self, positions: &[Vec2], out: &mut [Vec2]) -> Result<()> {
        let l = self.box_l;
        let half = 0.5 * l;
        let rc2 = self.kernel.r_cut * self.kernel.r_cut;
        let near2 = TABLE_MIN_R * TABLE_MIN_R;
        let n = positions.len();
        for i in 0..n {
            let pi = positions[i];
            let mut fi = Vec2::ZERO;
            for j in i + 1..n {
                let pj = positions[j];
                // wrapped inputs differ by less than l, so one correction suffices
                let dx = pi.x - pj.x;
                let dx = if dx > half { dx - l } else { dx };
                let dx = if dx < -half { dx + l } else { dx };
                let dy = pi.y - pj.y;
                let dy = if dy > half { dy - l } else { dy };
                let dy = if dy < -half { dy + l } else { dy };
                let d2 = dx * dx + dy * dy;
                if d2 >= rc2 {
                    continue;
                }
                let g = if d2 >= near2 {
                    self.kernel.table.eval(d2)
                } else {
                    if d2 < SINGULAR_SEPARATION * SINGULAR_SEPARATION {
                        return Err(Error::Singular {
                            i,
                            j,
                            separation: d2.sqrt(),
                        });
                    }
                    self.kernel.over_r(d2)
                };
                let f = Vec2::new(dx * g, dy * g);
                fi += f;
                out[j] -= f;
            }
            out[i] += fi;
        }
        Ok(())
    }

    /// Interaction plus pinning plus drive on every particle, written into `out`.
    pub fn forces_into(
        &self,
        positions: &[Vec2],
        landscape: &PinningLandscape,
        out: &mut [Vec2],
    ) -> Result<()> {
        self.interaction_forces(positions, out)?;
        for (f, &r) in out.iter_mut().zip(positions) {
            *f += pinning_force(r, landscape) + self.drive;
        }
        Ok(())
    }

    pub fn all_forces(&self, positions: &[Vec2], landscape: &PinningLandscape) -> Result<Vec<Vec2>> {
        let mut out = vec![Vec2::ZERO; positions.len()];
        self.forces_into(positions, landscape, &mut out)?;
        Ok(out)
    }

    /// Total force on particle `i` alone.
    pub fn total_force(&self, i: usize, positions: &[Vec2], landscape: &PinningLandscape) -> Result<Vec2> {
        let mut total = Vec2::ZERO;
        for j in 0..positions.len() {
            if j != i {
                if let Some(f) = self.pair(i, j, positions)? {
                    total += f;
                }
            }
        }
        Ok(total + pinning_force(positions[i], landscape) + self.drive)
    }
}

/// Pair interactions, pinning and drive acting on skyrmion `i`.
///
/// The Magnus term is not a force here; it enters through [`solve_velocity`].
pub fn total_force(
    i: usize,
    positions: &[Vec2],
    landscape: &PinningLandscape,
    params: &ModelParams,
) -> Result<Vec2> {
    ForceField::new(params).total_force(i, positions, landscape)
}
