use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vppfr_lp::{solve_lp, LpProblem, RowSense, Status};

use crate::dynamics::{nadir, stage_model, Stage1Mode, StageParams};
use crate::scenario::SystemScenario;
use crate::security::SecurityError;

/// Allowed optimism of the surface on held-out points, Hz.
pub const CONSERVATIVE_TOLERANCE_HZ: f64 = 1e-4;

/// Validation points sit at this fraction of a cell so they never coincide
/// with the training or calibration grids.
const VALIDATION_OFFSET: f64 = 0.381_966;

/// A plane within this of the surface at a sample supports it there, Hz.
pub const ACTIVE_TOLERANCE_HZ: f64 = 1e-9;

const STALL_SPLITS: usize = 4;

/// Sampling box. The nadir depends on `k_FM` and `k_VPP` only through their
/// sum, so the box has one fast-droop axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDomain {
    pub h_to: [f64; 2],
    pub k_g: [f64; 2],
    pub k_fast: [f64; 2],
}

impl SurfaceDomain {
    fn axes(&self) -> [[f64; 2]; 3] {
        [self.h_to, self.k_g, self.k_fast]
    }

    pub fn contains(&self, h_to: f64, k_g: f64, k_fast: f64) -> bool {
        let eps = 1e-9;
        self.axes()
            .iter()
            .zip([h_to, k_g, k_fast])
            .all(|([lo, hi], v)| v >= lo - eps * lo.abs().max(1.0) && v <= hi + eps * hi.abs().max(1.0))
    }

    fn validate(&self) -> Result<(), SecurityError> {
        for (name, [lo, hi]) in ["h_to", "k_g", "k_fast"].iter().zip(self.axes()) {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi >= lo) {
                return Err(SecurityError::Domain(format!("{name} range [{lo}, {hi}]")));
            }
        }
        if self.h_to[0] <= 0.0 {
            return Err(SecurityError::Domain("h_to must stay positive".into()));
        }
        if self.k_g[0] + self.k_fast[0] <= 0.0 {
            return Err(SecurityError::Domain("total droop must stay positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceConfig {
    pub domain: SurfaceDomain,
    /// Disturbance the surface is built for, MW.
    pub delta_d: f64,
    pub tau1: f64,
    pub tau2: f64,
    /// Equivalent SG governor lag, s.
    pub t_gv: f64,
    /// Upper limit on the plane count.
    pub planes: usize,
    /// Training samples per axis.
    pub grid: usize,
    /// Validation gap the surface should reach, Hz. Missing it is reported,
    /// not an error.
    pub target_gap_hz: f64,
}

impl SurfaceConfig {
    /// Surface settings of a scenario, at its largest disturbance. A day
    /// without load falls back to the mean disturbance; planes are rescaled
    /// per period anyway.
    pub fn from_scenario(s: &SystemScenario) -> Self {
        let largest = s.max_delta_d();
        SurfaceConfig {
            domain: SurfaceDomain {
                h_to: s.security.h_to,
                k_g: s.security.k_g,
                k_fast: s.security.k_fast,
            },
            delta_d: if largest > 0.0 { largest } else { s.disturbance.mean_mw },
            tau1: s.delays.tau1,
            tau2: s.delays.tau2,
            t_gv: s.t_gv(),
            planes: s.security.planes,
            grid: s.security.grid,
            target_gap_hz: 0.01,
        }
    }

    fn validate(&self) -> Result<(), SecurityError> {
        self.domain.validate()?;
        for (field, value) in [("delta_d", self.delta_d), ("t_gv", self.t_gv), ("tau1", self.tau1)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SecurityError::NonPositive { field, value });
            }
        }
        if !(self.tau2 > self.tau1 && self.tau2.is_finite()) {
            return Err(SecurityError::Domain(format!(
                "tau2 = {} must exceed tau1 = {}",
                self.tau2, self.tau1
            )));
        }
        if self.planes == 0 {
            return Err(SecurityError::Domain("at least one plane".into()));
        }
        if self.grid < 2 {
            return Err(SecurityError::Domain("at least two samples per axis".into()));
        }
        Ok(())
    }
}

/// `kappa_h_to H^TO + kappa_k_g k^G + kappa_k_fm k^FM + kappa_k_vpp k^VPP + constant`, Hz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NadirPlane {
    pub kappa_h_to: f64,
    pub kappa_k_g: f64,
    pub kappa_k_fm: f64,
    pub kappa_k_vpp: f64,
    pub constant: f64,
}

impl NadirPlane {
    pub fn value(&self, h_to: f64, k_g: f64, k_fm: f64, k_vpp: f64) -> f64 {
        self.kappa_h_to * h_to
            + self.kappa_k_g * k_g
            + self.kappa_k_fm * k_fm
            + self.kappa_k_vpp * k_vpp
            + self.constant
    }

    fn scaled(&self, r: f64) -> Self {
        NadirPlane {
            kappa_h_to: r * self.kappa_h_to,
            kappa_k_g: r * self.kappa_k_g,
            kappa_k_fm: r * self.kappa_k_fm,
            kappa_k_vpp: r * self.kappa_k_vpp,
            constant: r * self.constant,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceStats {
    pub samples: usize,
    pub calibration_points: usize,
    pub validation_points: usize,
    /// Largest `true - surface` on the training samples, Hz.
    pub sample_max_gap_hz: f64,
    /// Downward shift applied to every plane after calibration, Hz.
    pub calibration_shift_hz: f64,
    pub validation_max_gap_hz: f64,
    pub validation_mean_gap_hz: f64,
    /// Largest `surface - true` on the validation grid. Positive values are
    /// optimistic errors.
    pub validation_max_violation_hz: f64,
    pub meets_target: bool,
}

/// Minimum of affine under-estimators of the frequency nadir.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PwlNadirSurface {
    pub planes: Vec<NadirPlane>,
    pub domain: SurfaceDomain,
    pub delta_d: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub t_gv: f64,
    pub grid: usize,
    pub target_gap_hz: f64,
    pub stats: SurfaceStats,
}

impl PwlNadirSurface {
    /// Surface value and the plane attaining it.
    pub fn value(&self, h_to: f64, k_g: f64, k_fm: f64, k_vpp: f64) -> (f64, usize) {
        self.planes
            .iter()
            .enumerate()
            .map(|(i, p)| (p.value(h_to, k_g, k_fm, k_vpp), i))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
    }

    /// The same surface for another disturbance. Nadirs are linear in the
    /// disturbance for fixed inertia and droop, so planes scale with it.
    pub fn scaled_to(&self, delta_d: f64) -> Self {
        let r = delta_d / self.delta_d;
        let scale_hz = |v: f64| v * r.abs();
        PwlNadirSurface {
            planes: self.planes.iter().map(|p| p.scaled(r)).collect(),
            delta_d,
            stats: SurfaceStats {
                sample_max_gap_hz: scale_hz(self.stats.sample_max_gap_hz),
                calibration_shift_hz: scale_hz(self.stats.calibration_shift_hz),
                validation_max_gap_hz: scale_hz(self.stats.validation_max_gap_hz),
                validation_mean_gap_hz: scale_hz(self.stats.validation_mean_gap_hz),
                validation_max_violation_hz: scale_hz(self.stats.validation_max_violation_hz),
                ..self.stats.clone()
            },
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("surface serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, SecurityError> {
        let s: PwlNadirSurface = serde_json::from_str(text).map_err(|e| SecurityError::Format(e.to_string()))?;
        if s.planes.is_empty() {
            return Err(SecurityError::Format("surface has no planes".into()));
        }
        s.domain.validate()?;
        Ok(s)
    }
}

/// Closed-form nadir at one point of the box, Hz (negative for a deficit).
pub fn sample_nadir(config: &SurfaceConfig, h_to: f64, k_g: f64, k_fast: f64) -> Result<f64, SecurityError> {
    let params = StageParams {
        h_gv: h_to,
        h_to,
        k_g,
        k_fm: k_fast,
        k_vpp: 0.0,
        t_gv: config.t_gv,
        delta_d: config.delta_d,
        tau1: config.tau1,
        tau2: config.tau2,
        mode: Stage1Mode::Instant,
    };
    Ok(nadir(&stage_model(&params)?).value)
}

fn axis_points(range: [f64; 2], n: usize) -> Vec<f64> {
    let [lo, hi] = range;
    if hi == lo {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn offset_points(range: [f64; 2], n: usize) -> Vec<f64> {
    let [lo, hi] = range;
    if hi == lo {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * (i as f64 + VALIDATION_OFFSET) / n as f64)
        .collect()
}

fn cartesian(axes: [Vec<f64>; 3]) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(axes.iter().map(Vec::len).product());
    for &a in &axes[0] {
        for &b in &axes[1] {
            for &c in &axes[2] {
                out.push([a, b, c]);
            }
        }
    }
    out
}

fn sample_all(config: &SurfaceConfig, points: &[[f64; 3]]) -> Result<Vec<f64>, SecurityError> {
    points
        .par_iter()
        .map(|p| sample_nadir(config, p[0], p[1], p[2]))
        .collect()
}

fn surface_min(planes: &[NadirPlane], p: &[f64; 3]) -> (f64, usize) {
    planes
        .iter()
        .enumerate()
        .map(|(i, pl)| (pl.value(p[0], p[1], p[2], 0.0), i))
        .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
}

struct Normaliser {
    lo: [f64; 3],
    span: [f64; 3],
}

impl Normaliser {
    fn new(d: &SurfaceDomain) -> Self {
        let axes = d.axes();
        Normaliser {
            lo: axes.map(|[lo, _]| lo),
            span: axes.map(|[lo, hi]| hi - lo),
        }
    }

    fn unit(&self, p: &[f64; 3]) -> [f64; 3] {
        std::array::from_fn(|j| {
            if self.span[j] > 0.0 {
                (p[j] - self.lo[j]) / self.span[j]
            } else {
                0.0
            }
        })
    }

    /// Physical plane from `a . u + b` in unit coordinates.
    fn plane(&self, a: [f64; 3], b: f64) -> NadirPlane {
        let k: [f64; 3] = std::array::from_fn(|j| if self.span[j] > 0.0 { a[j] / self.span[j] } else { 0.0 });
        let constant = b - (0..3).map(|j| k[j] * self.lo[j]).sum::<f64>();
        NadirPlane {
            kappa_h_to: k[0],
            kappa_k_g: k[1],
            kappa_k_fm: k[2],
            kappa_k_vpp: k[2],
            constant,
        }
    }
}

/// Axis-aligned cell of the training grid as inclusive index ranges.
/// Neighbouring cells share their boundary layer, so the cells tile the box.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Cell {
    lo: [usize; 3],
    hi: [usize; 3],
}

impl Cell {
    fn contains(&self, c: [usize; 3]) -> bool {
        (0..3).all(|j| self.lo[j] <= c[j] && c[j] <= self.hi[j])
    }

    fn corners(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::with_capacity(8);
        for a in [self.lo[0], self.hi[0]] {
            for b in [self.lo[1], self.hi[1]] {
                for c in [self.lo[2], self.hi[2]] {
                    if !out.contains(&[a, b, c]) {
                        out.push([a, b, c]);
                    }
                }
            }
        }
        out
    }

    /// Halves the cell along `axis`; needs an interior grid layer.
    fn split(&self, axis: usize) -> Option<(Cell, Cell)> {
        if self.hi[axis] < self.lo[axis] + 2 {
            return None;
        }
        let mid = (self.lo[axis] + self.hi[axis]) / 2;
        let (mut a, mut b) = (*self, *self);
        a.hi[axis] = mid;
        b.lo[axis] = mid;
        Some((a, b))
    }
}

/// Training grid with its axis layout.
struct Grid {
    dims: [usize; 3],
    units: Vec<[f64; 3]>,
    values: Vec<f64>,
}

impl Grid {
    fn index(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    fn coords(&self, s: usize) -> [usize; 3] {
        [
            s / (self.dims[1] * self.dims[2]),
            (s / self.dims[2]) % self.dims[1],
            s % self.dims[2],
        ]
    }

    fn members(&self, cell: &Cell) -> Vec<usize> {
        (0..self.units.len())
            .filter(|&s| cell.contains(self.coords(s)))
            .collect()
    }

    /// One plane per cell from a single LP minimising the largest gap. Each
    /// plane stays below the samples of its cell and above every other plane
    /// on that plane's cell, so the minimum of the planes is exactly the
    /// cell's own plane everywhere inside the cell.
    fn fit(&self, cells: &[Cell], norm: &Normaliser) -> Result<(f64, Vec<NadirPlane>), SecurityError> {
        let live: Vec<usize> = (0..3).filter(|&j| self.dims[j] > 1).collect();
        let members: Vec<Vec<usize>> = cells.iter().map(|c| self.members(c)).collect();
        let total: usize = members.iter().map(Vec::len).sum();
        // small secondary weight on the mean gap picks a tight plane among
        // those with the same worst gap
        let w = 1e-3 / total as f64;
        let mut lp = LpProblem::new();
        let t = lp.add_var("t", 0.0, f64::INFINITY, 1.0)?;
        let mut vars = Vec::with_capacity(cells.len());
        for (p, m) in members.iter().enumerate() {
            let mut a = [None; 3];
            for &j in &live {
                let cost = -w * m.iter().map(|&s| self.units[s][j]).sum::<f64>();
                a[j] = Some(lp.add_var(format!("a{p}_{j}"), f64::NEG_INFINITY, f64::INFINITY, cost)?);
            }
            let b = lp.add_var(format!("b{p}"), f64::NEG_INFINITY, f64::INFINITY, -w * m.len() as f64)?;
            vars.push((a, b));
        }
        let terms = |p: usize, u: &[f64; 3], sign: f64| {
            let (a, b) = vars[p];
            let mut out = vec![(b, sign)];
            for j in 0..3 {
                if let Some(v) = a[j] {
                    out.push((v, sign * u[j]));
                }
            }
            out
        };
        for (p, m) in members.iter().enumerate() {
            for &s in m {
                let u = &self.units[s];
                lp.add_row(format!("under{p}_{s}"), &terms(p, u, 1.0), RowSense::Le, self.values[s])?;
                let mut gap = terms(p, u, 1.0);
                gap.push((t, 1.0));
                lp.add_row(format!("gap{p}_{s}"), &gap, RowSense::Ge, self.values[s])?;
            }
        }
        for (q, cell) in cells.iter().enumerate() {
            for corner in cell.corners() {
                let u = &self.units[self.index(corner)];
                for p in (0..cells.len()).filter(|&p| p != q) {
                    let mut row = terms(p, u, 1.0);
                    row.extend(terms(q, u, -1.0));
                    lp.add_row(format!("order{p}_{q}_{}", self.index(corner)), &row, RowSense::Ge, 0.0)?;
                }
            }
        }
        let sol = solve_lp(&lp)?;
        if sol.status != Status::Optimal {
            return Err(SecurityError::PlaneFit(format!("{:?}", sol.status)));
        }
        let planes = vars
            .iter()
            .map(|(a, b)| norm.plane(std::array::from_fn(|j| a[j].map_or(0.0, |v| sol.x[v.0])), sol.x[b.0]))
            .collect();
        Ok((sol.x[t.0], planes))
    }

    /// Largest gap of each cell's own plane over the cell's samples.
    fn cell_gaps(&self, cells: &[Cell], planes: &[NadirPlane], points: &[[f64; 3]]) -> Vec<f64> {
        cells
            .iter()
            .zip(planes)
            .map(|(c, pl)| {
                self.members(c)
                    .iter()
                    .map(|&s| self.values[s] - pl.value(points[s][0], points[s][1], points[s][2], 0.0))
                    .fold(0.0f64, f64::max)
            })
            .collect()
    }
}

/// Samples the closed-form nadir over the box and splits the grid into cells
/// greedily, always halving the cell with the largest gap along the axis that
/// lowers the worst gap most. Planes that are never the minimum are pruned;
/// the surface is then shifted down by its worst optimism on a finer grid and
/// its errors are reported on a disjoint validation grid.
pub fn build_pwl_surface(config: &SurfaceConfig) -> Result<PwlNadirSurface, SecurityError> {
    config.validate()?;
    let axes = config.domain.axes();
    let axis_values = axes.map(|r| axis_points(r, config.grid));
    let dims = axis_values.each_ref().map(Vec::len);
    let points = cartesian(axis_values);
    let values = sample_all(config, &points)?;
    let norm = Normaliser::new(&config.domain);
    let units: Vec<[f64; 3]> = points.iter().map(|p| norm.unit(p)).collect();
    let grid = Grid { dims, units, values };
    let values = &grid.values;
    let gaps_of = |planes: &[NadirPlane]| -> Vec<f64> {
        points
            .iter()
            .zip(values)
            .map(|(p, f)| f - surface_min(planes, p).0)
            .collect()
    };

    let mut cells = vec![Cell {
        lo: [0; 3],
        hi: dims.map(|d| d - 1),
    }];
    let (mut worst, mut planes) = grid.fit(&cells, &norm)?;
    // splits that no longer lower the worst gap only grow the LP
    let mut stalled = 0;
    while cells.len() < config.planes && worst > 1e-9 && stalled < STALL_SPLITS {
        let gaps = grid.cell_gaps(&cells, &planes, &points);
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by(|&a, &b| gaps[b].total_cmp(&gaps[a]));
        let mut step = None;
        for &c in &order {
            for axis in 0..3 {
                let Some((left, right)) = cells[c].split(axis) else {
                    continue;
                };
                let mut trial = cells.clone();
                trial[c] = left;
                trial.insert(c + 1, right);
                let (t, fitted) = grid.fit(&trial, &norm)?;
                if step.as_ref().is_none_or(|(bt, _, _)| t < *bt) {
                    step = Some((t, trial, fitted));
                }
            }
            if step.is_some() {
                break;
            }
        }
        let Some((t, trial, fitted)) = step else {
            break;
        };
        stalled = if t < worst - 1e-6 { 0 } else { stalled + 1 };
        worst = t;
        cells = trial;
        planes = fitted;
    }

    // keep planes that are the minimum somewhere
    let mut active = vec![false; planes.len()];
    for p in &points {
        let (m, _) = surface_min(&planes, p);
        for (i, pl) in planes.iter().enumerate() {
            if pl.value(p[0], p[1], p[2], 0.0) <= m + ACTIVE_TOLERANCE_HZ {
                active[i] = true;
            }
        }
    }
    let mut planes: Vec<NadirPlane> = planes
        .into_iter()
        .zip(&active)
        .filter_map(|(p, a)| a.then_some(p))
        .collect();

    // calibration on a grid that halves every cell
    let fine = cartesian(axes.map(|r| axis_points(r, 2 * config.grid - 1)));
    let fine_values = sample_all(config, &fine)?;
    let optimism = fine
        .iter()
        .zip(&fine_values)
        .map(|(p, f)| surface_min(&planes, p).0 - f)
        .fold(0.0f64, f64::max);
    let shift = if optimism > 0.0 { optimism + 1e-12 } else { 0.0 };
    for p in &mut planes {
        p.constant -= shift;
    }

    let sample_max_gap_hz = gaps_of(&planes).iter().fold(0.0f64, |m, g| m.max(*g));
    let check = cartesian(axes.map(|r| offset_points(r, config.grid + 1)));
    let check_values = sample_all(config, &check)?;
    let mut max_gap = f64::NEG_INFINITY;
    let mut sum_gap = 0.0;
    for (p, f) in check.iter().zip(&check_values) {
        let g = f - surface_min(&planes, p).0;
        max_gap = max_gap.max(g);
        sum_gap += g;
    }
    let violation = -check
        .iter()
        .zip(&check_values)
        .map(|(p, f)| f - surface_min(&planes, p).0)
        .fold(f64::INFINITY, f64::min);
    let meets_target = max_gap <= config.target_gap_hz && violation <= CONSERVATIVE_TOLERANCE_HZ;
    if !meets_target {
        log::warn!(
            "nadir surface with {} planes reaches a validation gap of {max_gap:.2e} Hz and optimism {violation:.2e} Hz \
             (target {:.2e} Hz)",
            planes.len(),
            config.target_gap_hz
        );
    }
    Ok(PwlNadirSurface {
        stats: SurfaceStats {
            samples: points.len(),
            calibration_points: fine.len(),
            validation_points: check.len(),
            sample_max_gap_hz,
            calibration_shift_hz: shift,
            validation_max_gap_hz: max_gap,
            validation_mean_gap_hz: sum_gap / check.len() as f64,
            validation_max_violation_hz: violation,
            meets_target,
        },
        planes,
        domain: config.domain.clone(),
        delta_d: config.delta_d,
        tau1: config.tau1,
        tau2: config.tau2,
        t_gv: config.t_gv,
        grid: config.grid,
        target_gap_hz: config.target_gap_hz,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointCheck {
    pub pass: bool,
    /// Plane with the lowest value at the point.
    pub worst_plane: usize,
    /// Surface value at the point, Hz.
    pub surface_hz: f64,
    /// Set when the point lies outside the sampled box.
    pub warning: Option<String>,
}

/// Passes iff every plane stays at or above `-nadir_max`.
pub fn check_point(
    surface: &PwlNadirSurface,
    h_to: f64,
    k_g: f64,
    k_fm: f64,
    k_vpp: f64,
    nadir_max: f64,
) -> PointCheck {
    let (v, worst) = surface.value(h_to, k_g, k_fm, k_vpp);
    let warning = (!surface.domain.contains(h_to, k_g, k_fm + k_vpp)).then(|| {
        let msg = format!(
            "point (h_to {h_to}, k_g {k_g}, k_fast {}) lies outside the surface domain; planes are extrapolated",
            k_fm + k_vpp
        );
        log::warn!("{msg}");
        msg
    });
    PointCheck {
        pass: v >= -nadir_max,
        worst_plane: worst,
        surface_hz: v,
        warning,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityViolation {
    pub axis: &'static str,
    /// Lower end of the offending step.
    pub at: [f64; 3],
    /// How far the nadir falls across the step, Hz.
    pub drop_hz: f64,
}

/// Steps of the training grid along which the nadir gets deeper as inertia or
/// droop grows. An empty list means the sampled surface is monotone.
pub fn sample_monotonicity(config: &SurfaceConfig) -> Result<Vec<MonotonicityViolation>, SecurityError> {
    config.validate()?;
    let grid = config.domain.axes().map(|r| axis_points(r, config.grid));
    let points = cartesian(grid.clone());
    let values = sample_all(config, &points)?;
    let dims = grid.each_ref().map(Vec::len);
    let idx = |i: usize, j: usize, k: usize| (i * dims[1] + j) * dims[2] + k;
    let mut out = Vec::new();
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let here = idx(i, j, k);
                let steps = [
                    ("h_to", i + 1 < dims[0], (i + 1, j, k)),
                    ("k_g", j + 1 < dims[1], (i, j + 1, k)),
                    ("k_fast", k + 1 < dims[2], (i, j, k + 1)),
                ];
                for (axis, ok, (a, b, c)) in steps {
                    if !ok {
                        continue;
                    }
                    let drop = values[here] - values[idx(a, b, c)];
                    if drop > 1e-12 {
                        out.push(MonotonicityViolation {
                            axis,
                            at: points[here],
                            drop_hz: drop,
                        });
                    }
                }
            }
        }
    }
    if !out.is_empty() {
        log::warn!("sampled nadir is not monotone at {} grid steps", out.len());
    }
    Ok(out)
}
