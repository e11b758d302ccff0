//! Fixed-step numerical reference for block-diagram frequency models.

use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsError;
use crate::models::{StateSpace, TransferFunction};
use crate::num::Scalar;

/// Frequency excursion beyond which a simulation is declared divergent, Hz.
pub const DIVERGENCE_GUARD_HZ: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct InertiaBlock<T> {
    pub h: T,
    pub active_from: T,
}

/// Swing equation `2 H(t) df/dt = -dD + sum_b y_b(t)` where each branch `b`
/// is driven by `-df` from its activation time (the branch delay) onward.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyModel<T> {
    pub inertia: Vec<InertiaBlock<T>>,
    pub branches: Vec<TransferFunction<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct FrequencyTrajectory<T> {
    pub time: Vec<T>,
    pub df: Vec<T>,
    /// Largest |df/dt| seen on the grid, Hz/s.
    pub rocof_max: T,
    /// Time of the sampled minimum refined by a parabola through its
    /// neighbours.
    pub t_nadir: T,
    /// Minimum over the samples.
    pub nadir: T,
    /// Deviation at the end of the horizon.
    pub qss: T,
}

struct Compiled<T> {
    ss: Vec<StateSpace<T>>,
    offsets: Vec<usize>,
    n: usize,
}

impl<T: Scalar> FrequencyModel<T> {
    pub fn inertia_at(&self, t: T) -> T {
        self.inertia
            .iter()
            .filter(|b| b.active_from <= t)
            .fold(T::zero(), |acc, b| acc + b.h)
    }

    /// Sum of branch DC gains.
    pub fn total_droop(&self) -> T {
        self.branches.iter().fold(T::zero(), |acc, b| acc + b.dc_gain())
    }

    fn compile(&self) -> Compiled<T> {
        let ss: Vec<_> = self.branches.iter().map(|b| b.state_space()).collect();
        let mut offsets = Vec::with_capacity(ss.len());
        let mut n = 1;
        for s in &ss {
            offsets.push(n);
            n += s.b.len();
        }
        Compiled { ss, offsets, n }
    }

    fn rhs(&self, c: &Compiled<T>, active: &[bool], h: T, delta_d: T, x: &[T], dx: &mut [T]) {
        let f = x[0];
        let mut p = -delta_d;
        for (i, s) in c.ss.iter().enumerate() {
            let o = c.offsets[i];
            let m = s.b.len();
            let u = if active[i] { -f } else { T::zero() };
            let xs = &x[o..o + m];
            let y = s.c.iter().zip(xs).fold(s.d * u, |acc, (ci, xi)| acc + *ci * *xi);
            p = p + y;
            for r in 0..m {
                let mut v = s.b[r] * u;
                for k in 0..m {
                    v = v + s.a[(r, k)] * xs[k];
                }
                dx[o + r] = v;
            }
        }
        dx[0] = p / (T::of(2.0) * h);
    }

    /// RK4 with step `step`, split so every activation time is a grid point.
    pub fn simulate(&self, delta_d: T, horizon: T, step: T) -> Result<FrequencyTrajectory<T>, DynamicsError> {
        if !(step > T::zero()) || !(horizon > T::zero()) || step * T::of(100.0) > horizon * (T::one() + T::EPS) {
            return Err(DynamicsError::StepTooLarge {
                step: step.to_f64_lossy(),
                horizon: horizon.to_f64_lossy(),
            });
        }
        if !(self.inertia_at(T::zero()) > T::zero()) {
            return Err(DynamicsError::ZeroInertia);
        }
        let c = self.compile();
        let mut events: Vec<T> = self
            .inertia
            .iter()
            .map(|b| b.active_from)
            .chain(self.branches.iter().map(|b| b.delay()))
            .filter(|t| *t > T::zero() && *t < horizon)
            .collect();
        events.push(horizon);
        events.sort_by(|a, b| a.partial_cmp(b).unwrap());
        events.dedup();

        let guard = T::of(DIVERGENCE_GUARD_HZ);
        let mut x = vec![T::zero(); c.n];
        let (mut k1, mut k2, mut k3, mut k4) = (x.clone(), x.clone(), x.clone(), x.clone());
        let mut tmp = x.clone();
        let mut time = vec![T::zero()];
        let mut df = vec![T::zero()];
        let mut rocof = T::zero();
        let mut t0 = T::zero();
        for &t1 in &events {
            let mid = (t0 + t1) / T::of(2.0);
            let active: Vec<bool> = self.branches.iter().map(|b| b.delay() <= mid).collect();
            let h = self.inertia_at(mid);
            let steps = ((t1 - t0) / step).ceil().to_usize().unwrap_or(1).max(1);
            let dt = (t1 - t0) / T::from_usize(steps).unwrap();
            let half = dt / T::of(2.0);
            for i in 0..steps {
                self.rhs(&c, &active, h, delta_d, &x, &mut k1);
                rocof = rocof.max(k1[0].abs());
                for j in 0..c.n {
                    tmp[j] = x[j] + half * k1[j];
                }
                self.rhs(&c, &active, h, delta_d, &tmp, &mut k2);
                for j in 0..c.n {
                    tmp[j] = x[j] + half * k2[j];
                }
                self.rhs(&c, &active, h, delta_d, &tmp, &mut k3);
                for j in 0..c.n {
                    tmp[j] = x[j] + dt * k3[j];
                }
                self.rhs(&c, &active, h, delta_d, &tmp, &mut k4);
                let sixth = dt / T::of(6.0);
                for j in 0..c.n {
                    x[j] = x[j] + sixth * (k1[j] + T::of(2.0) * (k2[j] + k3[j]) + k4[j]);
                }
                let t = if i + 1 == steps {
                    t1
                } else {
                    t0 + dt * T::from_usize(i + 1).unwrap()
                };
                if !x[0].is_finite() || x[0].abs() > guard {
                    return Err(DynamicsError::Diverged { t: t.to_f64_lossy() });
                }
                time.push(t);
                df.push(x[0]);
            }
            t0 = t1;
        }
        Ok(trajectory_metrics(time, df, rocof))
    }
}

fn trajectory_metrics<T: Scalar>(time: Vec<T>, df: Vec<T>, rocof_max: T) -> FrequencyTrajectory<T> {
    let mut imin = 0;
    for (i, v) in df.iter().enumerate() {
        if *v < df[imin] {
            imin = i;
        }
    }
    let mut t_nadir = time[imin];
    if imin > 0 && imin + 1 < df.len() {
        let (t0, t1, t2) = (time[imin - 1], time[imin], time[imin + 1]);
        let (y0, y1, y2) = (df[imin - 1], df[imin], df[imin + 1]);
        // vertex of the parabola through three (possibly uneven) points
        let num = (t1 - t0) * (t1 - t0) * (y1 - y2) - (t1 - t2) * (t1 - t2) * (y1 - y0);
        let den = (t1 - t0) * (y1 - y2) - (t1 - t2) * (y1 - y0);
        if den != T::zero() {
            let v = t1 - num / (T::of(2.0) * den);
            if v > t0 && v < t2 {
                t_nadir = v;
            }
        }
    }
    let nadir = df[imin];
    let qss = *df.last().unwrap();
    FrequencyTrajectory {
        time,
        df,
        rocof_max,
        t_nadir,
        nadir,
        qss,
    }
}

impl<T: Scalar> FrequencyTrajectory<T> {
    /// Linear interpolation on the sample grid, clamped to the horizon.
    pub fn at(&self, t: T) -> T {
        let i = self.time.partition_point(|x| *x <= t);
        if i == 0 {
            return self.df[0];
        }
        if i >= self.time.len() {
            return *self.df.last().unwrap();
        }
        let (t0, t1) = (self.time[i - 1], self.time[i]);
        let w = (t - t0) / (t1 - t0);
        self.df[i - 1] + w * (self.df[i] - self.df[i - 1])
    }
}

/// Convenience wrapper with the default 1 ms step.
pub fn simulate_full_order<T: Scalar>(
    model: &FrequencyModel<T>,
    delta_d: T,
    horizon: T,
) -> Result<FrequencyTrajectory<T>, DynamicsError> {
    model.simulate(delta_d, horizon, T::of(1e-3))
}
