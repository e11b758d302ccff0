//! Piecewise analytic frequency response after a step power deficit.
//!
//! Frequency deviation is negative for under-frequency events: a deficit
//! `delta_d > 0` drives `df <= 0`. Three stages:
//!
//! 1. Only non-delayed inertia `h_gv` is online; `df` ramps.
//! 2. All inertia `h_to` and the fast droop (`k_fm + k_vpp`) respond; `df`
//!    relaxes exponentially.
//! 3. From `tau2` the SG governors (droop `k_g` behind lag `t_gv`) join and the
//!    response becomes a damped oscillation around the quasi-steady state.

use serde::{Deserialize, Serialize};

use crate::dynamics::ode::{FrequencyModel, InertiaBlock};
use crate::dynamics::DynamicsError;
use crate::models::TransferFunction;
use crate::num::Scalar;

/// How the interval before the GFM delay is treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage1Mode {
    /// Stage 1 shrinks to the disturbance instant; delayed inertia and fast
    /// droop act from `0+`. This is the approximation the security
    /// constraints are built on.
    #[default]
    Instant,
    /// Stage 1 lasts `[0, tau1]` on `h_gv` alone.
    Ramp,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct StageParams<T> {
    /// Non-delayed inertia (SG and VPP small-SG), MW·s/Hz.
    pub h_gv: T,
    /// Total inertia including GFM and delayed VPP inertia, MW·s/Hz.
    pub h_to: T,
    /// Committed SG governor droop, MW/Hz.
    pub k_g: T,
    /// GFM equipment droop, MW/Hz.
    pub k_fm: T,
    /// VPP droop, MW/Hz.
    pub k_vpp: T,
    /// Equivalent governor lag, s.
    pub t_gv: T,
    /// Power deficit, MW.
    pub delta_d: T,
    pub tau1: T,
    pub tau2: T,
    #[serde(default)]
    pub mode: Stage1Mode,
}

impl<T: Scalar> StageParams<T> {
    pub fn fast_droop(&self) -> T {
        self.k_fm + self.k_vpp
    }

    pub fn total_droop(&self) -> T {
        self.k_g + self.k_fm + self.k_vpp
    }

    /// Start of stage 2.
    pub fn stage2_start(&self) -> T {
        match self.mode {
            Stage1Mode::Instant => T::zero(),
            Stage1Mode::Ramp => self.tau1,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let check = |name: &'static str, v: T, ok: bool| {
            if ok && v.is_finite() {
                Ok(())
            } else {
                Err(DynamicsError::InvalidParameter {
                    field: name,
                    value: v.to_f64_lossy(),
                })
            }
        };
        let z = T::zero();
        check("h_gv", self.h_gv, self.h_gv > z)?;
        check("h_to", self.h_to, self.h_to >= self.h_gv)?;
        check("k_g", self.k_g, self.k_g >= z)?;
        check("k_fm", self.k_fm, self.k_fm >= z)?;
        check("k_vpp", self.k_vpp, self.k_vpp >= z)?;
        check("t_gv", self.t_gv, self.t_gv > z)?;
        check("delta_d", self.delta_d, true)?;
        check("tau1", self.tau1, self.tau1 > z)?;
        check("tau2", self.tau2, self.tau2 > self.tau1)?;
        if self.total_droop() <= z {
            return Err(DynamicsError::ZeroDroop);
        }
        Ok(())
    }

    /// The same system as a block model for the numerical oracle.
    ///
    /// Delayed inertia and fast droop come online at `stage2_start`, the
    /// governor branch at `tau2`.
    pub fn frequency_model(&self) -> Result<FrequencyModel<T>, DynamicsError> {
        let t2 = self.stage2_start();
        let mut inertia = vec![InertiaBlock {
            h: self.h_gv,
            active_from: T::zero(),
        }];
        if self.h_to > self.h_gv {
            inertia.push(InertiaBlock {
                h: self.h_to - self.h_gv,
                active_from: t2,
            });
        }
        let mut branches = Vec::new();
        if self.fast_droop() > T::zero() {
            branches.push(TransferFunction::gain(self.fast_droop()).with_delay(t2)?);
        }
        if self.k_g > T::zero() {
            branches.push(TransferFunction::first_order(self.k_g, self.t_gv)?.with_delay(self.tau2)?);
        }
        Ok(FrequencyModel { inertia, branches })
    }
}

/// Stage-3 homogeneous solution in time `s = t - tau2` measured from the
/// governor activation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub enum Stage3<T> {
    /// `e^{-alpha s} (a sin(omega s) + b cos(omega s))`
    Underdamped { alpha: T, omega: T, a: T, b: T },
    /// `c1 e^{r1 s} + c2 e^{r2 s}`
    Overdamped { r1: T, r2: T, c1: T, c2: T },
    /// `(c1 + c2 s) e^{r s}`
    Critical { r: T, c1: T, c2: T },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct StageCoefficients<T> {
    pub params: StageParams<T>,
    /// Stage-2 decay rate `(k_fm + k_vpp) / (2 h_to)`, 1/s.
    pub stage2_rate: T,
    /// Frequency at the start of stage 2 (zero unless stage 1 is a ramp).
    pub stage2_initial: T,
    /// `df(tau2)` and `df'(tau2)`.
    pub f_tau2: T,
    pub df_tau2: T,
    /// Deficit still uncovered by inertia-weighted response at `tau2`:
    /// `-2 h_gv df'(tau2)`.
    pub delta_d_prime: T,
    /// Quasi-steady-state deviation `-delta_d / total droop`.
    pub offset: T,
    /// Decay rate of stage 3, `(2 h_to + k_fast t_gv) / (4 t_gv h_to)`.
    pub alpha: T,
    /// `(k_total / (2 t_gv h_to)) - alpha^2`; negative when underdamped.
    pub discriminant: T,
    pub stage3: Stage3<T>,
}

impl<T: Scalar> StageCoefficients<T> {
    /// Damped angular frequency, zero unless underdamped.
    pub fn omega(&self) -> T {
        match self.stage3 {
            Stage3::Underdamped { omega, .. } => omega,
            _ => T::zero(),
        }
    }

    pub fn is_underdamped(&self) -> bool {
        matches!(self.stage3, Stage3::Underdamped { .. })
    }

    /// Integration constants of `e^{-alpha t} (C1 sin(omega t) + C2 cos(omega t))`
    /// in absolute time, in Hz.
    pub fn c1_c2(&self) -> Option<(T, T)> {
        match self.stage3 {
            Stage3::Underdamped { alpha, omega, a, b } => {
                let tau2 = self.params.tau2;
                let g = (alpha * tau2).exp();
                let (sn, cs) = (omega * tau2).sin_cos();
                // a sin(w(t - tau2)) + b cos(w(t - tau2)) rotated to absolute time
                let c1 = g * (a * cs + b * sn);
                let c2 = g * (b * cs - a * sn);
                Some((c1, c2))
            }
            _ => None,
        }
    }

    /// Phase angles `(phi, phi')` with `C1 sin + C2 cos = R sin(omega t + phi)`
    /// and `phi' = atan2(omega, -alpha)`; the first derivative vanishes where
    /// `omega t + phi + phi'` is a multiple of pi.
    pub fn phases(&self) -> Option<(T, T)> {
        let (c1, c2) = self.c1_c2()?;
        let Stage3::Underdamped { alpha, omega, .. } = self.stage3 else {
            return None;
        };
        Some((c2.atan2(c1), omega.atan2(-alpha)))
    }

    pub fn frequency(&self, t: T) -> T {
        self.eval(t).0
    }

    pub fn derivative(&self, t: T) -> T {
        self.eval(t).1
    }

    /// `(df, df/dt)` at `t`; right-derivative at stage boundaries.
    pub fn eval(&self, t: T) -> (T, T) {
        let p = &self.params;
        let z = T::zero();
        if t <= z {
            return (z, z);
        }
        let t2 = p.stage2_start();
        let two = T::of(2.0);
        if t < t2 {
            let slope = -p.delta_d / (two * p.h_gv);
            return (slope * t, slope);
        }
        if t <= p.tau2 {
            return self.stage2(t - t2);
        }
        let s = t - p.tau2;
        let (g, dg) = stage3_eval(&self.stage3, s);
        (self.offset + g, dg)
    }

    fn stage2(&self, u: T) -> (T, T) {
        let p = &self.params;
        let a = self.stage2_rate;
        let two_h = T::of(2.0) * p.h_to;
        let e = (-a * u).exp();
        // (1 - e^{-a u}) / a, continuous at a = 0
        let phi1 = if a == T::zero() { u } else { -(-a * u).exp_m1() / a };
        let f = self.stage2_initial * e - p.delta_d * phi1 / two_h;
        let df = -a * self.stage2_initial * e - p.delta_d * e / two_h;
        (f, df)
    }
}

fn stage3_eval<T: Scalar>(s3: &Stage3<T>, s: T) -> (T, T) {
    match *s3 {
        Stage3::Underdamped { alpha, omega, a, b } => {
            let e = (-alpha * s).exp();
            let (sn, cs) = (omega * s).sin_cos();
            let g = a * sn + b * cs;
            let dg = omega * (a * cs - b * sn);
            (e * g, e * (dg - alpha * g))
        }
        Stage3::Overdamped { r1, r2, c1, c2 } => {
            let (e1, e2) = ((r1 * s).exp(), (r2 * s).exp());
            (c1 * e1 + c2 * e2, c1 * r1 * e1 + c2 * r2 * e2)
        }
        Stage3::Critical { r, c1, c2 } => {
            let e = (r * s).exp();
            ((c1 + c2 * s) * e, (c2 + r * (c1 + c2 * s)) * e)
        }
    }
}

/// Coefficients for every damping regime.
pub fn stage_model<T: Scalar>(params: &StageParams<T>) -> Result<StageCoefficients<T>, DynamicsError> {
    params.validate()?;
    let p = *params;
    let two = T::of(2.0);
    let four = T::of(4.0);
    let kf = p.fast_droop();
    let ktot = p.total_droop();
    let stage2_rate = kf / (two * p.h_to);
    let t2 = p.stage2_start();
    let stage2_initial = -p.delta_d * t2 / (two * p.h_gv);

    let mut c = StageCoefficients {
        params: p,
        stage2_rate,
        stage2_initial,
        f_tau2: T::zero(),
        df_tau2: T::zero(),
        delta_d_prime: T::zero(),
        offset: -p.delta_d / ktot,
        alpha: (two * p.h_to + kf * p.t_gv) / (four * p.t_gv * p.h_to),
        discriminant: T::zero(),
        stage3: Stage3::Critical {
            r: T::zero(),
            c1: T::zero(),
            c2: T::zero(),
        },
    };
    let (f, df) = c.stage2(p.tau2 - t2);
    c.f_tau2 = f;
    c.df_tau2 = df;
    c.delta_d_prime = -two * p.h_gv * df;

    let alpha = c.alpha;
    let w2 = ktot / (two * p.t_gv * p.h_to) - alpha * alpha;
    c.discriminant = -w2;
    let b = f - c.offset;
    let scale = alpha * alpha;
    let crit_tol = T::of(1e-10) * scale;
    c.stage3 = if w2 > crit_tol {
        let omega = w2.sqrt();
        Stage3::Underdamped {
            alpha,
            omega,
            a: (df + alpha * b) / omega,
            b,
        }
    } else if w2 < -crit_tol {
        let d = (-w2).sqrt();
        let (r1, r2) = (-alpha + d, -alpha - d);
        // c1 + c2 = b, r1 c1 + r2 c2 = df
        let c1 = (df - r2 * b) / (r1 - r2);
        Stage3::Overdamped { r1, r2, c1, c2: b - c1 }
    } else {
        Stage3::Critical {
            r: -alpha,
            c1: b,
            c2: df + alpha * b,
        }
    };
    Ok(c)
}

/// Underdamped coefficients; other regimes are reported as an error carrying
/// the discriminant so callers can fall back to the numerical oracle.
pub fn stage_coefficients<T: Scalar>(params: &StageParams<T>) -> Result<StageCoefficients<T>, DynamicsError> {
    let c = stage_model(params)?;
    if !c.is_underdamped() {
        return Err(DynamicsError::NotUnderdamped {
            discriminant: c.discriminant.to_f64_lossy(),
        });
    }
    Ok(c)
}

pub fn closed_form_frequency<T: Scalar>(coeffs: &StageCoefficients<T>, t: T) -> T {
    coeffs.frequency(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct Nadir<T> {
    pub t: T,
    pub value: T,
    /// The response never dips below its QSS level: `value` is the QSS
    /// deviation and `t` is infinite.
    pub monotone: bool,
}

/// Deepest point of the response: the first stage-3 trough, a stage
/// boundary (stage 2 is a single exponential, so it has no interior
/// extremum) or the QSS level.
pub fn nadir<T: Scalar>(coeffs: &StageCoefficients<T>) -> Nadir<T> {
    let p = &coeffs.params;
    let z = T::zero();
    let monotone = Nadir {
        t: T::infinity(),
        value: coeffs.offset,
        monotone: true,
    };
    if p.delta_d == z {
        return Nadir {
            t: z,
            value: z,
            monotone: true,
        };
    }
    let s = match coeffs.stage3 {
        Stage3::Underdamped { alpha, omega, a, b } => {
            let pi = T::PI();
            let phi = b.atan2(a);
            let phi_p = omega.atan2(-alpha);
            // stationary points: omega s + phi + phi' = n pi
            let base = -(phi + phi_p) / omega;
            let period = pi / omega;
            let mut n = (-base / period).floor();
            let mut s = base + n * period;
            let tiny = T::of(1e-12) * period;
            let mut found = None;
            for _ in 0..4 {
                if s > tiny {
                    let g = a * (omega * s).sin() + b * (omega * s).cos();
                    let dg = omega * (a * (omega * s).cos() - b * (omega * s).sin());
                    let curvature = (alpha * alpha - omega * omega) * g - T::of(2.0) * alpha * dg;
                    if curvature * p.delta_d.signum() > z {
                        found = Some(s);
                        break;
                    }
                }
                n = n + T::one();
                s = base + n * period;
            }
            found
        }
        Stage3::Overdamped { r1, r2, c1, c2 } => {
            let q = -(c2 * r2) / (c1 * r1);
            if q > z && c1 != z {
                let s = q.ln() / (r1 - r2);
                (s > z).then_some(s)
            } else {
                None
            }
        }
        Stage3::Critical { r, c1, c2 } => {
            if c2 == z {
                None
            } else {
                let s = -(c2 + r * c1) / (r * c2);
                (s > z).then_some(s)
            }
        }
    };
    let sign = p.delta_d.signum();
    let start = p.stage2_start();
    let mut best = monotone;
    let candidates = [s.map(|s| p.tau2 + s), (start > z).then_some(start), Some(p.tau2)];
    for t in candidates.into_iter().flatten() {
        let value = coeffs.frequency(t);
        // deeper means further from nominal in the direction of the deficit;
        // ties go to the QSS level
        if value * sign < best.value * sign {
            best = Nadir {
                t,
                value,
                monotone: false,
            };
        }
    }
    best
}

/// Magnitude of the initial rate of change of frequency, Hz/s.
pub fn rocof_max<T: Scalar>(delta_d: T, h_gv: T) -> Result<T, DynamicsError> {
    if !(h_gv > T::zero()) {
        return Err(DynamicsError::InvalidParameter {
            field: "h_gv",
            value: h_gv.to_f64_lossy(),
        });
    }
    Ok(delta_d.abs() / (T::of(2.0) * h_gv))
}

/// Magnitude of the quasi-steady-state deviation, Hz.
pub fn qss_deviation<T: Scalar>(delta_d: T, total_droop: T) -> Result<T, DynamicsError> {
    if !(total_droop > T::zero()) {
        return Err(DynamicsError::ZeroDroop);
    }
    Ok(delta_d.abs() / total_droop)
}
