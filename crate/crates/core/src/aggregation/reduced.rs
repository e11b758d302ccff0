//! Reduced-order VPP droop branch and its exact closed-loop response.
//!
//! The closed loop is linear and piecewise time-invariant between activation
//! instants, so the response to a unit step deficit is propagated segment by
//! segment with matrix exponentials of the state matrix augmented by a
//! constant state. Parameter sensitivities come from the Fréchet derivative of
//! the exponential, obtained from the exponential of a block-triangular
//! matrix.

use serde::{Deserialize, Serialize};

use crate::dynamics::FrequencyModel;
use crate::linalg::Mat;
use crate::models::{hurwitz, TransferFunction};

/// Largest admissible pole modulus of a reduced model, 1/s. Faster poles
/// leave nadir and QSS untouched but make the branch stiff for the
/// millisecond-step oracle.
pub const MAX_POLE_RATE: f64 = 1000.0;

/// `(n0 + n1 s + ... + n_{r-1} s^{r-1}) / (1 + d1 s + ... + dr s^r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedParams {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl ReducedParams {
    pub fn first_order(k: f64, t: f64) -> Self {
        ReducedParams {
            num: vec![k],
            den: vec![t],
        }
    }

    pub fn order(&self) -> usize {
        self.den.len()
    }

    /// Parameter vector `[n0..n_{r-1}, d1..dr]`.
    pub fn theta(&self) -> Vec<f64> {
        self.num.iter().chain(&self.den).copied().collect()
    }

    pub fn from_theta(order: usize, theta: &[f64]) -> Self {
        ReducedParams {
            num: theta[..order].to_vec(),
            den: theta[order..2 * order].to_vec(),
        }
    }

    pub fn dc_gain(&self) -> f64 {
        self.num[0]
    }

    fn full_den(&self) -> Vec<f64> {
        std::iter::once(1.0).chain(self.den.iter().copied()).collect()
    }

    pub fn is_stable(&self) -> bool {
        hurwitz(&self.full_den())
    }

    /// Stable with every pole inside the disk `|s| < MAX_POLE_RATE`.
    pub fn is_admissible(&self) -> bool {
        if !self.is_stable() {
            return false;
        }
        // z = s / L inside the unit disk <=> w = (1 + z) / (1 - z) in the right
        // half plane, so sum d_i L^i (w + 1)^i (w - 1)^(n - i) must be Hurwitz.
        let p = self.full_den();
        let n = p.len() - 1;
        let mut q = vec![0.0; n + 1];
        for (i, c) in p.iter().enumerate() {
            let mut term = vec![c * MAX_POLE_RATE.powi(i as i32)];
            for k in 0..n {
                let b = if k < i { 1.0 } else { -1.0 };
                let mut next = vec![0.0; term.len() + 1];
                for (j, t) in term.iter().enumerate() {
                    next[j] += b * t;
                    next[j + 1] += t;
                }
                term = next;
            }
            for (qj, t) in q.iter_mut().zip(&term) {
                *qj += t;
            }
        }
        hurwitz(&q)
    }

    pub fn transfer_function(&self, delay: f64) -> TransferFunction<f64> {
        TransferFunction::new(self.num.clone(), self.full_den(), delay).expect("reduced model is proper and finite")
    }

    /// Multiplies by `(1 + eps s) / (1 + eps s)`, raising the order by one
    /// without changing the response.
    pub fn raise_order(&self, eps: f64) -> Self {
        let mul = |p: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; p.len() + 1];
            for (i, c) in p.iter().enumerate() {
                out[i] += c;
                out[i + 1] += c * eps;
            }
            out
        };
        let den = mul(&self.full_den());
        ReducedParams {
            num: mul(&self.num),
            den: den[1..].to_vec(),
        }
    }
}

/// Frequency deviation and slope at a query time, with parameter gradients.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Sample {
    pub f: f64,
    pub df: f64,
    pub grad_f: Vec<f64>,
    pub grad_df: Vec<f64>,
}

struct Layout {
    /// First state of each fixed branch.
    offsets: Vec<usize>,
    red: usize,
    konst: usize,
    n: usize,
}

/// Unit-deficit response of `host` with the reduced branch added, activated
/// at `activation`. Query times must be sorted ascending.
pub(crate) fn reduced_response(
    host: &FrequencyModel<f64>,
    red: &ReducedParams,
    activation: f64,
    times: &[f64],
    with_grad: bool,
) -> Vec<Sample> {
    let r = red.order();
    let fixed: Vec<_> = host.branches.iter().map(|b| b.state_space()).collect();
    let mut offsets = Vec::new();
    let mut n = 1;
    for s in &fixed {
        offsets.push(n);
        n += s.b.len();
    }
    let lay = Layout {
        offsets,
        red: n,
        konst: n + r,
        n: n + r + 1,
    };
    let p = if with_grad { 2 * r } else { 0 };

    let t_end = times.last().copied().unwrap_or(0.0);
    let mut events: Vec<f64> = host
        .inertia
        .iter()
        .map(|b| b.active_from)
        .chain(host.branches.iter().map(|b| b.delay()))
        .chain(std::iter::once(activation))
        .filter(|t| *t > 0.0 && *t < t_end)
        .collect();
    events.push(f64::INFINITY);
    events.sort_by(|a, b| a.partial_cmp(b).unwrap());
    events.dedup();

    let d_r = red.den[r - 1];
    let build = |mid: f64| -> (Mat<f64>, Vec<Mat<f64>>) {
        let h2 = 2.0 * host.inertia_at(mid);
        let mut m = Mat::zeros(lay.n, lay.n);
        m[(0, lay.konst)] = -1.0 / h2;
        for (b, s) in fixed.iter().enumerate() {
            let o = lay.offsets[b];
            let gate = if host.branches[b].delay() <= mid { -1.0 } else { 0.0 };
            m[(0, 0)] += s.d * gate / h2;
            for i in 0..s.b.len() {
                m[(0, o + i)] = s.c[i] / h2;
                m[(o + i, 0)] = s.b[i] * gate;
                for j in 0..s.b.len() {
                    m[(o + i, o + j)] = s.a[(i, j)];
                }
            }
        }
        let gate = if activation <= mid { -1.0 } else { 0.0 };
        let o = lay.red;
        for i in 0..r {
            m[(0, o + i)] = red.num[i] / h2;
            if i + 1 < r {
                m[(o + i, o + i + 1)] = 1.0;
            }
        }
        // last reduced row: (u - x1 - d1 x2 - ... - d_{r-1} x_r) / d_r
        let last = o + r - 1;
        m[(last, o)] = -1.0 / d_r;
        for i in 1..r {
            m[(last, o + i)] = -red.den[i - 1] / d_r;
        }
        m[(last, 0)] = gate / d_r;

        let mut dm = Vec::with_capacity(p);
        for k in 0..p {
            let mut g = Mat::zeros(lay.n, lay.n);
            if k < r {
                g[(0, o + k)] = 1.0 / h2;
            } else {
                let j = k - r + 1; // d_j
                if j < r {
                    g[(last, o + j)] = -1.0 / d_r;
                } else {
                    let d2 = d_r * d_r;
                    g[(last, o)] = 1.0 / d2;
                    for i in 1..r {
                        g[(last, o + i)] = red.den[i - 1] / d2;
                    }
                    g[(last, 0)] = -gate / d2;
                }
            }
            dm.push(g);
        }
        (m, dm)
    };

    let nn = lay.n;
    let mut z = vec![0.0; nn];
    z[lay.konst] = 1.0;
    let mut dz = vec![vec![0.0; nn]; p];
    let mut out = Vec::with_capacity(times.len());
    let mut t0 = 0.0;
    let mut q = 0;
    for &t1 in &events {
        let mid = if t1.is_finite() { 0.5 * (t0 + t1) } else { t0 + 1.0 };
        let (m, dm) = build(mid);
        // answer queries inside [t0, t1]
        while q < times.len() && times[q] <= t1 {
            let dt = times[q] - t0;
            let (zq, dzq) = propagate(&m, &dm, &z, &dz, dt);
            let mz = m.mul_vec(&zq);
            let mut s = Sample {
                f: zq[0],
                df: mz[0],
                grad_f: Vec::with_capacity(p),
                grad_df: Vec::with_capacity(p),
            };
            for k in 0..p {
                s.grad_f.push(dzq[k][0]);
                let a = dm[k].mul_vec(&zq)[0];
                let b = m.mul_vec(&dzq[k])[0];
                s.grad_df.push(a + b);
            }
            out.push(s);
            q += 1;
        }
        if q == times.len() || !t1.is_finite() {
            break;
        }
        let (z1, dz1) = propagate(&m, &dm, &z, &dz, t1 - t0);
        z = z1;
        dz = dz1;
        t0 = t1;
    }
    out
}

fn propagate(m: &Mat<f64>, dm: &[Mat<f64>], z: &[f64], dz: &[Vec<f64>], dt: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    if dt == 0.0 {
        return (z.to_vec(), dz.to_vec());
    }
    let n = m.rows();
    if dm.is_empty() {
        let e = m.scale(dt).expm();
        return (e.mul_vec(z), Vec::new());
    }
    let mut e = None;
    let mut dz_new = Vec::with_capacity(dm.len());
    for (k, g) in dm.iter().enumerate() {
        let mut big = Mat::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                big[(i, j)] = m[(i, j)] * dt;
                big[(n + i, n + j)] = m[(i, j)] * dt;
                big[(i, n + j)] = g[(i, j)] * dt;
            }
        }
        let x = big.expm();
        let mut ek = Mat::zeros(n, n);
        let mut lk = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                ek[(i, j)] = x[(i, j)];
                lk[(i, j)] = x[(i, n + j)];
            }
        }
        let a = lk.mul_vec(z);
        let b = ek.mul_vec(&dz[k]);
        dz_new.push(a.iter().zip(&b).map(|(x, y)| x + y).collect());
        if k == 0 {
            e = Some(ek);
        }
    }
    (e.unwrap().mul_vec(z), dz_new)
}
