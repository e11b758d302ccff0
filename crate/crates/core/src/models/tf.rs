//! Rational transfer functions in the Laplace variable.

use serde::{Deserialize, Serialize};

use crate::linalg::Mat;
use crate::models::ModelError;
use crate::num::Scalar;

/// `num(s) / den(s)` with an activation delay.
///
/// Coefficients are stored in ascending powers of `s`; the denominator is
/// normalised so its constant term is one. The delay marks the time from which
/// the branch receives its input; before it the branch output stays at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct TransferFunction<T> {
    num: Vec<T>,
    den: Vec<T>,
    delay: T,
}

/// Continuous-time state-space realisation `x' = A x + B u`, `y = C x + D u`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace<T> {
    pub a: Mat<T>,
    pub b: Vec<T>,
    pub c: Vec<T>,
    pub d: T,
}

fn trim<T: Scalar>(mut p: Vec<T>) -> Vec<T> {
    while p.len() > 1 && *p.last().unwrap() == T::zero() {
        p.pop();
    }
    p
}

pub(crate) fn poly_mul<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = out[i + j] + x * y;
        }
    }
    out
}

fn poly_add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or_else(T::zero) + b.get(i).copied().unwrap_or_else(T::zero))
        .collect()
}

fn poly_eval<T: Scalar>(p: &[T], s: T) -> T {
    p.iter().rev().fold(T::zero(), |acc, &c| acc * s + c)
}

impl<T: Scalar> TransferFunction<T> {
    pub fn new(num: Vec<T>, den: Vec<T>, delay: T) -> Result<Self, ModelError> {
        if num.is_empty() || den.is_empty() {
            return Err(ModelError::EmptyPolynomial);
        }
        if num.iter().chain(&den).any(|c| !c.is_finite()) || !delay.is_finite() {
            return Err(ModelError::NonFinite("transfer function coefficient".into()));
        }
        if delay < T::zero() {
            return Err(ModelError::NegativeDelay(delay.to_f64_lossy()));
        }
        let d0 = den[0];
        if d0 == T::zero() {
            return Err(ModelError::ZeroDenominatorConstant);
        }
        let num = trim(num.into_iter().map(|c| c / d0).collect());
        let den = trim(den.into_iter().map(|c| c / d0).collect());
        if num.len() > den.len() {
            return Err(ModelError::Improper {
                num_degree: num.len() - 1,
                den_degree: den.len() - 1,
            });
        }
        Ok(TransferFunction { num, den, delay })
    }

    /// `k / (1 + t s)`.
    pub fn first_order(k: T, t: T) -> Result<Self, ModelError> {
        if t <= T::zero() {
            return Err(ModelError::NonPositiveTimeConstant(t.to_f64_lossy()));
        }
        Self::new(vec![k], vec![T::one(), t], T::zero())
    }

    pub fn gain(k: T) -> Self {
        TransferFunction {
            num: vec![k],
            den: vec![T::one()],
            delay: T::zero(),
        }
    }

    pub fn with_delay(mut self, delay: T) -> Result<Self, ModelError> {
        if delay < T::zero() || !delay.is_finite() {
            return Err(ModelError::NegativeDelay(delay.to_f64_lossy()));
        }
        self.delay = delay;
        Ok(self)
    }

    pub fn num(&self) -> &[T] {
        &self.num
    }

    pub fn den(&self) -> &[T] {
        &self.den
    }

    pub fn delay(&self) -> T {
        self.delay
    }

    /// Denominator degree.
    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.len() < self.den.len() || self.num.iter().all(|c| *c == T::zero())
    }

    /// Value at a real point of the Laplace variable.
    pub fn eval(&self, s: T) -> T {
        poly_eval(&self.num, s) / poly_eval(&self.den, s)
    }

    pub fn dc_gain(&self) -> T {
        self.num[0]
    }

    /// Cascade `self * other`; delays add.
    pub fn series(&self, other: &Self) -> Self {
        TransferFunction {
            num: trim(poly_mul(&self.num, &other.num)),
            den: trim(poly_mul(&self.den, &other.den)),
            delay: self.delay + other.delay,
        }
    }

    /// Sum of two branches sharing the same delay.
    pub fn parallel(&self, other: &Self) -> Result<Self, ModelError> {
        if self.delay != other.delay {
            return Err(ModelError::DelayMismatch);
        }
        let num = poly_add(&poly_mul(&self.num, &other.den), &poly_mul(&other.num, &self.den));
        Ok(TransferFunction {
            num: trim(num),
            den: trim(poly_mul(&self.den, &other.den)),
            delay: self.delay,
        })
    }

    /// Routh-Hurwitz test on the denominator.
    pub fn is_stable(&self) -> bool {
        hurwitz(&self.den)
    }

    /// Controllable canonical realisation.
    pub fn state_space(&self) -> StateSpace<T> {
        let n = self.order();
        let lead = self.den[n];
        let a_coef: Vec<T> = self.den.iter().map(|c| *c / lead).collect();
        let mut b_coef: Vec<T> = self.num.iter().map(|c| *c / lead).collect();
        b_coef.resize(n + 1, T::zero());
        let d = b_coef[n];
        let mut a = Mat::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            a[(i, i + 1)] = T::one();
        }
        if n > 0 {
            for j in 0..n {
                a[(n - 1, j)] = -a_coef[j];
            }
        }
        let mut b = vec![T::zero(); n];
        if n > 0 {
            b[n - 1] = T::one();
        }
        let c = (0..n).map(|i| b_coef[i] - d * a_coef[i]).collect();
        StateSpace { a, b, c, d }
    }
}

/// True when every root of the ascending-coefficient polynomial has a
/// negative real part.
pub fn hurwitz<T: Scalar>(den: &[T]) -> bool {
    let p = trim(den.to_vec());
    let n = p.len() - 1;
    if n == 0 {
        return true;
    }
    let sign = p[n].signum();
    // descending coefficients with positive leading term
    let desc: Vec<T> = p.iter().rev().map(|c| *c * sign).collect();
    if desc.iter().any(|c| *c <= T::zero()) {
        return false;
    }
    let mut r0: Vec<T> = desc.iter().step_by(2).copied().collect();
    let mut r1: Vec<T> = desc.iter().skip(1).step_by(2).copied().collect();
    for _ in 0..n {
        if r1.is_empty() {
            break;
        }
        let lead = r1[0];
        if lead <= T::zero() {
            return false;
        }
        let f = r0[0] / lead;
        let next: Vec<T> = (0..r0.len().saturating_sub(1))
            .map(|i| r0[i + 1] - f * r1.get(i + 1).copied().unwrap_or_else(T::zero))
            .collect();
        r0 = r1;
        r1 = next;
        while r1.last().is_some_and(|c| *c == T::zero()) && r1.len() > 1 {
            r1.pop();
        }
        if r1.len() == 1 && r1[0] == T::zero() {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalises_constant_denominator_term() {
        let tf = TransferFunction::new(vec![4.0], vec![2.0, 1.0], 0.0).unwrap();
        assert_eq!(tf.den(), &[1.0, 0.5]);
        assert_eq!(tf.dc_gain(), 2.0);
    }

    #[test]
    fn rejects_improper_and_negative_delay() {
        assert!(matches!(
            TransferFunction::new(vec![0.0, 0.0, 1.0], vec![1.0, 1.0], 0.0),
            Err(ModelError::Improper { .. })
        ));
        assert!(TransferFunction::new(vec![1.0], vec![1.0], -0.1).is_err());
    }

    #[test]
    fn hurwitz_matches_known_polynomials() {
        // (1+s)(1+2s)(1+3s)
        assert!(hurwitz(&[1.0, 6.0, 11.0, 6.0]));
        // s^3 + s^2 + s + 2: one pair of roots in the right half-plane
        assert!(!hurwitz(&[2.0, 1.0, 1.0, 1.0]));
        assert!(!hurwitz(&[1.0, -1.0, 1.0]));
    }

    #[test]
    fn state_space_reproduces_frequency_response() {
        let tf = TransferFunction::new(vec![2.0, 3.0, 0.5], vec![1.0, 4.0, 2.0], 0.0).unwrap();
        let ss = tf.state_space();
        for s in [0.0, 0.3, 2.0] {
            // C (sI - A)^{-1} B + D
            let n = ss.a.rows();
            let m = Mat::identity(n).scale(s).add(&ss.a.scale(-1.0));
            let b = Mat::from_rows(&ss.b.iter().map(|v| vec![*v]).collect::<Vec<_>>());
            let x = m.solve(&b).unwrap();
            let y: f64 = (0..n).map(|i| ss.c[i] * x[(i, 0)]).sum::<f64>() + ss.d;
            assert!((y - tf.eval(s)).abs() < 1e-12, "s={s}");
        }
    }
}
