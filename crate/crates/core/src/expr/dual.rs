//! Forward-mode dual numbers carrying a dense gradient.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// A value together with its partial derivatives with respect to a fixed
/// list of active variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub derivs: Vec<f64>,
}

impl Dual {
    pub fn constant(value: f64, active: usize) -> Self {
        Dual {
            value,
            derivs: vec![0.0; active],
        }
    }

    /// The `index`-th active variable, seeded with a unit derivative.
    pub fn variable(value: f64, index: usize, active: usize) -> Self {
        let mut derivs = vec![0.0; active];
        derivs[index] = 1.0;
        Dual { value, derivs }
    }

    pub fn active(&self) -> usize {
        self.derivs.len()
    }

    fn is_constant(&self) -> bool {
        self.derivs.iter().all(|d| *d == 0.0)
    }

    /// Applies a scalar function with known derivative `slope` at `self.value`.
    fn chain(mut self, value: f64, slope: f64) -> Self {
        self.value = value;
        self.derivs.iter_mut().for_each(|d| *d *= slope);
        self
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }

    /// Natural logarithm; caller guarantees a positive argument.
    pub fn ln(self) -> Self {
        let v = self.value;
        self.chain(v.ln(), 1.0 / v)
    }

    pub fn sin(self) -> Self {
        let v = self.value;
        self.chain(v.sin(), v.cos())
    }

    pub fn cos(self) -> Self {
        let v = self.value;
        self.chain(v.cos(), -v.sin())
    }

    pub fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s)
    }

    pub fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.chain(t, 1.0 - t * t)
    }

    /// `self^exponent`. When the exponent carries no derivative the
    /// logarithmic term is skipped, so negative bases with integral
    /// exponents differentiate fine.
    pub fn pow(self, exponent: Dual) -> Self {
        let base = self.value;
        let value = base.powf(exponent.value);
        let d_base = if exponent.value == 0.0 {
            0.0
        } else {
            exponent.value * base.powf(exponent.value - 1.0)
        };
        if exponent.is_constant() {
            return self.chain(value, d_base);
        }
        let d_exp = if base == 0.0 { 0.0 } else { value * base.ln() };
        let derivs = self
            .derivs
            .iter()
            .zip(&exponent.derivs)
            .map(|(db, de)| d_base * db + d_exp * de)
            .collect();
        Dual { value, derivs }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(mut self, rhs: Dual) -> Dual {
        self.value += rhs.value;
        self.derivs
            .iter_mut()
            .zip(&rhs.derivs)
            .for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(mut self, rhs: Dual) -> Dual {
        self.value -= rhs.value;
        self.derivs
            .iter_mut()
            .zip(&rhs.derivs)
            .for_each(|(a, b)| *a -= b);
        self
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(mut self, rhs: Dual) -> Dual {
        let (a, b) = (self.value, rhs.value);
        self.value = a * b;
        self.derivs
            .iter_mut()
            .zip(&rhs.derivs)
            .for_each(|(da, db)| *da = *da * b + a * db);
        self
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(mut self, rhs: Dual) -> Dual {
        let (a, b) = (self.value, rhs.value);
        let q = a / b;
        self.value = q;
        self.derivs
            .iter_mut()
            .zip(&rhs.derivs)
            .for_each(|(da, db)| *da = (*da - q * db) / b);
        self
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(mut self) -> Dual {
        self.value = -self.value;
        self.derivs.iter_mut().for_each(|d| *d = -*d);
        self
    }
}
