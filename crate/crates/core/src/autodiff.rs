//! Forward-mode automatic differentiation.
//!
//! A [`Dual`] carries a value and its partial derivatives with respect to the
//! continuous parameters of one generator invocation. An empty partial vector
//! stands for a constant, so literals never need to know the seed width.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::params::ParameterVector;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Dual {
    value: f64,
    partials: Vec<f64>,
}

impl Dual {
    pub fn new(value: f64, partials: Vec<f64>) -> Self {
        Self { value, partials }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            value,
            partials: Vec::new(),
        }
    }

    /// Independent variable `index` out of `width` seeded slots.
    pub fn variable(value: f64, index: usize, width: usize) -> Self {
        let mut partials = vec![0.0; width];
        partials[index] = 1.0;
        Self { value, partials }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn partials(&self) -> &[f64] {
        &self.partials
    }

    pub fn partial(&self, k: usize) -> f64 {
        self.partials.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.partials.iter().all(|&p| p == 0.0)
    }

    /// `a * self' + b * other'` with value `value`.
    fn linear(&self, a: f64, other: &Dual, b: f64, value: f64) -> Dual {
        let (x, y) = (&self.partials, &other.partials);
        let partials = match (x.is_empty(), y.is_empty()) {
            (true, true) => Vec::new(),
            (false, true) => x.iter().map(|p| a * p).collect(),
            (true, false) => y.iter().map(|p| b * p).collect(),
            (false, false) => {
                let n = x.len().max(y.len());
                (0..n)
                    .map(|k| a * x.get(k).unwrap_or(&0.0) + b * y.get(k).unwrap_or(&0.0))
                    .collect()
            }
        };
        Dual { value, partials }
    }

    /// Applies a unary function with derivative `slope` at the current value.
    fn chain(&self, value: f64, slope: f64) -> Dual {
        Dual {
            value,
            partials: self.partials.iter().map(|p| slope * p).collect(),
        }
    }

    pub fn sin(&self) -> Dual {
        self.chain(self.value.sin(), self.value.cos())
    }

    pub fn cos(&self) -> Dual {
        self.chain(self.value.cos(), -self.value.sin())
    }

    pub fn tan(&self) -> Dual {
        let c = self.value.cos();
        self.chain(self.value.tan(), 1.0 / (c * c))
    }

    pub fn sqrt(&self) -> Result<Dual> {
        if !(self.value > 0.0) {
            return Err(Error::Domain {
                op: "sqrt",
                detail: format!("argument {} must be positive", self.value),
            });
        }
        let s = self.value.sqrt();
        Ok(self.chain(s, 0.5 / s))
    }

    pub fn checked_div(&self, rhs: &Dual) -> Result<Dual> {
        if rhs.value == 0.0 {
            return Err(Error::Domain {
                op: "div",
                detail: "division by zero".into(),
            });
        }
        Ok(self / rhs)
    }

    /// `self^e` for a constant exponent.
    pub fn powf(&self, e: f64) -> Result<Dual> {
        if self.value < 0.0 && e.fract() != 0.0 || self.value == 0.0 && e < 1.0 {
            return Err(Error::Domain {
                op: "pow",
                detail: format!("{}^{e} is not differentiable", self.value),
            });
        }
        let value = self.value.powf(e);
        Ok(self.chain(value, e * self.value.powf(e - 1.0)))
    }

    /// `self^e` for a differentiable exponent; needs a positive base.
    pub fn pow(&self, e: &Dual) -> Result<Dual> {
        if !(self.value > 0.0) {
            return Err(Error::Domain {
                op: "pow",
                detail: format!("base {} must be positive", self.value),
            });
        }
        let value = self.value.powf(e.value);
        let da = e.value * self.value.powf(e.value - 1.0);
        let db = value * self.value.ln();
        Ok(self.linear(da, e, db, value))
    }

    pub fn exp(&self) -> Dual {
        let v = self.value.exp();
        self.chain(v, v)
    }

    pub fn abs(&self) -> Dual {
        if self.value < 0.0 {
            -self
        } else {
            self.clone()
        }
    }

    /// Branch selection; ties keep the first argument.
    pub fn min(&self, other: &Dual) -> Dual {
        if other.value < self.value {
            other.clone()
        } else {
            self.clone()
        }
    }

    /// Branch selection; ties keep the first argument.
    pub fn max(&self, other: &Dual) -> Dual {
        if other.value > self.value {
            other.clone()
        } else {
            self.clone()
        }
    }

    pub fn max_f(&self, floor: f64) -> Dual {
        self.max(&Dual::constant(floor))
    }

    pub fn min_f(&self, ceil: f64) -> Dual {
        self.min(&Dual::constant(ceil))
    }

    pub fn scale(&self, k: f64) -> Dual {
        self.chain(self.value * k, k)
    }

    pub fn offset(&self, k: f64) -> Dual {
        Dual {
            value: self.value + k,
            partials: self.partials.clone(),
        }
    }

    /// `(1 - t) * self + t * other` for a constant `t`.
    pub fn lerp(&self, other: &Dual, t: f64) -> Dual {
        self.linear(1.0 - t, other, t, (1.0 - t) * self.value + t * other.value)
    }
}

impl From<f64> for Dual {
    fn from(v: f64) -> Self {
        Dual::constant(v)
    }
}

macro_rules! binary_ops {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<&Dual> for &Dual {
            type Output = Dual;
            fn $method(self, rhs: &Dual) -> Dual {
                let f: fn(&Dual, &Dual) -> Dual = $body;
                f(self, rhs)
            }
        }
        impl $trait<Dual> for Dual {
            type Output = Dual;
            fn $method(self, rhs: Dual) -> Dual {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Dual> for Dual {
            type Output = Dual;
            fn $method(self, rhs: &Dual) -> Dual {
                (&self).$method(rhs)
            }
        }
        impl $trait<Dual> for &Dual {
            type Output = Dual;
            fn $method(self, rhs: Dual) -> Dual {
                self.$method(&rhs)
            }
        }
        impl $trait<f64> for &Dual {
            type Output = Dual;
            fn $method(self, rhs: f64) -> Dual {
                self.$method(&Dual::constant(rhs))
            }
        }
        impl $trait<f64> for Dual {
            type Output = Dual;
            fn $method(self, rhs: f64) -> Dual {
                (&self).$method(&Dual::constant(rhs))
            }
        }
    };
}

binary_ops!(Add, add, |a, b| a.linear(1.0, b, 1.0, a.value + b.value));
binary_ops!(Sub, sub, |a, b| a.linear(1.0, b, -1.0, a.value - b.value));
binary_ops!(Mul, mul, |a, b| a.linear(b.value, b, a.value, a.value * b.value));
binary_ops!(Div, div, |a, b| {
    let inv = 1.0 / b.value;
    a.linear(inv, b, -a.value * inv * inv, a.value * inv)
});

impl Neg for &Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        self.chain(-self.value, -1.0)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        -&self
    }
}

impl AddAssign<&Dual> for Dual {
    fn add_assign(&mut self, rhs: &Dual) {
        *self = &*self + rhs;
    }
}

/// A 3-vector of duals.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Dual3(pub [Dual; 3]);

impl Dual3 {
    pub fn new(x: Dual, y: Dual, z: Dual) -> Self {
        Self([x, y, z])
    }

    pub fn constant(v: [f64; 3]) -> Self {
        Self(v.map(Dual::constant))
    }

    pub fn x(&self) -> &Dual {
        &self.0[0]
    }
    pub fn y(&self) -> &Dual {
        &self.0[1]
    }
    pub fn z(&self) -> &Dual {
        &self.0[2]
    }

    pub fn value(&self) -> [f64; 3] {
        [self.0[0].value, self.0[1].value, self.0[2].value]
    }

    pub fn add(&self, o: &Dual3) -> Dual3 {
        Dual3([&self.0[0] + &o.0[0], &self.0[1] + &o.0[1], &self.0[2] + &o.0[2]])
    }

    pub fn sub(&self, o: &Dual3) -> Dual3 {
        Dual3([&self.0[0] - &o.0[0], &self.0[1] - &o.0[1], &self.0[2] - &o.0[2]])
    }

    pub fn scale(&self, k: &Dual) -> Dual3 {
        Dual3([&self.0[0] * k, &self.0[1] * k, &self.0[2] * k])
    }

    pub fn scale_f(&self, k: f64) -> Dual3 {
        Dual3([self.0[0].scale(k), self.0[1].scale(k), self.0[2].scale(k)])
    }

    pub fn offset(&self, v: [f64; 3]) -> Dual3 {
        Dual3([self.0[0].offset(v[0]), self.0[1].offset(v[1]), self.0[2].offset(v[2])])
    }

    pub fn dot(&self, o: &Dual3) -> Dual {
        &self.0[0] * &o.0[0] + &self.0[1] * &o.0[1] + &self.0[2] * &o.0[2]
    }

    pub fn cross(&self, o: &Dual3) -> Dual3 {
        let [a0, a1, a2] = &self.0;
        let [b0, b1, b2] = &o.0;
        Dual3([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])
    }

    pub fn normalize(&self) -> Result<Dual3> {
        let len = self.dot(self).sqrt()?;
        Ok(Dual3([&self.0[0] / &len, &self.0[1] / &len, &self.0[2] / &len]))
    }
}

/// Maps each seeded partial slot back to a column of the full parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedLayout {
    pub columns: Vec<usize>,
    pub param_count: usize,
}

impl SeedLayout {
    pub fn width(&self) -> usize {
        self.columns.len()
    }
}

/// Seeds every parameter: continuous parameter `i` receives the unit vector of
/// its slot, discrete parameters stay constant (zero partials).
pub fn seed(values: &ParameterVector) -> (Vec<Dual>, SeedLayout) {
    let columns: Vec<usize> = values
        .space()
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_discrete())
        .map(|(i, _)| i)
        .collect();
    let width = columns.len();
    let mut slot = 0;
    let duals = values
        .space()
        .iter()
        .zip(values.values())
        .map(|(s, &x)| {
            if s.is_discrete() {
                Dual::new(x, vec![0.0; width])
            } else {
                slot += 1;
                Dual::variable(x, slot - 1, width)
            }
        })
        .collect();
    (
        duals,
        SeedLayout {
            columns,
            param_count: values.len(),
        },
    )
}

/// Dense row-major `3V x P` matrix of vertex-position derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Jacobian {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Jacobian {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// `J^T * v`, i.e. pulls a position gradient back to parameter space.
    pub fn transpose_mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "vector length must equal row count");
        let mut out = vec![0.0; self.cols];
        for (row, &w) in self.data.chunks_exact(self.cols.max(1)).zip(v) {
            if w != 0.0 {
                for (o, j) in out.iter_mut().zip(row) {
                    *o += w * j;
                }
            }
        }
        out
    }

    /// Appends the rows of `other`, which must have the same column count.
    pub fn append(&mut self, other: &Jacobian) {
        assert_eq!(self.cols, other.cols);
        self.rows += other.rows;
        self.data.extend_from_slice(&other.data);
    }
}

/// Flattens dual vertices into positions and the Jacobian, scattering seeded
/// slots into their parameter columns.
pub fn assemble_jacobian(verts: &[Dual3], layout: &SeedLayout) -> Result<(Vec<f64>, Jacobian)> {
    let width = layout.width();
    let mut positions = Vec::with_capacity(verts.len() * 3);
    let mut jac = Jacobian::zeros(verts.len() * 3, layout.param_count);
    for (i, v) in verts.iter().enumerate() {
        for (axis, d) in v.0.iter().enumerate() {
            positions.push(d.value);
            let p = d.partials();
            if p.is_empty() {
                continue;
            }
            if p.len() != width {
                return Err(Error::PartialLength {
                    expected: width,
                    found: p.len(),
                });
            }
            let row = 3 * i + axis;
            for (slot, &col) in layout.columns.iter().enumerate() {
                jac.data[row * jac.cols + col] = p[slot];
            }
        }
    }
    Ok((positions, jac))
}
