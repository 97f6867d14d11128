//! Scalar abstraction used by the geometry and dynamics kernels.
//!
//! The kernels are written once over [`Scalar`] and instantiated with
//! plain `f64` for prediction, with [`Jet`] to obtain exact Jacobians for
//! backpropagation through the physics step, and with [`Counted`] to
//! count arithmetic operations.

use std::cell::Cell;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Lifts a constant (zero derivative, not counted as an operation).
    fn cst(v: f64) -> Self;
    /// Primal value, used for branch decisions.
    fn value(&self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    /// `self.atan2(x)` is the angle of the point `(x, self)`.
    fn atan2(self, x: Self) -> Self;

    #[inline]
    fn zero() -> Self {
        Self::cst(0.0)
    }
    #[inline]
    fn one() -> Self {
        Self::cst(1.0)
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
}

/// Forward-mode dual number carrying `N` tangent directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<const N: usize> {
    pub v: f64,
    pub d: [f64; N],
}

impl<const N: usize> Jet<N> {
    pub fn constant(v: f64) -> Self {
        Self { v, d: [0.0; N] }
    }

    /// Independent variable `i` (unit tangent along direction `i`).
    pub fn variable(v: f64, i: usize) -> Self {
        let mut d = [0.0; N];
        d[i] = 1.0;
        Self { v, d }
    }

    #[inline]
    fn chain(self, v: f64, dv: f64) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x *= dv;
        }
        Self { v, d }
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d.iter()) {
            *a += b;
        }
        Self { v: self.v + o.v, d }
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d.iter()) {
            *a -= b;
        }
        Self { v: self.v - o.v, d }
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = self.d[i] * o.v + o.d[i] * self.v;
        }
        Self { v: self.v * o.v, d }
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let v = self.v / o.v;
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = (self.d[i] - v * o.d[i]) / o.v;
        }
        Self { v, d }
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x = -*x;
        }
        Self { v: -self.v, d }
    }
}

impl<const N: usize> Scalar for Jet<N> {
    #[inline]
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }
    #[inline]
    fn value(&self) -> f64 {
        self.v
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }
    #[inline]
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        let r2 = x.v * x.v + self.v * self.v;
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = (x.v * self.d[i] - self.v * x.d[i]) / r2;
        }
        Self { v: self.v.atan2(x.v), d }
    }
}

thread_local! {
    static FLOPS: Cell<u64> = const { Cell::new(0) };
}

/// `f64` wrapper that counts every arithmetic operation on the current
/// thread. Add/sub/mul/div/neg and each of sqrt, sin, cos, atan2 count as
/// one operation; constants are free.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Counted(pub f64);

impl Counted {
    pub fn reset() {
        FLOPS.with(|c| c.set(0));
    }

    pub fn count() -> u64 {
        FLOPS.with(|c| c.get())
    }

    #[inline]
    fn tick() {
        FLOPS.with(|c| c.set(c.get() + 1));
    }
}

macro_rules! counted_binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr for Counted {
            type Output = Self;
            #[inline]
            fn $f(self, o: Self) -> Self {
                Counted::tick();
                Counted(self.0 $op o.0)
            }
        }
    };
}
counted_binop!(Add, add, +);
counted_binop!(Sub, sub, -);
counted_binop!(Mul, mul, *);
counted_binop!(Div, div, /);

impl Neg for Counted {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Counted::tick();
        Counted(-self.0)
    }
}

impl Scalar for Counted {
    fn cst(v: f64) -> Self {
        Counted(v)
    }
    fn value(&self) -> f64 {
        self.0
    }
    fn sqrt(self) -> Self {
        Counted::tick();
        Counted(self.0.sqrt())
    }
    fn sin(self) -> Self {
        Counted::tick();
        Counted(self.0.sin())
    }
    fn cos(self) -> Self {
        Counted::tick();
        Counted(self.0.cos())
    }
    fn atan2(self, x: Self) -> Self {
        Counted::tick();
        Counted(self.0.atan2(x.0))
    }
}
