//! Scalar abstraction shared by the metric formulas and their gradients.
//!
//! Every metric is written once, generically over [`Real`]. Instantiated at
//! `f64` it produces plain values; instantiated at [`Dual4`] (forward-mode
//! dual numbers carrying a 4-vector of partials w.r.t. the predicted box's
//! `(x_c, y_c, w, h)`) it produces the loss gradient in the same pass.
//!
//! Subgradient conventions at kinks, chosen once and applied everywhere:
//! - `|x|` and `√x` at 0 take derivative 0.
//! - `min`/`max` on exact ties average the two branches. This makes the
//!   gradient of every IoU-family loss vanish at `pred == gt`, where all
//!   four corner coordinates tie simultaneously.
//! - `relu` (the overlap clamp) at exactly 0 takes the zero branch.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn lift(v: f64) -> Self;
    /// The underlying f64 value (discards derivatives).
    fn val(self) -> f64;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn atan(self) -> Self;
    fn sin(self) -> Self;
    fn asin(self) -> Self;
    /// Power with a constant (non-differentiated) exponent.
    fn powf_const(self, p: f64) -> Self;
    fn max(self, other: Self) -> Self;
    fn min(self, other: Self) -> Self;
    /// `max(self, 0)`; the zero branch wins ties.
    fn relu(self) -> Self;
}

impl Real for f64 {
    fn lift(v: f64) -> Self {
        v
    }
    fn val(self) -> f64 {
        self
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn atan(self) -> Self {
        f64::atan(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn asin(self) -> Self {
        f64::asin(self)
    }
    fn powf_const(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn max(self, other: Self) -> Self {
        f64::max(self, other)
    }
    fn min(self, other: Self) -> Self {
        f64::min(self, other)
    }
    fn relu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
}

/// Forward-mode dual number with a 4-component derivative vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual4 {
    pub v: f64,
    pub g: [f64; 4],
}

impl Dual4 {
    pub const fn constant(v: f64) -> Self {
        Dual4 { v, g: [0.0; 4] }
    }

    /// A variable seeded with unit derivative in slot `i`.
    pub fn var(v: f64, i: usize) -> Self {
        let mut g = [0.0; 4];
        g[i] = 1.0;
        Dual4 { v, g }
    }

    fn map_grad(self, v: f64, dv: f64) -> Self {
        Dual4 {
            v,
            g: [
                self.g[0] * dv,
                self.g[1] * dv,
                self.g[2] * dv,
                self.g[3] * dv,
            ],
        }
    }
}

impl Add for Dual4 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual4 {
            v: self.v + o.v,
            g: [
                self.g[0] + o.g[0],
                self.g[1] + o.g[1],
                self.g[2] + o.g[2],
                self.g[3] + o.g[3],
            ],
        }
    }
}

impl Sub for Dual4 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual4 {
            v: self.v - o.v,
            g: [
                self.g[0] - o.g[0],
                self.g[1] - o.g[1],
                self.g[2] - o.g[2],
                self.g[3] - o.g[3],
            ],
        }
    }
}

impl Mul for Dual4 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual4 {
            v: self.v * o.v,
            g: [
                self.g[0] * o.v + self.v * o.g[0],
                self.g[1] * o.v + self.v * o.g[1],
                self.g[2] * o.v + self.v * o.g[2],
                self.g[3] * o.v + self.v * o.g[3],
            ],
        }
    }
}

impl Div for Dual4 {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.v;
        let v = self.v * inv;
        Dual4 {
            v,
            g: [
                (self.g[0] - v * o.g[0]) * inv,
                (self.g[1] - v * o.g[1]) * inv,
                (self.g[2] - v * o.g[2]) * inv,
                (self.g[3] - v * o.g[3]) * inv,
            ],
        }
    }
}

impl Neg for Dual4 {
    type Output = Self;
    fn neg(self) -> Self {
        Dual4 {
            v: -self.v,
            g: [-self.g[0], -self.g[1], -self.g[2], -self.g[3]],
        }
    }
}

fn tie_average(a: Dual4, b: Dual4) -> Dual4 {
    Dual4 {
        v: a.v,
        g: [
            0.5 * (a.g[0] + b.g[0]),
            0.5 * (a.g[1] + b.g[1]),
            0.5 * (a.g[2] + b.g[2]),
            0.5 * (a.g[3] + b.g[3]),
        ],
    }
}

impl Real for Dual4 {
    fn lift(v: f64) -> Self {
        Dual4::constant(v)
    }
    fn val(self) -> f64 {
        self.v
    }

    fn abs(self) -> Self {
        if self.v > 0.0 {
            self
        } else if self.v < 0.0 {
            -self
        } else {
            Dual4::constant(0.0)
        }
    }

    fn sqrt(self) -> Self {
        if self.v == 0.0 {
            return Dual4::constant(0.0);
        }
        let r = self.v.sqrt();
        self.map_grad(r, 0.5 / r)
    }

    fn exp(self) -> Self {
        let e = self.v.exp();
        self.map_grad(e, e)
    }

    fn atan(self) -> Self {
        self.map_grad(self.v.atan(), 1.0 / (1.0 + self.v * self.v))
    }

    fn sin(self) -> Self {
        self.map_grad(self.v.sin(), self.v.cos())
    }

    fn asin(self) -> Self {
        let d = 1.0 - self.v * self.v;
        if d <= 0.0 {
            // |v| == 1 is a kink of asin; treated like |.| at 0.
            return Dual4::constant(self.v.asin());
        }
        self.map_grad(self.v.asin(), 1.0 / d.sqrt())
    }

    fn powf_const(self, p: f64) -> Self {
        if self.v == 0.0 && p > 1.0 {
            return Dual4::constant(0.0);
        }
        let v = self.v.powf(p);
        self.map_grad(v, p * self.v.powf(p - 1.0))
    }

    fn max(self, other: Self) -> Self {
        if self.v > other.v {
            self
        } else if self.v < other.v {
            other
        } else {
            tie_average(self, other)
        }
    }

    fn min(self, other: Self) -> Self {
        if self.v < other.v {
            self
        } else if self.v > other.v {
            other
        } else {
            tie_average(self, other)
        }
    }

    fn relu(self) -> Self {
        if self.v > 0.0 {
            self
        } else {
            Dual4::constant(0.0)
        }
    }
}
