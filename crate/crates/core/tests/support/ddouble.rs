//! Double-double arithmetic (about 32 significant digits), enough to serve
//! as a reference for the `f64` Rastrigin implementation.

#![allow(dead_code)]

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DD {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> DD {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    DD { hi: s, lo: err }
}

fn quick_two_sum(a: f64, b: f64) -> DD {
    let s = a + b;
    DD { hi: s, lo: b - (s - a) }
}

fn two_prod(a: f64, b: f64) -> DD {
    let p = a * b;
    DD {
        hi: p,
        lo: a.mul_add(b, -p),
    }
}

impl DD {
    pub const ZERO: DD = DD { hi: 0.0, lo: 0.0 };
    pub const ONE: DD = DD { hi: 1.0, lo: 0.0 };
    pub const TWO_PI: DD = DD {
        hi: 6.283185307179586,
        lo: 2.4492935982947064e-16,
    };

    pub fn from_f64(x: f64) -> DD {
        DD { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Division by a small exact integer.
    pub fn div_f64(self, b: f64) -> DD {
        let q1 = self.hi / b;
        let r = self - two_prod(q1, b);
        let q2 = r.hi / b;
        quick_two_sum(q1, q2)
    }
}

impl Add for DD {
    type Output = DD;
    fn add(self, o: DD) -> DD {
        let s = two_sum(self.hi, o.hi);
        let t = two_sum(self.lo, o.lo);
        let v = quick_two_sum(s.hi, s.lo + t.hi);
        quick_two_sum(v.hi, v.lo + t.lo)
    }
}

impl Neg for DD {
    type Output = DD;
    fn neg(self) -> DD {
        DD {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DD {
    type Output = DD;
    fn sub(self, o: DD) -> DD {
        self + (-o)
    }
}

impl Mul for DD {
    type Output = DD;
    fn mul(self, o: DD) -> DD {
        let p = two_prod(self.hi, o.hi);
        let lo = p.lo + (self.hi * o.lo + self.lo * o.hi);
        quick_two_sum(p.hi, lo)
    }
}

/// `cos θ` by Taylor series; accurate for `|θ| <= π`.
pub fn cos(theta: DD) -> DD {
    let t2 = theta * theta;
    let mut term = DD::ONE;
    let mut sum = DD::ONE;
    for k in 1..40 {
        term = (term * t2).div_f64(((2 * k - 1) * (2 * k)) as f64);
        if k % 2 == 1 {
            sum = sum - term;
        } else {
            sum = sum + term;
        }
        if term.hi.abs() < 1e-40 {
            break;
        }
    }
    sum
}

/// `cos 2πx`, reducing `x` by its nearest integer first (exact in binary).
pub fn cos_2pi(x: f64) -> DD {
    let r = x - x.round();
    cos(DD::TWO_PI * DD::from_f64(r))
}

/// Negated Rastrigin function in double-double.
pub fn rastrigin(x: &[f64]) -> DD {
    let mut sum = DD::from_f64(10.0 * x.len() as f64);
    for &v in x {
        sum = sum + two_prod(v, v) - DD::from_f64(10.0) * cos_2pi(v);
    }
    -sum
}

