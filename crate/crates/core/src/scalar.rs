//! Exact scalars: rationals and Gaussian rationals.
//!
//! Every coefficient in the workbench lives in `Q(i)`. All comparisons are
//! structural equality of reduced fractions; no floating point anywhere.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

/// Exact rational number, always in lowest terms with positive denominator.
pub type Rat = num_rational::BigRational;

/// Build a rational from a pair of machine integers.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Build an integer rational.
pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// n! as a rational.
pub fn factorial(n: usize) -> Rat {
    let mut acc = BigInt::one();
    for k in 2..=n {
        acc *= BigInt::from(k);
    }
    Rat::from_integer(acc)
}

/// Binomial coefficient as a big integer.
pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for j in 0..k {
        acc = acc * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    acc
}

/// A Gaussian rational `re + im*i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gaussian {
    pub re: Rat,
    pub im: Rat,
}

impl Gaussian {
    pub fn new(re: Rat, im: Rat) -> Self {
        Gaussian { re, im }
    }

    pub fn zero() -> Self {
        Gaussian { re: Rat::zero(), im: Rat::zero() }
    }

    pub fn one() -> Self {
        Gaussian { re: Rat::one(), im: Rat::zero() }
    }

    /// The imaginary unit.
    pub fn i() -> Self {
        Gaussian { re: Rat::zero(), im: Rat::one() }
    }

    pub fn from_int(n: i64) -> Self {
        Gaussian { re: rat_int(n), im: Rat::zero() }
    }

    pub fn from_rat(q: Rat) -> Self {
        Gaussian { re: q, im: Rat::zero() }
    }

    /// `n/d` as a real Gaussian rational.
    pub fn ratio(n: i64, d: i64) -> Self {
        Gaussian { re: rat(n, d), im: Rat::zero() }
    }

    /// `(n/d)*i`.
    pub fn imag_ratio(n: i64, d: i64) -> Self {
        Gaussian { re: Rat::zero(), im: rat(n, d) }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    /// Real part if the imaginary part vanishes.
    pub fn as_rat(&self) -> Option<&Rat> {
        if self.im.is_zero() {
            Some(&self.re)
        } else {
            None
        }
    }

    pub fn conj(&self) -> Self {
        Gaussian { re: self.re.clone(), im: -self.im.clone() }
    }

    /// Squared modulus `re^2 + im^2`, a non-negative rational.
    pub fn norm_sq(&self) -> Rat {
        &self.re * &self.re + &self.im * &self.im
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.norm_sq();
        if n.is_zero() {
            return None;
        }
        Some(Gaussian { re: &self.re / &n, im: -(&self.im / &n) })
    }

    pub fn pow(&self, mut k: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Gaussian::one();
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            k >>= 1;
        }
        acc
    }

    /// Integer scaling.
    pub fn scale_int(&self, n: i64) -> Self {
        let f = rat_int(n);
        Gaussian { re: &self.re * &f, im: &self.im * &f }
    }

    pub fn scale_rat(&self, q: &Rat) -> Self {
        Gaussian { re: &self.re * q, im: &self.im * q }
    }
}

impl Add for &Gaussian {
    type Output = Gaussian;
    fn add(self, rhs: &Gaussian) -> Gaussian {
        Gaussian { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl Sub for &Gaussian {
    type Output = Gaussian;
    fn sub(self, rhs: &Gaussian) -> Gaussian {
        Gaussian { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
}

impl Mul for &Gaussian {
    type Output = Gaussian;
    fn mul(self, rhs: &Gaussian) -> Gaussian {
        Gaussian {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }
}

impl Neg for &Gaussian {
    type Output = Gaussian;
    fn neg(self) -> Gaussian {
        Gaussian { re: -self.re.clone(), im: -self.im.clone() }
    }
}

impl Div for &Gaussian {
    type Output = Gaussian;
    #[allow(clippy::suspicious_arithmetic_impl)] // division is multiplication by the inverse
    fn div(self, rhs: &Gaussian) -> Gaussian {
        let inv = rhs.inverse().expect("division by zero Gaussian rational");
        self * &inv
    }
}

macro_rules! forward_owned_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Gaussian {
            type Output = Gaussian;
            fn $method(self, rhs: Gaussian) -> Gaussian {
                (&self).$method(&rhs)
            }
        }
    };
}

forward_owned_binop!(Add, add);
forward_owned_binop!(Sub, sub);
forward_owned_binop!(Mul, mul);
forward_owned_binop!(Div, div);

impl Neg for Gaussian {
    type Output = Gaussian;
    fn neg(self) -> Gaussian {
        -&self
    }
}

impl AddAssign<&Gaussian> for Gaussian {
    fn add_assign(&mut self, rhs: &Gaussian) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl SubAssign<&Gaussian> for Gaussian {
    fn sub_assign(&mut self, rhs: &Gaussian) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

impl MulAssign<&Gaussian> for Gaussian {
    fn mul_assign(&mut self, rhs: &Gaussian) {
        *self = &*self * rhs;
    }
}

fn fmt_rat(q: &Rat) -> String {
    q.to_string()
}

impl fmt::Display for Gaussian {
    /// Prints in the expression grammar: `3/4`, `i`, `-i`, `2/5*i`, `1/2 + 3*i`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let im_str = |q: &Rat| -> String {
            if q.is_one() {
                "i".to_string()
            } else if (-q).is_one() {
                "-i".to_string()
            } else {
                format!("{}*i", fmt_rat(q))
            }
        };
        if self.im.is_zero() {
            write!(f, "{}", fmt_rat(&self.re))
        } else if self.re.is_zero() {
            write!(f, "{}", im_str(&self.im))
        } else if self.im.is_negative() {
            let pos = -self.im.clone();
            write!(f, "{} - {}", fmt_rat(&self.re), im_str(&pos))
        } else {
            write!(f, "{} + {}", fmt_rat(&self.re), im_str(&self.im))
        }
    }
}

impl fmt::Debug for Gaussian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}
