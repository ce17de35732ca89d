//! Symbolic verification on monomial generators.
//!
//! Identities that are multilinear in their slots are decided completely by
//! feeding monomials with *symbolic* exponents through the operators: every
//! coefficient that comes out is a polynomial in the exponent entries, and
//! the identity holds for the whole algebra iff those polynomials vanish.
//! A surviving polynomial yields a concrete counterexample by evaluation.
//!
//! The same machinery covers both models. On the torus a derivative
//! multiplies by `i*(exponent)_j`; on the plane it multiplies by
//! `(exponent)_j` and shifts the monomial down, which encodes the falling
//! factorials of `d^alpha x^beta`.

use std::collections::BTreeMap;


use crate::algebra::{AlgebraElement, DiffOperator, Model};
use crate::scalar::{rat_int, Gaussian};

/// Number of independent symbolic generator exponents available.
pub const MAX_GENS: usize = 3;

/// Sparse polynomial in `MAX_GENS * dim` integer variables over `Q(i)`.
/// Variable `g*dim + j` is coordinate `j` of generator `g`'s exponent.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SymPoly {
    nvars: usize,
    terms: BTreeMap<Vec<u16>, Gaussian>,
}

impl SymPoly {
    pub fn zero(nvars: usize) -> Self {
        SymPoly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: Gaussian) -> Self {
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Gaussian::one())
    }

    pub fn var(nvars: usize, idx: usize) -> Self {
        let mut exp = vec![0; nvars];
        exp[idx] = 1;
        let mut p = Self::zero(nvars);
        p.terms.insert(exp, Gaussian::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, exp: Vec<u16>, c: &Gaussian) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(exp) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, rhs: &SymPoly) -> SymPoly {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn neg(&self) -> SymPoly {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            out.terms.insert(e.clone(), -c);
        }
        out
    }

    pub fn sub(&self, rhs: &SymPoly) -> SymPoly {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &SymPoly) -> SymPoly {
        let mut out = Self::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let exp: Vec<u16> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(exp, &(ca * cb));
            }
        }
        out
    }

    pub fn scale(&self, c: &Gaussian) -> SymPoly {
        if c.is_zero() {
            return Self::zero(self.nvars);
        }
        let mut out = Self::zero(self.nvars);
        for (e, v) in &self.terms {
            out.terms.insert(e.clone(), v * c);
        }
        out
    }

    pub fn degree_in(&self, idx: usize) -> u16 {
        self.terms.keys().map(|e| e[idx]).max().unwrap_or(0)
    }

    pub fn eval(&self, values: &[i64]) -> Gaussian {
        let mut acc = Gaussian::zero();
        for (e, c) in &self.terms {
            let mut factor = Gaussian::one();
            for (idx, &p) in e.iter().enumerate() {
                if p > 0 {
                    factor *= &Gaussian::from_rat(rat_int(values[idx]).pow(p as i32));
                }
            }
            acc += &(c * &factor);
        }
        acc
    }

    /// Substitute one variable by an integer, producing a poly in the rest
    /// (the variable slot stays but no longer occurs).
    fn substitute(&self, idx: usize, value: i64) -> SymPoly {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            let p = e[idx];
            let mut exp = e.clone();
            exp[idx] = 0;
            let factor = Gaussian::from_rat(rat_int(value).pow(p as i32));
            out.add_term(exp, &(c * &factor));
        }
        out
    }

    /// Find integer values (searching `offset..`) making the poly nonzero.
    /// Exists whenever the poly is nonzero: a univariate slice of degree d
    /// has at most d roots, so d+1 candidates always contain a witness.
    pub fn find_nonzero(&self, offset: i64) -> Option<Vec<i64>> {
        if self.is_zero() {
            return None;
        }
        let mut current = self.clone();
        let mut assignment = vec![0i64; self.nvars];
        for idx in 0..self.nvars {
            let deg = current.degree_in(idx) as i64;
            let mut found = false;
            for t in offset..=offset + deg {
                let candidate = current.substitute(idx, t);
                if !candidate.is_zero() {
                    assignment[idx] = t;
                    current = candidate;
                    found = true;
                    break;
                }
            }
            if !found {
                return None; // unreachable for nonzero input
            }
        }
        debug_assert!(!current.eval(&vec![0; self.nvars]).is_zero() || !current.is_zero());
        Some(assignment)
    }
}

/// A monomial with symbolic exponent: coefficient polynomials keyed by an
/// integer offset from the base exponent `sum_g mult[g] * K_g`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SymMonomial {
    model: Model,
    mult: [u32; MAX_GENS],
    terms: BTreeMap<Vec<i64>, SymPoly>,
}

impl SymMonomial {
    fn nvars(model: Model) -> usize {
        MAX_GENS * model.dim()
    }

    pub fn zero(model: Model) -> Self {
        SymMonomial { model, mult: [0; MAX_GENS], terms: BTreeMap::new() }
    }

    pub fn one(model: Model) -> Self {
        let mut s = Self::zero(model);
        s.terms.insert(vec![0; model.dim()], SymPoly::one(Self::nvars(model)));
        s
    }

    /// The symbolic generator monomial number `g`.
    pub fn generator(model: Model, g: usize) -> Self {
        assert!(g < MAX_GENS);
        let mut s = Self::one(model);
        s.mult[g] = 1;
        s
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, off: Vec<i64>, p: SymPoly) {
        if p.is_zero() {
            return;
        }
        match self.terms.entry(off) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(p);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let merged = o.get().add(&p);
                if merged.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = merged;
                }
            }
        }
    }

    pub fn add(&self, rhs: &SymMonomial) -> SymMonomial {
        assert_eq!(self.model, rhs.model);
        assert!(
            self.is_zero() || rhs.is_zero() || self.mult == rhs.mult,
            "cannot add symbolic monomials over different bases"
        );
        let mut out = self.clone();
        if out.is_zero() {
            out.mult = rhs.mult;
        }
        for (off, p) in &rhs.terms {
            out.add_term(off.clone(), p.clone());
        }
        out
    }

    pub fn sub(&self, rhs: &SymMonomial) -> SymMonomial {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> SymMonomial {
        let mut out = self.clone();
        for p in out.terms.values_mut() {
            *p = p.neg();
        }
        out
    }

    pub fn scale(&self, c: &Gaussian) -> SymMonomial {
        let mut out = SymMonomial { model: self.model, mult: self.mult, terms: BTreeMap::new() };
        for (off, p) in &self.terms {
            out.add_term(off.clone(), p.scale(c));
        }
        out
    }

    /// Pointwise product; generator multiplicities add.
    pub fn mul(&self, rhs: &SymMonomial) -> SymMonomial {
        assert_eq!(self.model, rhs.model);
        let mut mult = [0u32; MAX_GENS];
        for g in 0..MAX_GENS {
            mult[g] = self.mult[g] + rhs.mult[g];
        }
        let mut out = SymMonomial { model: self.model, mult, terms: BTreeMap::new() };
        for (oa, pa) in &self.terms {
            for (ob, pb) in &rhs.terms {
                let off: Vec<i64> = oa.iter().zip(ob).map(|(a, b)| a + b).collect();
                out.add_term(off, pa.mul(pb));
            }
        }
        out
    }

    /// Multiply by a concrete algebra element.
    pub fn mul_element(&self, e: &AlgebraElement) -> SymMonomial {
        assert_eq!(self.model, e.model());
        let nv = Self::nvars(self.model);
        let mut out = SymMonomial { model: self.model, mult: self.mult, terms: BTreeMap::new() };
        for (k, c) in e.terms() {
            for (off, p) in &self.terms {
                let shifted: Vec<i64> = off.iter().zip(k).map(|(o, e)| o + e).collect();
                out.add_term(shifted, p.mul(&SymPoly::constant(nv, c.clone())));
            }
        }
        out
    }

    /// The linear polynomial `(base exponent + offset)_j`.
    fn exponent_coordinate(&self, j: usize, off: &[i64]) -> SymPoly {
        let m = self.model.dim();
        let nv = Self::nvars(self.model);
        let mut p = SymPoly::constant(nv, Gaussian::from_int(off[j]));
        for g in 0..MAX_GENS {
            if self.mult[g] > 0 {
                p = p.add(
                    &SymPoly::var(nv, g * m + j).scale(&Gaussian::from_int(self.mult[g] as i64)),
                );
            }
        }
        p
    }

    /// Partial derivative in direction `j` (1-based).
    pub fn derive(&self, j: usize) -> SymMonomial {
        let m = self.model.dim();
        assert!(j >= 1 && j <= m);
        let mut out = SymMonomial { model: self.model, mult: self.mult, terms: BTreeMap::new() };
        for (off, p) in &self.terms {
            let coord = self.exponent_coordinate(j - 1, off);
            match self.model {
                Model::Trig(_) => {
                    out.add_term(off.clone(), p.mul(&coord).scale(&Gaussian::i()));
                }
                Model::Poly(_) => {
                    let mut shifted = off.clone();
                    shifted[j - 1] -= 1;
                    out.add_term(shifted, p.mul(&coord));
                }
            }
        }
        out
    }

    pub fn derive_multi(&self, alpha: &[u32]) -> SymMonomial {
        let mut out = self.clone();
        for (j, &reps) in alpha.iter().enumerate() {
            for _ in 0..reps {
                out = out.derive(j + 1);
                if out.is_zero() {
                    return out;
                }
            }
        }
        out
    }

    pub fn apply_diffop(&self, op: &DiffOperator) -> SymMonomial {
        let mut out = SymMonomial::zero(self.model);
        out.mult = self.mult;
        for (alpha, coeff) in op.terms() {
            let d = self.derive_multi(alpha);
            if !d.is_zero() {
                out = out.add(&d.mul_element(coeff));
            }
        }
        out
    }

    /// Evaluate the base at concrete generator exponents.
    pub fn eval(&self, assignment: &[Vec<i64>; MAX_GENS]) -> AlgebraElement {
        let m = self.model.dim();
        let mut values = vec![0i64; Self::nvars(self.model)];
        for g in 0..MAX_GENS {
            for j in 0..m {
                values[g * m + j] = assignment[g][j];
            }
        }
        let mut out = AlgebraElement::zero(self.model);
        for (off, p) in &self.terms {
            let c = p.eval(&values);
            if c.is_zero() {
                continue;
            }
            let key: Vec<i64> = (0..m)
                .map(|j| {
                    (0..MAX_GENS).map(|g| self.mult[g] as i64 * assignment[g][j]).sum::<i64>()
                        + off[j]
                })
                .collect();
            if matches!(self.model, Model::Poly(_)) && key.iter().any(|&e| e < 0) {
                panic!("nonzero coefficient at negative plane exponent: broken operator input");
            }
            out.add_term(key, &c);
        }
        out
    }

    /// A concrete generator assignment where the monomial is nonzero.
    pub fn find_counterexample(&self) -> Option<[Vec<i64>; MAX_GENS]> {
        let m = self.model.dim();
        let (_, poly) = self.terms.iter().find(|(_, p)| !p.is_zero())?;
        // On the plane, search from a floor below which offsets could hit
        // negative exponents.
        let floor = if matches!(self.model, Model::Poly(_)) {
            self.terms
                .keys()
                .flat_map(|off| off.iter().map(|&o| (-o).max(0)))
                .max()
                .unwrap_or(0)
        } else {
            // Start away from zero so single-variable factors do not vanish.
            1
        };
        let values = poly.find_nonzero(floor)?;
        let mut assignment: [Vec<i64>; MAX_GENS] =
            [vec![0; m], vec![0; m], vec![0; m]];
        for g in 0..MAX_GENS {
            for j in 0..m {
                assignment[g][j] = values[g * m + j];
            }
        }
        Some(assignment)
    }
}

/// A truncated series of symbolic monomials (one per order in the formal
/// parameter), all over the same generator base.
#[derive(Clone, Debug)]
pub struct SymSeries {
    pub order: usize,
    pub coeffs: Vec<SymMonomial>,
}

impl SymSeries {
    pub fn zero(model: Model, order: usize) -> Self {
        SymSeries { order, coeffs: vec![SymMonomial::zero(model); order + 1] }
    }

    pub fn from_monomial(mono: SymMonomial, order: usize) -> Self {
        let mut s = Self::zero(mono.model(), order);
        s.coeffs[0] = mono;
        s
    }

    pub fn model(&self) -> Model {
        self.coeffs[0].model()
    }

    pub fn add(&self, rhs: &SymSeries) -> SymSeries {
        assert_eq!(self.order, rhs.order);
        SymSeries {
            order: self.order,
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn sub(&self, rhs: &SymSeries) -> SymSeries {
        assert_eq!(self.order, rhs.order);
        SymSeries {
            order: self.order,
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a.sub(b)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn first_nonzero_order(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }
}
