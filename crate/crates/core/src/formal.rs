//! Truncated formal deformations: series, bidifferential cochains, star
//! products, equivalences, automorphism pull-backs, and the second-order
//! difference invariant of two products sharing their first-order cochain.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};

use crate::algebra::{
    multi_index_order, rational_inverse as rat_matrix_inverse, sub_indices_with_binomials,
    AlgebraElement, DiffOperator, Model, MultiIndex, PoissonStructure,
};
use crate::error::{Error, Result};
use crate::report::CheckOutcome;
use crate::scalar::{factorial, Gaussian, Rat};
use crate::sym::{SymMonomial, SymSeries};

/// Default truncation order of the workbench.
pub const DEFAULT_ORDER: usize = 6;

/// Normalization used to read a Poisson bracket off a first-order cochain.
/// The workbench uses `Star` throughout; `Algebraic` drops the `1/i`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum BracketConvention {
    #[default]
    Star,
    Algebraic,
}

/// Truncated power series in the deformation parameter with algebra-element
/// coefficients. The classical limit is the order-zero coefficient.
#[derive(Clone, PartialEq, Eq)]
pub struct FormalSeries {
    model: Model,
    order: usize,
    coeffs: Vec<AlgebraElement>,
}

impl FormalSeries {
    pub fn zero(model: Model, order: usize) -> Self {
        FormalSeries { model, order, coeffs: vec![AlgebraElement::zero(model); order + 1] }
    }

    pub fn one(model: Model, order: usize) -> Self {
        Self::from_element(AlgebraElement::one(model), order)
    }

    pub fn from_element(e: AlgebraElement, order: usize) -> Self {
        let mut s = Self::zero(e.model(), order);
        s.coeffs[0] = e;
        s
    }

    pub fn from_coeffs(model: Model, coeffs: Vec<AlgebraElement>) -> Self {
        assert!(!coeffs.is_empty());
        for c in &coeffs {
            assert_eq!(c.model(), model);
        }
        FormalSeries { model, order: coeffs.len() - 1, coeffs }
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeff(&self, r: usize) -> &AlgebraElement {
        &self.coeffs[r]
    }

    pub fn coeffs(&self) -> &[AlgebraElement] {
        &self.coeffs
    }

    pub fn set_coeff(&mut self, r: usize, e: AlgebraElement) {
        assert_eq!(e.model(), self.model);
        self.coeffs[r] = e;
    }

    pub fn classical_limit(&self) -> &AlgebraElement {
        &self.coeffs[0]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, rhs: &FormalSeries) -> FormalSeries {
        assert_eq!(self.order, rhs.order);
        FormalSeries {
            model: self.model,
            order: self.order,
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn sub(&self, rhs: &FormalSeries) -> FormalSeries {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> FormalSeries {
        FormalSeries {
            model: self.model,
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c.neg()).collect(),
        }
    }

    pub fn scale(&self, c: &Gaussian) -> FormalSeries {
        FormalSeries {
            model: self.model,
            order: self.order,
            coeffs: self.coeffs.iter().map(|v| v.scale(c)).collect(),
        }
    }

    /// Multiply by the `k`-th power of the deformation parameter.
    pub fn shift(&self, k: usize) -> FormalSeries {
        let mut out = Self::zero(self.model, self.order);
        for r in 0..=self.order.saturating_sub(k) {
            out.coeffs[r + k] = self.coeffs[r].clone();
        }
        out
    }

    /// Commutative (undeformed) product, truncated.
    pub fn mul_plain(&self, rhs: &FormalSeries) -> FormalSeries {
        assert_eq!(self.order, rhs.order);
        let mut out = Self::zero(self.model, self.order);
        for p in 0..=self.order {
            if self.coeffs[p].is_zero() {
                continue;
            }
            for q in 0..=self.order - p {
                if rhs.coeffs[q].is_zero() {
                    continue;
                }
                out.coeffs[p + q] = out.coeffs[p + q].add(&self.coeffs[p].mul(&rhs.coeffs[q]));
            }
        }
        out
    }

    pub fn truncate(&self, order: usize) -> FormalSeries {
        let mut coeffs = self.coeffs.clone();
        coeffs.truncate(order + 1);
        coeffs.resize(order + 1, AlgebraElement::zero(self.model));
        FormalSeries { model: self.model, order, coeffs }
    }
}

impl fmt::Display for FormalSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (r, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let piece = match r {
                0 => format!("{c}"),
                1 => format!("({c})*L"),
                _ => format!("({c})*L^{r}"),
            };
            if first {
                write!(f, "{piece}")?;
                first = false;
            } else {
                write!(f, " + {piece}")?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl fmt::Debug for FormalSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// A bidifferential cochain `(f,g) -> sum coeff * d^L f * d^R g`.
/// Terms are merged on the index pair; zero coefficients dropped.
#[derive(Clone, PartialEq, Eq)]
pub struct BidiffCochain {
    model: Model,
    terms: BTreeMap<(MultiIndex, MultiIndex), AlgebraElement>,
}

impl BidiffCochain {
    pub fn zero(model: Model) -> Self {
        BidiffCochain { model, terms: BTreeMap::new() }
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(MultiIndex, MultiIndex), &AlgebraElement)> {
        self.terms.iter()
    }

    pub fn add_term(&mut self, coeff: AlgebraElement, left: MultiIndex, right: MultiIndex) {
        assert_eq!(coeff.model(), self.model);
        assert_eq!(left.len(), self.model.dim());
        assert_eq!(right.len(), self.model.dim());
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry((left, right)) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let merged = o.get().add(&coeff);
                if merged.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = merged;
                }
            }
        }
    }

    pub fn add(&self, rhs: &BidiffCochain) -> BidiffCochain {
        assert_eq!(self.model, rhs.model);
        let mut out = self.clone();
        for ((l, r), c) in &rhs.terms {
            out.add_term(c.clone(), l.clone(), r.clone());
        }
        out
    }

    pub fn sub(&self, rhs: &BidiffCochain) -> BidiffCochain {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> BidiffCochain {
        let mut out = Self::zero(self.model);
        for ((l, r), c) in &self.terms {
            out.terms.insert((l.clone(), r.clone()), c.neg());
        }
        out
    }

    pub fn scale(&self, c: &Gaussian) -> BidiffCochain {
        let mut out = Self::zero(self.model);
        for ((l, r), v) in &self.terms {
            let s = v.scale(c);
            if !s.is_zero() {
                out.terms.insert((l.clone(), r.clone()), s);
            }
        }
        out
    }

    /// Swap the two slots.
    pub fn transpose(&self) -> BidiffCochain {
        let mut out = Self::zero(self.model);
        for ((l, r), c) in &self.terms {
            out.add_term(c.clone(), r.clone(), l.clone());
        }
        out
    }

    /// The antisymmetrization `C - C^T`.
    pub fn antisymmetrize(&self) -> BidiffCochain {
        self.sub(&self.transpose())
    }

    pub fn apply(&self, f: &AlgebraElement, g: &AlgebraElement) -> Result<AlgebraElement> {
        if f.model() != self.model || g.model() != self.model {
            return Err(Error::ModelMismatch("cochain applied across models".into()));
        }
        let mut out = AlgebraElement::zero(self.model);
        for ((l, r), c) in &self.terms {
            let df = f.derive_multi(l)?;
            if df.is_zero() {
                continue;
            }
            let dg = g.derive_multi(r)?;
            if dg.is_zero() {
                continue;
            }
            out = out.add(&c.mul(&df).mul(&dg));
        }
        Ok(out)
    }

    pub fn apply_sym(&self, f: &SymMonomial, g: &SymMonomial) -> SymMonomial {
        let mut out = SymMonomial::zero(self.model);
        for ((l, r), c) in &self.terms {
            let df = f.derive_multi(l);
            if df.is_zero() {
                continue;
            }
            let dg = g.derive_multi(r);
            if dg.is_zero() {
                continue;
            }
            out = out.add(&df.mul(&dg).mul_element(c));
        }
        out
    }

    /// True when every term differentiates both slots, so constants are
    /// killed on either side.
    pub fn kills_constants(&self) -> bool {
        self.terms
            .keys()
            .all(|(l, r)| multi_index_order(l) >= 1 && multi_index_order(r) >= 1)
    }

    /// Plug a concrete element into the left slot, leaving an operator in
    /// the right slot.
    pub fn plug_left(&self, u: &AlgebraElement) -> DiffOperator {
        let mut op = DiffOperator::zero(self.model);
        for ((l, r), c) in &self.terms {
            let du = u.derive_multi(l).expect("in-range derivative");
            if !du.is_zero() {
                op.add_term(c.mul(&du), r.clone());
            }
        }
        op
    }

    pub fn plug_right(&self, u: &AlgebraElement) -> DiffOperator {
        self.transpose().plug_left(u)
    }

    /// Plug the multivalued linear potential `sum_j c_j theta_j` into the
    /// left slot. Only single-derivative terms survive; the caller must
    /// ensure order-zero terms are absent (unital cochains).
    pub fn plug_left_linear_potential(&self, c: &[Gaussian]) -> DiffOperator {
        let m = self.model.dim();
        assert_eq!(c.len(), m);
        let mut op = DiffOperator::zero(self.model);
        for ((l, r), coeff) in &self.terms {
            if multi_index_order(l) != 1 {
                continue;
            }
            let j = l.iter().position(|&e| e == 1).unwrap();
            op.add_term(coeff.scale(&c[j]), r.clone());
        }
        op
    }

    pub fn plug_right_linear_potential(&self, c: &[Gaussian]) -> DiffOperator {
        self.transpose().plug_left_linear_potential(c)
    }

    /// Post-compose with an operator: `(f,g) -> D(C(f,g))`.
    pub fn postcompose(&self, op: &DiffOperator) -> BidiffCochain {
        let mut out = Self::zero(self.model);
        for (alpha, d_coeff) in op.terms() {
            for ((l, r), c) in &self.terms {
                // d^alpha (c * d^L f * d^R g): split alpha over three factors.
                for (g0, m0) in sub_indices_with_binomials(alpha) {
                    let rest0: MultiIndex =
                        alpha.iter().zip(&g0).map(|(a, b)| a - b).collect();
                    let dc = c.derive_multi(&g0).expect("in-range derivative");
                    if dc.is_zero() {
                        continue;
                    }
                    for (g1, m1) in sub_indices_with_binomials(&rest0) {
                        let g2: MultiIndex =
                            rest0.iter().zip(&g1).map(|(a, b)| a - b).collect();
                        let mult = Gaussian::from_rat(Rat::from_integer(&m0 * &m1));
                        let coeff = d_coeff.mul(&dc).scale(&mult);
                        let left: MultiIndex = l.iter().zip(&g1).map(|(a, b)| a + b).collect();
                        let right: MultiIndex = r.iter().zip(&g2).map(|(a, b)| a + b).collect();
                        out.add_term(coeff, left, right);
                    }
                }
            }
        }
        out
    }

    /// Pre-compose a slot with an operator: left slot `(f,g) -> C(D f, g)`.
    pub fn precompose_left(&self, op: &DiffOperator) -> BidiffCochain {
        let mut out = Self::zero(self.model);
        for ((l, r), c) in &self.terms {
            for (beta, d_coeff) in op.terms() {
                // d^L (d_coeff * d^beta f) = sum_{g<=L} binom d^g d_coeff * d^{L-g+beta} f
                for (g, mult) in sub_indices_with_binomials(l) {
                    let dd = d_coeff.derive_multi(&g).expect("in-range derivative");
                    if dd.is_zero() {
                        continue;
                    }
                    let left: MultiIndex = l
                        .iter()
                        .zip(&g)
                        .zip(beta)
                        .map(|((a, gg), b)| a - gg + b)
                        .collect();
                    let coeff = c.mul(&dd).scale(&Gaussian::from_rat(Rat::from_integer(mult)));
                    out.add_term(coeff, left, r.clone());
                }
            }
        }
        out
    }

    pub fn precompose_right(&self, op: &DiffOperator) -> BidiffCochain {
        self.transpose().precompose_left(op).transpose()
    }

    pub fn max_order(&self) -> u32 {
        self.terms
            .keys()
            .map(|(l, r)| multi_index_order(l).max(multi_index_order(r)))
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Debug for BidiffCochain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for ((l, r), c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "({c})*d{l:?}(x)d{r:?}")?;
            first = false;
        }
        Ok(())
    }
}

/// An associative unital formal deformation given by bidifferential
/// cochains `C_1..C_N` above the pointwise product.
///
/// Constructors that know the product beyond the truncation (the built-in
/// exponential products, twists and pull-backs of such) also carry the
/// cochain at order `N+1` as an internal margin. Operations that divide by
/// the deformation parameter need that margin to fill their top stage.
#[derive(Clone, Debug)]
pub struct StarProduct {
    model: Model,
    order: usize,
    pi: PoissonStructure,
    // length `order` (no margin) or `order + 1` (margin present)
    cochains: Vec<BidiffCochain>,
}

/// Products compare on their public data: the margin cochain is one choice
/// of extension past the truncation and is not part of the deformation.
impl PartialEq for StarProduct {
    fn eq(&self, other: &Self) -> bool {
        self.model == other.model
            && self.order == other.order
            && self.pi == other.pi
            && self.cochains[..self.order] == other.cochains[..other.order]
    }
}

impl Eq for StarProduct {}

impl StarProduct {
    /// Build a product from explicit cochains; enforces the unitality shape
    /// (every cochain of order >= 1 kills constants on both sides). The list
    /// may carry one extra cochain past the truncation order as margin.
    pub fn new(
        model: Model,
        pi: PoissonStructure,
        order: usize,
        cochains: Vec<BidiffCochain>,
    ) -> Result<Self> {
        if pi.dim() != model.dim() {
            return Err(Error::ModelMismatch("Poisson dimension differs from model".into()));
        }
        if cochains.len() != order && cochains.len() != order + 1 {
            return Err(Error::Invalid(format!(
                "expected {order} or {} cochains, got {}",
                order + 1,
                cochains.len()
            )));
        }
        for (r, c) in cochains.iter().enumerate() {
            if c.model() != model {
                return Err(Error::ModelMismatch("cochain model differs".into()));
            }
            if !c.kills_constants() {
                return Err(Error::Invalid(format!(
                    "cochain at order {} does not kill constants",
                    r + 1
                )));
            }
        }
        Ok(StarProduct { model, order, pi, cochains })
    }

    /// The trivial deformation (all higher cochains zero).
    pub fn trivial(model: Model, order: usize) -> Self {
        StarProduct {
            model,
            order,
            pi: PoissonStructure::zero(model.dim()),
            cochains: vec![BidiffCochain::zero(model); order + 1],
        }
    }

    /// Whether the order-(N+1) margin cochain is available.
    pub fn has_margin(&self) -> bool {
        self.cochains.len() > self.order
    }

    /// Highest cochain order stored (the truncation order, or one more).
    pub fn internal_order(&self) -> usize {
        self.cochains.len()
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn poisson(&self) -> &PoissonStructure {
        &self.pi
    }

    /// Cochain of order `r >= 1`.
    pub fn cochain(&self, r: usize) -> &BidiffCochain {
        &self.cochains[r - 1]
    }

    pub fn cochains(&self) -> &[BidiffCochain] {
        &self.cochains
    }

    /// Replace one cochain, without revalidation (used to build deliberately
    /// broken products in tests and reports).
    pub fn with_cochain(mut self, r: usize, c: BidiffCochain) -> Self {
        self.cochains[r - 1] = c;
        self
    }

    /// `C_r(f,g)` on elements, with `C_0` the pointwise product.
    pub fn apply_cochain(
        &self,
        r: usize,
        f: &AlgebraElement,
        g: &AlgebraElement,
    ) -> Result<AlgebraElement> {
        if r == 0 {
            Ok(f.mul(g))
        } else {
            self.cochains[r - 1].apply(f, g)
        }
    }

    fn apply_cochain_sym(&self, r: usize, f: &SymMonomial, g: &SymMonomial) -> SymMonomial {
        if r == 0 {
            f.mul(g)
        } else {
            self.cochains[r - 1].apply_sym(f, g)
        }
    }

    /// The deformed product of two series.
    pub fn multiply(&self, f: &FormalSeries, g: &FormalSeries) -> Result<FormalSeries> {
        if f.model() != self.model || g.model() != self.model {
            return Err(Error::ModelMismatch("series model differs from product".into()));
        }
        if f.order() != self.order || g.order() != self.order {
            return Err(Error::ModelMismatch("series order differs from product".into()));
        }
        let mut out = FormalSeries::zero(self.model, self.order);
        for n in 0..=self.order {
            let mut acc = AlgebraElement::zero(self.model);
            for r in 0..=n {
                for p in 0..=n - r {
                    let q = n - r - p;
                    if f.coeff(p).is_zero() || g.coeff(q).is_zero() {
                        continue;
                    }
                    acc = acc.add(&self.apply_cochain(r, f.coeff(p), g.coeff(q))?);
                }
            }
            out.set_coeff(n, acc);
        }
        Ok(out)
    }

    /// Star commutator `[f,g] = f*g - g*f`.
    pub fn commutator(&self, f: &FormalSeries, g: &FormalSeries) -> Result<FormalSeries> {
        Ok(self.multiply(f, g)?.sub(&self.multiply(g, f)?))
    }

    /// The deformed product on symbolic series.
    pub fn multiply_sym(&self, f: &SymSeries, g: &SymSeries) -> SymSeries {
        let mut out = SymSeries::zero(self.model, self.order);
        for n in 0..=self.order {
            for r in 0..=n {
                for p in 0..=n - r {
                    let q = n - r - p;
                    if f.coeffs[p].is_zero() || g.coeffs[q].is_zero() {
                        continue;
                    }
                    let term = self.apply_cochain_sym(r, &f.coeffs[p], &g.coeffs[q]);
                    out.coeffs[n] = out.coeffs[n].add(&term);
                }
            }
        }
        out
    }

    /// Star-invert a series whose classical part is a unit, order by order.
    pub fn star_invert(&self, u: &FormalSeries) -> Result<FormalSeries> {
        let u0_inv = u
            .classical_limit()
            .invert()
            .map_err(|e| Error::NotAUnit(format!("classical part: {e}")))?;
        let mut w = FormalSeries::zero(self.model, self.order);
        w.set_coeff(0, u0_inv.clone());
        for n in 1..=self.order {
            // 0 = sum_{r+p+q=n} C_r(u_p, w_q); isolate the q = n term.
            let mut acc = AlgebraElement::zero(self.model);
            for r in 0..=n {
                for p in 0..=n - r {
                    let q = n - r - p;
                    if q == n {
                        continue;
                    }
                    acc = acc.add(&self.apply_cochain(r, u.coeff(p), w.coeff(q))?);
                }
            }
            w.set_coeff(n, u0_inv.mul(&acc.neg()));
        }
        debug_assert!(self.multiply(u, &w)?.sub(&FormalSeries::one(self.model, self.order)).is_zero());
        let right = self.multiply(&w, u)?;
        if !right.sub(&FormalSeries::one(self.model, self.order)).is_zero() {
            return Err(Error::NotAUnit("left inverse is not a right inverse".into()));
        }
        Ok(w)
    }

    /// Verify associativity to the truncation order on symbolic generators.
    pub fn check_associativity(&self) -> CheckOutcome {
        let f = SymSeries::from_monomial(SymMonomial::generator(self.model, 0), self.order);
        let g = SymSeries::from_monomial(SymMonomial::generator(self.model, 1), self.order);
        let h = SymSeries::from_monomial(SymMonomial::generator(self.model, 2), self.order);
        let lhs = self.multiply_sym(&self.multiply_sym(&f, &g), &h);
        let rhs = self.multiply_sym(&f, &self.multiply_sym(&g, &h));
        let diff = lhs.sub(&rhs);
        match diff.first_nonzero_order() {
            None => CheckOutcome::Pass,
            Some(order) => {
                let residual_sym = &diff.coeffs[order];
                let assignment = residual_sym
                    .find_counterexample()
                    .expect("nonzero symbolic residual has a witness");
                let make = |g: usize| -> AlgebraElement {
                    let mono = SymMonomial::generator(self.model, g);
                    mono.eval(&assignment)
                };
                CheckOutcome::Fail {
                    order,
                    witnesses: vec![make(0), make(1), make(2)],
                    residual: residual_sym.eval(&assignment),
                }
            }
        }
    }

    /// Verify `1 * f = f * 1 = f` symbolically.
    pub fn check_unitality(&self) -> CheckOutcome {
        let one = SymSeries::from_monomial(SymMonomial::one(self.model), self.order);
        let f = SymSeries::from_monomial(SymMonomial::generator(self.model, 0), self.order);
        let left = self.multiply_sym(&one, &f).sub(&f);
        let right = self.multiply_sym(&f, &one).sub(&f);
        for diff in [left, right] {
            if let Some(order) = diff.first_nonzero_order() {
                let residual_sym = &diff.coeffs[order];
                let assignment = residual_sym.find_counterexample().unwrap();
                return CheckOutcome::Fail {
                    order,
                    witnesses: vec![SymMonomial::generator(self.model, 0).eval(&assignment)],
                    residual: residual_sym.eval(&assignment),
                };
            }
        }
        CheckOutcome::Pass
    }

    /// Read the Poisson structure off the first cochain and verify that the
    /// induced bracket is constant-coefficient across all monomials. Uses the
    /// star-product bracket convention (the `1/i` normalization).
    pub fn extract_poisson(&self) -> Result<PoissonStructure> {
        self.extract_poisson_with(BracketConvention::Star)
    }

    /// Same, with an explicit bracket convention. `Star` reads
    /// `(1/i)(C_1(f,g) - C_1(g,f))`; `Algebraic` omits the `1/i` and is kept
    /// as a documented mode for products stated in that normalization.
    pub fn extract_poisson_with(&self, convention: BracketConvention) -> Result<PoissonStructure> {
        let m = self.model.dim();
        let mut mat = vec![vec![Rat::zero(); m]; m];
        let minus_i = match convention {
            BracketConvention::Star => -Gaussian::i(),
            BracketConvention::Algebraic => Gaussian::one(),
        };
        for a in 0..m {
            for b in 0..m {
                if a == b {
                    continue;
                }
                // (1/i)(C1(f,g) - C1(g,f)) evaluated on basis monomials.
                let value = match self.model {
                    Model::Trig(_) => {
                        let mut ka = vec![0i64; m];
                        ka[a] = 1;
                        let mut kb = vec![0i64; m];
                        kb[b] = 1;
                        let f = AlgebraElement::trig_mode(m, &ka)?;
                        let g = AlgebraElement::trig_mode(m, &kb)?;
                        let c1 = self.cochain(1);
                        let bracket =
                            c1.apply(&f, &g)?.sub(&c1.apply(&g, &f)?).scale(&minus_i);
                        // {E_a, E_b} = -pi^{ab} E[e_a+e_b]
                        let key: Vec<i64> =
                            ka.iter().zip(&kb).map(|(x, y)| x + y).collect();
                        bracket.coefficient(&key).scale_int(-1)
                    }
                    Model::Poly(_) => {
                        let f = AlgebraElement::variable(self.model, a + 1)?;
                        let g = AlgebraElement::variable(self.model, b + 1)?;
                        let c1 = self.cochain(1);
                        let bracket =
                            c1.apply(&f, &g)?.sub(&c1.apply(&g, &f)?).scale(&minus_i);
                        bracket.constant_part()
                    }
                };
                let q = value.as_rat().ok_or_else(|| {
                    Error::NonConstantBracket("bracket has an imaginary rational entry".into())
                })?;
                mat[a][b] = q.clone();
            }
        }
        let pi = PoissonStructure::new(mat)
            .map_err(|e| Error::NonConstantBracket(format!("not antisymmetric: {e}")))?;
        // Constancy: the full first-order bracket must agree with the constant
        // bivector on symbolic generators.
        let f = SymMonomial::generator(self.model, 0);
        let g = SymMonomial::generator(self.model, 1);
        let c1 = self.cochain(1);
        let lhs = c1.apply_sym(&f, &g).sub(&c1.apply_sym(&g, &f)).scale(&minus_i);
        let mut rhs = SymMonomial::zero(self.model);
        for i in 0..m {
            for j in 0..m {
                if pi.entry(i, j).is_zero() {
                    continue;
                }
                let term = f
                    .derive(i + 1)
                    .mul(&g.derive(j + 1))
                    .scale(&Gaussian::from_rat(pi.entry(i, j).clone()));
                rhs = rhs.add(&term);
            }
        }
        if !lhs.sub(&rhs).is_zero() {
            return Err(Error::NonConstantBracket(
                "first-order bracket is not a constant bivector".into(),
            ));
        }
        Ok(pi)
    }
}

/// The constant-coefficient product of exponential type for a constant
/// bivector: `C_r = (i/2)^r / r! * pi-strings`.
pub fn moyal(pi: &PoissonStructure, order: usize) -> StarProduct {
    moyal_formal(std::slice::from_ref(pi), order, Model::Trig(pi.dim()))
        .expect("constant bivector is always valid")
}

/// Same, on a chosen model (torus or plane) of matching dimension.
pub fn moyal_on(model: Model, pi: &PoissonStructure, order: usize) -> Result<StarProduct> {
    moyal_formal(std::slice::from_ref(pi), order, model)
}

/// Exponential-type product of a formal bivector `pi_0 + L pi_1 + ...`:
/// the series exponential of `(i/2) L (pi_0 + L pi_1 + ...)` in the symbol
/// algebra, reorganized into genuine cochains per order.
pub fn moyal_formal(
    pis: &[PoissonStructure],
    order: usize,
    model: Model,
) -> Result<StarProduct> {
    if pis.is_empty() {
        return Err(Error::Invalid("need at least the constant bivector".into()));
    }
    let m = model.dim();
    for p in pis {
        if p.dim() != m {
            return Err(Error::ModelMismatch("bivector dimension differs from model".into()));
        }
    }
    // Symbols: map (L,R) -> scalar, graded by the deformation order they
    // carry. symbol[s] is the coefficient of lambda^s.
    type Symbol = BTreeMap<(MultiIndex, MultiIndex), Gaussian>;
    let add_to = |sym: &mut Symbol, key: (MultiIndex, MultiIndex), c: Gaussian| {
        if c.is_zero() {
            return;
        }
        let e = sym.entry(key).or_insert_with(Gaussian::zero);
        *e += &c;
    };

    // Generator: lambda-graded symbol G[s] = (i/2) * pi_{s-1}-string for s>=1.
    let half_i = Gaussian::imag_ratio(1, 2);
    let mut generator: Vec<Symbol> = vec![Symbol::new(); order + 2];
    for (s, pi_s) in pis.iter().enumerate() {
        let grade = s + 1;
        if grade > order + 1 {
            break;
        }
        for i in 0..m {
            for j in 0..m {
                if pi_s.entry(i, j).is_zero() {
                    continue;
                }
                let mut l = vec![0u32; m];
                l[i] = 1;
                let mut r = vec![0u32; m];
                r[j] = 1;
                let c = half_i.scale_rat(pi_s.entry(i, j));
                add_to(&mut generator[grade], (l, r), c);
            }
        }
    }

    // exp of the graded symbol: acc = sum_k gen^k / k!, carried one order
    // past the truncation to provide the margin cochain.
    let internal = order + 1;
    let mut result: Vec<Symbol> = vec![Symbol::new(); internal + 1];
    result[0].insert((vec![0; m], vec![0; m]), Gaussian::one());
    let mut power: Vec<Symbol> = result.clone(); // gen^0
    for k in 1..=internal {
        // power = power * generator (graded symbol product)
        let mut next: Vec<Symbol> = vec![Symbol::new(); internal + 1];
        for s1 in 0..=internal {
            if power[s1].is_empty() {
                continue;
            }
            for s2 in 1..=internal - s1 {
                if generator[s2].is_empty() {
                    continue;
                }
                for ((l1, r1), c1) in &power[s1] {
                    for ((l2, r2), c2) in &generator[s2] {
                        let l: MultiIndex = l1.iter().zip(l2).map(|(a, b)| a + b).collect();
                        let r: MultiIndex = r1.iter().zip(r2).map(|(a, b)| a + b).collect();
                        add_to(&mut next[s1 + s2], (l, r), c1 * c2);
                    }
                }
            }
        }
        power = next;
        let inv_fact = Gaussian::from_rat(Rat::one() / factorial(k));
        for s in 0..=internal {
            for (key, c) in &power[s] {
                add_to(&mut result[s], key.clone(), c * &inv_fact);
            }
        }
    }

    let mut cochains = Vec::with_capacity(internal);
    for s in 1..=internal {
        let mut c = BidiffCochain::zero(model);
        for ((l, r), v) in &result[s] {
            if !v.is_zero() {
                c.add_term(AlgebraElement::scalar(model, v.clone()), l.clone(), r.clone());
            }
        }
        cochains.push(c);
    }
    let pi0 = pis[0].clone();
    StarProduct::new(model, pi0, order, cochains)
}

/// A series of differential operators `P_0 + L P_1 + ...` acting on formal
/// series; composition and functional calculus are truncated.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OpSeries {
    model: Model,
    order: usize,
    stages: Vec<DiffOperator>,
}

impl OpSeries {
    pub fn zero(model: Model, order: usize) -> Self {
        OpSeries { model, order, stages: vec![DiffOperator::zero(model); order + 1] }
    }

    pub fn identity(model: Model, order: usize) -> Self {
        let mut s = Self::zero(model, order);
        s.stages[0] = DiffOperator::identity(model);
        s
    }

    pub fn from_stages(model: Model, stages: Vec<DiffOperator>) -> Self {
        OpSeries { model, order: stages.len() - 1, stages }
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn stage(&self, r: usize) -> &DiffOperator {
        &self.stages[r]
    }

    pub fn set_stage(&mut self, r: usize, op: DiffOperator) {
        self.stages[r] = op;
    }

    pub fn is_zero(&self) -> bool {
        self.stages.iter().all(|s| s.is_zero())
    }

    pub fn add(&self, rhs: &OpSeries) -> OpSeries {
        assert_eq!(self.order, rhs.order);
        OpSeries {
            model: self.model,
            order: self.order,
            stages: self.stages.iter().zip(&rhs.stages).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn sub(&self, rhs: &OpSeries) -> OpSeries {
        assert_eq!(self.order, rhs.order);
        OpSeries {
            model: self.model,
            order: self.order,
            stages: self.stages.iter().zip(&rhs.stages).map(|(a, b)| a.sub(b)).collect(),
        }
    }

    pub fn scale(&self, c: &Gaussian) -> OpSeries {
        OpSeries {
            model: self.model,
            order: self.order,
            stages: self.stages.iter().map(|s| s.scale(c)).collect(),
        }
    }

    /// Multiply by the `k`-th power of the parameter.
    pub fn shift(&self, k: usize) -> OpSeries {
        let mut out = Self::zero(self.model, self.order);
        for r in 0..=self.order.saturating_sub(k) {
            out.stages[r + k] = self.stages[r].clone();
        }
        out
    }

    /// Composition `self o rhs` per order.
    pub fn compose(&self, rhs: &OpSeries) -> OpSeries {
        assert_eq!(self.order, rhs.order);
        let mut out = Self::zero(self.model, self.order);
        for n in 0..=self.order {
            let mut acc = DiffOperator::zero(self.model);
            for p in 0..=n {
                if self.stages[p].is_zero() || rhs.stages[n - p].is_zero() {
                    continue;
                }
                acc = acc.add(&self.stages[p].compose(&rhs.stages[n - p]));
            }
            out.stages[n] = acc;
        }
        out
    }

    pub fn apply(&self, f: &FormalSeries) -> Result<FormalSeries> {
        if f.model() != self.model || f.order() != self.order {
            return Err(Error::ModelMismatch("operator series applied across models".into()));
        }
        let mut out = FormalSeries::zero(self.model, self.order);
        for n in 0..=self.order {
            let mut acc = AlgebraElement::zero(self.model);
            for p in 0..=n {
                acc = acc.add(&self.stages[p].apply(f.coeff(n - p))?);
            }
            out.set_coeff(n, acc);
        }
        Ok(out)
    }

    pub fn apply_sym(&self, f: &SymSeries) -> SymSeries {
        let mut out = SymSeries::zero(self.model, self.order);
        for n in 0..=self.order {
            for p in 0..=n {
                if self.stages[p].is_zero() || f.coeffs[n - p].is_zero() {
                    continue;
                }
                out.coeffs[n] = out.coeffs[n].add(&f.coeffs[n - p].apply_diffop(&self.stages[p]));
            }
        }
        out
    }

    /// Exponential of a series with vanishing order-zero stage.
    pub fn exp(&self) -> OpSeries {
        assert!(self.stages[0].is_zero(), "exp needs a series starting at order 1");
        let mut acc = Self::identity(self.model, self.order);
        let mut power = Self::identity(self.model, self.order);
        for k in 1..=self.order {
            power = power.compose(self);
            if power.is_zero() {
                break;
            }
            let inv_fact = Gaussian::from_rat(Rat::one() / factorial(k));
            acc = acc.add(&power.scale(&inv_fact));
        }
        acc
    }

    /// Logarithm of a series with identity order-zero stage.
    pub fn log(&self) -> OpSeries {
        let mut delta = self.clone();
        delta.stages[0] = delta.stages[0].sub(&DiffOperator::identity(self.model));
        assert!(delta.stages[0].is_zero(), "log needs a series of the form id + O(L)");
        let mut acc = Self::zero(self.model, self.order);
        let mut power = Self::identity(self.model, self.order);
        for k in 1..=self.order {
            power = power.compose(&delta);
            if power.is_zero() {
                break;
            }
            let sign = if k % 2 == 1 { Rat::one() } else { -Rat::one() };
            let coeff = Gaussian::from_rat(sign / Rat::from_integer(k.into()));
            acc = acc.add(&power.scale(&coeff));
        }
        acc
    }

    /// Left star-multiplication by a series: `f -> u * f`.
    pub fn left_multiplication(s: &StarProduct, u: &FormalSeries) -> OpSeries {
        let mut out = Self::zero(s.model(), s.order());
        for n in 0..=s.order() {
            let mut acc = DiffOperator::zero(s.model());
            for r in 0..=n {
                let p = n - r;
                if u.coeff(p).is_zero() {
                    continue;
                }
                if r == 0 {
                    acc = acc.add(&DiffOperator::multiplication_by(u.coeff(p).clone()));
                } else {
                    acc = acc.add(&s.cochain(r).plug_left(u.coeff(p)));
                }
            }
            out.stages[n] = acc;
        }
        out
    }

    /// Right star-multiplication by a series: `f -> f * u`.
    pub fn right_multiplication(s: &StarProduct, u: &FormalSeries) -> OpSeries {
        let mut out = Self::zero(s.model(), s.order());
        for n in 0..=s.order() {
            let mut acc = DiffOperator::zero(s.model());
            for r in 0..=n {
                let p = n - r;
                if u.coeff(p).is_zero() {
                    continue;
                }
                if r == 0 {
                    acc = acc.add(&DiffOperator::multiplication_by(u.coeff(p).clone()));
                } else {
                    acc = acc.add(&s.cochain(r).plug_right(u.coeff(p)));
                }
            }
            out.stages[n] = acc;
        }
        out
    }

    /// The inner automorphism `f -> u * f * u^{-1}` as an operator series.
    pub fn adjoint(s: &StarProduct, u: &FormalSeries) -> Result<OpSeries> {
        let v = s.star_invert(u)?;
        Ok(Self::left_multiplication(s, u).compose(&Self::right_multiplication(s, &v)))
    }
}

/// An equivalence transformation `id + L T_1 + ... + L^N T_N`; every stage
/// kills constants so the unit is preserved.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Equivalence {
    model: Model,
    order: usize,
    stages: Vec<DiffOperator>, // T_1..T_N
}

impl Equivalence {
    pub fn identity(model: Model, order: usize) -> Self {
        Equivalence { model, order, stages: vec![DiffOperator::zero(model); order] }
    }

    pub fn new(model: Model, order: usize, stages: Vec<DiffOperator>) -> Result<Self> {
        if stages.len() != order {
            return Err(Error::Invalid(format!("expected {order} stages, got {}", stages.len())));
        }
        for (r, t) in stages.iter().enumerate() {
            if t.model() != model {
                return Err(Error::ModelMismatch("stage model differs".into()));
            }
            if !t.kills_constants() {
                return Err(Error::Invalid(format!(
                    "stage {} does not kill constants, so the unit is not preserved",
                    r + 1
                )));
            }
        }
        Ok(Equivalence { model, order, stages })
    }

    /// `id + L^r D`.
    pub fn single_stage(model: Model, order: usize, r: usize, op: DiffOperator) -> Result<Self> {
        if r == 0 || r > order {
            return Err(Error::Invalid("stage index out of range".into()));
        }
        let mut stages = vec![DiffOperator::zero(model); order];
        stages[r - 1] = op;
        Self::new(model, order, stages)
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// The first-order stage `T_1`.
    pub fn first_order(&self) -> DiffOperator {
        self.stages[0].clone()
    }

    pub fn stage(&self, r: usize) -> &DiffOperator {
        &self.stages[r - 1]
    }

    pub fn to_opseries(&self) -> OpSeries {
        let mut stages = Vec::with_capacity(self.order + 1);
        stages.push(DiffOperator::identity(self.model));
        stages.extend(self.stages.iter().cloned());
        OpSeries::from_stages(self.model, stages)
    }

    pub fn from_opseries(ops: &OpSeries) -> Result<Self> {
        if ops.stage(0) != &DiffOperator::identity(ops.model()) {
            return Err(Error::Invalid("operator series is not id + O(L)".into()));
        }
        Self::new(ops.model(), ops.order(), ops.stages[1..].to_vec())
    }

    /// Stage-wise inverse.
    pub fn inverse(&self) -> Equivalence {
        let mut inv = vec![DiffOperator::zero(self.model); self.order];
        for n in 1..=self.order {
            // S_n = -T_n - sum_{p+q=n, p,q>=1} T_p o S_q
            let mut acc = self.stages[n - 1].neg();
            for p in 1..n {
                let q = n - p;
                acc = acc.sub(&self.stages[p - 1].compose(&inv[q - 1]));
            }
            inv[n - 1] = acc;
        }
        Equivalence { model: self.model, order: self.order, stages: inv }
    }

    pub fn compose(&self, rhs: &Equivalence) -> Equivalence {
        let ops = self.to_opseries().compose(&rhs.to_opseries());
        Equivalence::from_opseries(&ops).expect("composition of equivalences")
    }

    pub fn apply(&self, f: &FormalSeries) -> Result<FormalSeries> {
        self.to_opseries().apply(f)
    }

    /// Check that this is an algebra self-equivalence of `s`:
    /// `T(f * g) = T(f) * T(g)` symbolically.
    pub fn check_self_equivalence(&self, s: &StarProduct) -> CheckOutcome {
        let ops = self.to_opseries();
        let f = SymSeries::from_monomial(SymMonomial::generator(self.model, 0), self.order);
        let g = SymSeries::from_monomial(SymMonomial::generator(self.model, 1), self.order);
        let lhs = ops.apply_sym(&s.multiply_sym(&f, &g));
        let rhs = s.multiply_sym(&ops.apply_sym(&f), &ops.apply_sym(&g));
        let diff = lhs.sub(&rhs);
        match diff.first_nonzero_order() {
            None => CheckOutcome::Pass,
            Some(order) => {
                let residual_sym = &diff.coeffs[order];
                let assignment = residual_sym.find_counterexample().unwrap();
                CheckOutcome::Fail {
                    order,
                    witnesses: vec![
                        SymMonomial::generator(self.model, 0).eval(&assignment),
                        SymMonomial::generator(self.model, 1).eval(&assignment),
                    ],
                    residual: residual_sym.eval(&assignment),
                }
            }
        }
    }
}

/// Transport a product through an equivalence: the product with
/// `T: (A[[L]], s) -> (A[[L]], result)` an algebra isomorphism, i.e.
/// `a *' b = T(T^{-1}a * T^{-1}b)`.
pub fn twist_by_equivalence(s: &StarProduct, t: &Equivalence) -> Result<StarProduct> {
    if t.model() != s.model() || t.order() != s.order() {
        return Err(Error::ModelMismatch("equivalence does not match product".into()));
    }
    let order = s.order();
    let model = s.model();
    let internal = s.internal_order();
    // Extend the equivalence by zero past its truncation: its inverse then
    // has a nonzero top stage, needed for the margin cochain of the twist.
    let mut extended_stages = vec![DiffOperator::zero(model); internal];
    for r in 1..=order {
        extended_stages[r - 1] = t.stage(r).clone();
    }
    let t_ext = Equivalence::new(model, internal, extended_stages)?;
    let t_ops = t_ext.to_opseries();
    let s_ops = t_ext.inverse().to_opseries();
    let stage_t = |i: usize| t_ops.stage(i);
    let stage_s = |i: usize| s_ops.stage(i);
    let mut cochains = Vec::with_capacity(internal);
    for n in 1..=internal {
        let mut acc = BidiffCochain::zero(model);
        // C'_n = sum_{a+b+c+d=n} T_a ( C_b ( S_c ., S_d . ) )
        for b in 0..=n {
            let base = if b == 0 {
                let mut c = BidiffCochain::zero(model);
                c.add_term(AlgebraElement::one(model), vec![0; model.dim()], vec![0; model.dim()]);
                c
            } else {
                s.cochain(b).clone()
            };
            for c_ord in 0..=n - b {
                let pre_left = base.precompose_left(stage_s(c_ord));
                if pre_left.is_zero() {
                    continue;
                }
                for d_ord in 0..=n - b - c_ord {
                    let a_ord = n - b - c_ord - d_ord;
                    let pre_both = pre_left.precompose_right(stage_s(d_ord));
                    if pre_both.is_zero() {
                        continue;
                    }
                    acc = acc.add(&pre_both.postcompose(stage_t(a_ord)));
                }
            }
        }
        cochains.push(acc);
    }
    StarProduct::new(model, s.poisson().clone(), order, cochains)
}

/// Invertible classical automorphism seed: an integral exponent map on the
/// torus, or an invertible rational linear substitution on the plane.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum AutomorphismSeed {
    /// `theta -> M theta`, pulling `E[k]` back to `E[M^T k]`; `M` in `GL(m,Z)`.
    TorusExponentMap(Vec<Vec<i64>>),
    /// `x -> A x`, substituting linear forms; `A` invertible over `Q`.
    PlaneLinear(Vec<Vec<Rat>>),
}

fn int_matrix_det(m: &[Vec<i64>]) -> i64 {
    let n = m.len();
    match n {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => {
            // Laplace expansion; fine for the small ranks used here.
            let mut det = 0i64;
            for j in 0..n {
                if m[0][j] == 0 {
                    continue;
                }
                let minor: Vec<Vec<i64>> = (1..n)
                    .map(|r| (0..n).filter(|&c| c != j).map(|c| m[r][c]).collect())
                    .collect();
                let sign = if j % 2 == 0 { 1 } else { -1 };
                det += sign * m[0][j] * int_matrix_det(&minor);
            }
            det
        }
    }
}

/// Adjugate-based inverse of a unimodular integer matrix.
pub fn unimodular_inverse(m: &[Vec<i64>]) -> Option<Vec<Vec<i64>>> {
    let n = m.len();
    let det = int_matrix_det(m);
    if det != 1 && det != -1 {
        return None;
    }
    let mut inv = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<Vec<i64>> = (0..n)
                .filter(|&r| r != j)
                .map(|r| (0..n).filter(|&c| c != i).map(|c| m[r][c]).collect())
                .collect();
            let cof = if minor.is_empty() { 1 } else { int_matrix_det(&minor) };
            let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
            inv[i][j] = sign * cof * det; // det = +-1 so division is a product
        }
    }
    Some(inv)
}


impl AutomorphismSeed {
    pub fn dim(&self) -> usize {
        match self {
            AutomorphismSeed::TorusExponentMap(m) => m.len(),
            AutomorphismSeed::PlaneLinear(a) => a.len(),
        }
    }

    pub fn validate(&self, model: Model) -> Result<()> {
        if self.dim() != model.dim() {
            return Err(Error::ModelMismatch("seed dimension differs from model".into()));
        }
        match (self, model) {
            (AutomorphismSeed::TorusExponentMap(m), Model::Trig(_)) => {
                let det = int_matrix_det(m);
                if det != 1 && det != -1 {
                    return Err(Error::Invalid(format!(
                        "exponent map must be unimodular, det = {det}"
                    )));
                }
                Ok(())
            }
            (AutomorphismSeed::PlaneLinear(a), Model::Poly(_)) => {
                if rat_matrix_inverse(a).is_none() {
                    return Err(Error::Invalid("substitution matrix is singular".into()));
                }
                Ok(())
            }
            _ => Err(Error::ModelMismatch("seed kind does not match model".into())),
        }
    }

    pub fn inverse(&self) -> Result<AutomorphismSeed> {
        match self {
            AutomorphismSeed::TorusExponentMap(m) => unimodular_inverse(m)
                .map(AutomorphismSeed::TorusExponentMap)
                .ok_or_else(|| Error::Invalid("exponent map is not unimodular".into())),
            AutomorphismSeed::PlaneLinear(a) => rat_matrix_inverse(a)
                .map(AutomorphismSeed::PlaneLinear)
                .ok_or_else(|| Error::Invalid("substitution matrix is singular".into())),
        }
    }

    /// Composition `self o rhs` as maps on the underlying space.
    pub fn compose(&self, rhs: &AutomorphismSeed) -> Result<AutomorphismSeed> {
        match (self, rhs) {
            (AutomorphismSeed::TorusExponentMap(a), AutomorphismSeed::TorusExponentMap(b)) => {
                let n = a.len();
                let mut out = vec![vec![0i64; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        out[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
                    }
                }
                Ok(AutomorphismSeed::TorusExponentMap(out))
            }
            (AutomorphismSeed::PlaneLinear(a), AutomorphismSeed::PlaneLinear(b)) => {
                let n = a.len();
                let mut out = vec![vec![Rat::zero(); n]; n];
                for i in 0..n {
                    for j in 0..n {
                        out[i][j] = (0..n).map(|k| &a[i][k] * &b[k][j]).sum();
                    }
                }
                Ok(AutomorphismSeed::PlaneLinear(out))
            }
            _ => Err(Error::ModelMismatch("cannot compose seeds of different kinds".into())),
        }
    }

    /// Pull back an element: `(psi f)(p) = f(map p)`.
    pub fn apply_element(&self, f: &AlgebraElement) -> Result<AlgebraElement> {
        self.validate(f.model())?;
        match self {
            AutomorphismSeed::TorusExponentMap(mat) => {
                let m = mat.len();
                let mut out = AlgebraElement::zero(f.model());
                for (k, c) in f.terms() {
                    // E[k](M theta) = E[M^T k]
                    let key: Vec<i64> =
                        (0..m).map(|j| (0..m).map(|i| mat[i][j] * k[i]).sum()).collect();
                    out.add_term(key, c);
                }
                Ok(out)
            }
            AutomorphismSeed::PlaneLinear(a) => {
                let n = a.len();
                let model = f.model();
                let mut out = AlgebraElement::zero(model);
                // x^k (A x) = prod_j (sum_l A_{jl} x_l)^{k_j}
                for (k, c) in f.terms() {
                    let mut acc = AlgebraElement::scalar(model, c.clone());
                    for j in 0..n {
                        let form_coeffs: Vec<AlgebraElement> = (0..n)
                            .map(|l| {
                                let mut key = vec![0i64; n];
                                key[l] = 1;
                                AlgebraElement::monomial(
                                    model,
                                    key,
                                    Gaussian::from_rat(a[j][l].clone()),
                                )
                                .unwrap()
                            })
                            .collect();
                        let mut form = AlgebraElement::zero(model);
                        for p in form_coeffs {
                            form = form.add(&p);
                        }
                        for _ in 0..k[j] {
                            acc = acc.mul(&form);
                        }
                    }
                    out = out.add(&acc);
                }
                Ok(out)
            }
        }
    }

    /// Conjugated unit derivative: `psi^{-1} o d_j o psi = sum_l M_{lj} d_l`.
    fn conjugated_partial(&self, model: Model, j: usize) -> Result<DiffOperator> {
        let m = self.dim();
        let mut op = DiffOperator::zero(model);
        match self {
            AutomorphismSeed::TorusExponentMap(mat) => {
                for l in 0..m {
                    if mat[l][j] == 0 {
                        continue;
                    }
                    let unit = DiffOperator::partial(model, l + 1)?;
                    op = op.add(&unit.scale(&Gaussian::from_int(mat[l][j])));
                }
            }
            AutomorphismSeed::PlaneLinear(a) => {
                for l in 0..m {
                    if a[l][j].is_zero() {
                        continue;
                    }
                    let unit = DiffOperator::partial(model, l + 1)?;
                    op = op.add(&unit.scale(&Gaussian::from_rat(a[l][j].clone())));
                }
            }
        }
        Ok(op)
    }
}

/// Pull a product back along a classical automorphism:
/// `a *^ b = psi^{-1}( psi(a) * psi(b) )`.
pub fn pullback_by_automorphism(s: &StarProduct, seed: &AutomorphismSeed) -> Result<StarProduct> {
    seed.validate(s.model())?;
    let model = s.model();
    let m = model.dim();
    let inv = seed.inverse()?;
    let order = s.order();
    let internal = s.internal_order();
    let mut cochains = Vec::with_capacity(internal);
    for r in 1..=internal {
        let mut acc = BidiffCochain::zero(model);
        for ((l_idx, r_idx), c) in s.cochain(r).terms() {
            // Conjugate each derivative factor and the coefficient.
            let coeff = inv.apply_element(c)?;
            // Expand d^L into products of conjugated unit derivatives.
            let mut lop = DiffOperator::identity(model);
            for j in 0..m {
                for _ in 0..l_idx[j] {
                    lop = seed.conjugated_partial(model, j)?.compose(&lop);
                }
            }
            let mut rop = DiffOperator::identity(model);
            for j in 0..m {
                for _ in 0..r_idx[j] {
                    rop = seed.conjugated_partial(model, j)?.compose(&rop);
                }
            }
            // Assemble sum over the operators' expanded terms.
            for (alpha, la) in lop.terms() {
                for (beta, rb) in rop.terms() {
                    let term_coeff = coeff.mul(&la.mul(rb));
                    acc.add_term(term_coeff, alpha.clone(), beta.clone());
                }
            }
        }
        cochains.push(acc);
    }
    // The bracket transforms along the seed; read it from the cochains so the
    // stored bivector always matches the product.
    let candidate = StarProduct::new(model, s.poisson().clone(), order, cochains)?;
    let pi = candidate.extract_poisson()?;
    StarProduct::new(model, pi, order, candidate.cochains.clone())
}

/// The second-order antisymmetric difference of two products sharing their
/// first-order cochain, computed both from the cochains and from star
/// commutators; the two routes must agree.
pub fn compute_tau(s_prime: &StarProduct, s: &StarProduct) -> Result<BidiffCochain> {
    if s_prime.model() != s.model() || s_prime.order() != s.order() {
        return Err(Error::ModelMismatch("products live on different models".into()));
    }
    if s.order() < 2 {
        return Err(Error::Invalid("need truncation order at least 2".into()));
    }
    if s_prime.cochain(1) != s.cochain(1) {
        return Err(Error::FirstOrderMismatch(
            "tau needs matching first-order cochains".into(),
        ));
    }
    // Route one: antisymmetrized cochain difference at order two.
    let route_cochain = s.cochain(2).sub(s_prime.cochain(2)).antisymmetrize();
    // Route two: order-two coefficient of [f,g]_star - [f,g]_star' on
    // symbolic generators (orders zero and one cancel by hypothesis).
    let model = s.model();
    let order = s.order();
    let f = SymSeries::from_monomial(SymMonomial::generator(model, 0), order);
    let g = SymSeries::from_monomial(SymMonomial::generator(model, 1), order);
    let comm = |p: &StarProduct| -> SymSeries {
        p.multiply_sym(&f, &g).sub(&p.multiply_sym(&g, &f))
    };
    let diff = comm(s).sub(&comm(s_prime));
    for r in 0..2 {
        if !diff.coeffs[r].is_zero() {
            return Err(Error::FirstOrderMismatch(format!(
                "commutators differ already at order {r}"
            )));
        }
    }
    let route_commutator = &diff.coeffs[2];
    let via_cochain = route_cochain.apply_sym(
        &SymMonomial::generator(model, 0),
        &SymMonomial::generator(model, 1),
    );
    if !via_cochain.sub(route_commutator).is_zero() {
        return Err(Error::Invalid(
            "internal: cochain and commutator routes for tau disagree".into(),
        ));
    }
    Ok(route_cochain)
}

/// First-order stage of an equivalence (the structure map to derivations).
pub fn equivalence_first_order(t: &Equivalence) -> DiffOperator {
    t.first_order()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, rat_int};

    fn t2() -> Model {
        Model::Trig(2)
    }

    fn pi1() -> PoissonStructure {
        PoissonStructure::dim2(Rat::one())
    }

    fn e(k: &[i64]) -> AlgebraElement {
        AlgebraElement::trig_mode(2, k).unwrap()
    }

    fn series(e: AlgebraElement, order: usize) -> FormalSeries {
        FormalSeries::from_element(e, order)
    }

    /// Independent oracle for the exponential product on torus monomials:
    /// `E[k] * E[l] = exp(-(i/2) L pi(k,l)) E[k+l]`.
    fn torus_phase_product(
        pi: &PoissonStructure,
        k: &[i64],
        l: &[i64],
        order: usize,
    ) -> FormalSeries {
        let pairing = pi.pairing(k, l);
        let base = Gaussian::imag_ratio(-1, 2).scale_rat(&pairing);
        let key: Vec<i64> = k.iter().zip(l).map(|(a, b)| a + b).collect();
        let mono = AlgebraElement::trig_mode(k.len(), &key).unwrap();
        let mut out = FormalSeries::zero(Model::Trig(k.len()), order);
        for r in 0..=order {
            let c = base.pow(r as u32).scale_rat(&(Rat::one() / factorial(r)));
            out.set_coeff(r, mono.scale(&c));
        }
        out
    }

    #[test]
    fn moyal_first_cochain_matches_half_bivector() {
        let s = moyal(&pi1(), 4);
        // C1(x-slot monomials): C1(E[1,0],E[0,1]) = (i/2)(i)(i) E[1,1] = -(i/2)E[1,1]
        let v = s.cochain(1).apply(&e(&[1, 0]), &e(&[0, 1])).unwrap();
        assert_eq!(v, e(&[1, 1]).scale(&Gaussian::imag_ratio(-1, 2)));
    }

    #[test]
    fn plane_moyal_second_cochain_explicit() {
        // C2(f,g) = -(1/8)(d11 f d22 g - 2 d12 f d12 g + d22 f d11 g)
        let model = Model::Poly(2);
        let s = moyal_on(model, &pi1(), 2).unwrap();
        let mut expected = BidiffCochain::zero(model);
        let c = |n: i64, d: i64| AlgebraElement::scalar(model, Gaussian::ratio(n, d));
        expected.add_term(c(-1, 8), vec![2, 0], vec![0, 2]);
        expected.add_term(c(2, 8), vec![1, 1], vec![1, 1]);
        expected.add_term(c(-1, 8), vec![0, 2], vec![2, 0]);
        assert_eq!(s.cochain(2), &expected);
    }

    #[test]
    fn plane_moyal_x_star_y() {
        let model = Model::Poly(2);
        let s = moyal_on(model, &pi1(), 4).unwrap();
        let x = series(AlgebraElement::variable(model, 1).unwrap(), 4);
        let y = series(AlgebraElement::variable(model, 2).unwrap(), 4);
        let prod = s.multiply(&x, &y).unwrap();
        // x*y + (i/2) L
        let mut expected = FormalSeries::zero(model, 4);
        expected.set_coeff(0, x.classical_limit().mul(y.classical_limit()));
        expected.set_coeff(1, AlgebraElement::scalar(model, Gaussian::imag_ratio(1, 2)));
        assert_eq!(prod, expected);
    }

    #[test]
    fn quantum_torus_phase() {
        let order = 8;
        let s = moyal(&pi1(), order);
        let prod = s
            .multiply(&series(e(&[1, 0]), order), &series(e(&[0, 1]), order))
            .unwrap();
        assert_eq!(prod, torus_phase_product(&pi1(), &[1, 0], &[0, 1], order));
        // Unitality.
        let f = series(e(&[2, -1]).scale(&Gaussian::ratio(3, 7)), order);
        let one = FormalSeries::one(t2(), order);
        assert_eq!(s.multiply(&one, &f).unwrap(), f);
        assert_eq!(s.multiply(&f, &one).unwrap(), f);
    }

    #[test]
    fn zero_bivector_gives_trivial_deformation() {
        let s = moyal(&PoissonStructure::zero(2), 5);
        for r in 1..=5 {
            assert!(s.cochain(r).is_zero());
        }
    }

    #[test]
    fn associativity_passes_and_mutation_fails_at_order_two() {
        let order = 6;
        for model in [t2(), Model::Poly(2)] {
            let s = moyal_on(model, &pi1(), order).unwrap();
            assert!(s.check_associativity().passed());
            assert!(s.check_unitality().passed());
        }
        // Remove one term from C2.
        let s = moyal(&pi1(), order);
        let mut broken_c2 = BidiffCochain::zero(t2());
        let mut dropped = false;
        for ((l, r), c) in s.cochain(2).terms() {
            if !dropped {
                dropped = true;
                continue;
            }
            broken_c2.add_term(c.clone(), l.clone(), r.clone());
        }
        let broken = s.clone().with_cochain(2, broken_c2);
        match broken.check_associativity() {
            CheckOutcome::Fail { order, witnesses, .. } => {
                assert_eq!(order, 2);
                assert_eq!(witnesses.len(), 3);
            }
            CheckOutcome::Pass => panic!("mutated product must fail associativity"),
        }
        // The trivial deformation is associative.
        assert!(StarProduct::trivial(t2(), order).check_associativity().passed());
    }

    #[test]
    fn extract_poisson_recovers_bivector() {
        let pis = [
            PoissonStructure::dim2(rat(3, 5)),
            PoissonStructure::dim2(rat(-7, 2)),
            PoissonStructure::dim2(Rat::zero()),
        ];
        for pi in &pis {
            let s = moyal(pi, 4);
            assert_eq!(&s.extract_poisson().unwrap(), pi);
        }
        let p2 = Model::Poly(2);
        let s = moyal_on(p2, &pi1(), 4).unwrap();
        assert_eq!(s.extract_poisson().unwrap(), pi1());
    }

    #[test]
    fn star_inversion() {
        let order = 6;
        let s = moyal(&pi1(), order);
        // Monomials invert classically.
        let u = series(e(&[1, 0]), order);
        let w = s.star_invert(&u).unwrap();
        assert_eq!(w, series(e(&[-1, 0]), order));
        // 1 + L x on the plane: geometric series.
        let model = Model::Poly(2);
        let sp = moyal_on(model, &pi1(), order).unwrap();
        let x = AlgebraElement::variable(model, 1).unwrap();
        let mut u = FormalSeries::one(model, order);
        u.set_coeff(1, x.clone());
        let w = sp.star_invert(&u).unwrap();
        let mut expected = FormalSeries::zero(model, order);
        let mut pow = AlgebraElement::one(model);
        for r in 0..=order {
            let sign = if r % 2 == 0 { 1 } else { -1 };
            expected.set_coeff(r, pow.scale(&Gaussian::from_int(sign)));
            pow = pow.mul(&x);
        }
        assert_eq!(w, expected);
        // Non-units are rejected.
        let bad = series(AlgebraElement::one(t2()).add(&e(&[1, 0])), order);
        assert!(matches!(s.star_invert(&bad), Err(Error::NotAUnit(_))));
    }

    #[test]
    fn tau_of_formal_bivector_shift() {
        let order = 4;
        let model = Model::Poly(2);
        let s = moyal_on(model, &pi1(), order).unwrap();
        let b = PoissonStructure::dim2(Rat::one());
        let s_prime = moyal_formal(&[pi1(), b.clone()], order, model).unwrap();
        let tau = compute_tau(&s_prime, &s).unwrap();
        // tau = -i B(d., d.): on (x, y) this evaluates to -i.
        let x = AlgebraElement::variable(model, 1).unwrap();
        let y = AlgebraElement::variable(model, 2).unwrap();
        assert_eq!(
            tau.apply(&x, &y).unwrap(),
            AlgebraElement::scalar(model, -Gaussian::i())
        );
        // tau(s, s) = 0, and twists by id + O(L^2) do not change it.
        assert!(compute_tau(&s, &s).unwrap().is_zero());
        let t2_op = DiffOperator::partial(model, 1).unwrap().compose(
            &DiffOperator::partial(model, 2).unwrap(),
        );
        let t = Equivalence::single_stage(model, order, 2, t2_op).unwrap();
        let twisted = twist_by_equivalence(&s, &t).unwrap();
        assert!(compute_tau(&twisted, &s).unwrap().is_zero());
    }

    #[test]
    fn twist_preserves_structure() {
        let order = 5;
        let s = moyal(&pi1(), order);
        let t_op = DiffOperator::partial(t2(), 1)
            .unwrap()
            .compose(&DiffOperator::partial(t2(), 1).unwrap());
        let t = Equivalence::single_stage(t2(), order, 1, t_op).unwrap();
        let twisted = twist_by_equivalence(&s, &t).unwrap();
        assert!(twisted.check_associativity().passed());
        assert!(twisted.check_unitality().passed());
        assert_eq!(twisted.extract_poisson().unwrap(), pi1());
        // Twisting back with the inverse restores the product.
        let back = twist_by_equivalence(&twisted, &t.inverse()).unwrap();
        assert_eq!(back, s);
        // Identity twist is a no-op.
        let id = Equivalence::identity(t2(), order);
        assert_eq!(twist_by_equivalence(&s, &id).unwrap(), s);
        // T is a self-equivalence of the twisted product pair semantics:
        // T: (A,s) -> (A, twisted) is an isomorphism, checked directly.
        let ops = t.to_opseries();
        let f = series(e(&[1, 0]), order);
        let g = series(e(&[0, 1]), order);
        let lhs = ops.apply(&s.multiply(&f, &g).unwrap()).unwrap();
        let rhs = twisted
            .multiply(&ops.apply(&f).unwrap(), &ops.apply(&g).unwrap())
            .unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn second_order_twist_shifts_c2_symmetrically() {
        let order = 4;
        let s = moyal(&pi1(), order);
        let t2_op = DiffOperator::partial(t2(), 1)
            .unwrap()
            .compose(&DiffOperator::partial(t2(), 2).unwrap());
        let t = Equivalence::single_stage(t2(), order, 2, t2_op).unwrap();
        let twisted = twist_by_equivalence(&s, &t).unwrap();
        assert_eq!(twisted.cochain(1), s.cochain(1));
        let shift = twisted.cochain(2).sub(s.cochain(2));
        assert!(!shift.is_zero());
        assert!(shift.antisymmetrize().is_zero());
    }

    #[test]
    fn pullback_by_exponent_swap_flips_bracket() {
        let order = 4;
        let s = moyal(&pi1(), order);
        let swap = AutomorphismSeed::TorusExponentMap(vec![vec![0, 1], vec![1, 0]]);
        let hat = pullback_by_automorphism(&s, &swap).unwrap();
        assert!(hat.check_associativity().passed());
        assert_eq!(hat.extract_poisson().unwrap(), PoissonStructure::dim2(-Rat::one()));
        // Identity seed is a no-op; psi then psi^{-1} returns the product.
        let id = AutomorphismSeed::TorusExponentMap(vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(pullback_by_automorphism(&s, &id).unwrap(), s);
        let back = pullback_by_automorphism(&hat, &swap.inverse().unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn pullback_is_a_right_action() {
        let order = 3;
        let s = moyal(&pi1(), order);
        let a = AutomorphismSeed::TorusExponentMap(vec![vec![1, 1], vec![0, 1]]);
        let b = AutomorphismSeed::TorusExponentMap(vec![vec![0, 1], vec![1, 0]]);
        let lhs = pullback_by_automorphism(&pullback_by_automorphism(&s, &a).unwrap(), &b).unwrap();
        let rhs = pullback_by_automorphism(&s, &a.compose(&b).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn opseries_exp_log_round_trip() {
        let order = 5;
        let model = t2();
        let mut x = OpSeries::zero(model, order);
        x.set_stage(1, DiffOperator::partial(model, 2).unwrap());
        x.set_stage(2, DiffOperator::multiplication_by(e(&[1, 0])));
        let t = x.exp();
        assert_eq!(t.log(), x);
    }

    #[test]
    fn composed_exponentials_obey_the_commutator_series() {
        // Independent oracle for exp/log/compose: to order four,
        // log(e^A e^B) = A + B + [A,B]/2 + ([A,[A,B]] + [B,[B,A]])/12
        //               - [B,[A,[A,B]]]/24.
        let order = 4;
        let model = t2();
        let bracket = |x: &OpSeries, y: &OpSeries| x.compose(y).sub(&y.compose(x));
        let mut a = OpSeries::zero(model, order);
        a.set_stage(1, DiffOperator::partial(model, 1).unwrap());
        a.set_stage(2, DiffOperator::multiplication_by(e(&[0, 1])));
        let mut b = OpSeries::zero(model, order);
        b.set_stage(1, DiffOperator::multiplication_by(e(&[1, 0])));
        b.set_stage(2, DiffOperator::partial(model, 2).unwrap());
        let lhs = a.exp().compose(&b.exp()).log();
        let ab = bracket(&a, &b);
        let half = Gaussian::ratio(1, 2);
        let twelfth = Gaussian::ratio(1, 12);
        let neg24 = Gaussian::ratio(-1, 24);
        let rhs = a
            .add(&b)
            .add(&ab.scale(&half))
            .add(&bracket(&a, &ab).scale(&twelfth))
            .add(&bracket(&b, &bracket(&b, &a)).scale(&twelfth))
            .add(&bracket(&b, &bracket(&a, &ab)).scale(&neg24));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn truncation_boundaries() {
        // Order zero: the product is the plain one; conjugation is trivial.
        let s0 = moyal(&pi1(), 0);
        let f = series(e(&[1, 0]), 0);
        let g = series(e(&[0, 1]), 0);
        assert_eq!(s0.multiply(&f, &g).unwrap(), series(e(&[1, 1]), 0));
        assert!(s0.check_associativity().passed());
        let ad = OpSeries::adjoint(&s0, &f).unwrap();
        assert_eq!(ad, OpSeries::identity(t2(), 0));
        // Order one: the commutator sees exactly the bracket.
        let s1 = moyal(&pi1(), 1);
        let comm = s1.commutator(&series(e(&[1, 0]), 1), &series(e(&[0, 1]), 1)).unwrap();
        assert!(comm.coeff(0).is_zero());
        assert_eq!(
            comm.coeff(1),
            &e(&[1, 1]).scale(&(-Gaussian::i())) // i * {E[1,0], E[0,1]}
        );
        assert!(compute_tau(&s1, &s1).is_err()); // needs order two
    }

    #[test]
    fn four_torus_products() {
        let order = 3;
        let pi = PoissonStructure::standard_symplectic(4).unwrap();
        let s = moyal(&pi, order);
        assert!(s.check_associativity().passed());
        assert!(s.check_unitality().passed());
        assert_eq!(s.extract_poisson().unwrap(), pi);
        let f = FormalSeries::from_element(AlgebraElement::trig_mode(4, &[1, 0, 0, 0]).unwrap(), order);
        let g = FormalSeries::from_element(AlgebraElement::trig_mode(4, &[0, 1, 0, 0]).unwrap(), order);
        // Pairing((1,0,0,0),(0,1,0,0)) = 1: the same phase law as the 2-torus.
        let prod = s.multiply(&f, &g).unwrap();
        let mono = AlgebraElement::trig_mode(4, &[1, 1, 0, 0]).unwrap();
        for r in 0..=order {
            let c = Gaussian::imag_ratio(-1, 2)
                .pow(r as u32)
                .scale_rat(&(Rat::one() / factorial(r)));
            assert_eq!(prod.coeff(r), &mono.scale(&c));
        }
    }

    #[test]
    fn equivalence_inverse_composes_to_identity() {
        let order = 5;
        let model = t2();
        let mut stages = vec![DiffOperator::zero(model); order];
        stages[0] = DiffOperator::partial(model, 1).unwrap();
        stages[2] = DiffOperator::partial(model, 2)
            .unwrap()
            .compose(&DiffOperator::partial(model, 2).unwrap());
        let t = Equivalence::new(model, order, stages).unwrap();
        let id = t.compose(&t.inverse());
        assert_eq!(id, Equivalence::identity(model, order));
    }

    #[test]
    fn plane_linear_pullback() {
        let order = 3;
        let model = Model::Poly(2);
        let s = moyal_on(model, &pi1(), order).unwrap();
        // x1 -> x1 + x2, x2 -> x2 preserves pi12 = 1 (det 1, symplectic).
        let a = AutomorphismSeed::PlaneLinear(vec![
            vec![Rat::one(), Rat::one()],
            vec![Rat::zero(), Rat::one()],
        ]);
        let hat = pullback_by_automorphism(&s, &a).unwrap();
        assert!(hat.check_associativity().passed());
        assert_eq!(hat.extract_poisson().unwrap(), pi1());
    }

    #[test]
    fn rejects_constant_leaking_cochains() {
        let model = t2();
        let mut bad = BidiffCochain::zero(model);
        bad.add_term(AlgebraElement::one(model), vec![0, 0], vec![1, 0]);
        let r = StarProduct::new(model, pi1(), 1, vec![bad]);
        assert!(matches!(r, Err(Error::Invalid(_))));
    }

    #[test]
    fn adjoint_operator_matches_direct_conjugation() {
        let order = 6;
        let s = moyal(&pi1(), order);
        let u = series(e(&[1, 0]), order);
        let ad = OpSeries::adjoint(&s, &u).unwrap();
        let f = series(e(&[0, 1]), order);
        let direct = s
            .multiply(&s.multiply(&u, &f).unwrap(), &s.star_invert(&u).unwrap())
            .unwrap();
        assert_eq!(ad.apply(&f).unwrap(), direct);
        // Oracle: Ad(E[1,0])(E[0,1]) = e^{-iL} E[0,1].
        let mut expected = FormalSeries::zero(t2(), order);
        for r in 0..=order {
            let c = Gaussian::imag_ratio(-1, 1)
                .pow(r as u32)
                .scale_rat(&(Rat::one() / factorial(r)));
            expected.set_coeff(r, e(&[0, 1]).scale(&c));
        }
        assert_eq!(ad.apply(&f).unwrap(), expected);
    }

    #[test]
    fn first_order_stage_of_equivalences() {
        let order = 5;
        let s = moyal(&pi1(), order);
        // Identity: zero stage.
        assert!(equivalence_first_order(&Equivalence::identity(t2(), order)).is_zero());
        // Conjugation by E[1,0]: the stage is i times the integral
        // derivation i d2, that is -d2; still a Poisson field.
        let u = series(e(&[1, 0]), order);
        let ad = OpSeries::adjoint(&s, &u).unwrap();
        let t = Equivalence::from_opseries(&ad).unwrap();
        let t1 = equivalence_first_order(&t);
        let integral = DiffOperator::constant_field(t2(), &[Gaussian::zero(), Gaussian::i()])
            .unwrap();
        assert_eq!(t1, integral.scale(&Gaussian::i()));
        assert_eq!(t1, DiffOperator::partial(t2(), 2).unwrap().neg());
        assert!(crate::algebra::is_poisson_vector_field(&t1, &pi1()).unwrap().is_poisson);
        // Exponential of a shifted constant field: the stage is the field.
        let d2 = DiffOperator::partial(t2(), 2).unwrap();
        let mut gen = OpSeries::zero(t2(), order);
        gen.set_stage(1, d2.clone());
        let exp_t = Equivalence::from_opseries(&gen.exp()).unwrap();
        assert_eq!(equivalence_first_order(&exp_t), d2);
    }

    #[test]
    fn formal_series_display() {
        let order = 2;
        let mut f = FormalSeries::zero(t2(), order);
        f.set_coeff(0, e(&[1, 0]));
        f.set_coeff(1, AlgebraElement::scalar(t2(), Gaussian::imag_ratio(1, 2)));
        assert_eq!(f.to_string(), "E[1,0] + ((1/2*i))*L");
        assert_eq!(rat_int(0), Rat::zero());
    }
}
