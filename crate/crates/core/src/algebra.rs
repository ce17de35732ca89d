//! Coefficient algebras on the flat models: polynomials on `R^n` and
//! trigonometric polynomials on the torus `T^m`.
//!
//! Elements are finite maps from exponent keys to Gaussian rationals. On the
//! torus the key `k` stands for the monomial `E[k] = e^{i k.theta}`; on the
//! plane a non-negative key is the monomial `x^k`. Multiplication adds keys
//! in both models, which keeps the two rings behind a single term store.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::scalar::{rat_int, Gaussian, Rat};

/// Which flat model an element lives on.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum Model {
    /// Polynomials on `R^n`, variables `x1..xn`.
    Poly(usize),
    /// Trigonometric polynomials on `T^m`, monomials `E[k]`, `k` integral.
    Trig(usize),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Poly(n) | Model::Trig(n) => *n,
        }
    }

    pub fn is_trig(&self) -> bool {
        matches!(self, Model::Trig(_))
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Poly(n) => write!(f, "poly({n})"),
            Model::Trig(m) => write!(f, "torus({m})"),
        }
    }
}

/// Exponent key of a monomial. Entries may be negative on the torus only.
pub type Exponent = Vec<i64>;

/// Multi-index `alpha` of a partial-derivative monomial `d^alpha`.
pub type MultiIndex = Vec<u32>;

pub fn multi_index_order(alpha: &[u32]) -> u32 {
    alpha.iter().sum()
}

/// An element of the coefficient algebra: a finite Gaussian-rational
/// combination of monomials. Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AlgebraElement {
    model: Model,
    terms: BTreeMap<Exponent, Gaussian>,
}

impl AlgebraElement {
    pub fn zero(model: Model) -> Self {
        AlgebraElement { model, terms: BTreeMap::new() }
    }

    pub fn one(model: Model) -> Self {
        Self::scalar(model, Gaussian::one())
    }

    pub fn scalar(model: Model, c: Gaussian) -> Self {
        let mut e = Self::zero(model);
        if !c.is_zero() {
            e.terms.insert(vec![0; model.dim()], c);
        }
        e
    }

    /// Single monomial `c * x^k` resp. `c * E[k]`.
    pub fn monomial(model: Model, key: Exponent, c: Gaussian) -> Result<Self> {
        if key.len() != model.dim() {
            return Err(Error::ModelMismatch(format!(
                "exponent length {} does not match dimension {}",
                key.len(),
                model.dim()
            )));
        }
        if let Model::Poly(_) = model {
            if key.iter().any(|&e| e < 0) {
                return Err(Error::Invalid("negative exponent on the plane model".into()));
            }
        }
        let mut e = Self::zero(model);
        if !c.is_zero() {
            e.terms.insert(key, c);
        }
        Ok(e)
    }

    /// The coordinate `x_j` (1-based) on the plane model.
    pub fn variable(model: Model, j: usize) -> Result<Self> {
        match model {
            Model::Poly(n) => {
                if j == 0 || j > n {
                    return Err(Error::IndexOutOfRange { index: j, dim: n });
                }
                let mut key = vec![0; n];
                key[j - 1] = 1;
                Self::monomial(model, key, Gaussian::one())
            }
            Model::Trig(_) => Err(Error::UnsupportedModel(
                "coordinate monomials are plane-model only".into(),
            )),
        }
    }

    /// The torus monomial `E[k]`.
    pub fn trig_mode(m: usize, k: &[i64]) -> Result<Self> {
        Self::monomial(Model::Trig(m), k.to_vec(), Gaussian::one())
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &Gaussian)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .get(&vec![0; self.model.dim()])
                .map(|c| c.is_one())
                .unwrap_or(false)
    }

    pub fn coefficient(&self, key: &[i64]) -> Gaussian {
        self.terms.get(key).cloned().unwrap_or_else(Gaussian::zero)
    }

    /// Coefficient of the zero exponent key.
    pub fn constant_part(&self) -> Gaussian {
        self.coefficient(&vec![0; self.model.dim()])
    }

    /// The element minus its constant part.
    pub fn nonconstant_part(&self) -> AlgebraElement {
        let mut e = self.clone();
        e.terms.remove(&vec![0; self.model.dim()]);
        e
    }

    pub fn add_term(&mut self, key: Exponent, c: &Gaussian) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(key);
        match entry {
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

    pub fn add(&self, rhs: &AlgebraElement) -> AlgebraElement {
        assert_eq!(self.model, rhs.model, "algebra model mismatch in add");
        let mut out = self.clone();
        for (k, c) in &rhs.terms {
            out.add_term(k.clone(), c);
        }
        out
    }

    pub fn sub(&self, rhs: &AlgebraElement) -> AlgebraElement {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> AlgebraElement {
        let mut out = Self::zero(self.model);
        for (k, c) in &self.terms {
            out.terms.insert(k.clone(), -c);
        }
        out
    }

    pub fn scale(&self, c: &Gaussian) -> AlgebraElement {
        let mut out = Self::zero(self.model);
        if c.is_zero() {
            return out;
        }
        for (k, v) in &self.terms {
            let p = v * c;
            if !p.is_zero() {
                out.terms.insert(k.clone(), p);
            }
        }
        out
    }

    /// Commutative product; monomial keys add in both models.
    pub fn mul(&self, rhs: &AlgebraElement) -> AlgebraElement {
        assert_eq!(self.model, rhs.model, "algebra model mismatch in mul");
        let mut out = Self::zero(self.model);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &rhs.terms {
                let key: Exponent = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                out.add_term(key, &(ca * cb));
            }
        }
        out
    }

    /// Partial derivative in direction `j` (1-based).
    pub fn derive(&self, j: usize) -> Result<AlgebraElement> {
        let dim = self.model.dim();
        if j == 0 || j > dim {
            return Err(Error::IndexOutOfRange { index: j, dim });
        }
        let mut out = Self::zero(self.model);
        for (k, c) in &self.terms {
            match self.model {
                Model::Trig(_) => {
                    // d_j E[k] = i k_j E[k]
                    let factor = Gaussian::i().scale_int(k[j - 1]);
                    out.add_term(k.clone(), &(c * &factor));
                }
                Model::Poly(_) => {
                    if k[j - 1] > 0 {
                        let mut key = k.clone();
                        key[j - 1] -= 1;
                        let factor = Gaussian::from_int(k[j - 1]);
                        out.add_term(key, &(c * &factor));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Iterated derivative `d^alpha`.
    pub fn derive_multi(&self, alpha: &[u32]) -> Result<AlgebraElement> {
        let mut out = self.clone();
        for (j, &reps) in alpha.iter().enumerate() {
            for _ in 0..reps {
                out = out.derive(j + 1)?;
                if out.is_zero() {
                    return Ok(out);
                }
            }
        }
        Ok(out)
    }

    /// Multiplicative inverse. Torus units are the single-monomial elements;
    /// plane units are the nonzero constants.
    pub fn invert(&self) -> Result<AlgebraElement> {
        match self.model {
            Model::Trig(_) => {
                if self.terms.len() != 1 {
                    return Err(Error::NotAUnit(format!(
                        "torus units are single monomials c*E[k]; element has {} terms",
                        self.terms.len()
                    )));
                }
                let (k, c) = self.terms.iter().next().unwrap();
                let inv = c.inverse().ok_or_else(|| Error::NotAUnit("zero coefficient".into()))?;
                let key: Exponent = k.iter().map(|e| -e).collect();
                AlgebraElement::monomial(self.model, key, inv)
            }
            Model::Poly(_) => {
                let c = self.constant_part();
                if self.terms.len() != 1 || c.is_zero() || self.nonconstant_part().num_terms() > 0 {
                    return Err(Error::NotAUnit(
                        "plane units are the nonzero constants".into(),
                    ));
                }
                Ok(AlgebraElement::scalar(self.model, c.inverse().unwrap()))
            }
        }
    }

    /// Total degree of the largest monomial, by `sum |k_j|`.
    pub fn support_radius(&self) -> i64 {
        self.terms
            .keys()
            .map(|k| k.iter().map(|e| e.abs()).sum())
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in &self.terms {
            let mono = match self.model {
                Model::Trig(_) => {
                    if k.iter().all(|&e| e == 0) {
                        String::new()
                    } else {
                        let inner: Vec<String> = k.iter().map(|e| e.to_string()).collect();
                        format!("E[{}]", inner.join(","))
                    }
                }
                Model::Poly(_) => {
                    let mut parts = Vec::new();
                    for (j, &e) in k.iter().enumerate() {
                        if e == 1 {
                            parts.push(format!("x{}", j + 1));
                        } else if e > 1 {
                            parts.push(format!("x{}^{}", j + 1, e));
                        }
                    }
                    parts.join("*")
                }
            };
            let piece = if mono.is_empty() {
                format!("({})", c)
            } else if c.is_one() {
                mono
            } else {
                format!("({})*{}", c, mono)
            };
            if first {
                write!(f, "{}", piece)?;
                first = false;
            } else {
                write!(f, " + {}", piece)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// A constant Poisson bivector: an antisymmetric rational matrix.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PoissonStructure {
    mat: Vec<Vec<Rat>>,
}

impl PoissonStructure {
    pub fn new(mat: Vec<Vec<Rat>>) -> Result<Self> {
        let m = mat.len();
        for row in &mat {
            if row.len() != m {
                return Err(Error::Invalid("Poisson matrix must be square".into()));
            }
        }
        for i in 0..m {
            for j in 0..m {
                if mat[i][j] != -mat[j][i].clone() {
                    return Err(Error::Invalid("Poisson matrix must be antisymmetric".into()));
                }
            }
        }
        Ok(PoissonStructure { mat })
    }

    pub fn zero(m: usize) -> Self {
        PoissonStructure { mat: vec![vec![Rat::zero(); m]; m] }
    }

    /// The standard symplectic structure on dimension `2n`:
    /// `pi^{2k-1,2k} = 1`.
    pub fn standard_symplectic(m: usize) -> Result<Self> {
        if m % 2 != 0 {
            return Err(Error::Invalid("standard symplectic structure needs even dimension".into()));
        }
        let mut mat = vec![vec![Rat::zero(); m]; m];
        for k in 0..m / 2 {
            mat[2 * k][2 * k + 1] = Rat::one();
            mat[2 * k + 1][2 * k] = -Rat::one();
        }
        Ok(PoissonStructure { mat })
    }

    /// On the 2-torus or plane: `pi^{12} = q`.
    pub fn dim2(q: Rat) -> Self {
        PoissonStructure { mat: vec![vec![Rat::zero(), q.clone()], vec![-q, Rat::zero()]] }
    }

    pub fn dim(&self) -> usize {
        self.mat.len()
    }

    /// Entry `pi^{ij}`, 0-based.
    pub fn entry(&self, i: usize, j: usize) -> &Rat {
        &self.mat[i][j]
    }

    pub fn rows(&self) -> &[Vec<Rat>] {
        &self.mat
    }

    pub fn is_zero(&self) -> bool {
        self.mat.iter().all(|r| r.iter().all(|e| e.is_zero()))
    }

    pub fn scale(&self, q: &Rat) -> Self {
        PoissonStructure {
            mat: self.mat.iter().map(|r| r.iter().map(|e| e * q).collect()).collect(),
        }
    }

    pub fn add(&self, rhs: &PoissonStructure) -> Self {
        assert_eq!(self.dim(), rhs.dim());
        PoissonStructure {
            mat: self
                .mat
                .iter()
                .zip(&rhs.mat)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
        }
    }

    /// The pairing `pi(k, l) = sum pi^{ij} k_i l_j` on integer vectors.
    pub fn pairing(&self, k: &[i64], l: &[i64]) -> Rat {
        let m = self.dim();
        let mut acc = Rat::zero();
        for i in 0..m {
            if k[i] == 0 {
                continue;
            }
            for j in 0..m {
                if l[j] == 0 {
                    continue;
                }
                acc += &self.mat[i][j] * rat_int(k[i]) * rat_int(l[j]);
            }
        }
        acc
    }

    /// The row map `k -> (sum_i k_i pi^{ij})_j` over the rationals.
    pub fn row_map(&self, k: &[Rat]) -> Vec<Rat> {
        let m = self.dim();
        (0..m)
            .map(|j| (0..m).map(|i| &k[i] * &self.mat[i][j]).sum())
            .collect()
    }

    pub fn row_map_int(&self, k: &[i64]) -> Vec<Rat> {
        let kr: Vec<Rat> = k.iter().map(|&e| rat_int(e)).collect();
        self.row_map(&kr)
    }

    /// Solve `row_map(k) = w` for `k`; `None` when the matrix is degenerate
    /// or the system is inconsistent.
    pub fn solve_row_map(&self, w: &[Rat]) -> Option<Vec<Rat>> {
        // Solve k * mat = w, i.e. mat^T k = w, by Gaussian elimination.
        let m = self.dim();
        let mut a: Vec<Vec<Rat>> = (0..m)
            .map(|r| {
                let mut row: Vec<Rat> = (0..m).map(|c| self.mat[c][r].clone()).collect();
                row.push(w[r].clone());
                row
            })
            .collect();
        let mut pivot_cols = Vec::new();
        let mut rank_row = 0;
        for col in 0..m {
            let piv = (rank_row..m).find(|&r| !a[r][col].is_zero());
            let Some(piv) = piv else { continue };
            a.swap(rank_row, piv);
            let lead = a[rank_row][col].clone();
            for entry in a[rank_row].iter_mut() {
                *entry /= lead.clone();
            }
            for r in 0..m {
                if r != rank_row && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    for c in 0..=m {
                        let sub = &a[rank_row][c] * &f;
                        a[r][c] -= sub;
                    }
                }
            }
            pivot_cols.push(col);
            rank_row += 1;
        }
        for r in rank_row..m {
            if !a[r][m].is_zero() {
                return None; // inconsistent
            }
        }
        if rank_row < m {
            return None; // degenerate: refuse rather than pick a section
        }
        let mut k = vec![Rat::zero(); m];
        for (r, &col) in pivot_cols.iter().enumerate() {
            k[col] = a[r][m].clone();
        }
        Some(k)
    }

    /// Invertibility of the bivector matrix.
    pub fn is_symplectic(&self) -> bool {
        let m = self.dim();
        let w = vec![Rat::zero(); m];
        // det != 0 iff the homogeneous solve is unique; reuse the solver on a
        // basis probe instead of computing the determinant.
        if m == 0 {
            return false;
        }
        let mut probe = w;
        probe[0] = Rat::one();
        // A cheap determinant via elimination:
        let mut a = self.mat.clone();
        let mut det = Rat::one();
        for col in 0..m {
            let piv = (col..m).find(|&r| !a[r][col].is_zero());
            let Some(piv) = piv else { return false };
            if piv != col {
                a.swap(col, piv);
                det = -det;
            }
            let lead = a[col][col].clone();
            det *= lead.clone();
            for r in col + 1..m {
                if !a[r][col].is_zero() {
                    let f = &a[r][col] / &lead;
                    for c in col..m {
                        let sub = &a[col][c] * &f;
                        a[r][c] -= sub;
                    }
                }
            }
        }
        !det.is_zero()
    }
}

/// Poisson bracket of two elements: `{a,b} = sum pi^{ij} d_i a d_j b`.
pub fn poisson_bracket(
    a: &AlgebraElement,
    b: &AlgebraElement,
    pi: &PoissonStructure,
) -> Result<AlgebraElement> {
    if a.model() != b.model() {
        return Err(Error::ModelMismatch("bracket of elements on different models".into()));
    }
    if a.model().dim() != pi.dim() {
        return Err(Error::ModelMismatch(format!(
            "Poisson matrix dimension {} does not match model dimension {}",
            pi.dim(),
            a.model().dim()
        )));
    }
    let m = pi.dim();
    let mut out = AlgebraElement::zero(a.model());
    for i in 0..m {
        let da = a.derive(i + 1)?;
        if da.is_zero() {
            continue;
        }
        for j in 0..m {
            if pi.entry(i, j).is_zero() {
                continue;
            }
            let db = b.derive(j + 1)?;
            if db.is_zero() {
                continue;
            }
            let coeff = Gaussian::from_rat(pi.entry(i, j).clone());
            out = out.add(&da.mul(&db).scale(&coeff));
        }
    }
    Ok(out)
}

/// A differential operator `f -> sum coeff * d^alpha f` with algebra-element
/// coefficients. Terms are merged by multi-index; zero coefficients dropped.
#[derive(Clone, PartialEq, Eq)]
pub struct DiffOperator {
    model: Model,
    terms: BTreeMap<MultiIndex, AlgebraElement>,
}

impl DiffOperator {
    pub fn zero(model: Model) -> Self {
        DiffOperator { model, terms: BTreeMap::new() }
    }

    /// The identity operator (multiplication by 1, no derivatives).
    pub fn identity(model: Model) -> Self {
        let mut op = Self::zero(model);
        op.add_term(AlgebraElement::one(model), vec![0; model.dim()]);
        op
    }

    /// The unit derivative `d_j` (1-based).
    pub fn partial(model: Model, j: usize) -> Result<Self> {
        let dim = model.dim();
        if j == 0 || j > dim {
            return Err(Error::IndexOutOfRange { index: j, dim });
        }
        let mut alpha = vec![0; dim];
        alpha[j - 1] = 1;
        let mut op = Self::zero(model);
        op.add_term(AlgebraElement::one(model), alpha);
        Ok(op)
    }

    /// First-order field `sum_j coeffs[j] d_j`.
    pub fn field(model: Model, coeffs: Vec<AlgebraElement>) -> Result<Self> {
        let dim = model.dim();
        if coeffs.len() != dim {
            return Err(Error::ModelMismatch("field needs one coefficient per direction".into()));
        }
        let mut op = Self::zero(model);
        for (j, c) in coeffs.into_iter().enumerate() {
            let mut alpha = vec![0; dim];
            alpha[j] = 1;
            op.add_term(c, alpha);
        }
        Ok(op)
    }

    /// Constant field `sum_j c_j d_j` with scalar coefficients.
    pub fn constant_field(model: Model, coeffs: &[Gaussian]) -> Result<Self> {
        let elems = coeffs
            .iter()
            .map(|c| AlgebraElement::scalar(model, c.clone()))
            .collect();
        Self::field(model, elems)
    }

    pub fn multiplication_by(coeff: AlgebraElement) -> Self {
        let model = coeff.model();
        let mut op = Self::zero(model);
        op.add_term(coeff, vec![0; model.dim()]);
        op
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &AlgebraElement)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, coeff: AlgebraElement, alpha: MultiIndex) {
        assert_eq!(coeff.model(), self.model, "coefficient model mismatch");
        assert_eq!(alpha.len(), self.model.dim(), "multi-index length mismatch");
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(alpha) {
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

    pub fn add(&self, rhs: &DiffOperator) -> DiffOperator {
        assert_eq!(self.model, rhs.model);
        let mut out = self.clone();
        for (alpha, c) in &rhs.terms {
            out.add_term(c.clone(), alpha.clone());
        }
        out
    }

    pub fn sub(&self, rhs: &DiffOperator) -> DiffOperator {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> DiffOperator {
        let mut out = Self::zero(self.model);
        for (alpha, c) in &self.terms {
            out.terms.insert(alpha.clone(), c.neg());
        }
        out
    }

    pub fn scale(&self, c: &Gaussian) -> DiffOperator {
        let mut out = Self::zero(self.model);
        for (alpha, v) in &self.terms {
            let s = v.scale(c);
            if !s.is_zero() {
                out.terms.insert(alpha.clone(), s);
            }
        }
        out
    }

    /// Apply to an element.
    pub fn apply(&self, f: &AlgebraElement) -> Result<AlgebraElement> {
        if f.model() != self.model {
            return Err(Error::ModelMismatch("operator applied across models".into()));
        }
        let mut out = AlgebraElement::zero(self.model);
        for (alpha, c) in &self.terms {
            let df = f.derive_multi(alpha)?;
            if !df.is_zero() {
                out = out.add(&c.mul(&df));
            }
        }
        Ok(out)
    }

    /// Operator composition `self o rhs` expanded by the Leibniz rule.
    pub fn compose(&self, rhs: &DiffOperator) -> DiffOperator {
        assert_eq!(self.model, rhs.model);
        let mut out = Self::zero(self.model);
        for (alpha, ca) in &self.terms {
            for (beta, cb) in &rhs.terms {
                // d^alpha (cb * d^beta f)
                // = sum_{gamma <= alpha} binom(alpha,gamma) d^gamma cb * d^{alpha-gamma+beta} f
                for (gamma, mult) in sub_indices_with_binomials(alpha) {
                    let dcb = cb
                        .derive_multi(&gamma)
                        .expect("in-range derivative");
                    if dcb.is_zero() {
                        continue;
                    }
                    let rest: MultiIndex = alpha
                        .iter()
                        .zip(&gamma)
                        .zip(beta)
                        .map(|((a, g), b)| a - g + b)
                        .collect();
                    let coeff = ca.mul(&dcb).scale(&Gaussian::from_rat(Rat::from_integer(mult)));
                    out.add_term(coeff, rest);
                }
            }
        }
        out
    }

    /// True when no zero-order term is present (the derivation shape).
    pub fn kills_constants(&self) -> bool {
        !self.terms.contains_key(&vec![0; self.model.dim()])
    }

    /// True when every term is first order.
    pub fn is_first_order_field(&self) -> bool {
        self.terms.keys().all(|a| multi_index_order(a) == 1)
    }

    /// Coefficient of `d_j` (1-based) for first-order terms.
    pub fn field_coefficient(&self, j: usize) -> AlgebraElement {
        let mut alpha = vec![0; self.model.dim()];
        alpha[j - 1] = 1;
        self.terms
            .get(&alpha)
            .cloned()
            .unwrap_or_else(|| AlgebraElement::zero(self.model))
    }

    pub fn max_order(&self) -> u32 {
        self.terms.keys().map(|a| multi_index_order(a)).max().unwrap_or(0)
    }
}

impl fmt::Display for DiffOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (alpha, c) in &self.terms {
            let mut ds = String::new();
            for (j, &e) in alpha.iter().enumerate() {
                for _ in 0..e {
                    ds.push_str(&format!("d{}", j + 1));
                }
            }
            let piece = if ds.is_empty() {
                format!("({})", c)
            } else {
                format!("({})*{}", c, ds)
            };
            if first {
                write!(f, "{}", piece)?;
                first = false;
            } else {
                write!(f, " + {}", piece)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for DiffOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// All `gamma <= alpha` together with `prod_j binom(alpha_j, gamma_j)`.
pub fn sub_indices_with_binomials(alpha: &[u32]) -> Vec<(MultiIndex, num_bigint::BigInt)> {
    use crate::scalar::binomial;
    let mut acc: Vec<(MultiIndex, num_bigint::BigInt)> =
        vec![(Vec::new(), num_bigint::BigInt::from(1))];
    for &a in alpha {
        let mut next = Vec::with_capacity(acc.len() * (a as usize + 1));
        for (prefix, mult) in &acc {
            for g in 0..=a {
                let mut p = prefix.clone();
                p.push(g);
                next.push((p, mult * binomial(a as u64, g as u64)));
            }
        }
        acc = next;
    }
    acc
}

/// Inverse of a square rational matrix, by Gauss-Jordan elimination.
pub fn rational_inverse(a: &[Vec<Rat>]) -> Option<Vec<Vec<Rat>>> {
    let n = a.len();
    let mut aug: Vec<Vec<Rat>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            for j in 0..n {
                r.push(if i == j { Rat::one() } else { Rat::zero() });
            }
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !aug[r][col].is_zero())?;
        aug.swap(col, piv);
        let lead = aug[col][col].clone();
        for e in aug[col].iter_mut() {
            *e /= lead.clone();
        }
        for r in 0..n {
            if r != col && !aug[r][col].is_zero() {
                let f = aug[r][col].clone();
                for c in 0..2 * n {
                    let sub = &aug[col][c] * &f;
                    aug[r][c] -= sub;
                }
            }
        }
    }
    Some(aug.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Result of the Poisson-compatibility test of a vector field.
#[derive(Clone, Debug)]
pub struct PoissonFieldCheck {
    pub is_poisson: bool,
    /// Concrete monomial pair breaking the compatibility identity, if any.
    pub counterexample: Option<(AlgebraElement, AlgebraElement)>,
}

/// Decide whether a first-order derivation satisfies
/// `X({a,b}) = {X a, b} + {a, X b}` for all elements, by verifying the
/// identity on symbolic monomial generators.
pub fn is_poisson_vector_field(
    x: &DiffOperator,
    pi: &PoissonStructure,
) -> Result<PoissonFieldCheck> {
    use crate::sym::SymMonomial;
    if !x.kills_constants() {
        return Err(Error::Invalid("operator has an order-zero term, not a derivation".into()));
    }
    if !x.is_first_order_field() {
        return Err(Error::Invalid("operator is not a first-order field".into()));
    }
    let model = x.model();
    if model.dim() != pi.dim() {
        return Err(Error::ModelMismatch("field and bivector dimensions differ".into()));
    }
    let m = pi.dim();
    let a = SymMonomial::generator(model, 0);
    let b = SymMonomial::generator(model, 1);
    let sym_bracket = |f: &SymMonomial, g: &SymMonomial| -> SymMonomial {
        let mut acc = SymMonomial::zero(model);
        for i in 0..m {
            for j in 0..m {
                if pi.entry(i, j).is_zero() {
                    continue;
                }
                let term = f
                    .derive(i + 1)
                    .mul(&g.derive(j + 1))
                    .scale(&Gaussian::from_rat(pi.entry(i, j).clone()));
                acc = acc.add(&term);
            }
        }
        acc
    };
    let lhs = sym_bracket(&a, &b).apply_diffop(x);
    let rhs = sym_bracket(&a.apply_diffop(x), &b).add(&sym_bracket(&a, &b.apply_diffop(x)));
    let diff = lhs.sub(&rhs);
    if diff.is_zero() {
        return Ok(PoissonFieldCheck { is_poisson: true, counterexample: None });
    }
    let assignment = diff.find_counterexample().expect("nonzero residual has a witness");
    Ok(PoissonFieldCheck {
        is_poisson: false,
        counterexample: Some((
            SymMonomial::generator(model, 0).eval(&assignment),
            SymMonomial::generator(model, 1).eval(&assignment),
        )),
    })
}

/// Hamiltonian field of `h`: `f -> {f, h}`.
pub fn hamiltonian_field(h: &AlgebraElement, pi: &PoissonStructure) -> Result<DiffOperator> {
    let model = h.model();
    let m = pi.dim();
    if model.dim() != m {
        return Err(Error::ModelMismatch("Hamiltonian field dimension mismatch".into()));
    }
    // {f, h} = sum_{ij} pi^{ij} d_i f d_j h, so the d_i coefficient is
    // sum_j pi^{ij} d_j h.
    let mut coeffs = Vec::with_capacity(m);
    for i in 0..m {
        let mut c = AlgebraElement::zero(model);
        for j in 0..m {
            if pi.entry(i, j).is_zero() {
                continue;
            }
            let dh = h.derive(j + 1)?;
            c = c.add(&dh.scale(&Gaussian::from_rat(pi.entry(i, j).clone())));
        }
        coeffs.push(c);
    }
    DiffOperator::field(model, coeffs)
}
