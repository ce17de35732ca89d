//! Bimodule deformations of the trivial rank-one module: the module
//! relations, the semiclassical limit onto contravariant connections,
//! construction in the direction of a flat connection, twisting by
//! self-equivalences, and moduli data.

use crate::algebra::{AlgebraElement, DiffOperator, Model};
use crate::connections::ContravariantConnection;
use crate::derivations::lift_poisson_field;
use crate::error::{Error, Result};
use crate::formal::{twist_by_equivalence, BidiffCochain, Equivalence, StarProduct};
use crate::report::{CheckOutcome, VerificationReport};
use crate::sym::{SymMonomial, SymSeries};

/// A bimodule deformation of the trivial module: a left action of one
/// product and a right action of another on the same series space.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BimoduleDeformation {
    left_star: StarProduct,  // acts through the left cochains
    right_star: StarProduct, // acts through the right cochains
    // order-r action corrections, r = 1..=N; order zero is multiplication
    left: Vec<BidiffCochain>,  // slots (b, x)
    right: Vec<BidiffCochain>, // slots (x, a)
}

impl BimoduleDeformation {
    pub fn new(
        left_star: StarProduct,
        right_star: StarProduct,
        left: Vec<BidiffCochain>,
        right: Vec<BidiffCochain>,
    ) -> Result<Self> {
        let model = right_star.model();
        let order = right_star.order();
        if left_star.model() != model || left_star.order() != order {
            return Err(Error::ModelMismatch("products live on different models".into()));
        }
        if left.len() != order || right.len() != order {
            return Err(Error::Invalid(format!("expected {order} action cochains per side")));
        }
        for c in left.iter().chain(right.iter()) {
            if c.model() != model {
                return Err(Error::ModelMismatch("action cochain model differs".into()));
            }
        }
        // The unit of each algebra must act as the identity: the algebra
        // slot of every correction has to be differentiated.
        for (r, c) in left.iter().enumerate() {
            if c.terms().any(|((l, _), _)| crate::algebra::multi_index_order(l) == 0) {
                return Err(Error::Invalid(format!(
                    "left action correction {} does not kill constants in the algebra slot",
                    r + 1
                )));
            }
        }
        for (r, c) in right.iter().enumerate() {
            if c.terms().any(|((_, rr), _)| crate::algebra::multi_index_order(rr) == 0) {
                return Err(Error::Invalid(format!(
                    "right action correction {} does not kill constants in the algebra slot",
                    r + 1
                )));
            }
        }
        Ok(BimoduleDeformation { left_star, right_star, left, right })
    }

    /// The regular bimodule of a product: both actions are the product.
    pub fn regular(s: &StarProduct) -> Self {
        let order = s.order();
        let left = (1..=order).map(|r| s.cochain(r).clone()).collect();
        let right = (1..=order).map(|r| s.cochain(r).clone()).collect();
        BimoduleDeformation { left_star: s.clone(), right_star: s.clone(), left, right }
    }

    pub fn model(&self) -> Model {
        self.right_star.model()
    }

    pub fn order(&self) -> usize {
        self.right_star.order()
    }

    pub fn left_star(&self) -> &StarProduct {
        &self.left_star
    }

    pub fn right_star(&self) -> &StarProduct {
        &self.right_star
    }

    pub fn left_cochain(&self, r: usize) -> &BidiffCochain {
        &self.left[r - 1]
    }

    pub fn right_cochain(&self, r: usize) -> &BidiffCochain {
        &self.right[r - 1]
    }

    /// Replace one right-action correction without validation; used to build
    /// deliberately broken modules in reports and tests.
    pub fn with_right_cochain(mut self, r: usize, c: BidiffCochain) -> Self {
        self.right[r - 1] = c;
        self
    }

    fn act_left_sym(&self, b: &SymSeries, x: &SymSeries) -> SymSeries {
        let model = self.model();
        let order = self.order();
        let mut out = SymSeries::zero(model, order);
        for n in 0..=order {
            for r in 0..=n {
                for p in 0..=n - r {
                    let q = n - r - p;
                    if b.coeffs[p].is_zero() || x.coeffs[q].is_zero() {
                        continue;
                    }
                    let term = if r == 0 {
                        b.coeffs[p].mul(&x.coeffs[q])
                    } else {
                        self.left[r - 1].apply_sym(&b.coeffs[p], &x.coeffs[q])
                    };
                    out.coeffs[n] = out.coeffs[n].add(&term);
                }
            }
        }
        out
    }

    fn act_right_sym(&self, x: &SymSeries, a: &SymSeries) -> SymSeries {
        let model = self.model();
        let order = self.order();
        let mut out = SymSeries::zero(model, order);
        for n in 0..=order {
            for r in 0..=n {
                for p in 0..=n - r {
                    let q = n - r - p;
                    if x.coeffs[p].is_zero() || a.coeffs[q].is_zero() {
                        continue;
                    }
                    let term = if r == 0 {
                        x.coeffs[p].mul(&a.coeffs[q])
                    } else {
                        self.right[r - 1].apply_sym(&x.coeffs[p], &a.coeffs[q])
                    };
                    out.coeffs[n] = out.coeffs[n].add(&term);
                }
            }
        }
        out
    }

    /// Verify the three bimodule relations symbolically to the truncation
    /// order: associativity of the left action over its product, of the
    /// right action over its product, and the commutation of the actions.
    pub fn check_relations(&self) -> VerificationReport {
        let model = self.model();
        let order = self.order();
        let a1 = SymSeries::from_monomial(SymMonomial::generator(model, 0), order);
        let a2 = SymSeries::from_monomial(SymMonomial::generator(model, 1), order);
        let x = SymSeries::from_monomial(SymMonomial::generator(model, 2), order);
        let mut report = VerificationReport::new();

        let lhs1 = self.act_left_sym(&self.left_star.multiply_sym(&a1, &a2), &x);
        let rhs1 = self.act_left_sym(&a1, &self.act_left_sym(&a2, &x));
        report.push("left action is associative", outcome3(model, lhs1.sub(&rhs1)));

        let lhs2 = self.act_right_sym(&x, &self.right_star.multiply_sym(&a1, &a2));
        let rhs2 = self.act_right_sym(&self.act_right_sym(&x, &a1), &a2);
        report.push("right action is associative", outcome3(model, lhs2.sub(&rhs2)));

        let lhs3 = self.act_right_sym(&self.act_left_sym(&a1, &x), &a2);
        let rhs3 = self.act_left_sym(&a1, &self.act_right_sym(&x, &a2));
        report.push("actions commute", outcome3(model, lhs3.sub(&rhs3)));
        report
    }
}

fn outcome3(model: Model, diff: SymSeries) -> CheckOutcome {
    match diff.first_nonzero_order() {
        None => CheckOutcome::Pass,
        Some(order) => {
            let residual_sym = &diff.coeffs[order];
            let assignment = residual_sym.find_counterexample().unwrap();
            CheckOutcome::Fail {
                order,
                witnesses: vec![
                    SymMonomial::generator(model, 0).eval(&assignment),
                    SymMonomial::generator(model, 1).eval(&assignment),
                    SymMonomial::generator(model, 2).eval(&assignment),
                ],
                residual: residual_sym.eval(&assignment),
            }
        }
    }
}

/// The semiclassical limit of a bimodule deformation: the contravariant
/// connection whose bracket part comes from the shared first-order cochain
/// and whose shift field is the first-order deviation of the actions,
/// oriented so the regular bimodule maps to the canonical connection.
pub fn semiclassical_limit(b: &BimoduleDeformation) -> Result<ContravariantConnection> {
    if b.left_star.cochain(1) != b.right_star.cochain(1) {
        return Err(Error::FirstOrderMismatch(
            "semiclassical limit needs matching first-order cochains".into(),
        ));
    }
    let model = b.model();
    // Deviations from the regular actions, both written in (a, x) slots.
    let dev_right = b.right_cochain(1).sub(b.right_star.cochain(1)).transpose();
    let dev_left = b.left_cochain(1).sub(b.left_star.cochain(1));
    let shift = dev_right.sub(&dev_left);
    // The shift must be multiplication in the module slot: alpha(a) * x.
    let mut alpha = DiffOperator::zero(model);
    for ((l, r), c) in shift.terms() {
        if crate::algebra::multi_index_order(r) != 0 {
            return Err(Error::Invalid(
                "first-order deviation differentiates the module slot; not a connection".into(),
            ));
        }
        alpha.add_term(c.clone(), l.clone());
    }
    let pi = b.right_star.extract_poisson()?;
    let connection = ContravariantConnection::new(pi, alpha)?;
    let axioms = connection.check_axioms();
    if !axioms.passed() {
        return Err(Error::Invalid(format!(
            "first-order deviation is not a connection shift: {}",
            axioms.first_failure().map(|(l, _)| l.as_str()).unwrap_or("axiom failure")
        )));
    }
    Ok(connection)
}

/// Quantize a flat contravariant connection into a bimodule deformation:
/// left action of the product itself, right action precomposed with the
/// exponential of the lifted shift field,
/// `x . a = x * exp(L rho(alpha))(a)`.
pub fn deform_in_direction(
    s: &StarProduct,
    d: &ContravariantConnection,
) -> Result<BimoduleDeformation> {
    if d.model() != s.model() {
        return Err(Error::ModelMismatch("connection model differs from product".into()));
    }
    if d.poisson() != s.poisson() {
        return Err(Error::ModelMismatch("connection bivector differs from product".into()));
    }
    let lift = lift_poisson_field(s, d.alpha()).map_err(|e| match e {
        Error::NotPoisson(m) => Error::NotQuantizable(format!("shift field is not Poisson: {m}")),
        Error::NotDecomposable(m) => Error::NotQuantizable(m),
        other => other,
    })?;
    let theta = lift.opseries().shift(1).exp();
    let order = s.order();
    let model = s.model();
    let mut right = Vec::with_capacity(order);
    for n in 1..=order {
        // R_n(x, a) = sum_{p+q=n} C_p(x, Theta_q(a))
        let mut acc = BidiffCochain::zero(model);
        for p in 0..=n {
            let q = n - p;
            let base = if p == 0 {
                let mut c = BidiffCochain::zero(model);
                c.add_term(AlgebraElement::one(model), vec![0; model.dim()], vec![0; model.dim()]);
                c
            } else {
                s.cochain(p).clone()
            };
            let term = base.precompose_right(theta.stage(q));
            acc = acc.add(&term);
        }
        right.push(acc);
    }
    let left = (1..=order).map(|r| s.cochain(r).clone()).collect();
    BimoduleDeformation::new(s.clone(), s.clone(), left, right)
}

/// Precompose the left action with a self-equivalence of the left product:
/// `b .' x  becomes  (T b) .' x`. The semiclassical limit shifts by the
/// negated first-order stage of the equivalence.
pub fn twist_bimodule(b: &BimoduleDeformation, t: &Equivalence) -> Result<BimoduleDeformation> {
    if t.model() != b.model() || t.order() != b.order() {
        return Err(Error::ModelMismatch("equivalence does not match bimodule".into()));
    }
    let self_check = t.check_self_equivalence(&b.left_star);
    if !self_check.passed() {
        return Err(Error::NotAnEquivalence(format!("{self_check}")));
    }
    let order = b.order();
    let model = b.model();
    let t_ops = t.to_opseries();
    let mut left = Vec::with_capacity(order);
    for n in 1..=order {
        // R'_n(a, x) = sum_{p+q=n} R'_p(T_q a, x)
        let mut acc = BidiffCochain::zero(model);
        for p in 0..=n {
            let q = n - p;
            let base = if p == 0 {
                let mut c = BidiffCochain::zero(model);
                c.add_term(AlgebraElement::one(model), vec![0; model.dim()], vec![0; model.dim()]);
                c
            } else {
                b.left[p - 1].clone()
            };
            acc = acc.add(&base.precompose_left(t_ops.stage(q)));
        }
        left.push(acc);
    }
    BimoduleDeformation::new(b.left_star.clone(), b.right_star.clone(), left, b.right.clone())
}

/// A bimodule between an equivalence-twist of the product and the product:
/// the left action is `b .' x = (T b) * x` over the pulled-back product.
/// Realizes the bimodules connecting equivalent deformations.
pub fn bimodule_across_twist(s: &StarProduct, t: &Equivalence) -> Result<BimoduleDeformation> {
    let left_star = twist_by_equivalence(s, &t.inverse())?;
    let order = s.order();
    let model = s.model();
    let t_ops = t.to_opseries();
    let mut left = Vec::with_capacity(order);
    for n in 1..=order {
        let mut acc = BidiffCochain::zero(model);
        for p in 0..=n {
            let q = n - p;
            let base = if p == 0 {
                let mut c = BidiffCochain::zero(model);
                c.add_term(AlgebraElement::one(model), vec![0; model.dim()], vec![0; model.dim()]);
                c
            } else {
                s.cochain(p).clone()
            };
            acc = acc.add(&base.precompose_left(t_ops.stage(q)));
        }
        left.push(acc);
    }
    let right = (1..=order).map(|r| s.cochain(r).clone()).collect();
    BimoduleDeformation::new(left_star, s.clone(), left, right)
}

/// Moduli data for bimodule deformations in a fixed direction: the per-order
/// dimension of the classifying space, with the order-zero lattice rank
/// present only for kernel-type descriptors.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ModuliDescriptor {
    pub order: usize,
    pub per_order_dim: usize,
    pub lattice_rank: Option<usize>,
}

/// Moduli of bimodule deformations in the direction of any fixed flat
/// connection: per-order dimension equals the rank of the harmonic classes
/// (the torus dimension; zero on the plane). Independent of the direction.
pub fn moduli_descriptor(s: &StarProduct) -> Result<ModuliDescriptor> {
    match s.model() {
        Model::Trig(m) => {
            if !s.poisson().is_symplectic() {
                return Err(Error::UnsupportedModel(
                    "moduli need an invertible bivector on the torus".into(),
                ));
            }
            Ok(ModuliDescriptor { order: s.order(), per_order_dim: m, lattice_rank: None })
        }
        Model::Poly(_) => {
            Ok(ModuliDescriptor { order: s.order(), per_order_dim: 0, lattice_rank: None })
        }
    }
}
