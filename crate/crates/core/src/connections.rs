//! Contravariant connections on the trivial rank-one module: axioms,
//! curvature, integral derivations and their unit witnesses, and the
//! classification of flat connections by harmonic cosets.
//!
//! Every connection here has the shape `D(a, x) = {a, x} + alpha(a) x` for a
//! differential operator `alpha`; the canonical connection is `alpha = 0`.

use num_traits::Zero;

use crate::algebra::{
    is_poisson_vector_field, AlgebraElement, DiffOperator, Model, PoissonStructure,
};
use crate::error::{Error, Result};
use crate::formal::BidiffCochain;
use crate::report::{CheckOutcome, VerificationReport};
use crate::scalar::{Gaussian, Rat};
use crate::sym::SymMonomial;

/// The curvature of a connection, an antisymmetric bidifferential map.
pub type CurvatureMap = BidiffCochain;

/// A contravariant connection on the trivial module:
/// `D(a, x) = {a, x} + alpha(a) x`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ContravariantConnection {
    pi: PoissonStructure,
    alpha: DiffOperator,
}

impl ContravariantConnection {
    pub fn new(pi: PoissonStructure, alpha: DiffOperator) -> Result<Self> {
        if pi.dim() != alpha.model().dim() {
            return Err(Error::ModelMismatch("bivector and field dimensions differ".into()));
        }
        Ok(ContravariantConnection { pi, alpha })
    }

    /// The canonical flat connection `D(a, x) = {a, x}`.
    pub fn canonical(model: Model, pi: PoissonStructure) -> Result<Self> {
        Self::new(pi, DiffOperator::zero(model))
    }

    pub fn model(&self) -> Model {
        self.alpha.model()
    }

    pub fn poisson(&self) -> &PoissonStructure {
        &self.pi
    }

    /// The difference to the canonical connection.
    pub fn alpha(&self) -> &DiffOperator {
        &self.alpha
    }

    /// Shift by a further operator.
    pub fn shift(&self, extra: &DiffOperator) -> ContravariantConnection {
        ContravariantConnection { pi: self.pi.clone(), alpha: self.alpha.add(extra) }
    }

    pub fn apply(&self, a: &AlgebraElement, x: &AlgebraElement) -> Result<AlgebraElement> {
        let bracket = crate::algebra::poisson_bracket(a, x, &self.pi)?;
        Ok(bracket.add(&self.alpha.apply(a)?.mul(x)))
    }

    /// Verify the two connection axioms symbolically:
    /// `D(ab, x) = D(a,x) b + D(b,x) a` and `D(a, bx) = b D(a,x) + {a,b} x`.
    pub fn check_axioms(&self) -> VerificationReport {
        let model = self.model();
        let m = self.pi.dim();
        let a = SymMonomial::generator(model, 0);
        let b = SymMonomial::generator(model, 1);
        let x = SymMonomial::generator(model, 2);
        let bracket = |f: &SymMonomial, g: &SymMonomial| -> SymMonomial {
            let mut acc = SymMonomial::zero(model);
            for i in 0..m {
                for j in 0..m {
                    if self.pi.entry(i, j).is_zero() {
                        continue;
                    }
                    acc = acc.add(
                        &f.derive(i + 1)
                            .mul(&g.derive(j + 1))
                            .scale(&Gaussian::from_rat(self.pi.entry(i, j).clone())),
                    );
                }
            }
            acc
        };
        let d = |f: &SymMonomial, y: &SymMonomial| -> SymMonomial {
            bracket(f, y).add(&f.apply_diffop(&self.alpha).mul(y))
        };
        let mut report = VerificationReport::new();

        let ab = a.mul(&b);
        let lhs1 = d(&ab, &x);
        let rhs1 = d(&a, &x).mul(&b).add(&d(&b, &x).mul(&a));
        report.push("product rule in the bracket slot", outcome_from(model, lhs1.sub(&rhs1)));

        let bx = b.mul(&x);
        let lhs2 = d(&a, &bx);
        let rhs2 = b.mul(&d(&a, &x)).add(&bracket(&a, &b).mul(&x));
        report.push("module rule in the element slot", outcome_from(model, lhs2.sub(&rhs2)));
        report
    }

    /// The curvature `curv(a,b) = {a, alpha(b)} - {b, alpha(a)} - alpha({a,b})`
    /// as a bidifferential map; zero exactly when `alpha` is Poisson.
    pub fn curvature(&self) -> CurvatureMap {
        let model = self.model();
        let m = self.pi.dim();
        let mut bracket = BidiffCochain::zero(model);
        for i in 0..m {
            for j in 0..m {
                if self.pi.entry(i, j).is_zero() {
                    continue;
                }
                let mut ei = vec![0u32; m];
                ei[i] = 1;
                let mut ej = vec![0u32; m];
                ej[j] = 1;
                bracket.add_term(
                    AlgebraElement::scalar(model, Gaussian::from_rat(self.pi.entry(i, j).clone())),
                    ei,
                    ej,
                );
            }
        }
        let first = bracket.precompose_right(&self.alpha); // {a, alpha(b)}
        let second = first.transpose(); // {b, alpha(a)} in (a,b) slots
        let third = bracket.postcompose(&self.alpha); // alpha({a,b})
        first.sub(&second).sub(&third)
    }
}

fn outcome_from(model: Model, diff: SymMonomial) -> CheckOutcome {
    if diff.is_zero() {
        return CheckOutcome::Pass;
    }
    let assignment = diff.find_counterexample().unwrap();
    CheckOutcome::Fail {
        order: 0,
        witnesses: vec![
            SymMonomial::generator(model, 0).eval(&assignment),
            SymMonomial::generator(model, 1).eval(&assignment),
            SymMonomial::generator(model, 2).eval(&assignment),
        ],
        residual: diff.eval(&assignment),
    }
}

/// Poisson compatibility of the shift field; agrees with flatness of `d + alpha`.
pub fn is_poisson_derivation(alpha: &DiffOperator, pi: &PoissonStructure) -> Result<bool> {
    Ok(is_poisson_vector_field(alpha, pi)?.is_poisson)
}

/// The constant field of an integral derivation witnessed by `E[k]`:
/// `E[k]^{-1} {E[k], .} = i sum_j (k pi)_j d_j`.
pub fn integral_field(model: Model, pi: &PoissonStructure, k: &[i64]) -> Result<DiffOperator> {
    let coeffs: Vec<Gaussian> =
        pi.row_map_int(k).into_iter().map(|q| Gaussian::i().scale_rat(&q)).collect();
    DiffOperator::constant_field(model, &coeffs)
}

/// Find a unit `u = E[k]` with `u^{-1}{u, .} = alpha`. Exists exactly when
/// `alpha` is the constant field of a lattice vector `i (k pi)`; any
/// non-constant Poisson field has no unit witness on the torus.
pub fn integral_witness(
    alpha: &DiffOperator,
    pi: &PoissonStructure,
) -> Result<Option<AlgebraElement>> {
    let check = is_poisson_vector_field(alpha, pi)?;
    if !check.is_poisson {
        return Err(Error::NotPoisson("witness search needs a Poisson field".into()));
    }
    let model = alpha.model();
    if !model.is_trig() {
        return Err(Error::UnsupportedModel("unit witnesses live on the torus".into()));
    }
    let m = model.dim();
    // Must be a purely constant field.
    for j in 1..=m {
        if !alpha.field_coefficient(j).nonconstant_part().is_zero() {
            return Ok(None);
        }
    }
    let w: Vec<Gaussian> = (1..=m).map(|j| alpha.field_coefficient(j).constant_part()).collect();
    // Solve i * row_map(k) = w over the rationals and check integrality.
    let scaled: Vec<Gaussian> = w.iter().map(|c| c * &(-Gaussian::i())).collect();
    if scaled.iter().any(|c| !c.im.is_zero()) {
        return Ok(None);
    }
    let target: Vec<Rat> = scaled.iter().map(|c| c.re.clone()).collect();
    let Some(k_rat) = pi.solve_row_map(&target) else {
        return Ok(None);
    };
    if k_rat.iter().any(|q| !q.is_integer()) {
        return Ok(None);
    }
    let k: Vec<i64> = k_rat
        .iter()
        .map(|q| {
            let n = q.to_integer();
            i64::try_from(n).map_err(|_| Error::Invalid("witness exponent overflow".into()))
        })
        .collect::<Result<_>>()?;
    let u = AlgebraElement::trig_mode(m, &k)?;
    // Soundness: the witness's field must reproduce alpha exactly.
    let witness_field = integral_field(model, pi, &k)?;
    if &witness_field != alpha {
        return Err(Error::Invalid("internal: witness field mismatch".into()));
    }
    Ok(Some(u))
}

/// Classification data of a flat connection: the harmonic part of its shift
/// field reduced modulo the integral lattice, together with the Hamiltonian
/// potential of the rest. Two flat connections are isomorphic through a unit
/// exactly when their descriptors coincide.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ConnectionClass {
    /// `i * (k mod Z^m)` where the harmonic part is `i (k pi)`.
    pub harmonic_coset: Vec<Gaussian>,
    /// Zero-mean Hamiltonian potential of the non-constant part.
    pub exact_potential: AlgebraElement,
}

/// Compute the classification descriptor of `D = d + alpha` on the
/// symplectic torus.
pub fn connection_class(d: &ContravariantConnection) -> Result<ConnectionClass> {
    let model = d.model();
    if !model.is_trig() {
        return Err(Error::UnsupportedModel("classification lives on the torus".into()));
    }
    if !d.poisson().is_symplectic() {
        return Err(Error::UnsupportedModel("classification needs an invertible bivector".into()));
    }
    let check = is_poisson_vector_field(d.alpha(), d.poisson())?;
    if !check.is_poisson {
        return Err(Error::NotPoisson("only flat connections are classified".into()));
    }
    let (constant, potential) =
        crate::derivations::decompose_poisson_field(d.alpha(), d.poisson())?;
    // Write the constant part as i * row_map(k) with k a Gaussian vector,
    // then reduce the real part of k modulo the integer lattice.
    let m = model.dim();
    let scaled: Vec<Gaussian> = constant.iter().map(|c| c * &(-Gaussian::i())).collect();
    let re: Vec<Rat> = scaled.iter().map(|c| c.re.clone()).collect();
    let im: Vec<Rat> = scaled.iter().map(|c| c.im.clone()).collect();
    let k_re = d
        .poisson()
        .solve_row_map(&re)
        .ok_or_else(|| Error::UnsupportedModel("row map not solvable".into()))?;
    let k_im = d
        .poisson()
        .solve_row_map(&im)
        .ok_or_else(|| Error::UnsupportedModel("row map not solvable".into()))?;
    let mut coset = Vec::with_capacity(m);
    for j in 0..m {
        let reduced_re = &k_re[j] - k_re[j].floor();
        coset.push(&Gaussian::i() * &Gaussian::new(reduced_re, k_im[j].clone()));
    }
    Ok(ConnectionClass { harmonic_coset: coset, exact_potential: potential })
}

/// A unit conjugating `d2` into `d1` when their classes agree: the monomial
/// of the integer difference of the harmonic parts.
pub fn isomorphism_witness(
    d1: &ContravariantConnection,
    d2: &ContravariantConnection,
) -> Result<Option<AlgebraElement>> {
    let diff = d1.alpha().sub(d2.alpha());
    match integral_witness(&diff, d1.poisson()) {
        Ok(w) => Ok(w),
        Err(Error::NotPoisson(_)) => Ok(None),
        Err(e) => Err(e),
    }
}
