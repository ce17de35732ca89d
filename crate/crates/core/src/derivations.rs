//! Derivations of deformed algebras: verification, quasi-inner derivations,
//! derivations attached to closed one-forms, logarithms of inner
//! automorphisms, the lift of Poisson fields, and outer classes.
//!
//! On the torus a closed one-form `c.dtheta + dg` has a multivalued
//! potential `c.theta + g`; its commutator with anything is still
//! well-defined because every cochain of positive order differentiates the
//! potential at least once. That mechanism realizes the locally-defined
//! derivation attached to a closed one-form globally on the flat models.

use num_traits::{One, Zero};

use crate::algebra::{
    hamiltonian_field, is_poisson_vector_field, AlgebraElement, DiffOperator, Model,
    PoissonStructure,
};
use crate::error::{Error, Result};
use crate::formal::{FormalSeries, OpSeries, StarProduct};
use crate::report::CheckOutcome;
use crate::scalar::{rat_int, Gaussian, Rat};
use crate::sym::{SymMonomial, SymSeries};

/// A formal derivation `D_0 + L D_1 + ... + L^N D_N`; each stage kills
/// constants when the derivation is honest.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FormalDerivation {
    ops: OpSeries,
}

impl FormalDerivation {
    pub fn zero(model: Model, order: usize) -> Self {
        FormalDerivation { ops: OpSeries::zero(model, order) }
    }

    pub fn from_stages(model: Model, stages: Vec<DiffOperator>) -> Result<Self> {
        for d in &stages {
            if !d.kills_constants() {
                return Err(Error::Invalid(
                    "derivation stage has an order-zero term".into(),
                ));
            }
        }
        Ok(FormalDerivation { ops: OpSeries::from_stages(model, stages) })
    }

    pub fn from_opseries(ops: OpSeries) -> Self {
        FormalDerivation { ops }
    }

    pub fn from_field(op: DiffOperator, order: usize) -> Result<Self> {
        if !op.kills_constants() {
            return Err(Error::Invalid("field has an order-zero term".into()));
        }
        let mut stages = vec![DiffOperator::zero(op.model()); order + 1];
        stages[0] = op;
        Ok(FormalDerivation { ops: OpSeries::from_stages(stages[0].model(), stages) })
    }

    pub fn model(&self) -> Model {
        self.ops.model()
    }

    pub fn order(&self) -> usize {
        self.ops.order()
    }

    pub fn stage(&self, r: usize) -> &DiffOperator {
        self.ops.stage(r)
    }

    pub fn opseries(&self) -> &OpSeries {
        &self.ops
    }

    pub fn is_zero(&self) -> bool {
        self.ops.is_zero()
    }

    pub fn add(&self, rhs: &FormalDerivation) -> FormalDerivation {
        FormalDerivation { ops: self.ops.add(&rhs.ops) }
    }

    pub fn sub(&self, rhs: &FormalDerivation) -> FormalDerivation {
        FormalDerivation { ops: self.ops.sub(&rhs.ops) }
    }

    pub fn scale(&self, c: &Gaussian) -> FormalDerivation {
        FormalDerivation { ops: self.ops.scale(c) }
    }

    /// Multiply by the `k`-th power of the parameter.
    pub fn shift(&self, k: usize) -> FormalDerivation {
        FormalDerivation { ops: self.ops.shift(k) }
    }

    pub fn apply(&self, f: &FormalSeries) -> Result<FormalSeries> {
        self.ops.apply(f)
    }

    /// Commutator of derivations.
    pub fn commutator(&self, rhs: &FormalDerivation) -> FormalDerivation {
        FormalDerivation { ops: self.ops.compose(&rhs.ops).sub(&rhs.ops.compose(&self.ops)) }
    }
}

/// Verify the Leibniz rule `D(f*g) = Df*g + f*Dg` to the truncation order
/// on symbolic generators.
pub fn check_derivation(s: &StarProduct, d: &FormalDerivation) -> CheckOutcome {
    let model = s.model();
    let order = s.order();
    let f = SymSeries::from_monomial(SymMonomial::generator(model, 0), order);
    let g = SymSeries::from_monomial(SymMonomial::generator(model, 1), order);
    let lhs = d.ops.apply_sym(&s.multiply_sym(&f, &g));
    let rhs = s
        .multiply_sym(&d.ops.apply_sym(&f), &g)
        .add(&s.multiply_sym(&f, &d.ops.apply_sym(&g)));
    let diff = lhs.sub(&rhs);
    match diff.first_nonzero_order() {
        None => CheckOutcome::Pass,
        Some(ord) => {
            let residual_sym = &diff.coeffs[ord];
            let assignment = residual_sym.find_counterexample().unwrap();
            CheckOutcome::Fail {
                order: ord,
                witnesses: vec![
                    SymMonomial::generator(model, 0).eval(&assignment),
                    SymMonomial::generator(model, 1).eval(&assignment),
                ],
                residual: residual_sym.eval(&assignment),
            }
        }
    }
}

/// The commutator with a series as an operator series (starts at order 1).
pub fn ad_opseries(s: &StarProduct, h: &FormalSeries) -> OpSeries {
    OpSeries::left_multiplication(s, h).sub(&OpSeries::right_multiplication(s, h))
}

/// Stage `n` of `ad(h)`, allowed to reach one past the truncation when the
/// product carries its margin cochain.
fn ad_stage(s: &StarProduct, h: &FormalSeries, n: usize) -> DiffOperator {
    let mut acc = DiffOperator::zero(s.model());
    // The r = 0 term cancels in the commutator (the algebra is commutative).
    let lo = n.saturating_sub(s.order()).max(1);
    for r in lo..=n.min(s.internal_order()) {
        let p = n - r;
        if h.coeff(p).is_zero() {
            continue;
        }
        let c = s.cochain(r);
        acc = acc.add(&c.plug_left(h.coeff(p)).sub(&c.plug_right(h.coeff(p))));
    }
    acc
}

/// The quasi-inner derivation `(i/L) ad(H)`: well defined because the
/// commutator has no order-zero part. The top stage reads the product's
/// margin cochain.
pub fn quasi_inner(s: &StarProduct, h: &FormalSeries) -> Result<FormalDerivation> {
    if !s.has_margin() && !h.is_zero() {
        return Err(Error::Invalid(
            "product carries no cochain past the truncation; cannot divide by the parameter"
                .into(),
        ));
    }
    let order = s.order();
    let mut stages = Vec::with_capacity(order + 1);
    for r in 0..=order {
        stages.push(ad_stage(s, h, r + 1).scale(&Gaussian::i()));
    }
    Ok(FormalDerivation { ops: OpSeries::from_stages(s.model(), stages) })
}

/// A closed one-form on the torus: constant coefficients of `dtheta_j` plus
/// an exact part `dg`. Its cohomology class is the constant vector.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ClosedOneForm {
    pub constant: Vec<Gaussian>,
    pub potential: AlgebraElement,
}

impl ClosedOneForm {
    pub fn new(constant: Vec<Gaussian>, potential: AlgebraElement) -> Result<Self> {
        if constant.len() != potential.model().dim() {
            return Err(Error::ModelMismatch("constant vector length differs".into()));
        }
        if !potential.model().is_trig() {
            return Err(Error::UnsupportedModel("one-forms live on the torus model".into()));
        }
        // Normalize: the constant part of the potential does not contribute.
        Ok(ClosedOneForm { constant, potential: potential.nonconstant_part() })
    }

    pub fn zero(m: usize) -> Self {
        ClosedOneForm {
            constant: vec![Gaussian::zero(); m],
            potential: AlgebraElement::zero(Model::Trig(m)),
        }
    }

    pub fn exact(potential: AlgebraElement) -> Result<Self> {
        let m = potential.model().dim();
        Self::new(vec![Gaussian::zero(); m], potential)
    }

    pub fn is_zero(&self) -> bool {
        self.constant.iter().all(|c| c.is_zero()) && self.potential.is_zero()
    }

    pub fn add(&self, rhs: &ClosedOneForm) -> ClosedOneForm {
        ClosedOneForm {
            constant: self.constant.iter().zip(&rhs.constant).map(|(a, b)| a + b).collect(),
            potential: self.potential.add(&rhs.potential),
        }
    }

    pub fn scale(&self, c: &Gaussian) -> ClosedOneForm {
        ClosedOneForm {
            constant: self.constant.iter().map(|v| v * c).collect(),
            potential: self.potential.scale(c),
        }
    }

    /// Whether the class is integral: constant vector in `i Z^m`.
    pub fn is_integral(&self) -> bool {
        self.constant.iter().all(|c| c.re.is_zero() && c.im.is_integer())
    }
}

/// A series of closed one-forms.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OneFormSeries {
    pub forms: Vec<ClosedOneForm>,
}

impl OneFormSeries {
    pub fn zero(m: usize, order: usize) -> Self {
        OneFormSeries { forms: vec![ClosedOneForm::zero(m); order + 1] }
    }

    pub fn order(&self) -> usize {
        self.forms.len() - 1
    }
}

/// The derivation attached to a closed one-form: the commutator with the
/// multivalued potential `c.theta + g`.
pub fn one_form_derivation(s: &StarProduct, a: &ClosedOneForm) -> Result<FormalDerivation> {
    if !s.model().is_trig() {
        return Err(Error::UnsupportedModel("one-form derivations live on the torus".into()));
    }
    if a.constant.len() != s.model().dim() {
        return Err(Error::ModelMismatch("one-form dimension differs from product".into()));
    }
    let order = s.order();
    let _model = s.model();
    // ad(g) part.
    let g_series = FormalSeries::from_element(a.potential.clone(), order);
    let mut ops = ad_opseries(s, &g_series);
    // ad(c.theta) part: only single-derivative slots of each cochain touch
    // the linear potential; the order-zero product commutator cancels.
    for r in 1..=order {
        let c = s.cochain(r);
        let left = c.plug_left_linear_potential(&a.constant);
        let right = c.plug_right_linear_potential(&a.constant);
        ops.set_stage(r, ops.stage(r).add(&left.sub(&right)));
    }
    Ok(FormalDerivation { ops })
}

/// The derivation of a one-form series `sum_r L^r A_r`.
pub fn one_form_series_derivation(
    s: &StarProduct,
    a: &OneFormSeries,
) -> Result<FormalDerivation> {
    let order = s.order();
    let mut acc = FormalDerivation::zero(s.model(), order);
    for (r, form) in a.forms.iter().enumerate() {
        if r > order {
            break;
        }
        if form.is_zero() {
            continue;
        }
        acc = acc.add(&one_form_derivation(s, form)?.shift(r));
    }
    Ok(acc)
}

/// Is the series central: `[f, g] = 0` for all g, checked symbolically.
pub fn is_central(
    s: &StarProduct,
    f: &FormalSeries,
) -> Result<(bool, Option<AlgebraElement>)> {
    let model = s.model();
    let order = s.order();
    let g = SymSeries::from_monomial(SymMonomial::generator(model, 0), order);
    // [f, g] via multiplication operators applied to the symbolic generator.
    let left = OpSeries::left_multiplication(s, f);
    let right = OpSeries::right_multiplication(s, f);
    let diff = left.apply_sym(&g).sub(&right.apply_sym(&g));
    match diff.first_nonzero_order() {
        None => Ok((true, None)),
        Some(ord) => {
            let assignment = diff.coeffs[ord].find_counterexample().unwrap();
            Ok((false, Some(SymMonomial::generator(model, 0).eval(&assignment))))
        }
    }
}

/// Split a classical Poisson field into a constant part and a Hamiltonian
/// part `X = X_const + X_G`, `X_G(f) = {f, G}`. Exact on the torus with an
/// invertible bivector, and on the plane by polynomial integration.
pub fn decompose_poisson_field(
    x: &DiffOperator,
    pi: &PoissonStructure,
) -> Result<(Vec<Gaussian>, AlgebraElement)> {
    if !x.is_first_order_field() || !x.kills_constants() {
        return Err(Error::Invalid("not a first-order field".into()));
    }
    let model = x.model();
    let m = model.dim();
    let constant: Vec<Gaussian> = (1..=m).map(|j| x.field_coefficient(j).constant_part()).collect();
    // Remaining coefficients a_i = (X - X_const) d_i coefficient must equal
    // pi^{ij} d_j G.
    let coeffs: Vec<AlgebraElement> =
        (1..=m).map(|j| x.field_coefficient(j).nonconstant_part()).collect();
    let potential = hamiltonian_potential(&coeffs, pi, model)?;
    Ok((constant, potential))
}

/// Solve `a_i = sum_j pi^{ij} d_j G` for `G` with zero constant part.
fn hamiltonian_potential(
    coeffs: &[AlgebraElement],
    pi: &PoissonStructure,
    model: Model,
) -> Result<AlgebraElement> {
    let m = model.dim();
    match model {
        Model::Trig(_) => {
            // Mode-by-mode: a_hat_{i,k} = pi^{ij} (i k_j) G_hat_k.
            let mut g = AlgebraElement::zero(model);
            let mut modes: std::collections::BTreeSet<Vec<i64>> = Default::default();
            for a in coeffs {
                for (k, _) in a.terms() {
                    modes.insert(k.clone());
                }
            }
            for k in modes {
                // factor_i = i * (pi k)_i where (pi k)_i = sum_j pi^{ij} k_j
                let pik: Vec<Rat> =
                    (0..m).map(|i| (0..m).map(|j| pi.entry(i, j) * &rat_int(k[j])).sum()).collect();
                let Some(i0) = pik.iter().position(|q| !q.is_zero()) else {
                    // No Hamiltonian can generate this mode.
                    if coeffs.iter().any(|a| !a.coefficient(&k).is_zero()) {
                        return Err(Error::NotDecomposable(format!(
                            "mode {k:?} is not in the Hamiltonian range"
                        )));
                    }
                    continue;
                };
                let factor = Gaussian::i().scale_rat(&pik[i0]);
                let g_hat = &coeffs[i0].coefficient(&k) / &factor;
                // Verify the remaining components.
                for i in 0..m {
                    let expected = Gaussian::i().scale_rat(&pik[i]) * g_hat.clone();
                    if expected != coeffs[i].coefficient(&k) {
                        return Err(Error::NotDecomposable(format!(
                            "mode {k:?} is inconsistent across components"
                        )));
                    }
                }
                g.add_term(k, &g_hat);
            }
            Ok(g.nonconstant_part())
        }
        Model::Poly(_) => {
            // Solve pi * grad = a for the gradient, then integrate.
            let inv = crate::algebra::rational_inverse(pi.rows())
                .ok_or_else(|| Error::NotDecomposable("bivector is degenerate".into()))?;
            let grad: Vec<AlgebraElement> = (0..m)
                .map(|j| {
                    let mut acc = AlgebraElement::zero(model);
                    for (i, a) in coeffs.iter().enumerate() {
                        acc = acc.add(&a.scale(&Gaussian::from_rat(inv[j][i].clone())));
                    }
                    acc
                })
                .collect();
            // Closedness of the candidate gradient.
            for j in 0..m {
                for k in j + 1..m {
                    if grad[j].derive(k + 1)? != grad[k].derive(j + 1)? {
                        return Err(Error::NotDecomposable(
                            "candidate gradient is not closed".into(),
                        ));
                    }
                }
            }
            // Poincare-style integration along coordinate directions.
            let mut g = AlgebraElement::zero(model);
            for j in 0..m {
                // Part of grad_j independent of x_1..x_j's predecessors.
                let mut part = AlgebraElement::zero(model);
                for (key, c) in grad[j].terms() {
                    if key[..j].iter().all(|&e| e == 0) {
                        part.add_term(key.clone(), c);
                    }
                }
                // Integrate in x_{j+1}.
                for (key, c) in part.terms() {
                    let mut k2 = key.clone();
                    k2[j] += 1;
                    let factor = Gaussian::from_rat(Rat::one() / rat_int(k2[j]));
                    g.add_term(k2, &(c * &factor));
                }
            }
            // Verify.
            let field = hamiltonian_field(&g, pi)?;
            for (i, a) in coeffs.iter().enumerate() {
                if &field.field_coefficient(i + 1) != a {
                    return Err(Error::NotDecomposable(
                        "plane field has no polynomial potential".into(),
                    ));
                }
            }
            Ok(g.nonconstant_part())
        }
    }
}

/// Lift a classical Poisson field to a derivation of the deformed algebra:
/// the constant part acts exactly, the Hamiltonian part becomes the
/// quasi-inner derivation of its potential. The classical limit of the
/// result is the input field.
pub fn lift_poisson_field(s: &StarProduct, x: &DiffOperator) -> Result<FormalDerivation> {
    let check = is_poisson_vector_field(x, s.poisson())?;
    if !check.is_poisson {
        let msg = match &check.counterexample {
            Some((a, b)) => format!("compatibility fails on ({a}, {b})"),
            None => "compatibility fails".into(),
        };
        return Err(Error::NotPoisson(msg));
    }
    let (constant, potential) = decompose_poisson_field(x, s.poisson())?;
    let constant_op = DiffOperator::constant_field(s.model(), &constant)?;
    let mut lift = FormalDerivation::from_field(constant_op, s.order())?;
    if !potential.is_zero() {
        let h = FormalSeries::from_element(potential, s.order());
        lift = lift.add(&quasi_inner(s, &h)?);
    }
    Ok(lift)
}

/// Outcome of expressing an inner automorphism as the exponential of a
/// one-form derivation.
#[derive(Clone, Debug)]
pub struct InnerOneForm {
    /// Forms `A_0 .. A_{N-1}`; the order-`N` slot is invisible at the
    /// truncation and stays undetermined.
    pub form: OneFormSeries,
    /// The order-zero constant vector lies in `i Z^m`.
    pub constant_integral: bool,
    /// All higher-order constant vectors vanish (the forms are exact).
    pub higher_orders_exact: bool,
    /// The exponential of the recovered derivation reproduces the
    /// conjugation operator exactly.
    pub verified: bool,
}

/// Express `Ad(u)` as `exp` of a one-form derivation: take the logarithm of
/// the conjugation operator and peel it into closed one-forms order by
/// order. Requires an invertible bivector on the torus.
pub fn inner_one_form(s: &StarProduct, u: &FormalSeries) -> Result<InnerOneForm> {
    if !s.model().is_trig() {
        return Err(Error::UnsupportedModel("one-form logarithms live on the torus".into()));
    }
    if !s.poisson().is_symplectic() {
        return Err(Error::UnsupportedModel("bivector must be invertible".into()));
    }
    let model = s.model();
    let m = model.dim();
    let order = s.order();
    let ad = OpSeries::adjoint(s, u)?;
    let log = ad.log();
    let mut remaining = log.clone();
    let mut forms = Vec::with_capacity(order);
    for r in 1..=order {
        let stage = remaining.stage(r).clone();
        let form = if stage.is_zero() {
            ClosedOneForm::zero(m)
        } else {
            if !stage.is_first_order_field() || !stage.kills_constants() {
                return Err(Error::NotDecomposable(format!(
                    "logarithm stage {r} is not a vector field"
                )));
            }
            // stage = i sum_i c_i pi^{ij} d_j + i {g, .}
            let w_const: Vec<Gaussian> =
                (1..=m).map(|j| stage.field_coefficient(j).constant_part()).collect();
            let c = solve_row_map_gaussian(s.poisson(), &w_const)?;
            // Nonconstant part: stage_nc = i {g, .} = -i X_g, so the field
            // X_g has coefficients i * stage_nc.
            let coeffs: Vec<AlgebraElement> = (1..=m)
                .map(|j| stage.field_coefficient(j).nonconstant_part().scale(&Gaussian::i()))
                .collect();
            let g = hamiltonian_potential(&coeffs, s.poisson(), model)?;
            ClosedOneForm::new(c, g)?
        };
        if !form.is_zero() {
            let contribution = one_form_derivation(s, &form)?.shift(r - 1);
            remaining = remaining.sub(contribution.opseries());
        }
        forms.push(form);
    }
    if !remaining.is_zero() {
        return Err(Error::NotDecomposable(
            "conjugation logarithm is not generated by one-forms".into(),
        ));
    }
    // Assemble and verify: exp(delta_A) must equal Ad(u) stage by stage.
    let mut series = OneFormSeries::zero(m, order);
    for (r, f) in forms.iter().enumerate() {
        series.forms[r] = f.clone();
    }
    let delta = one_form_series_derivation(s, &series)?;
    let verified = delta.opseries().exp() == ad;
    let constant_integral = series.forms[0].is_integral();
    let higher_orders_exact =
        series.forms[1..].iter().all(|f| f.constant.iter().all(|c| c.is_zero()));
    Ok(InnerOneForm { form: series, constant_integral, higher_orders_exact, verified })
}

/// Constructive converse of the one-form logarithm: for a series whose
/// order-zero form is a pure integral constant `i k.dtheta` and whose
/// higher orders are exact, produce a unit `u = E[k] * Exp(G)` with
/// `exp(delta_A) = Ad(u)` exactly. Forms outside that shape name outer
/// directions and are refused.
pub fn conjugating_unit(s: &StarProduct, a: &OneFormSeries) -> Result<FormalSeries> {
    if !s.model().is_trig() {
        return Err(Error::UnsupportedModel("units live on the torus model".into()));
    }
    let model = s.model();
    let m = model.dim();
    let order = s.order();
    let head = &a.forms[0];
    if !head.is_integral() {
        return Err(Error::NotDecomposable(
            "order-zero constant vector is not integral".into(),
        ));
    }
    if !head.potential.is_zero() {
        return Err(Error::NotDecomposable(
            "order-zero exact part has no unit exponential here".into(),
        ));
    }
    for (r, form) in a.forms.iter().enumerate().skip(1) {
        if form.constant.iter().any(|c| !c.is_zero()) {
            return Err(Error::NotDecomposable(format!(
                "order-{r} form has a constant part; the direction is outer"
            )));
        }
    }
    let k: Vec<i64> = head
        .constant
        .iter()
        .map(|c| {
            c.im.to_integer()
                .try_into()
                .map_err(|_| Error::Invalid("winding exponent overflow".into()))
        })
        .collect::<Result<_>>()?;
    let target = one_form_series_derivation(s, a)?.opseries().exp();
    let base = FormalSeries::from_element(AlgebraElement::trig_mode(m, &k)?, order);
    let inv_base = FormalSeries::from_element(
        AlgebraElement::trig_mode(m, &k.iter().map(|e| -e).collect::<Vec<_>>())?,
        order,
    );
    // Ad(w) = Ad(base)^{-1} o exp(delta_A); its logarithm is ad(G) with
    // G = O(L), recovered slice by slice through Hamiltonian potentials.
    let remaining = OpSeries::adjoint(s, &inv_base)?.compose(&target);
    let log = remaining.log();
    if !log.stage(0).is_zero() || !log.stage(1).is_zero() {
        return Err(Error::NotDecomposable(
            "conjugation logarithm does not start at order two".into(),
        ));
    }
    let mut g = FormalSeries::zero(model, order);
    for r in 2..=order {
        let residual = log.sub(&ad_opseries(s, &g));
        let stage = residual.stage(r).clone();
        if stage.is_zero() {
            continue;
        }
        if !stage.is_first_order_field() || !stage.kills_constants() {
            return Err(Error::NotDecomposable(format!(
                "logarithm stage {r} is not a vector field"
            )));
        }
        // stage = i {g_{r-1}, .} = -i X_{g_{r-1}}.
        let coeffs: Vec<AlgebraElement> = (1..=m)
            .map(|j| stage.field_coefficient(j).scale(&Gaussian::i()))
            .collect();
        let slice = hamiltonian_potential(&coeffs, s.poisson(), model)?;
        g.set_coeff(r - 1, slice);
    }
    if !log.sub(&ad_opseries(s, &g)).is_zero() {
        return Err(Error::NotDecomposable(
            "conjugation logarithm is not generated by exact forms".into(),
        ));
    }
    let w = crate::starexp::star_exp(s, &crate::starexp::ExpArgument::new(g)?)?;
    let u = s.multiply(&base, &w)?;
    // The construction must reproduce the exponential exactly.
    if OpSeries::adjoint(s, &u)? != target {
        return Err(Error::Invalid("internal: constructed unit does not conjugate".into()));
    }
    Ok(u)
}

/// Solve `w_j = i sum_i c_i pi^{ij}` for the Gaussian vector `c`.
fn solve_row_map_gaussian(pi: &PoissonStructure, w: &[Gaussian]) -> Result<Vec<Gaussian>> {
    // (1/i) w = row_map(c); split into real and imaginary rational systems.
    let scaled: Vec<Gaussian> = w.iter().map(|v| v * &(-Gaussian::i())).collect();
    let re: Vec<Rat> = scaled.iter().map(|v| v.re.clone()).collect();
    let im: Vec<Rat> = scaled.iter().map(|v| v.im.clone()).collect();
    let c_re = pi
        .solve_row_map(&re)
        .ok_or_else(|| Error::NotDecomposable("row map not solvable".into()))?;
    let c_im = pi
        .solve_row_map(&im)
        .ok_or_else(|| Error::NotDecomposable("row map not solvable".into()))?;
    Ok(c_re.into_iter().zip(c_im).map(|(r, i)| Gaussian::new(r, i)).collect())
}

/// Per-order outer classes of a derivation on the symplectic torus: the
/// harmonic (constant) vectors of its order-by-order lift decomposition.
/// All classes vanish exactly when the derivation is quasi-inner.
pub fn outer_class(s: &StarProduct, d: &FormalDerivation) -> Result<Vec<Vec<Gaussian>>> {
    if !s.model().is_trig() {
        return Err(Error::UnsupportedModel("outer classes live on the torus model".into()));
    }
    if !s.poisson().is_symplectic() {
        return Err(Error::UnsupportedModel(
            "outer classes need an invertible bivector".into(),
        ));
    }
    let m = s.model().dim();
    let order = s.order();
    let mut remaining = d.opseries().clone();
    let mut classes = Vec::with_capacity(order + 1);
    for r in 0..=order {
        let stage = remaining.stage(r).clone();
        if stage.is_zero() {
            classes.push(vec![Gaussian::zero(); m]);
            continue;
        }
        if !stage.is_first_order_field() || !stage.kills_constants() {
            return Err(Error::NotPoisson(format!(
                "stage {r} of the derivation is not a classical field"
            )));
        }
        let (constant, potential) = decompose_poisson_field(&stage, s.poisson())?;
        classes.push(constant.clone());
        let lift = lift_poisson_field(s, &stage)?;
        let _ = potential;
        remaining = remaining.sub(&lift.opseries().shift(r));
    }
    if !remaining.is_zero() {
        return Err(Error::NotPoisson(
            "derivation does not decompose into lifted fields".into(),
        ));
    }
    Ok(classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal::moyal;
    use crate::sampling::Sampler;
    use crate::scalar::rat;
    use num_traits::One;

    fn pi1() -> PoissonStructure {
        PoissonStructure::dim2(Rat::one())
    }

    fn e(k: &[i64]) -> AlgebraElement {
        AlgebraElement::trig_mode(2, k).unwrap()
    }

    #[test]
    fn constant_fields_are_derivations() {
        let order = 6;
        let s = moyal(&pi1(), order);
        let d = FormalDerivation::from_field(DiffOperator::partial(Model::Trig(2), 1).unwrap(), order)
            .unwrap();
        assert!(check_derivation(&s, &d).passed());
    }

    #[test]
    fn non_poisson_field_breaks_leibniz() {
        let order = 4;
        let model = Model::Poly(2);
        let s = crate::formal::moyal_on(model, &pi1(), order).unwrap();
        // x1 d1 is not Poisson for pi12 = 1.
        let x1 = AlgebraElement::variable(model, 1).unwrap();
        let mut op = DiffOperator::zero(model);
        op.add_term(x1, vec![1, 0]);
        let d = FormalDerivation::from_field(op, order).unwrap();
        match check_derivation(&s, &d) {
            CheckOutcome::Fail { order, witnesses, .. } => {
                assert_eq!(order, 1);
                assert_eq!(witnesses.len(), 2);
            }
            CheckOutcome::Pass => panic!("expected Leibniz failure"),
        }
    }

    #[test]
    fn quasi_inner_is_a_derivation_with_sine_profile() {
        let order = 6;
        let s = moyal(&pi1(), order);
        let h = FormalSeries::from_element(e(&[1, 0]), order);
        let d = quasi_inner(&s, &h).unwrap();
        assert!(check_derivation(&s, &d).passed());
        // Applied to E[0,1]: (2/L) sin(L/2) E[1,1] = (1 - L^2/24 + L^4/1920 - ...) E[1,1].
        let f = FormalSeries::from_element(e(&[0, 1]), order);
        let out = d.apply(&f).unwrap();
        let mut expected = FormalSeries::zero(Model::Trig(2), order);
        // (i/L)(e^{-iL/2} - e^{iL/2}) = (i/L)(-2i sin(L/2)) = (2/L) sin(L/2)
        for r in (0..=order).step_by(2) {
            // sin(L/2)/(L/2) coefficients: (-1)^{r/2} / (4^{r/2} (r+1)!)
            let k = r / 2;
            let sign = if k % 2 == 0 { Rat::one() } else { -Rat::one() };
            let denom = crate::scalar::factorial(r + 1) * Rat::from_integer(4u32.pow(k as u32).into());
            expected.set_coeff(r, e(&[1, 1]).scale(&Gaussian::from_rat(sign / denom)));
        }
        assert_eq!(out, expected);
        // H = 1 is central.
        let one = FormalSeries::one(Model::Trig(2), order);
        assert!(quasi_inner(&s, &one).unwrap().is_zero());
    }

    #[test]
    fn quasi_inner_classical_limit_is_hamiltonian_field() {
        let order = 5;
        let s = moyal(&pi1(), order);
        let mut sampler = Sampler::new(11);
        for _ in 0..5 {
            let h0 = sampler.trig_element(2, 3, 2);
            let h = FormalSeries::from_element(h0.clone(), order);
            let d = quasi_inner(&s, &h).unwrap();
            let f = sampler.trig_element(2, 3, 2);
            let lhs = d.apply(&FormalSeries::from_element(f.clone(), order)).unwrap();
            // order-0 part equals {f, h} = -{h, f}
            let expected = crate::algebra::poisson_bracket(&f, &h0, &pi1()).unwrap();
            assert_eq!(lhs.coeff(0), &expected);
        }
    }

    #[test]
    fn one_form_derivation_basics() {
        let order = 6;
        let s = moyal(&pi1(), order);
        // A = dtheta_1: delta(f) = i L d2 f.
        let a = ClosedOneForm::new(
            vec![Gaussian::one(), Gaussian::zero()],
            AlgebraElement::zero(Model::Trig(2)),
        )
        .unwrap();
        let d = one_form_derivation(&s, &a).unwrap();
        assert!(check_derivation(&s, &d).passed());
        let f = FormalSeries::from_element(e(&[0, 1]), order);
        let out = d.apply(&f).unwrap();
        let mut expected = FormalSeries::zero(Model::Trig(2), order);
        expected.set_coeff(1, e(&[0, 1]).scale(&Gaussian::new(-Rat::one(), Rat::zero())));
        // i * d2 E[0,1] = i * i E[0,1] = -E[0,1]
        assert_eq!(out, expected);
        // A = 0 gives the zero derivation; exact forms give plain commutators.
        assert!(one_form_derivation(&s, &ClosedOneForm::zero(2)).unwrap().is_zero());
        let g = e(&[1, 1]);
        let exact = ClosedOneForm::exact(g.clone()).unwrap();
        let lhs = one_form_derivation(&s, &exact).unwrap();
        let rhs_ops = ad_opseries(&s, &FormalSeries::from_element(g, order));
        assert_eq!(lhs.opseries(), &rhs_ops);
    }

    #[test]
    fn one_form_derivation_is_linear() {
        let order = 5;
        let s = moyal(&pi1(), order);
        let mut sampler = Sampler::new(3);
        let a1 = ClosedOneForm::new(
            vec![sampler.small_gaussian(), sampler.small_gaussian()],
            sampler.trig_element_zero_mean(2, 2, 2),
        )
        .unwrap();
        let a2 = ClosedOneForm::new(
            vec![sampler.small_gaussian(), sampler.small_gaussian()],
            sampler.trig_element_zero_mean(2, 2, 2),
        )
        .unwrap();
        let lhs = one_form_derivation(&s, &a1.add(&a2)).unwrap();
        let rhs = one_form_derivation(&s, &a1).unwrap().add(&one_form_derivation(&s, &a2).unwrap());
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn delta_injective_on_basis_forms() {
        let order = 4;
        let s = moyal(&pi1(), order);
        for j in 0..2 {
            let mut c = vec![Gaussian::zero(); 2];
            c[j] = Gaussian::one();
            let a = ClosedOneForm::new(c, AlgebraElement::zero(Model::Trig(2))).unwrap();
            assert!(!one_form_derivation(&s, &a).unwrap().is_zero());
        }
        let exact = ClosedOneForm::exact(e(&[2, 1])).unwrap();
        assert!(!one_form_derivation(&s, &exact).unwrap().is_zero());
    }

    #[test]
    fn commutator_with_one_form_derivation_is_quasi_inner() {
        // The commutator of any derivation with a one-form derivation has
        // vanishing outer classes.
        let order = 5;
        let s = moyal(&pi1(), order);
        let mut sampler = Sampler::new(19);
        let a = ClosedOneForm::new(
            vec![sampler.small_gaussian(), sampler.small_gaussian()],
            sampler.trig_element_zero_mean(2, 2, 2),
        )
        .unwrap();
        let delta = one_form_derivation(&s, &a).unwrap();
        let d = FormalDerivation::from_field(
            DiffOperator::partial(Model::Trig(2), 2).unwrap(),
            order,
        )
        .unwrap();
        let comm = d.commutator(&delta);
        let classes = outer_class(&s, &comm).unwrap();
        assert!(classes.iter().all(|c| c.iter().all(|v| v.is_zero())));
    }

    #[test]
    fn centrality() {
        let order = 5;
        let s = moyal(&pi1(), order);
        let scalar = FormalSeries::from_element(
            AlgebraElement::scalar(Model::Trig(2), Gaussian::ratio(3, 2)),
            order,
        );
        assert!(is_central(&s, &scalar).unwrap().0);
        let f = FormalSeries::from_element(e(&[1, 0]), order);
        let (central, witness) = is_central(&s, &f).unwrap();
        assert!(!central);
        assert!(witness.is_some());
        // Trivial deformation: everything is central.
        let trivial = StarProduct::trivial(Model::Trig(2), order);
        assert!(is_central(&trivial, &f).unwrap().0);
    }

    #[test]
    fn lift_of_hamiltonian_field_is_quasi_inner() {
        let order = 6;
        let s = moyal(&pi1(), order);
        // X = E[0,1] d1 = X_G with G = -i E[0,1].
        let mut op = DiffOperator::zero(Model::Trig(2));
        op.add_term(e(&[0, 1]), vec![1, 0]);
        let lift = lift_poisson_field(&s, &op).unwrap();
        let g = FormalSeries::from_element(e(&[0, 1]).scale(&(-Gaussian::i())), order);
        assert_eq!(lift, quasi_inner(&s, &g).unwrap());
        // Constant fields lift exactly.
        let c = DiffOperator::partial(Model::Trig(2), 2).unwrap();
        let lift_c = lift_poisson_field(&s, &c).unwrap();
        assert_eq!(lift_c.stage(0), &c);
        for r in 1..=order {
            assert!(lift_c.stage(r).is_zero());
        }
        // Sums decompose as sums; Leibniz check passes.
        let mut both = DiffOperator::zero(Model::Trig(2));
        both.add_term(e(&[0, 1]), vec![1, 0]);
        both = both.add(&c);
        let lift_both = lift_poisson_field(&s, &both).unwrap();
        assert_eq!(lift_both, lift.add(&lift_c));
        assert!(check_derivation(&s, &lift_both).passed());
        // Non-Poisson fields are rejected.
        let mut bad = DiffOperator::zero(Model::Trig(2));
        bad.add_term(e(&[1, 0]), vec![1, 0]);
        assert!(matches!(lift_poisson_field(&s, &bad), Err(Error::NotPoisson(_))));
    }

    #[test]
    fn quasi_inner_works_through_twists_and_pullbacks() {
        // The margin cochain survives product surgery, so the division by
        // the parameter stays exact on derived products.
        let order = 4;
        let s = moyal(&pi1(), order);
        let t_op = DiffOperator::partial(Model::Trig(2), 1)
            .unwrap()
            .compose(&DiffOperator::partial(Model::Trig(2), 2).unwrap());
        let t = crate::formal::Equivalence::single_stage(Model::Trig(2), order, 1, t_op).unwrap();
        let twisted = crate::formal::twist_by_equivalence(&s, &t).unwrap();
        assert!(twisted.has_margin());
        let h = FormalSeries::from_element(e(&[1, 0]), order);
        let d = quasi_inner(&twisted, &h).unwrap();
        assert!(check_derivation(&twisted, &d).passed());

        let swap = crate::formal::AutomorphismSeed::TorusExponentMap(vec![vec![0, 1], vec![1, 0]]);
        let pulled = crate::formal::pullback_by_automorphism(&s, &swap).unwrap();
        assert!(pulled.has_margin());
        let d2 = quasi_inner(&pulled, &h).unwrap();
        assert!(check_derivation(&pulled, &d2).passed());

        // A product without the margin refuses the division.
        let bare = crate::formal::StarProduct::new(
            Model::Trig(2),
            pi1(),
            order,
            (1..=order).map(|r| s.cochain(r).clone()).collect(),
        )
        .unwrap();
        assert!(quasi_inner(&bare, &h).is_err());
    }

    #[test]
    fn lift_reproduces_quasi_inner_identically() {
        let order = 5;
        let s = moyal(&pi1(), order);
        let mut sampler = Sampler::new(29);
        for _ in 0..5 {
            let h = sampler.trig_element_zero_mean(2, 3, 2);
            let x = hamiltonian_field(&h, &pi1()).unwrap();
            if x.is_zero() {
                continue;
            }
            let lift = lift_poisson_field(&s, &x).unwrap();
            let qi = quasi_inner(&s, &FormalSeries::from_element(h, order)).unwrap();
            assert_eq!(lift, qi);
        }
    }

    #[test]
    fn inner_one_form_of_a_mode_is_integral() {
        let order = 6;
        let s = moyal(&pi1(), order);
        let u = FormalSeries::from_element(e(&[1, 0]), order);
        let rep = inner_one_form(&s, &u).unwrap();
        assert!(rep.verified);
        assert!(rep.constant_integral);
        assert!(rep.higher_orders_exact);
        assert_eq!(rep.form.forms[0].constant, vec![Gaussian::i(), Gaussian::zero()]);
        assert!(rep.form.forms[0].potential.is_zero());
        // e^{delta_A}(E[0,1]) = e^{-iL} E[0,1] = Ad(u)(E[0,1]).
        let delta = one_form_series_derivation(&s, &rep.form).unwrap();
        let f = FormalSeries::from_element(e(&[0, 1]), order);
        let lhs = FormalDerivation::from_opseries(delta.opseries().exp()).apply(&f).unwrap();
        let rhs = crate::starexp::adjoint(&s, &u, &f).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn inner_one_form_of_normalized_unit_is_exact() {
        let order = 5;
        let s = moyal(&pi1(), order);
        let g = e(&[1, 1]).scale(&Gaussian::ratio(2, 3));
        let mut u = FormalSeries::one(Model::Trig(2), order);
        u.set_coeff(1, g.clone());
        let rep = inner_one_form(&s, &u).unwrap();
        assert!(rep.verified);
        assert!(rep.constant_integral); // zero is integral
        assert!(rep.higher_orders_exact);
        assert!(rep.form.forms[0].is_zero());
        // A_1 = dg.
        assert_eq!(rep.form.forms[1].potential, g);
        // u = 1 gives the zero form.
        let rep_one = inner_one_form(&s, &FormalSeries::one(Model::Trig(2), order)).unwrap();
        assert!(rep_one.form.forms.iter().all(|f| f.is_zero()));
    }

    #[test]
    fn inner_one_form_of_a_mixed_unit() {
        // u = E[1,0] * Exp(L g): integral constant part plus exact higher
        // orders, recovered together.
        let order = 5;
        let s = moyal(&pi1(), order);
        let g = e(&[1, 1]).scale(&Gaussian::ratio(1, 2));
        let mut arg = FormalSeries::zero(Model::Trig(2), order);
        arg.set_coeff(1, g.clone());
        let w = crate::starexp::star_exp(&s, &crate::starexp::ExpArgument::new(arg).unwrap())
            .unwrap();
        let u = s.multiply(&FormalSeries::from_element(e(&[1, 0]), order), &w).unwrap();
        let rep = inner_one_form(&s, &u).unwrap();
        assert!(rep.verified);
        assert!(rep.constant_integral);
        assert!(rep.higher_orders_exact);
        assert_eq!(rep.form.forms[0].constant, vec![Gaussian::i(), Gaussian::zero()]);
        assert!(!rep.form.forms.iter().all(|f| f.potential.is_zero()));
        // Central scalar factors do not change the conjugation or its form.
        let scaled = u.scale(&Gaussian::new(crate::scalar::rat(2, 3), crate::scalar::rat(1, 2)));
        let rep2 = inner_one_form(&s, &scaled).unwrap();
        assert_eq!(rep2.form, rep.form);
    }

    #[test]
    fn integral_one_forms_exponentiate_to_units() {
        let order = 5;
        let s = moyal(&pi1(), order);
        let mut sampler = Sampler::new(83);
        for _ in 0..4 {
            let k = vec![sampler.int_in(-2, 2), sampler.int_in(-2, 2)];
            let mut series = OneFormSeries::zero(2, order);
            series.forms[0] = ClosedOneForm::new(
                k.iter().map(|&e| Gaussian::i().scale_int(e)).collect(),
                AlgebraElement::zero(Model::Trig(2)),
            )
            .unwrap();
            for r in 1..=2 {
                series.forms[r] =
                    ClosedOneForm::exact(sampler.trig_element_zero_mean(2, 2, 2)).unwrap();
            }
            let u = conjugating_unit(&s, &series).unwrap();
            // Round trip through the logarithm direction.
            let rep = inner_one_form(&s, &u).unwrap();
            assert!(rep.verified);
            assert_eq!(rep.form.forms[0].constant, series.forms[0].constant);
        }
        // A non-integral constant is refused.
        let mut half = OneFormSeries::zero(2, order);
        half.forms[0] = ClosedOneForm::new(
            vec![Gaussian::imag_ratio(1, 2), Gaussian::zero()],
            AlgebraElement::zero(Model::Trig(2)),
        )
        .unwrap();
        assert!(matches!(conjugating_unit(&s, &half), Err(Error::NotDecomposable(_))));
        // A constant part at a positive order names an outer direction.
        let mut outer = OneFormSeries::zero(2, order);
        outer.forms[1] = ClosedOneForm::new(
            vec![Gaussian::i(), Gaussian::zero()],
            AlgebraElement::zero(Model::Trig(2)),
        )
        .unwrap();
        assert!(matches!(conjugating_unit(&s, &outer), Err(Error::NotDecomposable(_))));
    }

    #[test]
    fn outer_classes_of_basic_derivations() {
        let order = 5;
        let s = moyal(&pi1(), order);
        let m2 = Model::Trig(2);
        // Constant field d2: class (0,1) at order 0, zero beyond.
        let d = FormalDerivation::from_field(DiffOperator::partial(m2, 2).unwrap(), order).unwrap();
        let classes = outer_class(&s, &d).unwrap();
        assert_eq!(classes[0], vec![Gaussian::zero(), Gaussian::one()]);
        assert!(classes[1..].iter().all(|c| c.iter().all(|v| v.is_zero())));
        // Quasi-inner derivations have vanishing classes at every order.
        let h = FormalSeries::from_element(e(&[2, -1]).scale(&Gaussian::ratio(1, 3)), order);
        let qi = quasi_inner(&s, &h).unwrap();
        let classes_qi = outer_class(&s, &qi).unwrap();
        assert!(classes_qi.iter().all(|c| c.iter().all(|v| v.is_zero())));
        // delta_{i dtheta_1} = -L d2: class -(0,1) at order 1 (the harmonic
        // image of the integral form i dtheta_1 under the bivector).
        let a = ClosedOneForm::new(vec![Gaussian::i(), Gaussian::zero()], AlgebraElement::zero(m2))
            .unwrap();
        let delta = one_form_derivation(&s, &a).unwrap();
        let classes_delta = outer_class(&s, &delta).unwrap();
        assert!(classes_delta[0].iter().all(|v| v.is_zero()));
        assert_eq!(classes_delta[1], vec![Gaussian::zero(), -Gaussian::one()]);
        // Non-symplectic bivectors are refused.
        let degenerate = moyal(&PoissonStructure::zero(2), order);
        assert!(matches!(
            outer_class(&degenerate, &d),
            Err(Error::UnsupportedModel(_))
        ));
    }

    #[test]
    fn plane_fields_integrate_to_potentials() {
        let order = 4;
        let model = Model::Poly(2);
        let pi = pi1();
        let s = crate::formal::moyal_on(model, &pi, order).unwrap();
        let mut sampler = Sampler::new(61);
        for _ in 0..5 {
            let h = sampler.poly_element(2, 3, 3).nonconstant_part();
            let x = hamiltonian_field(&h, &pi).unwrap();
            if x.is_zero() {
                continue;
            }
            let (constant, potential) = decompose_poisson_field(&x, &pi).unwrap();
            // Linear parts of the potential appear as the constant field;
            // the two pieces reassemble the input exactly.
            let reassembled = hamiltonian_field(&potential, &pi)
                .unwrap()
                .add(&DiffOperator::constant_field(model, &constant).unwrap());
            assert_eq!(reassembled, x);
            let lift = lift_poisson_field(&s, &x).unwrap();
            assert!(check_derivation(&s, &lift).passed());
            assert_eq!(lift.stage(0), &x);
        }
        // Constant fields on the plane lift exactly as themselves.
        let c = DiffOperator::partial(model, 1).unwrap();
        let lift = lift_poisson_field(&s, &c).unwrap();
        assert_eq!(lift.stage(0), &c);
        // A non-gradient shape is refused: x1 d1 is not Poisson at all.
        let x1 = AlgebraElement::variable(model, 1).unwrap();
        let mut bad = DiffOperator::zero(model);
        bad.add_term(x1, vec![1, 0]);
        assert!(lift_poisson_field(&s, &bad).is_err());
    }

    #[test]
    fn plane_direction_quantization_round_trip() {
        let order = 4;
        let model = Model::Poly(2);
        let s = crate::formal::moyal_on(model, &pi1(), order).unwrap();
        let h = AlgebraElement::variable(model, 1)
            .unwrap()
            .mul(&AlgebraElement::variable(model, 2).unwrap());
        let alpha = hamiltonian_field(&h, &pi1()).unwrap();
        let d = crate::connections::ContravariantConnection::new(pi1(), alpha.clone()).unwrap();
        let b = crate::bimodule::deform_in_direction(&s, &d).unwrap();
        assert!(b.check_relations().passed());
        assert_eq!(crate::bimodule::semiclassical_limit(&b).unwrap().alpha(), &alpha);
    }

    #[test]
    fn poisson_field_decomposition_round_trip() {
        let mut sampler = Sampler::new(41);
        let pi = pi1();
        for _ in 0..10 {
            let h = sampler.trig_element_zero_mean(2, 3, 2);
            let c = vec![sampler.small_gaussian(), sampler.small_gaussian()];
            let x = hamiltonian_field(&h, &pi)
                .unwrap()
                .add(&DiffOperator::constant_field(Model::Trig(2), &c).unwrap());
            if !x.is_first_order_field() || !x.kills_constants() {
                continue;
            }
            let (constant, potential) = decompose_poisson_field(&x, &pi).unwrap();
            assert_eq!(constant, c);
            assert_eq!(potential, h.nonconstant_part());
        }
    }

    #[test]
    fn integral_scaled_form_matches_series_lift() {
        // delta of (1/2) dtheta_1 equals half the delta of dtheta_1.
        let order = 4;
        let s = moyal(&pi1(), order);
        let a = ClosedOneForm::new(
            vec![Gaussian::ratio(1, 2), Gaussian::zero()],
            AlgebraElement::zero(Model::Trig(2)),
        )
        .unwrap();
        let d = one_form_derivation(&s, &a).unwrap();
        let full = one_form_derivation(
            &s,
            &ClosedOneForm::new(vec![Gaussian::one(), Gaussian::zero()], AlgebraElement::zero(Model::Trig(2)))
                .unwrap(),
        )
        .unwrap();
        assert_eq!(d, full.scale(&Gaussian::ratio(1, 2)));
        let _ = rat(1, 2);
    }
}
