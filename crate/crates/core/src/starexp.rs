//! Star exponential and logarithm, inner automorphisms, and the identity
//! suite for exponentials of arguments with vanishing classical part.
//!
//! The exponential solves `d/dt Exp(tH) = H * Exp(tH)`, `Exp(0) = 1`, order
//! by order: with `H = O(L)` the order-`r` slice only involves lower slices,
//! so each slice is a polynomial in `t` obtained by exact integration.

use num_traits::One;

use crate::algebra::AlgebraElement;
use crate::error::{Error, Result};
use crate::formal::{FormalSeries, OpSeries, StarProduct};
use crate::report::{CheckOutcome, VerificationReport};
use crate::scalar::{factorial, rat_int, Gaussian, Rat};

/// Argument of the star exponential: a series with zero classical part plus
/// a symbolic additive constant `2 pi i m`, which never enters coefficient
/// arithmetic because its exponential is 1.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExpArgument {
    h: FormalSeries,
    winding: i64,
}

impl ExpArgument {
    pub fn new(h: FormalSeries) -> Result<Self> {
        if !h.classical_limit().is_zero() {
            return Err(Error::NonzeroClassicalPart(format!(
                "order-zero coefficient {}",
                h.classical_limit()
            )));
        }
        Ok(ExpArgument { h, winding: 0 })
    }

    pub fn with_winding(h: FormalSeries, winding: i64) -> Result<Self> {
        let mut a = Self::new(h)?;
        a.winding = winding;
        Ok(a)
    }

    pub fn series(&self) -> &FormalSeries {
        &self.h
    }

    /// The integer `m` of the symbolic constant `2 pi i m`.
    pub fn winding(&self) -> i64 {
        self.winding
    }

    pub fn add(&self, rhs: &ExpArgument) -> ExpArgument {
        ExpArgument { h: self.h.add(&rhs.h), winding: self.winding + rhs.winding }
    }

    pub fn scale(&self, c: &Gaussian) -> Result<ExpArgument> {
        // Scaling is only closed on the series part; a scaled winding would
        // leave the symbolic lattice, so require it to vanish.
        if self.winding != 0 && !c.is_one() {
            return Err(Error::Invalid("cannot scale a nonzero symbolic constant".into()));
        }
        Ok(ExpArgument { h: self.h.scale(c), winding: self.winding })
    }
}

/// Polynomial in `t` with element coefficients, used by the recursion.
#[derive(Clone)]
struct TPoly {
    // coeffs[d] multiplies t^d
    coeffs: Vec<AlgebraElement>,
}

impl TPoly {
    fn zero(model: crate::algebra::Model) -> Self {
        TPoly { coeffs: vec![AlgebraElement::zero(model)] }
    }

    fn constant(e: AlgebraElement) -> Self {
        TPoly { coeffs: vec![e] }
    }

    fn add(&self, rhs: &TPoly) -> TPoly {
        let model = self.coeffs[0].model();
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = vec![AlgebraElement::zero(model); n];
        for (d, c) in self.coeffs.iter().enumerate() {
            out[d] = out[d].add(c);
        }
        for (d, c) in rhs.coeffs.iter().enumerate() {
            out[d] = out[d].add(c);
        }
        TPoly { coeffs: out }
    }

    /// Antiderivative vanishing at 0: t^d -> t^{d+1}/(d+1).
    fn integrate(&self) -> TPoly {
        let model = self.coeffs[0].model();
        let mut out = vec![AlgebraElement::zero(model); self.coeffs.len() + 1];
        for (d, c) in self.coeffs.iter().enumerate() {
            let factor = Gaussian::from_rat(Rat::one() / rat_int(d as i64 + 1));
            out[d + 1] = c.scale(&factor);
        }
        TPoly { coeffs: out }
    }

    fn eval(&self, t: &Rat) -> AlgebraElement {
        let model = self.coeffs[0].model();
        let mut acc = AlgebraElement::zero(model);
        let mut power = Rat::one();
        for c in &self.coeffs {
            acc = acc.add(&c.scale(&Gaussian::from_rat(power.clone())));
            power *= t;
        }
        acc
    }
}

/// `Exp(tH)` evaluated at a rational `t`, exact to the truncation order.
pub fn star_exp_at(s: &StarProduct, h: &ExpArgument, t: &Rat) -> Result<FormalSeries> {
    let model = s.model();
    let order = s.order();
    if h.series().model() != model || h.series().order() != order {
        return Err(Error::ModelMismatch("argument does not match product".into()));
    }
    // u_r(t)' = sum_{p+q+sl=r, q>=1} C_p(H_q, u_sl(t)), u_0 = 1.
    let mut slices: Vec<TPoly> = Vec::with_capacity(order + 1);
    slices.push(TPoly::constant(AlgebraElement::one(model)));
    for r in 1..=order {
        let mut derivative = TPoly::zero(model);
        for q in 1..=r {
            if h.series().coeff(q).is_zero() {
                continue;
            }
            for p in 0..=r - q {
                let sl = r - q - p;
                let hq = h.series().coeff(q);
                for (d, c) in slices[sl].coeffs.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let applied = s.apply_cochain(p, hq, c)?;
                    if applied.is_zero() {
                        continue;
                    }
                    let mut t_term = vec![AlgebraElement::zero(model); d + 1];
                    t_term[d] = applied;
                    derivative = derivative.add(&TPoly { coeffs: t_term });
                }
            }
        }
        slices.push(derivative.integrate());
    }
    let mut out = FormalSeries::zero(model, order);
    for (r, slice) in slices.iter().enumerate() {
        out.set_coeff(r, slice.eval(t));
    }
    Ok(out)
}

/// The star exponential `Exp(H)`; a unit with classical part 1.
pub fn star_exp(s: &StarProduct, h: &ExpArgument) -> Result<FormalSeries> {
    star_exp_at(s, h, &Rat::one())
}

/// The star logarithm of a series normalized to `1 + O(L)`; inverse of
/// `star_exp` on arguments with zero classical part (the symbolic constant
/// is fixed to zero by this normalization).
pub fn star_log(s: &StarProduct, u: &FormalSeries) -> Result<ExpArgument> {
    if u.model() != s.model() || u.order() != s.order() {
        return Err(Error::ModelMismatch("series does not match product".into()));
    }
    if !u.classical_limit().is_one() {
        return Err(Error::NotNormalized(format!(
            "classical part is {}, expected 1",
            u.classical_limit()
        )));
    }
    let model = s.model();
    let order = s.order();
    let mut g = FormalSeries::zero(model, order);
    // Adding L^r g_r changes Exp at order r by exactly g_r, so each slice is
    // read off from the residual.
    for r in 1..=order {
        let current = star_exp(s, &ExpArgument::new(g.clone())?)?;
        let residual = u.coeff(r).sub(current.coeff(r));
        g.set_coeff(r, residual);
    }
    let arg = ExpArgument::new(g)?;
    debug_assert_eq!(&star_exp(s, &arg)?, u);
    Ok(arg)
}

/// Conjugation by a star-unit: `Ad(u)(f) = u * f * u^{-1}`.
pub fn adjoint(s: &StarProduct, u: &FormalSeries, f: &FormalSeries) -> Result<FormalSeries> {
    let v = s.star_invert(u)?;
    s.multiply(&s.multiply(u, f)?, &v)
}

/// `e^{ad(H)}(f)`; the commutator raises the order, so the sum truncates.
pub fn ad_exponential(
    s: &StarProduct,
    h: &ExpArgument,
    f: &FormalSeries,
) -> Result<FormalSeries> {
    let mut acc = f.clone();
    let mut term = f.clone();
    for k in 1..=s.order() {
        term = s.commutator(h.series(), &term)?;
        if term.is_zero() {
            break;
        }
        let c = Gaussian::from_rat(Rat::one() / factorial(k));
        acc = acc.add(&term.scale(&c));
    }
    Ok(acc)
}

/// Report for the exponential identity suite on a pair of arguments.
#[derive(Clone, Debug)]
pub struct ExpIdentityReport {
    pub report: VerificationReport,
    /// Whether the two arguments star-commute (additivity only applies then).
    pub arguments_commute: bool,
}

/// Verify, to the truncation order: the defining commutation
/// `H * Exp(H) = Exp(H) * H`, the one-parameter group law at sampled
/// rational times, `Ad(Exp(H)) = e^{ad(H)}` on sample elements, and the
/// additivity `Exp(H) * Exp(G) = Exp(H+G)` when `[H,G] = 0`.
pub fn check_exp_identities(
    s: &StarProduct,
    h: &ExpArgument,
    g: &ExpArgument,
    samples: &[FormalSeries],
) -> Result<ExpIdentityReport> {
    let mut report = VerificationReport::new();
    let model = s.model();
    let exp_h = star_exp(s, h)?;

    // H * Exp(H) = Exp(H) * H.
    let comm = s.commutator(h.series(), &exp_h)?;
    report.push(
        "argument commutes with its exponential",
        if comm.is_zero() {
            CheckOutcome::Pass
        } else {
            CheckOutcome::Fail { order: 0, witnesses: vec![], residual: comm.coeff(1).clone() }
        },
    );

    // Group law at sampled rational times.
    let times = [
        (rat_int(1), rat_int(1)),
        (crate::scalar::rat(1, 2), crate::scalar::rat(1, 3)),
        (rat_int(2), rat_int(-1)),
    ];
    let mut group_ok = true;
    for (t, u) in &times {
        let lhs = s.multiply(&star_exp_at(s, h, t)?, &star_exp_at(s, h, u)?)?;
        let rhs = star_exp_at(s, h, &(t + u))?;
        if lhs != rhs {
            group_ok = false;
        }
    }
    report.push(
        "one-parameter group law at sampled times",
        if group_ok {
            CheckOutcome::Pass
        } else {
            CheckOutcome::Fail { order: 0, witnesses: vec![], residual: AlgebraElement::zero(model) }
        },
    );

    // Ad(Exp(H)) = e^{ad(H)} on the samples.
    let mut ad_ok = true;
    for f in samples {
        let lhs = adjoint(s, &exp_h, f)?;
        let rhs = ad_exponential(s, h, f)?;
        if lhs != rhs {
            ad_ok = false;
        }
    }
    report.push(
        "conjugation by the exponential equals the commutator exponential",
        if ad_ok {
            CheckOutcome::Pass
        } else {
            CheckOutcome::Fail { order: 0, witnesses: vec![], residual: AlgebraElement::zero(model) }
        },
    );

    // Commuting-case additivity.
    let bracket = s.commutator(h.series(), g.series())?;
    let commute = bracket.is_zero();
    if commute {
        let lhs = s.multiply(&exp_h, &star_exp(s, g)?)?;
        let rhs = star_exp(s, &h.add(g))?;
        report.push(
            "additivity for commuting arguments",
            if lhs == rhs {
                CheckOutcome::Pass
            } else {
                let residual = lhs
                    .sub(&rhs)
                    .coeffs()
                    .iter()
                    .find(|c| !c.is_zero())
                    .cloned()
                    .unwrap_or_else(|| AlgebraElement::zero(model));
                CheckOutcome::Fail { order: 0, witnesses: vec![], residual }
            },
        );
    } else {
        report.note("arguments do not star-commute; additivity not applicable");
    }

    Ok(ExpIdentityReport { report, arguments_commute: commute })
}

/// The inner automorphism `Ad(Exp(H))` as an operator series.
pub fn exp_adjoint_opseries(s: &StarProduct, h: &ExpArgument) -> Result<OpSeries> {
    let u = star_exp(s, h)?;
    OpSeries::adjoint(s, &u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{AlgebraElement, Model, PoissonStructure};
    use crate::formal::{moyal, moyal_on};
    use crate::scalar::rat;

    fn pi1() -> PoissonStructure {
        PoissonStructure::dim2(Rat::one())
    }

    fn e(k: &[i64]) -> AlgebraElement {
        AlgebraElement::trig_mode(2, k).unwrap()
    }

    fn lambda_times(e: AlgebraElement, order: usize) -> ExpArgument {
        let mut h = FormalSeries::zero(e.model(), order);
        h.set_coeff(1, e);
        ExpArgument::new(h).unwrap()
    }

    #[test]
    fn exp_of_zero_is_one() {
        let order = 6;
        let s = moyal(&pi1(), order);
        let zero = ExpArgument::new(FormalSeries::zero(Model::Trig(2), order)).unwrap();
        assert_eq!(star_exp(&s, &zero).unwrap(), FormalSeries::one(Model::Trig(2), order));
    }

    #[test]
    fn exp_rejects_nonzero_classical_part() {
        let order = 4;
        let h = FormalSeries::from_element(e(&[1, 0]), order);
        assert!(matches!(ExpArgument::new(h), Err(Error::NonzeroClassicalPart(_))));
    }

    #[test]
    fn plane_exp_of_lambda_x_is_classical() {
        let order = 6;
        let model = Model::Poly(2);
        let s = moyal_on(model, &pi1(), order).unwrap();
        let x = AlgebraElement::variable(model, 1).unwrap();
        let h = lambda_times(x.clone(), order);
        let u = star_exp(&s, &h).unwrap();
        // Oracle: x star-commutes with its powers, so Exp(Lx) = sum L^r x^r / r!.
        let mut expected = FormalSeries::zero(model, order);
        let mut pow = AlgebraElement::one(model);
        for r in 0..=order {
            expected.set_coeff(r, pow.scale(&Gaussian::from_rat(Rat::one() / factorial(r))));
            pow = pow.mul(&x);
        }
        assert_eq!(u, expected);
    }

    #[test]
    fn torus_exp_walks_up_a_single_mode() {
        let order = 6;
        let s = moyal(&pi1(), order);
        let h = lambda_times(e(&[1, 0]), order);
        let u = star_exp(&s, &h).unwrap();
        let mut expected = FormalSeries::zero(Model::Trig(2), order);
        for r in 0..=order {
            let mode = AlgebraElement::trig_mode(2, &[r as i64, 0]).unwrap();
            expected.set_coeff(r, mode.scale(&Gaussian::from_rat(Rat::one() / factorial(r))));
        }
        assert_eq!(u, expected);
    }

    #[test]
    fn log_round_trip_and_classical_log() {
        let order = 6;
        let s = moyal(&pi1(), order);
        let h = lambda_times(e(&[1, 1]), order);
        let u = star_exp(&s, &h).unwrap();
        let back = star_log(&s, &u).unwrap();
        assert_eq!(back.series(), h.series());
        assert!(star_log(&s, &FormalSeries::one(Model::Trig(2), order))
            .unwrap()
            .series()
            .is_zero());
        // 1 + L x on the plane: log is the alternating harmonic series.
        let model = Model::Poly(2);
        let sp = moyal_on(model, &pi1(), order).unwrap();
        let x = AlgebraElement::variable(model, 1).unwrap();
        let mut u = FormalSeries::one(model, order);
        u.set_coeff(1, x.clone());
        let g = star_log(&sp, &u).unwrap();
        let mut expected = FormalSeries::zero(model, order);
        let mut pow = x.clone();
        for r in 1..=order {
            let sign = if r % 2 == 1 { Rat::one() } else { -Rat::one() };
            expected.set_coeff(r, pow.scale(&Gaussian::from_rat(sign / rat_int(r as i64))));
            pow = pow.mul(&x);
        }
        assert_eq!(g.series(), &expected);
        // Non-normalized input is rejected.
        let bad = FormalSeries::from_element(e(&[1, 0]), order);
        assert!(matches!(star_log(&s, &bad), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn adjoint_quantum_torus_phase() {
        let order = 8;
        let s = moyal(&pi1(), order);
        let u = FormalSeries::from_element(e(&[1, 0]), order);
        let f = FormalSeries::from_element(e(&[0, 1]), order);
        let out = adjoint(&s, &u, &f).unwrap();
        let mut expected = FormalSeries::zero(Model::Trig(2), order);
        for r in 0..=order {
            let c = Gaussian::imag_ratio(-1, 1)
                .pow(r as u32)
                .scale_rat(&(Rat::one() / factorial(r)));
            expected.set_coeff(r, e(&[0, 1]).scale(&c));
        }
        assert_eq!(out, expected);
        // Ad(u)(u) = u and Ad(1) = id.
        assert_eq!(adjoint(&s, &u, &u).unwrap(), u);
        let one = FormalSeries::one(Model::Trig(2), order);
        assert_eq!(adjoint(&s, &one, &f).unwrap(), f);
    }

    #[test]
    fn identity_suite_on_commuting_and_noncommuting_pairs() {
        let order = 6;
        let s = moyal(&pi1(), order);
        let samples = vec![
            FormalSeries::from_element(e(&[0, 1]), order),
            FormalSeries::from_element(e(&[1, -1]), order),
        ];
        // Same-direction modes commute: pairing(k, 2k) = 0.
        let h = lambda_times(e(&[1, 0]), order);
        let g = lambda_times(e(&[2, 0]), order);
        let rep = check_exp_identities(&s, &h, &g, &samples).unwrap();
        assert!(rep.arguments_commute);
        assert!(rep.report.passed());
        // Transversal modes do not commute; the suite records that.
        let g2 = lambda_times(e(&[0, 1]), order);
        let rep2 = check_exp_identities(&s, &h, &g2, &samples).unwrap();
        assert!(!rep2.arguments_commute);
        assert!(rep2.report.passed());
        assert_eq!(rep2.report.notes.len(), 1);
    }

    #[test]
    fn group_law_at_rational_times() {
        let order = 5;
        let s = moyal(&pi1(), order);
        let h = lambda_times(e(&[1, 2]), order);
        let t = rat(1, 2);
        let u = rat(1, 3);
        let lhs = s
            .multiply(&star_exp_at(&s, &h, &t).unwrap(), &star_exp_at(&s, &h, &u).unwrap())
            .unwrap();
        let rhs = star_exp_at(&s, &h, &(t + u)).unwrap();
        assert_eq!(lhs, rhs);
    }
}
