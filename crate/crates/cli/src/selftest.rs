//! The built-in verification suite: a condensed pass over every subsystem
//! with seeded randomness, exact comparisons throughout.

use serde_json::json;

use dqw_core::algebra::{
    hamiltonian_field, poisson_bracket, AlgebraElement, DiffOperator, Model, PoissonStructure,
};
use dqw_core::bimodule::{deform_in_direction, semiclassical_limit, BimoduleDeformation};
use dqw_core::classify::{
    brute_force_orbit_check, verify_certificate, witness_nonsurjective, ExtendedRationalVector,
};
use dqw_core::connections::{integral_field, integral_witness, ContravariantConnection};
use dqw_core::derivations::{check_derivation, quasi_inner};
use dqw_core::error::Error;
use dqw_core::formal::moyal;
use dqw_core::sampling::Sampler;
use dqw_core::scalar::{rat, rat_int};
use dqw_core::starexp::{check_exp_identities, star_exp, star_log, ExpArgument};

use crate::report::{Report, Status};

pub fn run(seed: u64, order: Option<usize>) -> Result<Report, Error> {
    let order = order.unwrap_or(4);
    let mut sampler = Sampler::new(seed);
    let pi = PoissonStructure::dim2(rat_int(1));
    let model = Model::Trig(2);
    let s = moyal(&pi, order);
    let mut sections: Vec<(&str, bool)> = Vec::new();

    // Bracket identities on random triples.
    let mut bracket_ok = true;
    for _ in 0..5 {
        let a = sampler.trig_element(2, 3, 2);
        let b = sampler.trig_element(2, 3, 2);
        let c = sampler.trig_element(2, 3, 2);
        let br = |x: &AlgebraElement, y: &AlgebraElement| poisson_bracket(x, y, &pi).unwrap();
        let cyclic = br(&a, &br(&b, &c)).add(&br(&b, &br(&c, &a))).add(&br(&c, &br(&a, &b)));
        bracket_ok &= cyclic.is_zero();
        bracket_ok &= br(&a, &b.mul(&c)) == b.mul(&br(&a, &c)).add(&c.mul(&br(&a, &b)));
    }
    sections.push(("bracket identities", bracket_ok));

    // Product structure.
    sections.push(("associativity", s.check_associativity().passed()));
    sections.push(("unitality", s.check_unitality().passed()));
    sections.push(("bracket extraction", s.extract_poisson().map(|p| p == pi).unwrap_or(false)));

    // Exponentials.
    let mut exp_ok = true;
    for _ in 0..3 {
        let h = ExpArgument::new(sampler.series_without_classical_part(model, order, 2, 2))?;
        let g = ExpArgument::new(sampler.series_without_classical_part(model, order, 1, 1))?;
        let samples =
            vec![dqw_core::formal::FormalSeries::from_element(sampler.trig_element(2, 2, 2), order)];
        let rep = check_exp_identities(&s, &h, &g, &samples)?;
        exp_ok &= rep.report.passed();
        let u = star_exp(&s, &h)?;
        exp_ok &= star_log(&s, &u)?.series() == h.series();
    }
    sections.push(("exponential identities", exp_ok));

    // Derivations.
    let h = dqw_core::formal::FormalSeries::from_element(sampler.trig_element(2, 2, 2), order);
    let qi = quasi_inner(&s, &h)?;
    sections.push(("quasi-inner derivations", check_derivation(&s, &qi).passed()));

    // Connections and witnesses.
    let mut conn_ok = true;
    for k1 in -1i64..=1 {
        for k2 in -1i64..=1 {
            let field = integral_field(model, &pi, &[k1, k2])?;
            conn_ok &= integral_witness(&field, &pi)?
                == Some(AlgebraElement::trig_mode(2, &[k1, k2])?);
        }
    }
    let d = ContravariantConnection::canonical(model, pi.clone())?;
    conn_ok &= d.check_axioms().passed() && d.curvature().is_zero();
    sections.push(("connections", conn_ok));

    // Bimodules.
    let alpha = hamiltonian_field(&sampler.trig_element_zero_mean(2, 2, 2), &pi)?;
    let dir = ContravariantConnection::new(pi.clone(), alpha.clone())?;
    let b = deform_in_direction(&s, &dir)?;
    let bim_ok = b.check_relations().passed()
        && semiclassical_limit(&b)?.alpha() == &alpha
        && semiclassical_limit(&BimoduleDeformation::regular(&s))?.alpha()
            == &DiffOperator::zero(model);
    sections.push(("bimodules", bim_ok));

    // Witness certificates against the oracle.
    let mut witness_ok = true;
    for v in [
        ExtendedRationalVector::rational(vec![rat(1, 2)])?,
        ExtendedRationalVector::rational(vec![rat(1, 2), rat(1, 3)])?,
    ] {
        let cert = witness_nonsurjective(&v)?;
        witness_ok &= verify_certificate(&cert, &v);
        witness_ok &= !brute_force_orbit_check(&v, &cert.l, 3)?;
    }
    sections.push(("witness certificates", witness_ok));

    let all = sections.iter().all(|(_, ok)| *ok);
    let mut rep = Report::new("selftest", if all { Status::Pass } else { Status::Fail });
    for (label, ok) in &sections {
        rep.diagnostic(format!("{label}: {}", if *ok { "pass" } else { "fail" }));
    }
    rep.set("seed", json!(seed));
    rep.set("order", json!(order));
    rep.set("sections", json!(sections.len()));
    Ok(rep)
}
