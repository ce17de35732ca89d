//! `dqw`: batch verification workbench for exact formal deformation
//! quantization on flat models.
//!
//! Exit codes: 0 for pass/value reports, 1 for a mathematical failure
//! (a check that ran and found a counterexample), 2 for usage and input
//! errors.

mod parse;
mod report;
mod schema;
mod selftest;

use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use dqw_core::algebra::{Model, PoissonStructure};
use dqw_core::bimodule::{deform_in_direction, moduli_descriptor, semiclassical_limit};
use dqw_core::classify::{
    brute_force_orbit_check, image_cl, image_clr, kernel_descriptor, verify_certificate,
    witness_nonsurjective, CertificateKind, ExtendedRationalVector,
};
use dqw_core::connections::{connection_class, integral_witness, ContravariantConnection};
use dqw_core::derivations::{check_derivation, inner_one_form, one_form_derivation, ClosedOneForm};
use dqw_core::error::Error;
use dqw_core::formal::{compute_tau, BidiffCochain};
use dqw_core::starexp::{star_exp, star_log, ExpArgument};

use report::{absorb_verification, Report, Status};

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Parser, Debug)]
#[command(name = "dqw", version, about = "Exact workbench for formal deformation quantization")]
struct Cli {
    /// Output format for the report.
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: Format,
    /// Truncation order override (also via the DQW_ORDER variable).
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Seed for randomized suites.
    #[arg(long, global = true, default_value_t = 20260808)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Verify associativity and unitality of a star product.
    Assoc {
        #[arg(long)]
        product: String,
    },
    /// Star exponential of an argument with vanishing classical part.
    Exp {
        #[arg(long)]
        product: String,
        #[arg(long)]
        h: String,
    },
    /// Star logarithm of a series normalized to 1 + O(L).
    Log {
        #[arg(long)]
        product: String,
        #[arg(long)]
        u: String,
    },
    /// Second-order antisymmetric difference of two products sharing C1.
    Tau {
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
    },
    /// Derivation attached to a closed one-form "c1,c2;g=<expr>".
    Delta {
        #[arg(long)]
        product: String,
        #[arg(long)]
        form: String,
    },
    /// Express the conjugation by a unit as a one-form exponential.
    Innerform {
        #[arg(long)]
        product: String,
        #[arg(long)]
        u: String,
    },
    /// Contravariant connection d + alpha: axioms, curvature, class, witness.
    Conn {
        /// Bivector matrix, row-major: "0,1;-1,0".
        #[arg(long)]
        pi: String,
        /// Shift field, e.g. "E[0,1]*d1 + (i/2)*d2".
        #[arg(long)]
        alpha: String,
        /// Use the plane model instead of the torus.
        #[arg(long)]
        plane: bool,
        #[arg(long)]
        curvature: bool,
        #[arg(long)]
        class: bool,
        #[arg(long)]
        witness: bool,
    },
    /// Bimodule deformation in the direction of d + alpha.
    Bimodule {
        #[arg(long)]
        product: String,
        /// Field expression for the shift of the canonical connection.
        #[arg(long)]
        direction: String,
        /// Verify the module relations and the round trip (default).
        #[arg(long)]
        verify: bool,
        /// Report the moduli descriptor instead.
        #[arg(long)]
        moduli: bool,
    },
    /// Class-level image and kernel computations.
    Classify {
        #[command(subcommand)]
        what: ClassifyCommand,
    },
    /// Certificate that an integer vector misses every unimodular orbit.
    Witness {
        /// Rational part, e.g. "1/2,1/3".
        #[arg(long)]
        v: String,
        /// Symbol rows "s:1/3,0;t:0,1" for entries r0 + sum r_i * s_i.
        #[arg(long)]
        symbols: Option<String>,
        /// Confirm by exhaustive enumeration up to this entry bound.
        #[arg(long)]
        oracle_bound: Option<i64>,
    },
    /// Run the built-in verification suite.
    Selftest,
}

#[derive(Subcommand, Debug)]
enum ClassifyCommand {
    /// Image of the restricted classical-limit map from class data.
    Image {
        #[arg(long)]
        class: String,
        #[arg(long)]
        group: String,
        /// Also list the (automorphism, translation) pairs.
        #[arg(long)]
        full: bool,
    },
    /// Kernel descriptor for a flat model, e.g. torus2 or r4.
    Kernel {
        #[arg(long)]
        model: String,
    },
}

fn effective_order(cli: Option<usize>) -> Option<usize> {
    cli.or_else(|| std::env::var("DQW_ORDER").ok().and_then(|v| v.parse().ok()))
}

fn cochain_json(c: &BidiffCochain) -> Value {
    let terms: Vec<Value> = c
        .terms()
        .map(|((l, r), coeff)| {
            json!({
                "coeff": coeff.to_string(),
                "left": l,
                "right": r,
            })
        })
        .collect();
    Value::Array(terms)
}

fn run(cli: &Cli) -> Result<Report, Error> {
    let order = effective_order(cli.order);
    match &cli.command {
        Command::Assoc { product } => {
            let s = schema::load_product(product, order)?;
            let assoc = s.check_associativity();
            let unital = s.check_unitality();
            let ok = assoc.passed() && unital.passed();
            let mut rep = Report::new("assoc", if ok { Status::Pass } else { Status::Fail });
            for (label, outcome) in [("associativity", &assoc), ("unitality", &unital)] {
                match outcome {
                    dqw_core::CheckOutcome::Pass => {
                        rep.diagnostic(format!("{label}: pass"));
                    }
                    dqw_core::CheckOutcome::Fail { order, witnesses, residual } => {
                        rep.diagnostic(format!("{label}: fail at order {order}"));
                        for w in witnesses {
                            rep.witness(w.to_string());
                        }
                        rep.diagnostic(format!("residual: {residual}"));
                    }
                }
            }
            rep.set_str("model", s.model().to_string());
            rep.set("order", json!(s.order()));
            Ok(rep)
        }
        Command::Exp { product, h } => {
            let s = schema::load_product(product, order)?;
            let series = parse::parse_series(h, s.model(), s.order())
                .map_err(|e| Error::Invalid(format!("bad expression: {e}")))?;
            let arg = ExpArgument::new(series)?;
            let value = star_exp(&s, &arg)?;
            let mut rep = Report::new("exp", Status::Value);
            rep.set_str("series", value.to_string());
            Ok(rep)
        }
        Command::Log { product, u } => {
            let s = schema::load_product(product, order)?;
            let series = parse::parse_series(u, s.model(), s.order())
                .map_err(|e| Error::Invalid(format!("bad expression: {e}")))?;
            let value = star_log(&s, &series)?;
            let mut rep = Report::new("log", Status::Value);
            rep.set_str("argument", value.series().to_string());
            Ok(rep)
        }
        Command::Tau { left, right } => {
            let lhs = schema::load_product(left, order)?;
            let rhs = schema::load_product(right, order)?;
            let tau = compute_tau(&lhs, &rhs)?;
            let mut rep = Report::new("tau", Status::Value);
            rep.set("tau", cochain_json(&tau));
            rep.set("zero", json!(tau.is_zero()));
            rep.diagnostic("cochain and commutator routes agree");
            Ok(rep)
        }
        Command::Delta { product, form } => {
            let s = schema::load_product(product, order)?;
            let one_form = parse_one_form(form, s.model(), s.order())?;
            let derivation = one_form_derivation(&s, &one_form)?;
            let check = check_derivation(&s, &derivation);
            let mut rep = Report::new(
                "delta",
                if check.passed() { Status::Value } else { Status::Fail },
            );
            rep.diagnostic(format!("derivation check: {check}"));
            let stages: Vec<Value> = (0..=derivation.order())
                .map(|r| Value::String(format!("{}", derivation.stage(r))))
                .collect();
            rep.set("stages", Value::Array(stages));
            Ok(rep)
        }
        Command::Innerform { product, u } => {
            let s = schema::load_product(product, order)?;
            let series = parse::parse_series(u, s.model(), s.order())
                .map_err(|e| Error::Invalid(format!("bad expression: {e}")))?;
            let outcome = inner_one_form(&s, &series)?;
            let mut rep = Report::new(
                "innerform",
                if outcome.verified { Status::Value } else { Status::Fail },
            );
            let forms: Vec<Value> = outcome
                .form
                .forms
                .iter()
                .map(|f| {
                    json!({
                        "constant": f.constant.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                        "potential": f.potential.to_string(),
                    })
                })
                .collect();
            rep.set("forms", Value::Array(forms));
            rep.set("constant_integral", json!(outcome.constant_integral));
            rep.set("higher_orders_exact", json!(outcome.higher_orders_exact));
            rep.set("verified", json!(outcome.verified));
            Ok(rep)
        }
        Command::Conn { pi, alpha, plane, curvature, class, witness } => {
            let mat = parse::parse_rat_matrix(pi)
                .map_err(|e| Error::Invalid(format!("bad bivector: {e}")))?;
            let pi = PoissonStructure::new(mat)?;
            let model =
                if *plane { Model::Poly(pi.dim()) } else { Model::Trig(pi.dim()) };
            let field = parse::parse_field(alpha, model, 0)
                .map_err(|e| Error::Invalid(format!("bad field: {e}")))?;
            let d = ContravariantConnection::new(pi.clone(), field.clone())?;
            let axioms = d.check_axioms();
            let mut rep =
                Report::new("conn", if axioms.passed() { Status::Pass } else { Status::Fail });
            absorb_verification(&mut rep, &axioms);
            let curv = d.curvature();
            rep.set("flat", json!(curv.is_zero()));
            if *curvature {
                rep.set("curvature", cochain_json(&curv));
            }
            if *class {
                let c = connection_class(&d)?;
                rep.set(
                    "class",
                    json!({
                        "harmonic_coset": c.harmonic_coset.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                        "exact_potential": c.exact_potential.to_string(),
                    }),
                );
            }
            if *witness {
                match integral_witness(&field, &pi)? {
                    Some(u) => rep.set_str("witness", u.to_string()),
                    None => rep.set("witness", Value::Null),
                };
            }
            Ok(rep)
        }
        Command::Bimodule { product, direction, verify, moduli } => {
            let s = schema::load_product(product, order)?;
            if *moduli {
                let desc = moduli_descriptor(&s)?;
                let mut rep = Report::new("bimodule", Status::Value);
                rep.set("per_order_dim", json!(desc.per_order_dim));
                rep.set("order", json!(desc.order));
                rep.set("lattice_rank", json!(desc.lattice_rank));
                return Ok(rep);
            }
            let field = parse::parse_field(direction, s.model(), s.order())
                .map_err(|e| Error::Invalid(format!("bad field: {e}")))?;
            let d = ContravariantConnection::new(s.poisson().clone(), field.clone())?;
            let b = deform_in_direction(&s, &d)?;
            let limit = semiclassical_limit(&b)?;
            let round_trip = limit.alpha() == &field;
            let mut ok = round_trip;
            let mut rep = Report::new("bimodule", Status::Pass);
            if *verify {
                let relations = b.check_relations();
                ok &= relations.passed();
                absorb_verification(&mut rep, &relations);
            }
            rep.set_status(if ok { Status::Pass } else { Status::Fail });
            rep.set("round_trip", json!(round_trip));
            rep.set_str("direction", format!("{field}"));
            Ok(rep)
        }
        Command::Classify { what } => match what {
            ClassifyCommand::Image { class, group, full } => {
                let (c, torsion) = schema::load_class(class)?;
                let (g, cap) = schema::load_group(group)?;
                let restricted = image_clr(&c, &g, &torsion, cap)?;
                let mut rep = Report::new("classify image", Status::Value);
                let free: Vec<Value> =
                    restricted.free.iter().map(|v| json!(v)).collect();
                rep.set("free", Value::Array(free));
                rep.set("torsion", json!(torsion.factors()));
                if *full {
                    let fi = image_cl(&c, &g, &torsion, cap)?;
                    let pairs: Vec<Value> = fi
                        .pairs
                        .iter()
                        .map(|(psi, l)| json!({"psi": psi, "l": l}))
                        .collect();
                    rep.set("pairs", Value::Array(pairs));
                    rep.set("group_closed", json!(fi.is_group_closed(&torsion)?));
                }
                Ok(rep)
            }
            ClassifyCommand::Kernel { model } => {
                let model = schema::parse_model_name(model)?;
                let m = model.dim();
                let pi = if m == 2 {
                    PoissonStructure::dim2(dqw_core::scalar::rat_int(1))
                } else {
                    PoissonStructure::standard_symplectic(m)?
                };
                let k = kernel_descriptor(model, &pi, order.unwrap_or(dqw_core::formal::DEFAULT_ORDER))?;
                let mut rep = Report::new("classify kernel", Status::Value);
                rep.set("injective", json!(k.injective));
                rep.set("per_order_dim", json!(k.descriptor.per_order_dim));
                rep.set("lattice_rank", json!(k.descriptor.lattice_rank));
                rep.set("order", json!(k.descriptor.order));
                Ok(rep)
            }
        },
        Command::Witness { v, symbols, oracle_bound } => {
            let r0 = parse::parse_rat_vector(v)
                .map_err(|e| Error::Invalid(format!("bad vector: {e}")))?;
            let vector = match symbols {
                None => ExtendedRationalVector::rational(r0)?,
                Some(spec) => {
                    let mut rows = Vec::new();
                    for piece in spec.split(';') {
                        let (_, row) = piece
                            .split_once(':')
                            .ok_or_else(|| Error::Invalid("symbols need name:vector parts".into()))?;
                        rows.push(
                            parse::parse_rat_vector(row)
                                .map_err(|e| Error::Invalid(format!("bad symbol row: {e}")))?,
                        );
                    }
                    ExtendedRationalVector::with_symbols(r0, rows)?
                }
            };
            let cert = witness_nonsurjective(&vector)?;
            let arithmetic = verify_certificate(&cert, &vector);
            let mut rep = Report::new("witness", Status::Value);
            rep.set("l", json!(cert.l));
            match &cert.kind {
                CertificateKind::Prime { p, a, d } => {
                    rep.set_str("kind", "prime");
                    rep.set("p", json!(p));
                    rep.set("a", json!(a));
                    rep.set("d", json!(d));
                }
                CertificateKind::Integral => {
                    rep.set_str("kind", "integral");
                }
                CertificateKind::Zero => {
                    rep.set_str("kind", "zero");
                }
            }
            rep.set("arithmetic_verified", json!(arithmetic));
            if let Some(bound) = oracle_bound {
                let hit = brute_force_orbit_check(&vector, &cert.l, *bound)?;
                rep.set("oracle_bound", json!(bound));
                rep.set("oracle_refuted", json!(!hit));
                if hit {
                    rep.diagnostic("enumeration found the vector in the orbit");
                    rep.set_status(Status::Fail);
                }
            }
            if !arithmetic {
                rep.set_status(Status::Fail);
            }
            Ok(rep)
        }
        Command::Selftest => selftest::run(cli.seed, order),
    }
}

/// Parse the one-form syntax "c1,...,cm" or "c1,...,cm;g=<expr>".
fn parse_one_form(src: &str, model: Model, order: usize) -> Result<ClosedOneForm, Error> {
    let (constants, potential) = match src.split_once(';') {
        None => (src, None),
        Some((c, rest)) => {
            let expr = rest
                .trim()
                .strip_prefix("g=")
                .ok_or_else(|| Error::Invalid("expected ';g=<expr>' after the constants".into()))?;
            (c, Some(expr))
        }
    };
    let constant = parse::parse_gaussian_vector(constants, model)
        .map_err(|e| Error::Invalid(format!("bad one-form constants: {e}")))?;
    let g = match potential {
        None => dqw_core::algebra::AlgebraElement::zero(model),
        Some(expr) => parse::parse_element(expr, model, order)
            .map_err(|e| Error::Invalid(format!("bad potential: {e}")))?,
    };
    ClosedOneForm::new(constant, g)
}

fn main() {
    let cli = Cli::parse();
    let started = Instant::now();
    let (report, code) = match run(&cli) {
        Ok(rep) => {
            let code = rep.status_kind.exit_code();
            (rep, code)
        }
        Err(err) => {
            let mut rep = Report::new("error", Status::Error);
            rep.diagnostic(err.to_string());
            (rep, 2)
        }
    };
    println!("{}", report.render(cli.format == Format::Json));
    eprintln!("elapsed: {:?}", started.elapsed());
    std::process::exit(code);
}
