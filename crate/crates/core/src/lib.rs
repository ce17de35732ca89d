//! Exact-arithmetic workbench for formal deformation quantization on flat
//! desk-scale models: trigonometric polynomials on tori and polynomials on
//! the plane, deformed by constant-coefficient star products.
//!
//! Everything is computed over the Gaussian rationals and truncated at a
//! configurable order in the deformation parameter; every verification is an
//! exact identity check, never a numerical comparison.
//!
//! ```
//! use dqw_core::{moyal, AlgebraElement, FormalSeries, PoissonStructure};
//! use dqw_core::scalar::rat_int;
//!
//! // The exponential product of the standard bivector on the 2-torus.
//! let pi = PoissonStructure::dim2(rat_int(1));
//! let star = moyal(&pi, 4);
//! assert!(star.check_associativity().passed());
//!
//! // Two modes star-multiply to a phase times their pointwise product.
//! let u = FormalSeries::from_element(AlgebraElement::trig_mode(2, &[1, 0]).unwrap(), 4);
//! let v = FormalSeries::from_element(AlgebraElement::trig_mode(2, &[0, 1]).unwrap(), 4);
//! let uv = star.multiply(&u, &v).unwrap();
//! assert_eq!(uv.classical_limit(), &AlgebraElement::trig_mode(2, &[1, 1]).unwrap());
//! assert_eq!(star.extract_poisson().unwrap(), pi);
//! ```

pub mod algebra;
pub mod bimodule;
pub mod classify;
pub mod connections;
pub mod derivations;
pub mod error;
pub mod formal;
pub mod report;
pub mod sampling;
pub mod scalar;
pub mod starexp;
pub mod sym;

pub use algebra::{
    hamiltonian_field, is_poisson_vector_field, poisson_bracket, AlgebraElement, DiffOperator,
    Model, MultiIndex, PoissonStructure,
};
pub use bimodule::{
    bimodule_across_twist, deform_in_direction, moduli_descriptor, semiclassical_limit,
    twist_bimodule, BimoduleDeformation, ModuliDescriptor,
};
pub use classify::{
    brute_force_orbit_check, class_pullback, image_cl, image_clr, kernel_descriptor, picard_act,
    picard_group_law, picard_inverse, verify_certificate, witness_nonsurjective, ClassSeries,
    ExtendedRationalVector, LatticeGroup, PicardElement, TorsionGroup, WitnessCertificate,
};
pub use connections::{
    connection_class, integral_witness, is_poisson_derivation, ContravariantConnection,
    CurvatureMap,
};
pub use derivations::{
    check_derivation, conjugating_unit, inner_one_form, is_central, lift_poisson_field,
    one_form_derivation, outer_class, quasi_inner, ClosedOneForm, FormalDerivation,
    OneFormSeries,
};
pub use error::{Error, Result};
pub use formal::{
    compute_tau, equivalence_first_order, moyal, moyal_formal, moyal_on,
    pullback_by_automorphism, twist_by_equivalence, AutomorphismSeed, BidiffCochain,
    BracketConvention, Equivalence, FormalSeries, OpSeries, StarProduct, DEFAULT_ORDER,
};
pub use report::{CheckOutcome, VerificationReport};
pub use sampling::Sampler;
pub use scalar::{Gaussian, Rat};
pub use starexp::{
    ad_exponential, adjoint, check_exp_identities, star_exp, star_exp_at, star_log, ExpArgument,
};
