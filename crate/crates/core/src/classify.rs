//! Characteristic-class calculus at lattice level: the semidirect group law
//! on class-level Picard elements, pull-back and translation actions on
//! class series, image and kernel descriptors of the classical-limit map,
//! and certificates that an integer vector misses every unimodular orbit
//! `{Av - v}`, confirmed by a brute-force oracle.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::algebra::{Model, PoissonStructure};
use crate::bimodule::ModuliDescriptor;
use crate::error::{Error, Result};
use crate::formal::unimodular_inverse;
use crate::scalar::{rat_int, Gaussian, Rat};

/// Square integer matrix.
pub type IMat = Vec<Vec<i64>>;

pub fn identity_matrix(m: usize) -> IMat {
    (0..m).map(|i| (0..m).map(|j| i64::from(i == j)).collect()).collect()
}

fn mat_mul(a: &IMat, b: &IMat) -> IMat {
    let m = a.len();
    (0..m)
        .map(|i| (0..m).map(|j| (0..m).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

fn mat_vec(a: &IMat, v: &[i64]) -> Vec<i64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

fn mat_vec_rat(a: &IMat, v: &[Rat]) -> Vec<Rat> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| rat_int(*x) * y).sum())
        .collect()
}

fn mat_vec_gaussian(a: &IMat, v: &[Gaussian]) -> Vec<Gaussian> {
    a.iter()
        .map(|row| {
            let mut acc = Gaussian::zero();
            for (x, y) in row.iter().zip(v) {
                acc += &y.scale_int(*x);
            }
            acc
        })
        .collect()
}

fn int_det(m: &IMat) -> i64 {
    match m.len() {
        0 => 1,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        n => {
            let mut det = 0i64;
            for j in 0..n {
                if m[0][j] == 0 {
                    continue;
                }
                let minor: IMat = (1..n)
                    .map(|r| (0..n).filter(|&c| c != j).map(|c| m[r][c]).collect())
                    .collect();
                let sign = if j % 2 == 0 { 1 } else { -1 };
                det += sign * m[0][j] * int_det(&minor);
            }
            det
        }
    }
}

/// Default element cap for group closures.
pub const DEFAULT_CLOSURE_CAP: usize = 10_000;

/// A subgroup of the unimodular group given by generators; elements are
/// enumerated by breadth-first closure up to a cap.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LatticeGroup {
    rank: usize,
    generators: Vec<IMat>,
}

impl LatticeGroup {
    pub fn new(rank: usize, generators: Vec<IMat>) -> Result<Self> {
        for g in &generators {
            if g.len() != rank || g.iter().any(|row| row.len() != rank) {
                return Err(Error::Invalid("generator has the wrong shape".into()));
            }
            let det = int_det(g);
            if det != 1 && det != -1 {
                return Err(Error::Invalid(format!("generator determinant {det} is not a unit")));
            }
        }
        Ok(LatticeGroup { rank, generators })
    }

    /// The trivial group.
    pub fn trivial(rank: usize) -> Self {
        LatticeGroup { rank, generators: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn generators(&self) -> &[IMat] {
        &self.generators
    }

    /// Breadth-first closure under right multiplication by generators.
    /// Finite groups close; an infinite group runs into the cap.
    pub fn closure(&self, cap: usize) -> Result<Vec<IMat>> {
        let mut seen: BTreeSet<IMat> = BTreeSet::new();
        let id = identity_matrix(self.rank);
        seen.insert(id.clone());
        let mut frontier = vec![id];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for m in &frontier {
                for g in &self.generators {
                    let prod = mat_mul(m, g);
                    if seen.insert(prod.clone()) {
                        if seen.len() > cap {
                            return Err(Error::CapExceeded(cap));
                        }
                        next.push(prod);
                    }
                }
            }
            frontier = next;
        }
        Ok(seen.into_iter().collect())
    }
}

/// Invariant factors `d_1 | d_2 | ... | d_k`, each at least 2.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct TorsionGroup {
    factors: Vec<u64>,
}

impl TorsionGroup {
    pub fn new(factors: Vec<u64>) -> Result<Self> {
        for w in factors.windows(2) {
            if w[1] % w[0] != 0 {
                return Err(Error::Invalid(format!(
                    "invariant factors must divide in order: {} does not divide {}",
                    w[0], w[1]
                )));
            }
        }
        if factors.iter().any(|&d| d < 2) {
            return Err(Error::Invalid("invariant factors must be at least 2".into()));
        }
        Ok(TorsionGroup { factors })
    }

    pub fn none() -> Self {
        TorsionGroup { factors: Vec::new() }
    }

    pub fn factors(&self) -> &[u64] {
        &self.factors
    }

    pub fn is_trivial(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn order(&self) -> u64 {
        self.factors.iter().product()
    }

    pub fn zero_element(&self) -> Vec<u64> {
        vec![0; self.factors.len()]
    }

    pub fn reduce(&self, t: &[i64]) -> Vec<u64> {
        t.iter()
            .zip(&self.factors)
            .map(|(v, d)| (v.rem_euclid(*d as i64)) as u64)
            .collect()
    }

    pub fn add(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).zip(&self.factors).map(|((x, y), d)| (x + y) % d).collect()
    }

    pub fn neg(&self, a: &[u64]) -> Vec<u64> {
        a.iter().zip(&self.factors).map(|(x, d)| (d - x) % d).collect()
    }

    /// All elements, ordered lexicographically.
    pub fn elements(&self) -> Vec<Vec<u64>> {
        let mut out = vec![Vec::new()];
        for &d in &self.factors {
            let mut next = Vec::with_capacity(out.len() * d as usize);
            for prefix in &out {
                for v in 0..d {
                    let mut p = prefix.clone();
                    p.push(v);
                    next.push(p);
                }
            }
            out = next;
        }
        out
    }
}

/// A class-level Picard element: the lattice action of a diffeomorphism
/// shadow together with a line-bundle class split into free and torsion
/// parts.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct PicardElement {
    pub psi: IMat,
    pub free: Vec<i64>,
    pub torsion: Vec<u64>,
}

impl PicardElement {
    pub fn identity(rank: usize, torsion: &TorsionGroup) -> Self {
        PicardElement {
            psi: identity_matrix(rank),
            free: vec![0; rank],
            torsion: torsion.zero_element(),
        }
    }
}

/// The semidirect product law: `(p1, l1) . (p2, l2) = (p1 p2, p2 l1 + l2)`,
/// with torsion parts adding (the lattice action fixes torsion).
pub fn picard_group_law(
    x: &PicardElement,
    y: &PicardElement,
    torsion: &TorsionGroup,
) -> Result<PicardElement> {
    if x.psi.len() != y.psi.len() || x.free.len() != y.free.len() {
        return Err(Error::Invalid("rank mismatch in the group law".into()));
    }
    if x.torsion.len() != torsion.factors().len() || y.torsion.len() != torsion.factors().len() {
        return Err(Error::Invalid("torsion coordinates do not match the group".into()));
    }
    let mut free = mat_vec(&y.psi, &x.free);
    for (f, l2) in free.iter_mut().zip(&y.free) {
        *f += l2;
    }
    let t: Vec<i64> =
        x.torsion.iter().zip(&y.torsion).map(|(a, b)| (*a + *b) as i64).collect();
    Ok(PicardElement { psi: mat_mul(&x.psi, &y.psi), free, torsion: torsion.reduce(&t) })
}

pub fn picard_inverse(x: &PicardElement, torsion: &TorsionGroup) -> Result<PicardElement> {
    let inv = unimodular_inverse(&x.psi)
        .ok_or_else(|| Error::Invalid("element matrix is not unimodular".into()))?;
    let free: Vec<i64> = mat_vec(&inv, &x.free).iter().map(|v| -v).collect();
    let t: Vec<u64> = torsion.neg(&x.torsion);
    Ok(PicardElement { psi: inv, free, torsion: t })
}

/// A characteristic-class series in reduced units: the symplectic-class
/// vector (the `1/(i L)` coefficient) plus per-order class vectors. In
/// reduced units the translation action is by integer vectors.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ClassSeries {
    pub rank: usize,
    pub omega: Vec<Rat>,
    pub terms: Vec<Vec<Gaussian>>,
    pub reduced: bool,
    /// Orientation of the translation condition; `+1` by default.
    pub sign: i8,
}

impl ClassSeries {
    pub fn new(rank: usize, omega: Vec<Rat>, terms: Vec<Vec<Gaussian>>) -> Result<Self> {
        if omega.len() != rank || terms.iter().any(|t| t.len() != rank) {
            return Err(Error::Invalid("class vectors must all have the stated rank".into()));
        }
        if terms.is_empty() {
            return Err(Error::Invalid("need at least the order-zero class vector".into()));
        }
        Ok(ClassSeries { rank, omega, terms, reduced: true, sign: 1 })
    }

    pub fn with_sign(mut self, sign: i8) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::Invalid("sign flag must be +1 or -1".into()));
        }
        self.sign = sign;
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }
}

/// Pull a class series back along a lattice automorphism (every vector maps
/// through the matrix, the symplectic part included).
pub fn class_pullback(c: &ClassSeries, psi: &IMat) -> Result<ClassSeries> {
    if psi.len() != c.rank {
        return Err(Error::Invalid("matrix rank differs from the class".into()));
    }
    let det = int_det(psi);
    if det != 1 && det != -1 {
        return Err(Error::Invalid("pull-back matrix must be unimodular".into()));
    }
    Ok(ClassSeries {
        rank: c.rank,
        omega: mat_vec_rat(psi, &c.omega),
        terms: c.terms.iter().map(|t| mat_vec_gaussian(psi, t)).collect(),
        reduced: c.reduced,
        sign: c.sign,
    })
}

/// Translate the order-zero class vector by the free part of a line-bundle
/// class; torsion acts trivially. Requires reduced units.
pub fn picard_act(c: &ClassSeries, l: &[i64]) -> Result<ClassSeries> {
    if !c.reduced {
        return Err(Error::NotReduced);
    }
    if l.len() != c.rank {
        return Err(Error::Invalid("translation vector rank differs".into()));
    }
    let mut out = c.clone();
    for (v, t) in out.terms[0].iter_mut().zip(l) {
        *v += &Gaussian::from_int(*t);
    }
    Ok(out)
}

/// The free image of the restricted classical-limit map at class level:
/// all integer translations `sign * (psi w0 - w0)` over group elements that
/// fix the symplectic part and every higher-order class vector. The full
/// torsion subgroup always belongs to the image.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RestrictedImage {
    pub free: BTreeSet<Vec<i64>>,
    pub torsion: TorsionGroup,
}

impl RestrictedImage {
    /// Every free vector combined with every torsion element.
    pub fn elements(&self) -> Vec<(Vec<i64>, Vec<u64>)> {
        let mut out = Vec::new();
        for f in &self.free {
            for t in self.torsion.elements() {
                out.push((f.clone(), t));
            }
        }
        out
    }
}

pub fn image_clr(
    c: &ClassSeries,
    group: &LatticeGroup,
    torsion: &TorsionGroup,
    cap: usize,
) -> Result<RestrictedImage> {
    if group.rank() != c.rank {
        return Err(Error::Invalid("group rank differs from the class".into()));
    }
    if !c.reduced {
        return Err(Error::NotReduced);
    }
    let mut free = BTreeSet::new();
    for psi in group.closure(cap)? {
        if let Some(l) = translation_of(c, &psi)? {
            free.insert(l);
        }
    }
    Ok(RestrictedImage { free, torsion: torsion.clone() })
}

/// The translation vector contributed by one lattice automorphism, when it
/// fixes the symplectic part and the higher-order classes and moves the
/// order-zero class by an integer vector.
fn translation_of(c: &ClassSeries, psi: &IMat) -> Result<Option<Vec<i64>>> {
    let pulled = class_pullback(c, psi)?;
    if pulled.omega != c.omega {
        return Ok(None);
    }
    for r in 1..=c.order() {
        if pulled.terms[r] != c.terms[r] {
            return Ok(None);
        }
    }
    let mut l = Vec::with_capacity(c.rank);
    for (after, before) in pulled.terms[0].iter().zip(&c.terms[0]) {
        let diff = after - before;
        if !diff.im.is_zero() || !diff.re.is_integer() {
            return Ok(None);
        }
        let n = diff.re.to_integer();
        let Some(v) = n.to_i64() else { return Ok(None) };
        l.push(v * c.sign as i64);
    }
    Ok(Some(l))
}

/// The full image at class level: pairs of a fixing automorphism and its
/// translation vector, spread over the torsion subgroup.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FullImage {
    pub pairs: Vec<(IMat, Vec<i64>)>,
    pub torsion: TorsionGroup,
}

impl FullImage {
    pub fn elements(&self) -> Vec<PicardElement> {
        let mut out = Vec::new();
        for (psi, free) in &self.pairs {
            for t in self.torsion.elements() {
                out.push(PicardElement { psi: psi.clone(), free: free.clone(), torsion: t });
            }
        }
        out
    }

    /// Closure of the element set under the group law.
    pub fn is_group_closed(&self, torsion: &TorsionGroup) -> Result<bool> {
        let elements = self.elements();
        let Some(rank) = self.pairs.first().map(|(p, _)| p.len()) else {
            return Ok(false);
        };
        let set: BTreeSet<PicardElement> = elements.iter().cloned().collect();
        if !set.contains(&PicardElement::identity(rank, torsion)) {
            return Ok(false);
        }
        for x in &elements {
            for y in &elements {
                if !set.contains(&picard_group_law(x, y, torsion)?) {
                    return Ok(false);
                }
            }
            if !set.contains(&picard_inverse(x, torsion)?) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

pub fn image_cl(
    c: &ClassSeries,
    group: &LatticeGroup,
    torsion: &TorsionGroup,
    cap: usize,
) -> Result<FullImage> {
    if group.rank() != c.rank {
        return Err(Error::Invalid("group rank differs from the class".into()));
    }
    let mut pairs = Vec::new();
    for psi in group.closure(cap)? {
        if let Some(l) = translation_of(c, &psi)? {
            pairs.push((psi, l));
        }
    }
    Ok(FullImage { pairs, torsion: torsion.clone() })
}

/// Kernel data of the classical-limit map for a flat model: per-order
/// harmonic classes with an integral lattice at order zero.
#[derive(Clone, Debug)]
pub struct KernelDescriptor {
    pub descriptor: ModuliDescriptor,
    pub injective: bool,
    model: Model,
    pi: PoissonStructure,
}

pub fn kernel_descriptor(
    model: Model,
    pi: &PoissonStructure,
    order: usize,
) -> Result<KernelDescriptor> {
    if pi.dim() != model.dim() {
        return Err(Error::ModelMismatch("bivector dimension differs from model".into()));
    }
    match model {
        Model::Trig(m) => {
            if !pi.is_symplectic() {
                return Err(Error::UnsupportedModel(
                    "kernel data needs an invertible bivector on the torus".into(),
                ));
            }
            Ok(KernelDescriptor {
                descriptor: ModuliDescriptor { order, per_order_dim: m, lattice_rank: Some(m) },
                injective: false,
                model,
                pi: pi.clone(),
            })
        }
        Model::Poly(_) => Ok(KernelDescriptor {
            descriptor: ModuliDescriptor { order, per_order_dim: 0, lattice_rank: None },
            injective: true,
            model,
            pi: pi.clone(),
        }),
    }
}

impl KernelDescriptor {
    pub fn model(&self) -> Model {
        self.model
    }

    /// Whether two representative class series (vectors per order) name the
    /// same kernel element: equal above order zero, and congruent modulo
    /// the integral lattice `i (Z^m pi)` at order zero.
    pub fn classes_equal(&self, a: &[Vec<Gaussian>], b: &[Vec<Gaussian>]) -> Result<bool> {
        if a.len() != b.len() {
            return Err(Error::Invalid("representatives have different lengths".into()));
        }
        if self.injective {
            return Ok(a == b);
        }
        for (r, (va, vb)) in a.iter().zip(b).enumerate() {
            if r == 0 {
                let diff: Vec<Gaussian> = va.iter().zip(vb).map(|(x, y)| x - y).collect();
                if !self.lattice_contains(&diff)? {
                    return Ok(false);
                }
            } else if va != vb {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Membership of a vector in the order-zero lattice.
    pub fn lattice_contains(&self, v: &[Gaussian]) -> Result<bool> {
        // v = i * row_map(k) for integer k.
        let scaled: Vec<Gaussian> = v.iter().map(|c| c * &(-Gaussian::i())).collect();
        if scaled.iter().any(|c| !c.im.is_zero()) {
            return Ok(false);
        }
        let target: Vec<Rat> = scaled.iter().map(|c| c.re.clone()).collect();
        match self.pi.solve_row_map(&target) {
            None => Ok(false),
            Some(k) => Ok(k.iter().all(|q| q.is_integer())),
        }
    }
}

/// A vector whose entries live in a declared finite-dimensional rational
/// span `1, s_1, ..., s_t` of symbols independent over the rationals:
/// `v = r_0 + r_1 s_1 + ... + r_t s_t`, stored as the coefficient rows.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExtendedRationalVector {
    rank: usize,
    rows: Vec<Vec<Rat>>, // rows[0] = rational part
}

impl ExtendedRationalVector {
    pub fn rational(r0: Vec<Rat>) -> Result<Self> {
        if r0.is_empty() {
            return Err(Error::ZeroRank);
        }
        let rank = r0.len();
        Ok(ExtendedRationalVector { rank, rows: vec![r0] })
    }

    pub fn with_symbols(r0: Vec<Rat>, symbol_rows: Vec<Vec<Rat>>) -> Result<Self> {
        if r0.is_empty() {
            return Err(Error::ZeroRank);
        }
        let rank = r0.len();
        for row in &symbol_rows {
            if row.len() != rank {
                return Err(Error::Invalid("symbol coefficient rows must match the rank".into()));
            }
        }
        let mut rows = vec![r0];
        rows.extend(symbol_rows);
        Ok(ExtendedRationalVector { rank, rows })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rational_part(&self) -> &[Rat] {
        &self.rows[0]
    }

    pub fn symbol_rows(&self) -> &[Vec<Rat>] {
        &self.rows[1..]
    }
}

/// Certificate that a vector `l` misses the orbit `{Av - v}` over the
/// unimodular group.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum CertificateKind {
    /// `r_0 = a/d` in lowest common terms; any solution forces the prime to
    /// divide every entry of `a`, contradicting the choice of `p`.
    Prime { p: u64, a: Vec<i64>, d: u64 },
    /// `r_0` is a nonzero integer vector: a solution forces an eigenvalue 2
    /// on a primitive integer vector, impossible at unit determinant.
    Integral,
    /// `r_0 = 0`: the orbit of the rational part is `{0}`, so any nonzero
    /// integer vector works.
    Zero,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WitnessCertificate {
    pub l: Vec<i64>,
    pub kind: CertificateKind,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Produce an integer vector missing the orbit `{Av - v}` together with a
/// certificate: independent symbols force their coefficient rows to be
/// fixed, reducing to the rational part, which splits on integrality.
pub fn witness_nonsurjective(v: &ExtendedRationalVector) -> Result<WitnessCertificate> {
    let m = v.rank();
    if m == 0 {
        return Err(Error::ZeroRank);
    }
    let r0 = v.rational_part();
    if r0.iter().all(|q| q.is_integer()) {
        if r0.iter().all(|q| q.is_zero()) {
            let mut l = vec![0i64; m];
            l[0] = 1;
            return Ok(WitnessCertificate { l, kind: CertificateKind::Zero });
        }
        let l: Vec<i64> = r0
            .iter()
            .map(|q| {
                q.to_integer()
                    .to_i64()
                    .ok_or_else(|| Error::Invalid("integer part too large".into()))
            })
            .collect::<Result<_>>()?;
        return Ok(WitnessCertificate { l, kind: CertificateKind::Integral });
    }
    // r0 = a / d in lowest common terms.
    let mut d = BigInt::one();
    for q in r0 {
        d = d.lcm(q.denom());
    }
    let mut a: Vec<BigInt> = r0.iter().map(|q| q.numer() * (&d / q.denom())).collect();
    let mut g = d.clone();
    for ai in &a {
        g = g.gcd(ai);
    }
    if !g.is_one() {
        for ai in a.iter_mut() {
            *ai /= &g;
        }
        d /= &g;
    }
    let d_u: u64 = (&d).to_u64().ok_or_else(|| Error::Invalid("denominator too large".into()))?;
    let a_i: Vec<i64> = a
        .iter()
        .map(|x| x.to_i64().ok_or_else(|| Error::Invalid("numerator too large".into())))
        .collect::<Result<_>>()?;
    // Smallest prime dividing neither d nor any nonzero a_i.
    let mut p = 2u64;
    loop {
        if is_prime(p)
            && d_u % p != 0
            && a_i.iter().all(|&ai| ai == 0 || (ai.unsigned_abs() % p != 0))
        {
            break;
        }
        p += 1;
    }
    // l = -a d^{-1} mod p, componentwise, smallest non-negative.
    let d_inv = mod_inverse(d_u % p, p).expect("p does not divide d");
    let l: Vec<i64> = a_i
        .iter()
        .map(|&ai| {
            let am = (ai.rem_euclid(p as i64)) as u64;
            let prod = (am * d_inv) % p;
            ((p - prod) % p) as i64
        })
        .collect();
    debug_assert!(l.iter().any(|&x| x != 0));
    Ok(WitnessCertificate { l, kind: CertificateKind::Prime { p, a: a_i, d: d_u } })
}

fn mod_inverse(a: u64, p: u64) -> Option<u64> {
    if a % p == 0 {
        return None;
    }
    // Fermat inverse; p is prime and small.
    let mut result = 1u64;
    let mut base = a % p;
    let mut exp = p - 2;
    while exp > 0 {
        if exp & 1 == 1 {
            result = result * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    Some(result)
}

/// Re-verify a certificate's arithmetic against its vector.
pub fn verify_certificate(cert: &WitnessCertificate, v: &ExtendedRationalVector) -> bool {
    let r0 = v.rational_part();
    match &cert.kind {
        CertificateKind::Zero => r0.iter().all(|q| q.is_zero()) && cert.l.iter().any(|&x| x != 0),
        CertificateKind::Integral => {
            r0.iter().all(|q| q.is_integer())
                && r0.iter().zip(&cert.l).all(|(q, &l)| q == &rat_int(l))
                && cert.l.iter().any(|&x| x != 0)
        }
        CertificateKind::Prime { p, a, d } => {
            if !is_prime(*p) || d % p == 0 {
                return false;
            }
            if a.iter().any(|&ai| ai != 0 && ai.unsigned_abs() % p == 0) {
                return false;
            }
            if a.iter().all(|&ai| ai % (*d as i64) == 0) {
                return false; // the rational part would be integral
            }
            if a.len() != r0.len() {
                return false;
            }
            for (ai, q) in a.iter().zip(r0) {
                if &crate::scalar::rat(*ai, *d as i64) != q {
                    return false;
                }
            }
            // a + d l = 0 mod p componentwise.
            a.iter()
                .zip(&cert.l)
                .all(|(&ai, &li)| (ai + *d as i64 * li).rem_euclid(*p as i64) == 0)
        }
    }
}

/// Exhaustive oracle: does some unimodular matrix with entries in
/// `[-bound, bound]` satisfy `Av - v = l`? Extended entries force
/// `(A - id)` to kill every symbol row.
pub fn brute_force_orbit_check(
    v: &ExtendedRationalVector,
    l: &[i64],
    bound: i64,
) -> Result<bool> {
    let m = v.rank();
    if l.len() != m {
        return Err(Error::Invalid("vector length mismatch".into()));
    }
    if m > 3 {
        return Err(Error::Invalid("oracle enumeration is limited to rank 3".into()));
    }
    let width = (2 * bound + 1) as usize;
    let cells = m * m;
    let total = width.pow(cells as u32);
    let mut entries = vec![0i64; cells];
    let target: Vec<Rat> =
        v.rational_part().iter().zip(l).map(|(q, &li)| q + rat_int(li)).collect();
    for idx in 0..total {
        let mut n = idx;
        for e in entries.iter_mut() {
            *e = (n % width) as i64 - bound;
            n /= width;
        }
        let a: IMat = (0..m).map(|i| entries[i * m..(i + 1) * m].to_vec()).collect();
        let det = int_det(&a);
        if det != 1 && det != -1 {
            continue;
        }
        // (A - id) r_j = 0 for every symbol row.
        let fixes_symbols = v.symbol_rows().iter().all(|row| mat_vec_rat(&a, row) == *row);
        if !fixes_symbols {
            continue;
        }
        if mat_vec_rat(&a, v.rational_part()) == target {
            return Ok(true);
        }
    }
    Ok(false)
}
