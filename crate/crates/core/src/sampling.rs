//! Deterministic sampling of random elements for property suites.
//!
//! A fixed-seed generator keeps every randomized report reproducible; the
//! suites never draw from ambient entropy.

use crate::algebra::{AlgebraElement, DiffOperator, Model, PoissonStructure};
use crate::error::Result;
use crate::formal::{Equivalence, FormalSeries};
use crate::scalar::{rat, Gaussian, Rat};

/// xorshift64* generator; deterministic across platforms.
#[derive(Clone, Debug)]
pub struct Sampler {
    state: u64,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { state: seed.max(1) }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    /// Uniform in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n.max(1)
    }

    /// Uniform in `lo..=hi`.
    pub fn int_in(&mut self, lo: i64, hi: i64) -> i64 {
        lo + self.below((hi - lo + 1) as u64) as i64
    }

    /// Small nonzero rational with numerator and denominator up to 4.
    pub fn small_rat(&mut self) -> Rat {
        let num = loop {
            let n = self.int_in(-4, 4);
            if n != 0 {
                break n;
            }
        };
        let den = self.int_in(1, 4);
        rat(num, den)
    }

    /// Small Gaussian rational, possibly purely real or imaginary.
    pub fn small_gaussian(&mut self) -> Gaussian {
        match self.below(3) {
            0 => Gaussian::from_rat(self.small_rat()),
            1 => Gaussian::new(Rat::from_integer(0.into()), self.small_rat()),
            _ => Gaussian::new(self.small_rat(), self.small_rat()),
        }
    }

    /// Trig element with bounded mode support.
    pub fn trig_element(&mut self, m: usize, modes: usize, radius: i64) -> AlgebraElement {
        let model = Model::Trig(m);
        let mut out = AlgebraElement::zero(model);
        for _ in 0..modes {
            let key: Vec<i64> = (0..m).map(|_| self.int_in(-radius, radius)).collect();
            out.add_term(key, &self.small_gaussian());
        }
        out
    }

    /// Trig element with zero constant part.
    pub fn trig_element_zero_mean(&mut self, m: usize, modes: usize, radius: i64) -> AlgebraElement {
        self.trig_element(m, modes, radius).nonconstant_part()
    }

    /// Plane element of bounded degree.
    pub fn poly_element(&mut self, n: usize, terms: usize, degree: i64) -> AlgebraElement {
        let model = Model::Poly(n);
        let mut out = AlgebraElement::zero(model);
        for _ in 0..terms {
            let key: Vec<i64> = (0..n).map(|_| self.int_in(0, degree)).collect();
            out.add_term(key, &self.small_gaussian());
        }
        out
    }

    pub fn element(&mut self, model: Model, terms: usize, radius: i64) -> AlgebraElement {
        match model {
            Model::Trig(m) => self.trig_element(m, terms, radius),
            Model::Poly(n) => self.poly_element(n, terms, radius),
        }
    }

    /// Random antisymmetric rational bivector.
    pub fn poisson(&mut self, m: usize) -> PoissonStructure {
        let mut mat = vec![vec![Rat::from_integer(0.into()); m]; m];
        for i in 0..m {
            for j in i + 1..m {
                let q = self.small_rat();
                mat[i][j] = q.clone();
                mat[j][i] = -q;
            }
        }
        PoissonStructure::new(mat).expect("antisymmetric by construction")
    }

    /// Series with bounded support per order; classical part included.
    pub fn series(&mut self, model: Model, order: usize, terms: usize, radius: i64) -> FormalSeries {
        let mut s = FormalSeries::zero(model, order);
        for r in 0..=order {
            s.set_coeff(r, self.element(model, terms, radius));
        }
        s
    }

    /// Series vanishing at order zero (an exponential argument shape).
    pub fn series_without_classical_part(
        &mut self,
        model: Model,
        order: usize,
        terms: usize,
        radius: i64,
    ) -> FormalSeries {
        let mut s = self.series(model, order, terms, radius);
        s.set_coeff(0, AlgebraElement::zero(model));
        s
    }

    /// A constant-killing differential operator of bounded order.
    pub fn derivation_stage(&mut self, model: Model, max_order: u32, radius: i64) -> DiffOperator {
        let dim = model.dim();
        let mut op = DiffOperator::zero(model);
        let terms = 1 + self.below(2);
        for _ in 0..terms {
            let total = 1 + self.below(max_order as u64) as u32;
            let mut alpha = vec![0u32; dim];
            for _ in 0..total {
                let j = self.below(dim as u64) as usize;
                alpha[j] += 1;
            }
            op.add_term(self.element(model, 1, radius), alpha);
        }
        op
    }

    /// Equivalence with stages at orders >= from_order.
    pub fn equivalence(
        &mut self,
        model: Model,
        order: usize,
        from_order: usize,
        radius: i64,
    ) -> Result<Equivalence> {
        let mut stages = vec![DiffOperator::zero(model); order];
        for (r, stage) in stages.iter_mut().enumerate() {
            if r + 1 >= from_order {
                *stage = self.derivation_stage(model, 2, radius);
            }
        }
        Equivalence::new(model, order, stages)
    }
}
