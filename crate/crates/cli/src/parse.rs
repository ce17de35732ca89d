//! Expression parser for the workbench grammar.
//!
//! Scalars `3/4`, `i`, `2*i/5`; torus monomials `E[k1,...,km]`; plane
//! variables `x1..xn`; the formal parameter `L`; derivative symbols
//! `d1..dm` in field expressions; operators `+ - * ^` and parentheses.
//! Errors carry the byte position of the offending token.

use dqw_core::algebra::{AlgebraElement, DiffOperator, Model};
use dqw_core::formal::FormalSeries;
use dqw_core::scalar::{rat_int, Gaussian, Rat};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "at byte {}: {}", self.position, self.message)
    }
}

impl std::error::Error for ParseError {}

type PResult<T> = Result<T, ParseError>;

/// A parsed value: a series plus first-order derivative-symbol coefficients.
#[derive(Clone, Debug)]
struct Value {
    scalar: FormalSeries,
    /// Coefficient series of `d1..dm`; all zero for plain expressions.
    field: Vec<FormalSeries>,
}

impl Value {
    fn scalar(series: FormalSeries, m: usize) -> Self {
        let zero = FormalSeries::zero(series.model(), series.order());
        Value { scalar: series, field: vec![zero; m] }
    }

    fn has_field(&self) -> bool {
        self.field.iter().any(|c| !c.is_zero())
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    model: Model,
    order: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, model: Model, order: usize) -> Self {
        Parser { src: src.as_bytes(), pos: 0, model, order }
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError { position: self.pos, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> PResult<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.error(format!("expected '{}'", c as char))
        }
    }

    fn integer(&mut self) -> PResult<i64> {
        self.skip_ws();
        let negative = self.eat(b'-');
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return self.error("expected a digit");
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: i64 = text
            .parse()
            .map_err(|_| ParseError { position: start, message: "integer too large".into() })?;
        Ok(if negative { -value } else { value })
    }

    fn unsigned(&mut self) -> PResult<u64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return self.error("expected a digit");
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse()
            .map_err(|_| ParseError { position: start, message: "integer too large".into() })
    }

    fn zero(&self) -> Value {
        Value::scalar(FormalSeries::zero(self.model, self.order), self.model.dim())
    }

    fn from_element(&self, e: AlgebraElement) -> Value {
        Value::scalar(FormalSeries::from_element(e, self.order), self.model.dim())
    }

    fn expr(&mut self) -> PResult<Value> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    acc = add(&acc, &rhs);
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    acc = add(&acc, &neg(&rhs));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> PResult<Value> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    acc = self.multiply(&acc, &rhs)?;
                }
                Some(b'/') => {
                    // Division is only by unit elements.
                    self.pos += 1;
                    let rhs = self.factor()?;
                    if rhs.has_field() {
                        return self.error("cannot divide by a derivative symbol");
                    }
                    for r in 1..=self.order {
                        if !rhs.scalar.coeff(r).is_zero() {
                            return self.error("division only by unit elements, not series");
                        }
                    }
                    let inv = rhs
                        .scalar
                        .classical_limit()
                        .invert()
                        .map_err(|e| ParseError { position: self.pos, message: e.to_string() })?;
                    let inv_val = self.from_element(inv);
                    acc = self.multiply(&acc, &inv_val)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> PResult<Value> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unsigned()?;
            if base.has_field() {
                return self.error("derivative symbols cannot be raised to powers");
            }
            let mut acc = self.from_element(AlgebraElement::one(self.model));
            for _ in 0..exp {
                acc = self.multiply(&acc, &base)?;
            }
            return Ok(acc);
        }
        Ok(base)
    }

    fn multiply(&mut self, a: &Value, b: &Value) -> PResult<Value> {
        if a.has_field() && b.has_field() {
            return self.error("field expressions are first order; cannot multiply two derivative symbols");
        }
        let scalar = a.scalar.mul_plain(&b.scalar);
        let m = self.model.dim();
        let mut field = Vec::with_capacity(m);
        for j in 0..m {
            // (a_s + a_f d)(b_s + b_f d) with one field part zero
            let part = a.field[j].mul_plain(&b.scalar).add(&a.scalar.mul_plain(&b.field[j]));
            field.push(part);
        }
        Ok(Value { scalar, field })
    }

    fn atom(&mut self) -> PResult<Value> {
        match self.peek() {
            None => self.error("unexpected end of input"),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(b'-') => {
                self.pos += 1;
                let inner = self.atom()?;
                Ok(neg(&inner))
            }
            Some(b'i') => {
                self.pos += 1;
                Ok(self.from_element(AlgebraElement::scalar(self.model, Gaussian::i())))
            }
            Some(b'L') => {
                self.pos += 1;
                let mut s = FormalSeries::zero(self.model, self.order);
                if self.order >= 1 {
                    s.set_coeff(1, AlgebraElement::one(self.model));
                } else {
                    return self.error("the formal parameter exceeds the truncation order");
                }
                Ok(Value::scalar(s, self.model.dim()))
            }
            Some(b'E') => {
                self.pos += 1;
                if !self.model.is_trig() {
                    return self.error("torus monomials are not available on the plane model");
                }
                self.expect(b'[')?;
                let mut key = Vec::new();
                loop {
                    key.push(self.integer()?);
                    if !self.eat(b',') {
                        break;
                    }
                }
                self.expect(b']')?;
                if key.len() != self.model.dim() {
                    return self.error(format!(
                        "monomial has {} exponents, model dimension is {}",
                        key.len(),
                        self.model.dim()
                    ));
                }
                let e = AlgebraElement::monomial(self.model, key, Gaussian::one())
                    .map_err(|e| ParseError { position: self.pos, message: e.to_string() })?;
                Ok(self.from_element(e))
            }
            Some(b'x') => {
                self.pos += 1;
                let j = self.unsigned()? as usize;
                if self.model.is_trig() {
                    return self.error("plane variables are not available on the torus model");
                }
                let e = AlgebraElement::variable(self.model, j)
                    .map_err(|e| ParseError { position: self.pos, message: e.to_string() })?;
                Ok(self.from_element(e))
            }
            Some(b'd') => {
                self.pos += 1;
                let j = self.unsigned()? as usize;
                let m = self.model.dim();
                if j == 0 || j > m {
                    return self.error(format!("derivative index {j} out of range 1..={m}"));
                }
                let mut v = self.zero();
                v.field[j - 1] = FormalSeries::one(self.model, self.order);
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() => {
                let num = self.integer()?;
                let q = if self.eat(b'/') {
                    let den = self.unsigned()? as i64;
                    if den == 0 {
                        return self.error("zero denominator");
                    }
                    Rat::new(num.into(), den.into())
                } else {
                    rat_int(num)
                };
                Ok(self.from_element(AlgebraElement::scalar(self.model, Gaussian::from_rat(q))))
            }
            Some(c) => self.error(format!("unexpected character '{}'", c as char)),
        }
    }

    fn finish(&mut self) -> PResult<()> {
        self.skip_ws();
        if self.pos != self.src.len() {
            return self.error("trailing input");
        }
        Ok(())
    }
}

fn add(a: &Value, b: &Value) -> Value {
    Value {
        scalar: a.scalar.add(&b.scalar),
        field: a.field.iter().zip(&b.field).map(|(x, y)| x.add(y)).collect(),
    }
}

fn neg(a: &Value) -> Value {
    Value { scalar: a.scalar.neg(), field: a.field.iter().map(|x| x.neg()).collect() }
}

/// Parse a series expression (no derivative symbols allowed).
pub fn parse_series(src: &str, model: Model, order: usize) -> PResult<FormalSeries> {
    let mut p = Parser::new(src, model, order);
    let v = p.expr()?;
    p.finish()?;
    if v.has_field() {
        return Err(ParseError {
            position: 0,
            message: "derivative symbols are not allowed in a series expression".into(),
        });
    }
    Ok(v.scalar)
}

/// Parse an element expression: a series with only an order-zero slice.
pub fn parse_element(src: &str, model: Model, order: usize) -> PResult<AlgebraElement> {
    let s = parse_series(src, model, order)?;
    for r in 1..=s.order() {
        if !s.coeff(r).is_zero() {
            return Err(ParseError {
                position: 0,
                message: "expected an element, found the formal parameter".into(),
            });
        }
    }
    Ok(s.classical_limit().clone())
}

/// Parse a first-order field expression `sum coeff * dj`; coefficients must
/// not involve the formal parameter.
pub fn parse_field(src: &str, model: Model, order: usize) -> PResult<DiffOperator> {
    let mut p = Parser::new(src, model, order);
    let v = p.expr()?;
    p.finish()?;
    if !v.scalar.is_zero() {
        return Err(ParseError {
            position: 0,
            message: "field expressions must consist of derivative terms only".into(),
        });
    }
    let mut coeffs = Vec::with_capacity(model.dim());
    for series in &v.field {
        for r in 1..=series.order() {
            if !series.coeff(r).is_zero() {
                return Err(ParseError {
                    position: 0,
                    message: "field coefficients cannot involve the formal parameter".into(),
                });
            }
        }
        coeffs.push(series.classical_limit().clone());
    }
    DiffOperator::field(model, coeffs)
        .map_err(|e| ParseError { position: 0, message: e.to_string() })
}

/// Parse a comma-separated scalar vector like `1/2,1/3` or `i,0`.
pub fn parse_gaussian_vector(src: &str, model: Model) -> PResult<Vec<Gaussian>> {
    src.split(',')
        .map(|piece| {
            let e = parse_element(piece.trim(), model, 0)?;
            if e.nonconstant_part().num_terms() > 0 {
                return Err(ParseError {
                    position: 0,
                    message: "expected a scalar entry".into(),
                });
            }
            Ok(e.constant_part())
        })
        .collect()
}

/// Parse a rational vector like `1/2,1/3`.
pub fn parse_rat_vector(src: &str) -> PResult<Vec<Rat>> {
    src.split(',')
        .map(|piece| {
            let piece = piece.trim();
            let mut p = Parser::new(piece, Model::Poly(1), 0);
            let negative = p.eat(b'-');
            let num = p.integer()?;
            let q = if p.eat(b'/') {
                let den = p.unsigned()? as i64;
                if den == 0 {
                    return p.error("zero denominator");
                }
                Rat::new(num.into(), den.into())
            } else {
                rat_int(num)
            };
            p.finish()?;
            Ok(if negative { -q } else { q })
        })
        .collect()
}

/// Parse a rational matrix in `a,b;c,d` row-major form.
pub fn parse_rat_matrix(src: &str) -> PResult<Vec<Vec<Rat>>> {
    src.split(';').map(parse_rat_vector).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use dqw_core::sampling::Sampler;

    fn t2() -> Model {
        Model::Trig(2)
    }

    #[test]
    fn parses_spec_grammar_examples() {
        let s = parse_series("E[1,0] + (i/2)*L", t2(), 4).unwrap();
        assert_eq!(s.coeff(0), &AlgebraElement::trig_mode(2, &[1, 0]).unwrap());
        assert_eq!(
            s.coeff(1),
            &AlgebraElement::scalar(t2(), Gaussian::imag_ratio(1, 2))
        );
        let p = parse_element("x1^2*x2 - 3/4", Model::Poly(2), 4).unwrap();
        let x1 = AlgebraElement::variable(Model::Poly(2), 1).unwrap();
        let x2 = AlgebraElement::variable(Model::Poly(2), 2).unwrap();
        let expected = x1
            .mul(&x1)
            .mul(&x2)
            .sub(&AlgebraElement::scalar(Model::Poly(2), Gaussian::ratio(3, 4)));
        assert_eq!(p, expected);
        let scalar = parse_element("2*i/5", t2(), 0).unwrap();
        assert_eq!(scalar.constant_part(), Gaussian::imag_ratio(2, 5));
    }

    #[test]
    fn printer_round_trips_random_series() {
        let mut sampler = Sampler::new(99);
        for _ in 0..40 {
            let s = sampler.series(t2(), 4, 3, 2);
            let printed = s.to_string();
            let back = parse_series(&printed, t2(), 4).unwrap();
            assert_eq!(back, s, "round trip failed on {printed}");
        }
        for _ in 0..40 {
            let s = sampler.series(Model::Poly(2), 3, 3, 3);
            let printed = s.to_string();
            let back = parse_series(&printed, Model::Poly(2), 3).unwrap();
            assert_eq!(back, s, "round trip failed on {printed}");
        }
    }

    #[test]
    fn field_expressions() {
        let op = parse_field("E[0,1]*d1 + (i/2)*d2", t2(), 4).unwrap();
        assert_eq!(op.field_coefficient(1), AlgebraElement::trig_mode(2, &[0, 1]).unwrap());
        assert_eq!(
            op.field_coefficient(2),
            AlgebraElement::scalar(t2(), Gaussian::imag_ratio(1, 2))
        );
        assert!(parse_field("d1*d2", t2(), 4).is_err());
        assert!(parse_field("E[1,0]", t2(), 4).is_err());
        assert!(parse_field("L*d1", t2(), 4).is_err());
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_series("E[1,0] + @", t2(), 4).unwrap_err();
        assert_eq!(err.position, 9);
        let err = parse_series("E[1]", t2(), 4).unwrap_err();
        assert!(err.message.contains("dimension"));
        let err = parse_series("x1", t2(), 4).unwrap_err();
        assert!(err.message.contains("torus"));
        assert!(parse_series("1/0", t2(), 4).is_err());
        assert!(parse_series("E[1,0] E[0,1]", t2(), 4).is_err());
    }

    #[test]
    fn vectors_and_matrices() {
        let v = parse_rat_vector("1/2,-1/3, 4").unwrap();
        assert_eq!(v, vec![
            Rat::new(1.into(), 2.into()),
            Rat::new((-1).into(), 3.into()),
            Rat::new(4.into(), 1.into())
        ]);
        let m = parse_rat_matrix("0,1;-1,0").unwrap();
        assert_eq!(m.len(), 2);
        let g = parse_gaussian_vector("i, 1/2", t2()).unwrap();
        assert_eq!(g, vec![Gaussian::i(), Gaussian::ratio(1, 2)]);
    }
}
