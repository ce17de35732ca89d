//! JSON file schemas: star products, class series, lattice groups.

use serde::Deserialize;

use dqw_core::algebra::{AlgebraElement, Model, PoissonStructure};
use dqw_core::classify::{ClassSeries, LatticeGroup, TorsionGroup};
use dqw_core::error::{Error, Result};
use dqw_core::formal::{moyal_on, BidiffCochain, StarProduct};
use dqw_core::scalar::{rat_int, Gaussian, Rat};

use crate::parse;

/// A scalar that may arrive as a JSON integer or an exact string like
/// `"1/2"` or `"i/2"`.
#[derive(Deserialize, Debug, Clone)]
#[serde(untagged)]
pub enum ScalarSpec {
    Int(i64),
    Text(String),
}

impl ScalarSpec {
    pub fn to_rat(&self) -> Result<Rat> {
        match self {
            ScalarSpec::Int(n) => Ok(rat_int(*n)),
            ScalarSpec::Text(s) => {
                let v = parse::parse_rat_vector(s)
                    .map_err(|e| Error::Invalid(format!("bad rational '{s}': {e}")))?;
                if v.len() != 1 {
                    return Err(Error::Invalid(format!("expected one rational, got '{s}'")));
                }
                Ok(v[0].clone())
            }
        }
    }

    pub fn to_gaussian(&self, model: Model) -> Result<Gaussian> {
        match self {
            ScalarSpec::Int(n) => Ok(Gaussian::from_int(*n)),
            ScalarSpec::Text(s) => {
                let e = parse::parse_element(s, model, 0)
                    .map_err(|err| Error::Invalid(format!("bad scalar '{s}': {err}")))?;
                if e.nonconstant_part().num_terms() > 0 {
                    return Err(Error::Invalid(format!("'{s}' is not a scalar")));
                }
                Ok(e.constant_part())
            }
        }
    }
}

#[derive(Deserialize, Debug)]
pub struct ModelSpec {
    #[serde(rename = "type")]
    pub kind: String,
    pub dim: usize,
}

impl ModelSpec {
    pub fn to_model(&self) -> Result<Model> {
        match self.kind.as_str() {
            "torus" => Ok(Model::Trig(self.dim)),
            "plane" => Ok(Model::Poly(self.dim)),
            other => Err(Error::Invalid(format!("unknown model type '{other}'"))),
        }
    }
}

#[derive(Deserialize, Debug)]
pub struct TermSpec {
    pub coeff: ScalarSpec,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
}

#[derive(Deserialize, Debug)]
pub struct CochainSpec {
    pub r: usize,
    pub terms: Vec<TermSpec>,
}

#[derive(Deserialize, Debug)]
pub struct ProductSpec {
    pub model: ModelSpec,
    pub poisson: Vec<Vec<ScalarSpec>>,
    #[serde(default)]
    pub order: Option<usize>,
    #[serde(default)]
    pub cochains: Vec<CochainSpec>,
    #[serde(default)]
    pub builtin: Option<String>,
}

impl ProductSpec {
    /// Build the star product; `order_override` wins over the file's order.
    pub fn to_product(&self, order_override: Option<usize>) -> Result<StarProduct> {
        let model = self.model.to_model()?;
        let m = model.dim();
        let mut mat = Vec::with_capacity(m);
        for row in &self.poisson {
            if row.len() != m {
                return Err(Error::Invalid("poisson matrix row length differs".into()));
            }
            mat.push(row.iter().map(|s| s.to_rat()).collect::<Result<Vec<_>>>()?);
        }
        if mat.len() != m {
            return Err(Error::Invalid("poisson matrix must be square of model dimension".into()));
        }
        let pi = PoissonStructure::new(mat)?;
        let order = order_override
            .or(self.order)
            .unwrap_or(dqw_core::formal::DEFAULT_ORDER);
        match self.builtin.as_deref() {
            Some("moyal") => moyal_on(model, &pi, order),
            Some(other) => Err(Error::Invalid(format!("unknown builtin '{other}'"))),
            None => {
                let mut cochains = vec![BidiffCochain::zero(model); order];
                for spec in &self.cochains {
                    if spec.r == 0 || spec.r > order {
                        return Err(Error::Invalid(format!(
                            "cochain order {} outside 1..={order}",
                            spec.r
                        )));
                    }
                    let mut c = BidiffCochain::zero(model);
                    for term in &spec.terms {
                        if term.left.len() != m || term.right.len() != m {
                            return Err(Error::Invalid("cochain index length differs".into()));
                        }
                        let coeff = AlgebraElement::scalar(model, term.coeff.to_gaussian(model)?);
                        c.add_term(coeff, term.left.clone(), term.right.clone());
                    }
                    cochains[spec.r - 1] = c;
                }
                StarProduct::new(model, pi, order, cochains)
            }
        }
    }
}

pub fn load_product(path: &str, order_override: Option<usize>) -> Result<StarProduct> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read '{path}': {e}")))?;
    let spec: ProductSpec = serde_json::from_str(&text)
        .map_err(|e| Error::Invalid(format!("bad product spec '{path}': {e}")))?;
    spec.to_product(order_override)
}

/// Class file: `{"rank":2, "omega":[...], "terms":[[...],[...]],
/// "torsion":[2,4], "sign":"+1"}`.
#[derive(Deserialize, Debug)]
pub struct ClassFile {
    pub rank: usize,
    pub omega: Vec<ScalarSpec>,
    pub terms: Vec<Vec<ScalarSpec>>,
    #[serde(default)]
    pub torsion: Vec<u64>,
    #[serde(default)]
    pub sign: Option<String>,
}

impl ClassFile {
    pub fn to_class(&self) -> Result<(ClassSeries, TorsionGroup)> {
        let omega = self.omega.iter().map(|s| s.to_rat()).collect::<Result<Vec<_>>>()?;
        let model = Model::Trig(self.rank.max(1));
        let terms = self
            .terms
            .iter()
            .map(|row| row.iter().map(|s| s.to_gaussian(model)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let mut class = ClassSeries::new(self.rank, omega, terms)?;
        if let Some(sign) = &self.sign {
            let value = match sign.as_str() {
                "+1" | "1" => 1,
                "-1" => -1,
                other => return Err(Error::Invalid(format!("bad sign '{other}'"))),
            };
            class = class.with_sign(value)?;
        }
        let torsion = TorsionGroup::new(self.torsion.clone())?;
        Ok((class, torsion))
    }
}

pub fn load_class(path: &str) -> Result<(ClassSeries, TorsionGroup)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read '{path}': {e}")))?;
    let file: ClassFile = serde_json::from_str(&text)
        .map_err(|e| Error::Invalid(format!("bad class file '{path}': {e}")))?;
    file.to_class()
}

/// Group file: `{"rank":2, "generators":[[[0,1],[1,0]]], "cap":10000}`.
#[derive(Deserialize, Debug)]
pub struct GroupFile {
    pub rank: usize,
    pub generators: Vec<Vec<Vec<i64>>>,
    #[serde(default)]
    pub cap: Option<usize>,
}

pub fn load_group(path: &str) -> Result<(LatticeGroup, usize)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read '{path}': {e}")))?;
    let file: GroupFile = serde_json::from_str(&text)
        .map_err(|e| Error::Invalid(format!("bad group file '{path}': {e}")))?;
    let group = LatticeGroup::new(file.rank, file.generators)?;
    Ok((group, file.cap.unwrap_or(dqw_core::classify::DEFAULT_CLOSURE_CAP)))
}

/// Model names on the command line: `torus2`, `torus3`, `r2`, `r4`, ...
pub fn parse_model_name(name: &str) -> Result<Model> {
    if let Some(rest) = name.strip_prefix("torus") {
        let m: usize = rest
            .parse()
            .map_err(|_| Error::Invalid(format!("bad model name '{name}'")))?;
        return Ok(Model::Trig(m));
    }
    if let Some(rest) = name.strip_prefix('r') {
        let n: usize = rest
            .parse()
            .map_err(|_| Error::Invalid(format!("bad model name '{name}'")))?;
        if n % 2 != 0 {
            return Err(Error::Invalid("plane models have even dimension".into()));
        }
        return Ok(Model::Poly(n));
    }
    Err(Error::Invalid(format!("unknown model '{name}'; use torus<m> or r<2n>")))
}
