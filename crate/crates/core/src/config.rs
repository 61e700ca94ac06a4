//! Analysis configuration files.
//!
//! ```toml
//! [field]                      # omit for rational data
//! polynomial = "t^2 + t - 1"   # defining polynomial in t
//! bracket = ["1/2", "2/3"]     # isolates the intended root
//!
//! [maps]                       # S_j(x) = ratios[j]*x + offsets[j]
//! ratios = ["t", "t"]
//! offsets = ["0", "1 - t"]
//!
//! [probabilities]
//! weights = ["1/2", "1/2"]
//!
//! [caps]                       # all optional
//! max_vertices = 10000
//! max_level = 64
//! depth = 64
//!
//! [spectra]                    # all optional
//! q_from = "-10"
//! q_to = "10"
//! q_step = "1/4"
//! k_max = 18
//! node_budget = 50000000
//!
//! [certify]
//! budget = 4
//! ```

use crate::expr::{parse_poly, parse_rational};
use crate::field::{FieldError, NumberField};
use crate::ifs::{AffineMap, Ifs, IfsError};
use crate::net::Caps;
use crate::poly::{fmt_rat, rat, rat_to_f64, Poly, Rat};
use num_traits::Signed;
use serde::Deserialize;
use std::ops::Range;
use thiserror::Error;
use toml::Spanned;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("line {line}, column {column}: {message}")]
    Value {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid IFS: {0}")]
    Ifs(#[from] IfsError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    field: Option<RawField>,
    maps: RawMaps,
    probabilities: RawProbs,
    caps: Option<RawCaps>,
    spectra: Option<RawSpectra>,
    certify: Option<RawCertify>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    polynomial: Spanned<String>,
    bracket: Spanned<Vec<Spanned<String>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaps {
    ratios: Spanned<Vec<Spanned<String>>>,
    offsets: Spanned<Vec<Spanned<String>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbs {
    weights: Spanned<Vec<Spanned<String>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCaps {
    max_vertices: Option<usize>,
    max_level: Option<usize>,
    depth: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpectra {
    q_from: Option<Spanned<String>>,
    q_to: Option<Spanned<String>>,
    q_step: Option<Spanned<String>>,
    k_max: Option<usize>,
    node_budget: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCertify {
    budget: Option<usize>,
}

/// Defining data of the number field, kept for echoing the configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldSpec {
    pub polynomial: Poly,
    pub lo: Rat,
    pub hi: Rat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpectraSettings {
    pub q_from: Rat,
    pub q_to: Rat,
    pub q_step: Rat,
    pub k_max: usize,
    pub node_budget: u64,
}

impl Default for SpectraSettings {
    fn default() -> Self {
        SpectraSettings {
            q_from: rat(-10, 1),
            q_to: rat(10, 1),
            q_step: rat(1, 4),
            k_max: 18,
            node_budget: 50_000_000,
        }
    }
}

impl SpectraSettings {
    pub fn q_grid(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut q = self.q_from.clone();
        while q <= self.q_to {
            out.push(rat_to_f64(&q));
            q += &self.q_step;
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct AnalysisConfig {
    pub field: Option<FieldSpec>,
    pub ifs: Ifs,
    pub caps: Caps,
    pub spectra: SpectraSettings,
    pub certify_budget: usize,
}

struct Src<'a> {
    text: &'a str,
}

impl Src<'_> {
    fn at(&self, span: Range<usize>, message: impl Into<String>) -> ConfigError {
        let before = &self.text[..span.start.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        ConfigError::Value {
            line,
            column,
            message: message.into(),
        }
    }

    fn rational(&self, s: &Spanned<String>) -> Result<Rat, ConfigError> {
        parse_rational(s.get_ref()).map_err(|e| self.at(s.span(), e.to_string()))
    }
}

impl AnalysisConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let src = Src { text };
        let (field, spec) = match &raw.field {
            None => (NumberField::rationals(), None),
            Some(rf) => {
                let poly =
                    parse_poly(rf.polynomial.get_ref()).map_err(|e| src.at(rf.polynomial.span(), e.to_string()))?;
                let br = rf.bracket.get_ref();
                if br.len() != 2 {
                    return Err(src.at(rf.bracket.span(), "bracket needs exactly two rationals"));
                }
                let lo = src.rational(&br[0])?;
                let hi = src.rational(&br[1])?;
                let f = NumberField::new(poly.clone(), lo.clone(), hi.clone())
                    .map_err(|e| src.at(rf.polynomial.span(), e.to_string()))?;
                (
                    f,
                    Some(FieldSpec {
                        polynomial: poly,
                        lo,
                        hi,
                    }),
                )
            }
        };
        let elem = |s: &Spanned<String>| {
            field.parse(s.get_ref()).map_err(|e| match e {
                FieldError::Expr(x) => {
                    let mut err = src.at(s.span(), x.message.clone());
                    if let ConfigError::Value { column, .. } = &mut err {
                        // Offset from the opening quote.
                        *column += x.column;
                    }
                    err
                }
                other => src.at(s.span(), other.to_string()),
            })
        };
        let ratios = raw.maps.ratios.get_ref();
        let offsets = raw.maps.offsets.get_ref();
        if ratios.len() != offsets.len() {
            return Err(src.at(
                raw.maps.offsets.span(),
                format!("{} ratios but {} offsets", ratios.len(), offsets.len()),
            ));
        }
        let mut maps = Vec::new();
        for (r, d) in ratios.iter().zip(offsets) {
            maps.push(AffineMap {
                ratio: elem(r)?,
                offset: elem(d)?,
            });
        }
        let probs = raw
            .probabilities
            .weights
            .get_ref()
            .iter()
            .map(|p| src.rational(p))
            .collect::<Result<Vec<_>, _>>()?;
        let ifs = Ifs::new(field, maps, probs)?;

        let mut caps = Caps::default();
        if let Some(c) = &raw.caps {
            caps.max_vertices = c.max_vertices.unwrap_or(caps.max_vertices);
            caps.max_level = c.max_level.unwrap_or(caps.max_level);
            caps.depth = c.depth.unwrap_or(caps.depth);
        }
        let mut spectra = SpectraSettings::default();
        if let Some(s) = &raw.spectra {
            if let Some(x) = &s.q_from {
                spectra.q_from = src.rational(x)?;
            }
            if let Some(x) = &s.q_to {
                spectra.q_to = src.rational(x)?;
            }
            if let Some(x) = &s.q_step {
                spectra.q_step = src.rational(x)?;
                if !spectra.q_step.is_positive() {
                    return Err(src.at(x.span(), "q_step must be positive"));
                }
            }
            spectra.k_max = s.k_max.unwrap_or(spectra.k_max);
            spectra.node_budget = s.node_budget.unwrap_or(spectra.node_budget);
        }
        if spectra.q_from > spectra.q_to {
            return Err(ConfigError::Invalid("q_from exceeds q_to".into()));
        }
        if spectra.k_max == 0 {
            return Err(ConfigError::Invalid("k_max must be at least 1".into()));
        }
        let certify_budget = raw.certify.and_then(|c| c.budget).unwrap_or(4);
        Ok(AnalysisConfig {
            field: spec,
            ifs,
            caps,
            spectra,
            certify_budget,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical text that parses back to an identical configuration.
    pub fn to_toml(&self) -> String {
        let q = |s: String| format!("\"{s}\"");
        let list = |xs: Vec<String>| format!("[{}]", xs.into_iter().map(q).collect::<Vec<_>>().join(", "));
        let mut out = String::new();
        if let Some(f) = &self.field {
            out.push_str("[field]\n");
            out.push_str(&format!("polynomial = \"{}\"\n", f.polynomial.render()));
            out.push_str(&format!("bracket = {}\n\n", list(vec![fmt_rat(&f.lo), fmt_rat(&f.hi)])));
        }
        let maps = self.ifs.maps();
        out.push_str("[maps]\n");
        out.push_str(&format!(
            "ratios = {}\n",
            list(maps.iter().map(|m| m.ratio.render()).collect())
        ));
        out.push_str(&format!(
            "offsets = {}\n\n",
            list(maps.iter().map(|m| m.offset.render()).collect())
        ));
        out.push_str("[probabilities]\n");
        out.push_str(&format!(
            "weights = {}\n\n",
            list(self.ifs.probs().iter().map(fmt_rat).collect())
        ));
        out.push_str(&format!(
            "[caps]\nmax_vertices = {}\nmax_level = {}\ndepth = {}\n\n",
            self.caps.max_vertices, self.caps.max_level, self.caps.depth
        ));
        let s = &self.spectra;
        out.push_str(&format!(
            "[spectra]\nq_from = \"{}\"\nq_to = \"{}\"\nq_step = \"{}\"\nk_max = {}\nnode_budget = {}\n\n",
            fmt_rat(&s.q_from),
            fmt_rat(&s.q_to),
            fmt_rat(&s.q_step),
            s.k_max,
            s.node_budget
        ));
        out.push_str(&format!("[certify]\nbudget = {}\n", self.certify_budget));
        out
    }

    /// Structural equality of the analysis inputs.
    pub fn same_as(&self, o: &AnalysisConfig) -> bool {
        self.field == o.field
            && self.ifs.maps() == o.ifs.maps()
            && self.ifs.probs() == o.ifs.probs()
            && self.caps == o.caps
            && self.spectra == o.spectra
            && self.certify_budget == o.certify_budget
    }
}
