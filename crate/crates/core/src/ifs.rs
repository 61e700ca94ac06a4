//! Similarity IFS on the line, composed maps and the word layers `Λ_n`.
//!
//! Layer `n` holds the words whose contraction has just dropped to
//! `ρ_min^n` or below: `|ρ_ω| ≤ ρ_min^n < |ρ_{ω⁻}|`.

use crate::field::{FieldElement, FieldRef};
use crate::poly::{fmt_rat, Rat};
use num_traits::{One, Signed};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IfsError {
    #[error("an IFS needs at least one map")]
    NoMaps,
    #[error("{maps} maps but {probs} probabilities")]
    ProbabilityCount { maps: usize, probs: usize },
    #[error("probability {0} is not positive")]
    NonPositiveProbability(usize),
    #[error("probabilities sum to {0}, not 1")]
    ProbabilitySum(String),
    #[error("map {0}: ratio must satisfy 0 < |ratio| < 1")]
    BadRatio(usize),
    #[error("map {0}: image of [0,1] leaves [0,1]")]
    OutsideUnitInterval(usize),
    #[error("images of [0,1] span [{lo}, {hi}], not [0,1]; rescale the translations")]
    HullNotNormalized { lo: String, hi: String },
    #[error("map index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("layer {level} would exceed the cap of {cap} words")]
    LayerCap { level: usize, cap: usize },
}

/// `x ↦ ratio·x + offset`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AffineMap {
    pub ratio: FieldElement,
    pub offset: FieldElement,
}

impl AffineMap {
    pub fn identity(f: &FieldRef) -> Self {
        AffineMap {
            ratio: f.one(),
            offset: f.zero(),
        }
    }

    pub fn apply(&self, x: &FieldElement) -> FieldElement {
        &(&self.ratio * x) + &self.offset
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            ratio: &self.ratio * &inner.ratio,
            offset: self.apply(&inner.offset),
        }
    }

    /// Image of `[0,1]` as `(lo, hi)`.
    pub fn hull(&self) -> (FieldElement, FieldElement) {
        let end = &self.ratio + &self.offset;
        if self.ratio.sign() > 0 {
            (self.offset.clone(), end)
        } else {
            (end, self.offset.clone())
        }
    }

    /// Preimage of the interval with endpoints `u < v`, as an ordered pair.
    pub fn preimage(&self, u: &FieldElement, v: &FieldElement) -> (FieldElement, FieldElement) {
        let inv = self.ratio.recip().expect("similarity ratio is nonzero");
        let pu = &(u - &self.offset) * &inv;
        let pv = &(v - &self.offset) * &inv;
        if inv.sign() > 0 {
            (pu, pv)
        } else {
            (pv, pu)
        }
    }
}

/// A word together with its composed map and weight `p_ω`.
#[derive(Clone, Debug)]
pub struct Word {
    pub letters: Vec<usize>,
    pub map: AffineMap,
    pub prob: Rat,
}

#[derive(Clone, Debug)]
pub struct WordLayer {
    pub level: usize,
    pub words: Vec<Word>,
    /// Index of each word's prefix in the previous layer (`None` at level 0).
    pub parent: Vec<Option<usize>>,
}

#[derive(Clone, Debug)]
pub struct Ifs {
    field: FieldRef,
    maps: Vec<AffineMap>,
    probs: Vec<Rat>,
    rho_min: FieldElement,
    equicontractive: bool,
    word_ratio: u32,
}

impl Ifs {
    pub fn new(field: FieldRef, maps: Vec<AffineMap>, probs: Vec<Rat>) -> Result<Self, IfsError> {
        if maps.is_empty() {
            return Err(IfsError::NoMaps);
        }
        if maps.len() != probs.len() {
            return Err(IfsError::ProbabilityCount {
                maps: maps.len(),
                probs: probs.len(),
            });
        }
        if let Some(i) = probs.iter().position(|p| !p.is_positive()) {
            return Err(IfsError::NonPositiveProbability(i));
        }
        let total: Rat = probs.iter().sum();
        if !total.is_one() {
            return Err(IfsError::ProbabilitySum(fmt_rat(&total)));
        }
        let zero = field.zero();
        let one = field.one();
        for (i, m) in maps.iter().enumerate() {
            let a = m.ratio.abs();
            if a.sign() <= 0 || a >= one {
                return Err(IfsError::BadRatio(i));
            }
        }
        let hulls: Vec<_> = maps.iter().map(|m| m.hull()).collect();
        for (i, (lo, hi)) in hulls.iter().enumerate() {
            if *lo < zero || *hi > one {
                return Err(IfsError::OutsideUnitInterval(i));
            }
        }
        let lo = hulls.iter().map(|h| h.0.clone()).min().unwrap();
        let hi = hulls.iter().map(|h| h.1.clone()).max().unwrap();
        if lo != zero || hi != one {
            return Err(IfsError::HullNotNormalized {
                lo: lo.to_string(),
                hi: hi.to_string(),
            });
        }
        let abs: Vec<_> = maps.iter().map(|m| m.ratio.abs()).collect();
        let rho_min = abs.iter().min().unwrap().clone();
        let rho_max = abs.iter().max().unwrap().clone();
        let equicontractive = maps.iter().all(|m| m.ratio == maps[0].ratio) && maps[0].ratio.sign() > 0;
        let mut word_ratio = 1;
        let mut pw = rho_max.clone();
        while pw > rho_min {
            pw = &pw * &rho_max;
            word_ratio += 1;
        }
        Ok(Ifs {
            field,
            maps,
            probs,
            rho_min,
            equicontractive,
            word_ratio,
        })
    }

    pub fn field(&self) -> &FieldRef {
        &self.field
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    pub fn probs(&self) -> &[Rat] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn rho_min(&self) -> &FieldElement {
        &self.rho_min
    }

    pub fn ln_rho_min(&self) -> f64 {
        self.rho_min.to_f64().ln()
    }

    pub fn is_equicontractive(&self) -> bool {
        self.equicontractive
    }

    /// Smallest `s` with `ρ_max^s ≤ ρ_min`; bounds word lengths in `Λ_n` by `s·n + s`.
    pub fn word_ratio(&self) -> u32 {
        self.word_ratio
    }

    pub fn min_prob(&self) -> &Rat {
        self.probs.iter().min().unwrap()
    }

    pub fn compose(&self, word: &[usize]) -> Result<AffineMap, IfsError> {
        let mut acc = AffineMap::identity(&self.field);
        for &j in word {
            let m = self.maps.get(j).ok_or(IfsError::IndexOutOfRange(j))?;
            acc = acc.compose(m);
        }
        Ok(acc)
    }

    pub fn weight(&self, word: &[usize]) -> Result<Rat, IfsError> {
        let mut p = Rat::one();
        for &j in word {
            p *= self.probs.get(j).ok_or(IfsError::IndexOutOfRange(j))?;
        }
        Ok(p)
    }

    /// Extends `start` by letters until `|ratio| ≤ threshold`, depth first in
    /// letter order. Each result is `(letters, map, weight)`.
    pub fn extend_below(&self, start: &AffineMap, threshold: &FieldElement) -> Vec<(Vec<usize>, AffineMap, Rat)> {
        let mut out = Vec::new();
        let mut stack = vec![(Vec::new(), start.clone(), Rat::one())];
        while let Some((w, m, p)) = stack.pop() {
            if m.ratio.abs() <= *threshold {
                out.push((w, m, p));
                continue;
            }
            for j in (0..self.maps.len()).rev() {
                let mut w2 = w.clone();
                w2.push(j);
                stack.push((w2, m.compose(&self.maps[j]), &p * &self.probs[j]));
            }
        }
        out
    }
}

/// Memoized layers `Λ_0, Λ_1, …` with a size cap.
pub struct LayerCache<'a> {
    ifs: &'a Ifs,
    layers: Vec<WordLayer>,
    rho_pow: Vec<FieldElement>,
    cap: usize,
}

impl<'a> LayerCache<'a> {
    pub fn new(ifs: &'a Ifs, cap: usize) -> Self {
        let root = Word {
            letters: Vec::new(),
            map: AffineMap::identity(ifs.field()),
            prob: Rat::one(),
        };
        LayerCache {
            ifs,
            layers: vec![WordLayer {
                level: 0,
                words: vec![root],
                parent: vec![None],
            }],
            rho_pow: vec![ifs.field().one()],
            cap,
        }
    }

    pub fn ifs(&self) -> &Ifs {
        self.ifs
    }

    pub fn rho_pow(&mut self, n: usize) -> FieldElement {
        while self.rho_pow.len() <= n {
            let next = self.rho_pow.last().unwrap() * self.ifs.rho_min();
            self.rho_pow.push(next);
        }
        self.rho_pow[n].clone()
    }

    pub fn layer(&mut self, n: usize) -> Result<&WordLayer, IfsError> {
        while self.layers.len() <= n {
            let level = self.layers.len();
            let threshold = self.rho_pow(level);
            let prev = self.layers.last().unwrap();
            let mut words = Vec::new();
            let mut parent = Vec::new();
            for (pi, w) in prev.words.iter().enumerate() {
                for (ext, map, p) in self.ifs.extend_below(&w.map, &threshold) {
                    let mut letters = w.letters.clone();
                    letters.extend(ext);
                    words.push(Word {
                        letters,
                        map,
                        prob: &w.prob * &p,
                    });
                    parent.push(Some(pi));
                    if words.len() > self.cap {
                        return Err(IfsError::LayerCap { level, cap: self.cap });
                    }
                }
            }
            self.layers.push(WordLayer { level, words, parent });
        }
        Ok(&self.layers[n])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_poly;
    use crate::field::NumberField;
    use crate::poly::rat;

    pub(crate) fn golden() -> Ifs {
        let f = NumberField::new(parse_poly("t^2+t-1").unwrap(), rat(1, 2), rat(2, 3)).unwrap();
        let t = f.theta().unwrap();
        let maps = vec![
            AffineMap {
                ratio: t.clone(),
                offset: f.zero(),
            },
            AffineMap {
                ratio: t.clone(),
                offset: f.parse("1 - t").unwrap(),
            },
        ];
        Ifs::new(f, maps, vec![rat(1, 2), rat(1, 2)]).unwrap()
    }

    fn rational(maps: &[(Rat, Rat)], probs: Vec<Rat>) -> Result<Ifs, IfsError> {
        let f = NumberField::rationals();
        let m = maps
            .iter()
            .map(|(r, d)| AffineMap {
                ratio: f.from_rational(r.clone()),
                offset: f.from_rational(d.clone()),
            })
            .collect();
        Ifs::new(f, m, probs)
    }

    #[test]
    fn compose_examples() {
        let g = golden();
        let f = g.field().clone();
        let id = g.compose(&[]).unwrap();
        assert!(id.ratio.is_one() && id.offset.is_zero());
        let m = g.compose(&[0, 1]).unwrap();
        let t = f.theta().unwrap();
        assert_eq!(m.ratio, &t * &t);
        assert_eq!(m.offset, f.parse("2*t - 1").unwrap());
        assert!(g.compose(&[2]).is_err());

        let c = rational(
            &(0..4).map(|j| (rat(1, 3), rat(2 * j, 9))).collect::<Vec<_>>(),
            vec![rat(1, 8), rat(3, 8), rat(3, 8), rat(1, 8)],
        )
        .unwrap();
        let m = c.compose(&[2]).unwrap();
        assert_eq!(m.offset.as_rational().unwrap(), &rat(4, 9));
    }

    #[test]
    fn mixed_ratio_layer() {
        let i = rational(
            &[(rat(1, 2), rat(0, 1)), (rat(1, 4), rat(3, 4))],
            vec![rat(1, 2), rat(1, 2)],
        )
        .unwrap();
        assert_eq!(i.word_ratio(), 2);
        let mut lc = LayerCache::new(&i, 1000);
        let words: Vec<_> = lc.layer(1).unwrap().words.iter().map(|w| w.letters.clone()).collect();
        assert_eq!(words, vec![vec![0, 0], vec![0, 1], vec![1]]);
    }

    #[test]
    fn equicontractive_layers_are_full() {
        let g = golden();
        let mut lc = LayerCache::new(&g, 1000);
        assert_eq!(lc.layer(1).unwrap().words.len(), 2);
        assert_eq!(lc.layer(4).unwrap().words.len(), 16);
        assert!(g.is_equicontractive());
    }

    #[test]
    fn validation_rejects_bad_input() {
        assert!(matches!(
            rational(
                &[(rat(1, 2), rat(0, 1)), (rat(1, 2), rat(1, 4))],
                vec![rat(1, 2), rat(1, 2)]
            ),
            Err(IfsError::HullNotNormalized { .. })
        ));
        assert!(matches!(
            rational(
                &[(rat(1, 2), rat(0, 1)), (rat(1, 2), rat(1, 2))],
                vec![rat(1, 2), rat(1, 3)]
            ),
            Err(IfsError::ProbabilitySum(_))
        ));
        assert!(matches!(
            rational(&[(rat(1, 1), rat(0, 1))], vec![rat(1, 1)]),
            Err(IfsError::BadRatio(0))
        ));
        // Negative ratios are allowed: x ↦ -x/2 + 1/2 maps [0,1] onto [0,1/2].
        assert!(rational(
            &[(rat(-1, 2), rat(1, 2)), (rat(1, 2), rat(1, 2))],
            vec![rat(1, 2), rat(1, 2)]
        )
        .is_ok());
    }

    #[test]
    fn layer_cap_is_enforced() {
        let g = golden();
        let mut lc = LayerCache::new(&g, 10);
        assert!(matches!(lc.layer(5), Err(IfsError::LayerCap { .. })));
    }
}
