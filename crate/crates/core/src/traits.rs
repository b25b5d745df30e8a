//! Big-five trait vectors and the plasticity/stability meta-traits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{validation, CoreError, Result};
use crate::real::Real;

/// One of the five perceived traits. Emotional stability is the reversed
/// neuroticism axis: a low score means high neuroticism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trait {
    Openness,
    Conscientiousness,
    Extraversion,
    Agreeableness,
    EmotionalStability,
}

impl Trait {
    pub const ALL: [Trait; 5] = [
        Trait::Openness,
        Trait::Conscientiousness,
        Trait::Extraversion,
        Trait::Agreeableness,
        Trait::EmotionalStability,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Trait::Openness => "openness",
            Trait::Conscientiousness => "conscientiousness",
            Trait::Extraversion => "extraversion",
            Trait::Agreeableness => "agreeableness",
            Trait::EmotionalStability => "emotional_stability",
        }
    }
}

impl fmt::Display for Trait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Trait {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Trait::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| validation(format!("unknown trait `{s}`")))
    }
}

/// Five trait scores, each finite and in `[0, 1]`.
///
/// Construct through [`TraitVector::new`] or [`TraitVector::from_array`],
/// which enforce the range. Arithmetic helpers that may leave the unit
/// cube live on raw arrays instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TraitRecord<T>", into = "TraitRecord<T>")]
#[serde(bound = "T: Real")]
pub struct TraitVector<T> {
    scores: [T; 5],
}

impl<T: Real> TraitVector<T> {
    pub fn new(
        openness: T,
        conscientiousness: T,
        extraversion: T,
        agreeableness: T,
        emotional_stability: T,
    ) -> Result<Self> {
        Self::from_array([
            openness,
            conscientiousness,
            extraversion,
            agreeableness,
            emotional_stability,
        ])
    }

    /// Scores in O, C, E, A, ES order.
    pub fn from_array(scores: [T; 5]) -> Result<Self> {
        for (t, &v) in Trait::ALL.iter().zip(scores.iter()) {
            if !v.is_finite() {
                return Err(validation(format!("{t} is not finite")));
            }
            if v < T::zero() || v > T::one() {
                return Err(validation(format!("{t} = {v} outside [0, 1]")));
            }
        }
        Ok(Self { scores })
    }

    pub fn splat(v: T) -> Result<Self> {
        Self::from_array([v; 5])
    }

    pub fn as_array(&self) -> &[T; 5] {
        &self.scores
    }

    pub fn get(&self, t: Trait) -> T {
        self.scores[t.index()]
    }

    pub fn openness(&self) -> T {
        self.scores[0]
    }
    pub fn conscientiousness(&self) -> T {
        self.scores[1]
    }
    pub fn extraversion(&self) -> T {
        self.scores[2]
    }
    pub fn agreeableness(&self) -> T {
        self.scores[3]
    }
    pub fn emotional_stability(&self) -> T {
        self.scores[4]
    }

    pub fn meta(&self) -> MetaTraitVector<T> {
        let [p, s] = meta_linear(&self.scores);
        MetaTraitVector {
            plasticity: p,
            stability: s,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct TraitRecord<T> {
    openness: T,
    conscientiousness: T,
    extraversion: T,
    agreeableness: T,
    emotional_stability: T,
}

impl<T: Real> TryFrom<TraitRecord<T>> for TraitVector<T> {
    type Error = CoreError;

    fn try_from(r: TraitRecord<T>) -> Result<Self> {
        TraitVector::new(
            r.openness,
            r.conscientiousness,
            r.extraversion,
            r.agreeableness,
            r.emotional_stability,
        )
    }
}

impl<T: Real> From<TraitVector<T>> for TraitRecord<T> {
    fn from(v: TraitVector<T>) -> Self {
        let [openness, conscientiousness, extraversion, agreeableness, emotional_stability] =
            v.scores;
        TraitRecord {
            openness,
            conscientiousness,
            extraversion,
            agreeableness,
            emotional_stability,
        }
    }
}

/// Plasticity and stability. Unit-weight sums of the underlying traits, so
/// plasticity lies in `[0, 2]` and stability in `[0, 3]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MetaTraitVector<T> {
    pub plasticity: T,
    pub stability: T,
}

impl<T: Real> MetaTraitVector<T> {
    /// Divides each meta-trait by its number of constituent traits, mapping
    /// both onto `[0, 1]`.
    pub fn normalized(&self) -> Self {
        Self {
            plasticity: self.plasticity / T::lit(2.0),
            stability: self.stability / T::lit(3.0),
        }
    }

    pub fn as_array(&self) -> [T; 2] {
        [self.plasticity, self.stability]
    }
}

/// The raw linear map behind [`meta_traits`], valid for any real inputs.
///
/// plasticity = O + E, stability = C + A + ES.
pub fn meta_linear<T: Real>(scores: &[T; 5]) -> [T; 2] {
    [
        scores[0] + scores[2],
        scores[1] + scores[3] + scores[4],
    ]
}

/// Plasticity and stability of a validated trait vector.
pub fn meta_traits<T: Real>(t: &TraitVector<T>) -> MetaTraitVector<T> {
    t.meta()
}

/// Validates a raw array before computing meta-traits.
pub fn meta_traits_checked<T: Real>(scores: [T; 5]) -> Result<MetaTraitVector<T>> {
    Ok(TraitVector::from_array(scores)?.meta())
}

/// Representation chosen for multivariate analyses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraitSet {
    /// The five traits.
    Big5,
    /// Plasticity and stability.
    Meta,
}

impl TraitSet {
    pub fn dim(self) -> usize {
        match self {
            TraitSet::Big5 => 5,
            TraitSet::Meta => 2,
        }
    }

    /// Projects a trait vector onto this representation.
    pub fn project<T: Real>(self, v: &TraitVector<T>, normalize_meta: bool) -> Vec<T> {
        match self {
            TraitSet::Big5 => v.as_array().to_vec(),
            TraitSet::Meta => {
                let m = v.meta();
                let m = if normalize_meta { m.normalized() } else { m };
                m.as_array().to_vec()
            }
        }
    }
}

/// The seven dependent variables analysed per trait: the big five followed
/// by plasticity and stability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Openness,
    Conscientiousness,
    Extraversion,
    Agreeableness,
    EmotionalStability,
    Plasticity,
    Stability,
}

impl Variable {
    pub const ALL: [Variable; 7] = [
        Variable::Openness,
        Variable::Conscientiousness,
        Variable::Extraversion,
        Variable::Agreeableness,
        Variable::EmotionalStability,
        Variable::Plasticity,
        Variable::Stability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Openness => "openness",
            Variable::Conscientiousness => "conscientiousness",
            Variable::Extraversion => "extraversion",
            Variable::Agreeableness => "agreeableness",
            Variable::EmotionalStability => "emotional_stability",
            Variable::Plasticity => "plasticity",
            Variable::Stability => "stability",
        }
    }

    pub fn extract<T: Real>(self, v: &TraitVector<T>, normalize_meta: bool) -> T {
        let meta = || {
            let m = v.meta();
            if normalize_meta {
                m.normalized()
            } else {
                m
            }
        };
        match self {
            Variable::Openness => v.openness(),
            Variable::Conscientiousness => v.conscientiousness(),
            Variable::Extraversion => v.extraversion(),
            Variable::Agreeableness => v.agreeableness(),
            Variable::EmotionalStability => v.emotional_stability(),
            Variable::Plasticity => meta().plasticity,
            Variable::Stability => meta().stability,
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Variable::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| validation(format!("unknown variable `{s}`")))
    }
}
