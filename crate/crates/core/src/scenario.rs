//! JSON scenarios: the group, coefficient algebra and action to work in, plus
//! run parameters and optional element lists.
//!
//! ```json
//! {
//!   "schema": "crossprob.scenario/1",
//!   "name": "f2_diag2",
//!   "group": { "free_group": 2 },
//!   "coefficients": { "shape": "diagonal", "dimension": 2, "mode": "exact" },
//!   "action": { "kind": "permutation", "generators": [[2, 1], [1, 2]] },
//!   "tolerance": 0.0,
//!   "seed": 7,
//!   "freeness": { "max_order": 4, "trials": 100, "splits": [{ "a": [0], "b": [1] }] }
//! }
//! ```
//!
//! `group` is either `{"free_group": N}` or `{"factors": [...]}` with entries
//! `{"type": "infinite_cyclic"}` / `{"type": "finite_cyclic", "order": k}`.
//! Permutation generators are 1-based image lists; conjugation generators are
//! row lists of numbers or `[re, im]` pairs. Exact mode needs a permutation action.

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::coeffalgebra::{CoeffMatrix, CoeffSpace, ScalarMode, Shape, DEFAULT_TOLERANCE};
use crate::crossedalg::{ActionSpec, CrossedElement, CrossedSpace};
use crate::error::{Error, Result};
use crate::groupwords::{Factor, GroupSpec};
use crate::nclattice::NcPartition;

pub const SCHEMA: &str = "crossprob.scenario/1";

/// Bundled fixtures by name.
pub const BUNDLED: [(&str, &str); 4] = [
    ("f2_diag2", include_str!("../fixtures/f2_diag2.json")),
    ("z2z3_diag6", include_str!("../fixtures/z2z3_diag6.json")),
    ("f2_full2_float", include_str!("../fixtures/f2_full2_float.json")),
    ("fn_split", include_str!("../fixtures/fn_split.json")),
];

#[derive(Deserialize)]
#[serde(untagged)]
enum RawGroup {
    Free { free_group: usize },
    Factors { factors: Vec<Factor> },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawAction {
    Permutation { generators: Vec<Vec<usize>> },
    UnitaryConjugation { generators: Vec<Value> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreenessParams {
    pub max_order: usize,
    pub trials: usize,
    pub spot_order: Option<usize>,
    pub spot_trials: usize,
    pub splits: Vec<Split>,
}

impl Default for FreenessParams {
    fn default() -> Self {
        FreenessParams {
            max_order: 4,
            trials: 100,
            spot_order: None,
            spot_trials: 20,
            splits: Vec::new(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema: String,
    #[serde(default)]
    name: Option<String>,
    group: RawGroup,
    coefficients: CoeffSpace,
    action: RawAction,
    #[serde(default)]
    tolerance: Option<f64>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    freeness: FreenessParams,
    #[serde(default)]
    elements: Vec<Value>,
    #[serde(default)]
    partitions: Vec<String>,
    #[serde(default)]
    tuples: Vec<Vec<String>>,
}

#[derive(Clone, Debug)]
pub struct NamedElement {
    pub name: String,
    pub element: CrossedElement,
}

/// A validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub space: Arc<CrossedSpace>,
    pub tolerance: f64,
    pub seed: u64,
    pub freeness: FreenessParams,
    pub elements: Vec<NamedElement>,
    pub partitions: Vec<NcPartition>,
    /// Element tuples, as indices into `elements`.
    pub tuples: Vec<Vec<usize>>,
}

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl Scenario {
    pub fn from_json_str(text: &str, fallback_name: &str) -> Result<Scenario> {
        let raw: RawScenario = serde_json::from_str(text).map_err(|e| {
            if e.is_syntax() || e.is_eof() {
                Error::Parse(format!("scenario JSON: {e}"))
            } else {
                config(format!("scenario: {e}"))
            }
        })?;
        Self::from_raw(raw, fallback_name)
    }

    /// Reads a scenario file, or a bundled fixture when `name` (with or
    /// without `.json`) is not an existing path.
    pub fn load(name: &str) -> Result<Scenario> {
        let path = Path::new(name);
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(name)
            .to_string();
        if path.is_file() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config(format!("cannot read {name}: {e}")))?;
            return Self::from_json_str(&text, &stem);
        }
        let key = name.strip_suffix(".json").unwrap_or(name);
        match Self::bundled(key) {
            Some(s) => s,
            None => Err(config(format!(
                "no scenario file '{name}' and no bundled fixture of that name (bundled: {})",
                BUNDLED.map(|(n, _)| n).join(", ")
            ))),
        }
    }

    pub fn bundled(name: &str) -> Option<Result<Scenario>> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(n, text)| Self::from_json_str(text, n))
    }

    fn from_raw(raw: RawScenario, fallback_name: &str) -> Result<Scenario> {
        if raw.schema != SCHEMA {
            return Err(config(format!(
                "unsupported schema '{}', expected '{SCHEMA}'",
                raw.schema
            )));
        }
        let group = match raw.group {
            RawGroup::Free { free_group } => GroupSpec::free_group(free_group),
            RawGroup::Factors { factors } => GroupSpec::new(factors),
        }
        .map_err(|e| config(format!("group: {e}")))?;
        let coeffs = CoeffSpace::new(raw.coefficients.shape, raw.coefficients.dim, raw.coefficients.mode)
            .map_err(|e| config(format!("coefficients: {e}")))?;
        let tolerance = raw.tolerance.unwrap_or(DEFAULT_TOLERANCE);
        if !(tolerance.is_finite() && tolerance >= 0.0) {
            return Err(config(format!("tolerance must be a nonnegative number, got {tolerance}")));
        }

        let action = match raw.action {
            RawAction::Permutation { generators } => {
                let perms = generators
                    .into_iter()
                    .enumerate()
                    .map(|(k, images)| {
                        images
                            .into_iter()
                            .map(|i| {
                                i.checked_sub(1).ok_or_else(|| {
                                    config(format!("generator {k}: images are 1-based"))
                                })
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                ActionSpec::permutations(perms)
            }
            RawAction::UnitaryConjugation { generators } => {
                if coeffs.mode == ScalarMode::Exact {
                    return Err(config("exact scalar mode requires a permutation action"));
                }
                if coeffs.shape != Shape::Full {
                    return Err(config("conjugation actions need full coefficient matrices"));
                }
                let us = generators
                    .iter()
                    .enumerate()
                    .map(|(k, rows)| {
                        let value = match rows {
                            Value::Array(_) => json!({ "entries": rows }),
                            other => other.clone(),
                        };
                        CoeffMatrix::from_json(&value, coeffs)
                            .map_err(|e| config(format!("generator {k}: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                ActionSpec::conjugations(us).map_err(|e| config(format!("action: {e}")))?
            }
        };
        let space = CrossedSpace::new(group, coeffs, action, tolerance)
            .map_err(|e| config(format!("action: {e}")))?;

        let factors = space.group().factor_count();
        let fp = &raw.freeness;
        for (k, split) in fp.splits.iter().enumerate() {
            if let Some(f) = split.a.iter().chain(&split.b).find(|&&f| f >= factors) {
                return Err(config(format!("split {k}: factor {f} out of range")));
            }
        }
        if fp.max_order < 2 || fp.max_order > crate::freeprob::CUMULANT_CEILING {
            return Err(config(format!(
                "freeness.max_order must be in 2..={}",
                crate::freeprob::CUMULANT_CEILING
            )));
        }
        if let Some(o) = fp.spot_order {
            if !(2..=crate::freeprob::CUMULANT_CEILING).contains(&o) {
                return Err(config(format!("freeness.spot_order {o} out of range")));
            }
        }

        let mut elements = Vec::with_capacity(raw.elements.len());
        let mut seen = HashSet::new();
        for (k, value) in raw.elements.iter().enumerate() {
            let name = value
                .get("name")
                .and_then(Value::as_str)
                .map(str::to_string)
                .unwrap_or_else(|| format!("x{}", k + 1));
            if !seen.insert(name.clone()) {
                return Err(config(format!("duplicate element name '{name}'")));
            }
            let element = CrossedElement::from_json(&space, value)
                .map_err(|e| config(format!("element '{name}': {e}")))?;
            elements.push(NamedElement { name, element });
        }
        let partitions = raw
            .partitions
            .iter()
            .map(|p| p.parse().map_err(|e| config(format!("partition {p}: {e}"))))
            .collect::<Result<Vec<NcPartition>>>()?;
        let tuples = raw
            .tuples
            .iter()
            .map(|t| {
                t.iter()
                    .map(|n| {
                        elements
                            .iter()
                            .position(|e| &e.name == n)
                            .ok_or_else(|| config(format!("tuple refers to unknown element '{n}'")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Scenario {
            name: raw.name.unwrap_or_else(|| fallback_name.to_string()),
            space,
            tolerance,
            seed: raw.seed,
            freeness: raw.freeness,
            elements,
            partitions,
            tuples,
        })
    }

    /// Splits to test: the configured ones, or `{g0}` against the rest.
    pub fn splits(&self) -> Vec<Split> {
        if !self.freeness.splits.is_empty() {
            return self.freeness.splits.clone();
        }
        let n = self.space.group().factor_count();
        if n < 2 {
            return Vec::new();
        }
        vec![Split {
            a: vec![0],
            b: (1..n).collect(),
        }]
    }

    /// Exact equality, or entrywise within the tolerance in float mode.
    pub fn same(&self, a: &CoeffMatrix, b: &CoeffMatrix) -> bool {
        a.approx_eq(b, self.tolerance).unwrap_or(false)
    }

    pub fn vanishes(&self, a: &CoeffMatrix) -> bool {
        a.is_negligible(self.tolerance)
    }

    pub fn tuple_elements(&self, tuple: &[usize]) -> Vec<CrossedElement> {
        tuple.iter().map(|&i| self.elements[i].element.clone()).collect()
    }

    pub fn tuple_label(&self, tuple: &[usize]) -> String {
        tuple
            .iter()
            .map(|&i| self.elements[i].name.as_str())
            .collect::<Vec<_>>()
            .join(",")
    }
}
