//! Input file formats: one-period markets, event trees and utility specs.
//!
//! A market file lists states with terminal asset prices in units of a bond
//! worth one today:
//!
//! ```json
//! {"states": [{"prob": 0.5, "assets": [2.0], "claims": [1.0]},
//!             {"prob": 0.5, "assets": [0.5], "claims": [0.0]}],
//!  "asset_initial": [1.0], "bond": 1.0}
//! ```
//!
//! Discounted gains are `assets/bond − asset_initial`. A tree file is a
//! nested `{"price": [...], "children": [{"prob": ..., ...}]}` with claims on
//! the leaves.

use std::path::Path;

use serde::{Deserialize, Serialize};
use utilprice_core::{reduce_tree, DMatrix, FiniteMarket, TreeModel, TreeNode, Utility};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StateRecord {
    pub prob: f64,
    pub assets: Vec<f64>,
    #[serde(default)]
    pub claims: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MarketFile {
    pub states: Vec<StateRecord>,
    pub asset_initial: Vec<f64>,
    #[serde(default = "unit")]
    pub bond: f64,
}

fn unit() -> f64 {
    1.0
}

impl MarketFile {
    pub fn to_market(&self) -> CliResult<FiniteMarket> {
        let k = self.states.len();
        let j = self.asset_initial.len();
        if k == 0 {
            return Err(CliError::Usage("market file has no states".into()));
        }
        if !(self.bond > 0.0 && self.bond.is_finite()) {
            return Err(CliError::Usage("bond value must be positive".into()));
        }
        let m = self.states[0].claims.len();
        for (s, st) in self.states.iter().enumerate() {
            if st.assets.len() != j || st.claims.len() != m {
                return Err(CliError::Usage(format!(
                    "state {s} has {} assets and {} claims, expected {j} and {m}",
                    st.assets.len(),
                    st.claims.len()
                )));
            }
        }
        let probs = self.states.iter().map(|s| s.prob).collect();
        let gains = DMatrix::from_fn(k, j, |s, a| self.states[s].assets[a] / self.bond - self.asset_initial[a]);
        let claims = DMatrix::from_fn(k, m, |s, i| self.states[s].claims[i]);
        let mut market = FiniteMarket::new(probs, gains, claims)?;
        if self.states.iter().all(|s| s.label.is_some()) {
            market.state_labels = self.states.iter().filter_map(|s| s.label.clone()).collect();
        }
        Ok(market)
    }

    /// The file describing `market` (unit bond, zero initial prices).
    pub fn from_market(market: &FiniteMarket) -> Self {
        let states = (0..market.n_states())
            .map(|s| StateRecord {
                prob: market.probs()[s],
                assets: market.gains().row(s).iter().cloned().collect(),
                claims: market.claims().row(s).iter().cloned().collect(),
                label: None,
            })
            .collect();
        MarketFile { states, asset_initial: vec![0.0; market.n_assets()], bond: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TreeFile {
    pub price: Vec<f64>,
    /// Conditional probability of reaching this node; the root defaults to one.
    #[serde(default = "unit")]
    pub prob: f64,
    #[serde(default)]
    pub claims: Vec<f64>,
    #[serde(default)]
    pub children: Vec<TreeFile>,
}

impl TreeFile {
    fn to_node(&self) -> TreeNode {
        TreeNode {
            price: self.price.clone(),
            prob: self.prob,
            claims: self.claims.clone(),
            children: self.children.iter().map(TreeFile::to_node).collect(),
        }
    }

    pub fn to_tree(&self) -> CliResult<TreeModel> {
        Ok(TreeModel::new(self.to_node())?)
    }
}

/// Utility specification, tagged by `type`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum UtilitySpec {
    Power { p: f64 },
    Log,
    Exp { gamma: f64 },
    Mixture { weights: Vec<f64>, exponents: Vec<f64> },
}

impl UtilitySpec {
    pub fn to_utility(&self) -> CliResult<Utility> {
        Ok(match self {
            UtilitySpec::Power { p } => Utility::power(*p)?,
            UtilitySpec::Log => Utility::Log,
            UtilitySpec::Exp { gamma } => Utility::exponential(*gamma)?,
            UtilitySpec::Mixture { weights, exponents } => Utility::mixture(weights.clone(), exponents.clone())?,
        })
    }

    pub fn from_utility(u: &Utility) -> Self {
        match u {
            Utility::Power { p } => UtilitySpec::Power { p: *p },
            Utility::Log => UtilitySpec::Log,
            Utility::Exponential { gamma } => UtilitySpec::Exp { gamma: *gamma },
            Utility::Mixture { weights, exponents } => {
                UtilitySpec::Mixture { weights: weights.clone(), exponents: exponents.clone() }
            }
        }
    }

    /// Parses inline JSON, a path to a JSON file, or a shorthand:
    /// `log`, `power:0.5`, `exp:2`, `mixture:0.5@0.5,0.5@-1` (weight@exponent).
    pub fn parse(text: &str) -> CliResult<Self> {
        let t = text.trim();
        if t.starts_with('{') {
            return serde_json::from_str(t).map_err(|source| CliError::Json { path: "<utility>".into(), source });
        }
        if t.ends_with(".json") {
            return read_json(Path::new(t));
        }
        let bad = || CliError::Usage(format!("unrecognised utility spec '{t}'"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        let (head, arg) = t.split_once(':').map_or((t, None), |(h, a)| (h, Some(a)));
        match (head, arg) {
            ("log", None) => Ok(UtilitySpec::Log),
            ("power", Some(a)) => Ok(UtilitySpec::Power { p: num(a)? }),
            ("exp", Some(a)) => Ok(UtilitySpec::Exp { gamma: num(a)? }),
            ("mixture", Some(a)) => {
                let mut weights = Vec::new();
                let mut exponents = Vec::new();
                for part in a.split(',') {
                    let (w, e) = part.split_once('@').ok_or_else(bad)?;
                    weights.push(num(w)?);
                    exponents.push(num(e)?);
                }
                Ok(UtilitySpec::Mixture { weights, exponents })
            }
            _ => Err(bad()),
        }
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.display().to_string(), source })
}

/// Loads a market file or a tree file (reduced to a one-period market).
pub fn load_model(path: &Path) -> CliResult<FiniteMarket> {
    let value: serde_json::Value = read_json(path)?;
    let parse = |source| CliError::Json { path: path.display().to_string(), source };
    if value.get("states").is_some() {
        let file: MarketFile = serde_json::from_value(value).map_err(parse)?;
        file.to_market()
    } else if value.get("price").is_some() {
        let file: TreeFile = serde_json::from_value(value).map_err(parse)?;
        Ok(reduce_tree(&file.to_tree()?)?)
    } else {
        Err(CliError::Usage(format!("{} is neither a market file nor a tree file", path.display())))
    }
}
