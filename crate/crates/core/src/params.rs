//! Parameter metadata, typed parameter vectors, presets, and the mapping
//! between raw parameter values and normalized `[0, 1]` genes.

use std::collections::BTreeMap;
use std::ops::Deref;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamKind {
    Continuous,
    Discrete,
}

/// Metadata for one generator or camera parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub min: f64,
    pub max: f64,
    /// Grid spacing for discrete parameters. Ignored for continuous ones.
    pub step: f64,
    pub description: String,
}

impl ParamSpec {
    pub fn continuous(name: &str, min: f64, max: f64, description: &str) -> Self {
        Self {
            name: name.to_owned(),
            kind: ParamKind::Continuous,
            min,
            max,
            step: 1.0,
            description: description.to_owned(),
        }
    }

    pub fn discrete(name: &str, min: f64, max: f64, description: &str) -> Self {
        Self {
            name: name.to_owned(),
            kind: ParamKind::Discrete,
            min,
            max,
            step: 1.0,
            description: description.to_owned(),
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn is_discrete(&self) -> bool {
        self.kind == ParamKind::Discrete
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    /// Checks the spec's own invariants.
    pub fn check(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidParameter {
            name: self.name.clone(),
            reason,
        };
        if !(self.min.is_finite() && self.max.is_finite()) || self.min >= self.max {
            return Err(bad(format!("bounds [{}, {}] are not ordered", self.min, self.max)));
        }
        if self.is_discrete() {
            if !(self.step > 0.0) {
                return Err(bad(format!("step {} must be positive", self.step)));
            }
            let cells = self.range() / self.step;
            if (cells - cells.round()).abs() > GRID_TOLERANCE * cells.max(1.0) {
                return Err(bad(format!(
                    "range {} is not a multiple of step {}",
                    self.range(),
                    self.step
                )));
            }
        }
        Ok(())
    }

    /// Number of grid points of a discrete parameter.
    pub fn grid_len(&self) -> usize {
        (self.range() / self.step).round() as usize + 1
    }

    /// Projects `x` into bounds and, for discrete parameters, onto the grid
    /// (round half up).
    pub fn snap(&self, x: f64) -> f64 {
        let x = if x.is_nan() { self.min } else { x.clamp(self.min, self.max) };
        match self.kind {
            ParamKind::Continuous => x,
            ParamKind::Discrete => {
                let k = ((x - self.min) / self.step + 0.5).floor();
                (self.min + k * self.step).min(self.max)
            }
        }
    }

    pub fn midpoint(&self) -> f64 {
        self.snap(0.5 * (self.min + self.max))
    }

    fn violation(&self, x: f64) -> Option<String> {
        if !x.is_finite() {
            return Some(format!("{} = {x} is not finite", self.name));
        }
        if x < self.min || x > self.max {
            return Some(format!(
                "{} = {x} outside [{}, {}]",
                self.name, self.min, self.max
            ));
        }
        if self.is_discrete() && (x - self.snap(x)).abs() > GRID_TOLERANCE * self.step.max(1.0) {
            return Some(format!(
                "{} = {x} is not on the grid {}+k*{}",
                self.name, self.min, self.step
            ));
        }
        None
    }

    pub fn to_gene(&self, x: f64) -> f64 {
        (x - self.min) / self.range()
    }

    pub fn from_gene(&self, g: f64) -> f64 {
        self.snap(self.min + g * self.range())
    }
}

/// An ordered, shared list of parameter specs.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpace(Arc<[ParamSpec]>);

impl ParamSpace {
    pub fn new(specs: Vec<ParamSpec>) -> Result<Self> {
        for s in &specs {
            s.check()?;
        }
        Ok(Self(specs.into()))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|s| s.name == name)
    }

    /// `true` at every discrete slot; these slots never receive gradients.
    pub fn frozen_mask(&self) -> Vec<bool> {
        self.0.iter().map(ParamSpec::is_discrete).collect()
    }

    pub fn continuous_count(&self) -> usize {
        self.0.iter().filter(|s| !s.is_discrete()).count()
    }

    pub fn midpoint(&self) -> ParameterVector {
        ParameterVector {
            space: self.clone(),
            values: self.0.iter().map(ParamSpec::midpoint).collect(),
        }
    }

    /// Concatenates two spaces, e.g. generator parameters followed by camera genes.
    pub fn concat(&self, other: &ParamSpace) -> ParamSpace {
        let specs: Vec<ParamSpec> = self.0.iter().chain(other.0.iter()).cloned().collect();
        ParamSpace(specs.into())
    }
}

impl Deref for ParamSpace {
    type Target = [ParamSpec];

    fn deref(&self) -> &[ParamSpec] {
        &self.0
    }
}

/// Values for every parameter of a [`ParamSpace`], always valid against it.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    space: ParamSpace,
    values: Vec<f64>,
}

impl ParameterVector {
    /// Builds a vector, rejecting out-of-range or off-grid values.
    pub fn new(space: ParamSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::Dimension(format!(
                "{} values for {} parameters",
                values.len(),
                space.len()
            )));
        }
        let problems: Vec<String> = space
            .iter()
            .zip(&values)
            .filter_map(|(s, &x)| s.violation(x))
            .collect();
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(Self { space, values })
    }

    /// Projects arbitrary values into the feasible set.
    pub fn clamped(space: ParamSpace, values: &[f64]) -> Self {
        assert_eq!(values.len(), space.len(), "value count must match the space");
        let values = space.iter().zip(values).map(|(s, &x)| s.snap(x)).collect();
        Self { space, values }
    }

    pub fn clamp(&self) -> Self {
        Self::clamped(self.space.clone(), &self.values)
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.space.index_of(name).map(|i| self.values[i])
    }

    /// Returns a copy with `name` set to `value`, validated.
    pub fn with(&self, name: &str, value: f64) -> Result<Self> {
        let i = self.space.index_of(name).ok_or_else(|| Error::InvalidParameter {
            name: name.to_owned(),
            reason: "unknown parameter".into(),
        })?;
        let mut values = self.values.clone();
        values[i] = value;
        Self::new(self.space.clone(), values)
    }

    pub fn to_genes(&self) -> Vec<f64> {
        self.space
            .iter()
            .zip(&self.values)
            .map(|(s, &x)| s.to_gene(x))
            .collect()
    }

    pub fn from_genes(genes: &[f64], space: &ParamSpace) -> Result<Self> {
        if genes.len() != space.len() {
            return Err(Error::Dimension(format!(
                "{} genes for {} parameters",
                genes.len(),
                space.len()
            )));
        }
        if let Some((index, &value)) = genes
            .iter()
            .enumerate()
            .find(|(_, g)| !(0.0..=1.0).contains(*g))
        {
            return Err(Error::GeneOutOfRange { index, value });
        }
        let values = space
            .iter()
            .zip(genes)
            .map(|(s, &g)| s.from_gene(g))
            .collect();
        Ok(Self {
            space: space.clone(),
            values,
        })
    }

    /// Name/value pairs in spec order.
    pub fn named(&self) -> BTreeMap<String, f64> {
        self.space
            .iter()
            .zip(&self.values)
            .map(|(s, &x)| (s.name.clone(), x))
            .collect()
    }
}

/// On-disk preset / parameter file:
/// `{"name": str, "generator": str, "values": {paramName: number, ...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresetFile {
    #[serde(default)]
    pub name: String,
    pub generator: String,
    pub values: BTreeMap<String, f64>,
    /// Stochastic seed, used only by non-differentiable generators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl PresetFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// A named, validated parameter vector prepared in advance for one generator.
#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: String,
    pub generator_id: String,
    pub vector: ParameterVector,
    pub seed: Option<u64>,
}

impl Preset {
    /// Resolves a preset file against a generator's space. Unknown names are
    /// errors; missing names take the spec midpoint.
    pub fn from_file(file: &PresetFile, space: &ParamSpace) -> Result<Self> {
        if let Some(unknown) = file.values.keys().find(|k| space.index_of(k).is_none()) {
            return Err(Error::InvalidParameter {
                name: unknown.clone(),
                reason: format!("not a parameter of `{}`", file.generator),
            });
        }
        let values = space
            .iter()
            .map(|s| file.values.get(&s.name).copied().unwrap_or_else(|| s.midpoint()))
            .collect();
        Ok(Self {
            name: file.name.clone(),
            generator_id: file.generator.clone(),
            vector: ParameterVector::new(space.clone(), values)?,
            seed: file.seed,
        })
    }

    pub fn to_file(&self) -> PresetFile {
        PresetFile {
            name: self.name.clone(),
            generator: self.generator_id.clone(),
            values: self.vector.named(),
            seed: self.seed,
        }
    }
}
