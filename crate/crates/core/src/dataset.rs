//! Synthetic `(fields, parameters)` datasets.
//!
//! Sample `k` of a dataset with seed `s` is a pure function of the config and
//! `derive_seed(s, [k])`: parameter channel `c` draws its pattern from stream
//! `1 + c` of that sample seed, and the replicate noise uses
//! `derive_seed(sample_seed, [NOISE_TAG])`. The recipe of every channel is
//! stored with the sample so the payload can be rebuilt bit for bit.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::container::{ContainerKind, ContainerReader, ContainerWriter, Header, SampleAttrs};
use crate::error::{Error, Result};
use crate::grid::{Boundary, GridGeometry};
use crate::patterns::{sample_param_field, FieldRecipe, PatternConfig};
use crate::rng::{derive_seed, stream_rng};
use crate::sar::{ParamFields, ParamKind};
use crate::simulator::{simulate_ensemble, standardize_pixelwise, FieldEnsemble, Standardization};

const NOISE_TAG: u64 = 0x006e_6f69_7365;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.9,
            validation: 0.08,
            test: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "validation" => Some(Split::Validation),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl SplitFractions {
    /// `(train, validation, test)` counts: train and validation are floored,
    /// the test split takes the remainder.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let floor = |f: f64| ((n as f64 * f) + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let validation = floor(self.validation).min(n - train);
        (train, validation, n - train - validation)
    }

    /// Samples are assigned in index order: train, then validation, then test.
    pub fn assign(&self, n: usize, index: usize) -> Split {
        let (train, validation, _) = self.counts(n);
        if index < train {
            Split::Train
        } else if index < train + validation {
            Split::Validation
        } else {
            Split::Test
        }
    }

    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config(format!(
                "split fractions must lie in [0, 1]: {parts:?}"
            )));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1: {parts:?}"
            )));
        }
        Ok(())
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_samples: usize,
    pub replicates: usize,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default)]
    pub patterns: PatternConfig,
    #[serde(default)]
    pub split: SplitFractions,
}

impl DatasetConfig {
    pub fn new(
        n_samples: usize,
        replicates: usize,
        height: usize,
        width: usize,
        seed: u64,
    ) -> Self {
        Self {
            n_samples,
            replicates,
            height,
            width,
            seed,
            boundary: Boundary::Truncate,
            standardize: true,
            patterns: PatternConfig::default(),
            split: SplitFractions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_samples", self.n_samples),
            ("replicates", self.replicates),
            ("height", self.height),
            ("width", self.width),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        self.patterns.validate()?;
        self.split.validate()
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(self.height, self.width, self.boundary)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses and validates a TOML config.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// JSON schema mirroring the TOML layout.
    pub fn json_schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(DatasetConfig)).expect("schema serializes")
    }
}

/// How one sample was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sample_index: usize,
    pub sample_seed: u64,
    pub noise_seed: u64,
    /// Recipes in channel order `[kappa2, rho, theta]`.
    pub recipes: Vec<FieldRecipe>,
    /// Cells moved by support enforcement, per channel.
    pub clamped: [usize; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSample {
    pub fields: FieldEnsemble,
    pub params: ParamFields,
    pub provenance: Provenance,
    pub split: Split,
}

fn simulate_sample(
    params: &ParamFields,
    config: &DatasetConfig,
    noise_seed: u64,
) -> Result<FieldEnsemble> {
    let ens = simulate_ensemble(params, &config.geometry()?, config.replicates, noise_seed)?;
    if config.standardize {
        standardize_pixelwise(&ens)
    } else {
        Ok(ens)
    }
}

/// Draws the parameter images and replicate fields of sample `index`.
pub fn generate_sample(config: &DatasetConfig, index: usize) -> Result<DatasetSample> {
    config.validate()?;
    let geometry = config.geometry()?;
    let sample_seed = derive_seed(config.seed, &[index as u64]);
    let mut recipes = Vec::with_capacity(3);
    let mut channels = Vec::with_capacity(3);
    let mut clamped = [0usize; 3];
    for kind in ParamKind::ALL {
        let mut rng = stream_rng(sample_seed, 1 + kind.channel() as u64);
        let sf = sample_param_field(kind, &config.patterns, &geometry, &mut rng)?;
        clamped[kind.channel()] = sf.clamped;
        recipes.push(sf.recipe);
        channels.push(sf.field);
    }
    let theta = channels.pop().unwrap();
    let rho = channels.pop().unwrap();
    let kappa2 = channels.pop().unwrap();
    let params = ParamFields::new(kappa2, rho, theta)?;
    let noise_seed = derive_seed(sample_seed, &[NOISE_TAG]);
    let fields = simulate_sample(&params, config, noise_seed)?;
    Ok(DatasetSample {
        fields,
        params,
        provenance: Provenance {
            sample_index: index,
            sample_seed,
            noise_seed,
            recipes,
            clamped,
        },
        split: config.split.assign(config.n_samples, index),
    })
}

/// Rebuilds a sample from its stored recipes and noise seed.
pub fn regenerate_sample(config: &DatasetConfig, provenance: &Provenance) -> Result<DatasetSample> {
    let geometry = config.geometry()?;
    if provenance.recipes.len() != 3 {
        return Err(Error::format(
            "provenance",
            "expected three channel recipes",
        ));
    }
    let mut channels = Vec::with_capacity(3);
    for (kind, recipe) in ParamKind::ALL.iter().zip(&provenance.recipes) {
        if recipe.param() != *kind {
            return Err(Error::format(
                "provenance",
                format!(
                    "recipe for {} found in {} channel",
                    recipe.param().name(),
                    kind.name()
                ),
            ));
        }
        channels.push(recipe.realize(&geometry)?.0);
    }
    let theta = channels.pop().unwrap();
    let rho = channels.pop().unwrap();
    let kappa2 = channels.pop().unwrap();
    let params = ParamFields::new(kappa2, rho, theta)?;
    let fields = simulate_sample(&params, config, provenance.noise_seed)?;
    Ok(DatasetSample {
        fields,
        params,
        provenance: provenance.clone(),
        split: config
            .split
            .assign(config.n_samples, provenance.sample_index),
    })
}

/// Sidecar duplicating the container header for non-HDF5 tooling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config: DatasetConfig,
    pub config_hash: String,
    pub seed: u64,
    pub channel_order: Vec<String>,
    pub fields_shape: [usize; 3],
    pub params_shape: [usize; 3],
    pub splits: Vec<Split>,
    pub split_counts: [usize; 3],
}

/// `<dataset path>.manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub path: PathBuf,
    pub manifest: PathBuf,
    pub n_samples: usize,
    pub split_counts: (usize, usize, usize),
}

/// Generates every sample and writes the container plus manifest. Samples
/// are produced in parallel batches and written by a single writer in index
/// order.
pub fn write_dataset(config: &DatasetConfig, path: impl AsRef<Path>) -> Result<DatasetSummary> {
    config.validate()?;
    let path = path.as_ref();
    let config_json = config.to_json()?;
    let header = Header::new(ContainerKind::Dataset, config_json, config.seed);
    let mut writer = ContainerWriter::create(path, &header)?;
    let batch = rayon::current_num_threads().max(1);
    let mut splits = Vec::with_capacity(config.n_samples);
    for start in (0..config.n_samples).step_by(batch) {
        let end = (start + batch).min(config.n_samples);
        let samples: Vec<DatasetSample> = (start..end)
            .into_par_iter()
            .map(|k| generate_sample(config, k))
            .collect::<Result<_>>()?;
        for s in &samples {
            writer.append(
                Some(&s.fields),
                Some(&s.params),
                None,
                &SampleAttrs {
                    seed: s.provenance.sample_seed,
                    split: s.split.as_str().into(),
                    standardization: s.fields.standardization,
                    provenance: serde_json::to_string(&s.provenance)?,
                },
            )?;
            splits.push(s.split);
        }
    }
    let n = writer.finish()?;
    let counts = config.split.counts(n);
    let manifest = Manifest {
        tool_version: header.tool_version.clone(),
        config: config.clone(),
        config_hash: header.config_hash.clone(),
        seed: config.seed,
        channel_order: ParamKind::ALL
            .iter()
            .map(|k| k.name().to_string())
            .collect(),
        fields_shape: [config.replicates, config.height, config.width],
        params_shape: [3, config.height, config.width],
        splits,
        split_counts: [counts.0, counts.1, counts.2],
    };
    let mpath = manifest_path(path);
    std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)?;
    Ok(DatasetSummary {
        path: path.to_path_buf(),
        manifest: mpath,
        n_samples: n,
        split_counts: counts,
    })
}

/// Read access to a dataset container, validating every sample on load.
pub struct DatasetReader {
    inner: ContainerReader,
    config: DatasetConfig,
}

impl DatasetReader {
    pub fn config(&self) -> &DatasetConfig {
        &self.config
    }

    pub fn header(&self) -> &Header {
        self.inner.header()
    }

    pub fn len(&self) -> usize {
        self.inner.n_samples()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn container(&self) -> &ContainerReader {
        &self.inner
    }

    pub fn sample(&self, k: usize) -> Result<DatasetSample> {
        let fields = self.inner.fields(k)?;
        let params = self.inner.params(k)?;
        let c = &self.config;
        let at = |name: &str| format!("/samples/{k}/{name}");
        if (fields.replicates(), fields.height(), fields.width())
            != (c.replicates, c.height, c.width)
        {
            return Err(Error::format(
                at("fields"),
                format!(
                    "shape {}x{}x{} disagrees with config {}x{}x{}",
                    fields.replicates(),
                    fields.height(),
                    fields.width(),
                    c.replicates,
                    c.height,
                    c.width
                ),
            ));
        }
        if params.shape() != (c.height, c.width) {
            return Err(Error::format(at("params"), "grid disagrees with config"));
        }
        let attrs = self.inner.sample_attrs(k)?;
        let provenance: Provenance = serde_json::from_str(&attrs.provenance)
            .map_err(|e| Error::format(format!("/samples/{k}@provenance"), e.to_string()))?;
        let split = Split::parse(&attrs.split)
            .ok_or_else(|| Error::format(format!("/samples/{k}@split"), "unknown split"))?;
        if c.standardize != (fields.standardization != Standardization::None) {
            return Err(Error::format(
                format!("/samples/{k}@standardization"),
                "flag disagrees with config",
            ));
        }
        Ok(DatasetSample {
            fields,
            params,
            provenance,
            split,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<DatasetSample>> + '_ {
        (0..self.len()).map(move |k| self.sample(k))
    }
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<DatasetReader> {
    let inner = ContainerReader::open(path)?;
    if inner.header().kind != ContainerKind::Dataset {
        return Err(Error::format("/@kind", "not a dataset container"));
    }
    let config: DatasetConfig = serde_json::from_str(&inner.header().config)
        .map_err(|e| Error::format("/@config", e.to_string()))?;
    Ok(DatasetReader { inner, config })
}
