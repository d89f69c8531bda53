//! HDF5 container shared by datasets, ensembles and parameter estimates.
//!
//! Layout:
//!
//! ```text
//! /                         attrs: format, format_version, kind, tool_version,
//!                                  config (JSON), config_hash, seed,
//!                                  channel_order, n_samples
//! /samples/<k>/fields       float32 [M, H, W]   (optional per kind)
//! /samples/<k>/params       float32 [3, H, W]   channels kappa2, rho, theta
//! /samples/<k>/mask         uint8   [H, W]      1 = estimate converged
//! /samples/<k>              attrs: seed, split, standardization, provenance (JSON)
//! ```
//!
//! Arrays are row-major, chunked one slice per chunk and deflated at level 4.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use hdf5::types::VarLenUnicode;
use hdf5::{File, Group, H5Type};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sar::ParamFields;
use crate::simulator::{FieldEnsemble, Standardization};

pub const FORMAT_NAME: &str = "nsgrf";
pub const FORMAT_VERSION: u32 = 1;
pub const CHANNEL_ORDER: &str = "kappa2,rho,theta";
pub const DEFLATE_LEVEL: u8 = 4;
pub const TOOL_VERSION: &str = concat!("nsgrf ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContainerKind {
    Dataset,
    Ensemble,
    Params,
}

impl ContainerKind {
    fn as_str(self) -> &'static str {
        match self {
            ContainerKind::Dataset => "dataset",
            ContainerKind::Ensemble => "ensemble",
            ContainerKind::Params => "params",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "dataset" => Some(ContainerKind::Dataset),
            "ensemble" => Some(ContainerKind::Ensemble),
            "params" => Some(ContainerKind::Params),
            _ => None,
        }
    }
}

/// Provenance carried by every output: producing tool, configuration and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub kind: ContainerKind,
    pub tool_version: String,
    pub config: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Header {
    pub fn new(kind: ContainerKind, config_json: String, seed: u64) -> Self {
        Self {
            kind,
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config_hash(&config_json),
            config: config_json,
            seed,
        }
    }
}

/// Hex SHA-256 of a configuration string.
pub fn config_hash(config: &str) -> String {
    format!("{:x}", Sha256::digest(config.as_bytes()))
}

/// Per-sample scalar attributes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleAttrs {
    pub seed: u64,
    pub split: String,
    pub standardization: Standardization,
    pub provenance: String,
}

fn sample_path(k: usize) -> String {
    format!("samples/{k}")
}

fn write_str_attr(loc: &hdf5::Location, name: &str, value: &str) -> Result<()> {
    let v = VarLenUnicode::from_str(value)
        .map_err(|e| Error::format(name, format!("attribute not encodable: {e}")))?;
    loc.new_attr::<VarLenUnicode>()
        .create(name)?
        .write_scalar(&v)?;
    Ok(())
}

fn write_attr<T: H5Type>(loc: &hdf5::Location, name: &str, value: &T) -> Result<()> {
    loc.new_attr::<T>().create(name)?.write_scalar(value)?;
    Ok(())
}

fn read_str_attr(loc: &hdf5::Location, name: &str, at: &str) -> Result<String> {
    let attr = loc
        .attr(name)
        .map_err(|_| Error::format(format!("{at}@{name}"), "missing attribute"))?;
    Ok(attr.read_scalar::<VarLenUnicode>()?.as_str().to_string())
}

fn read_attr<T: H5Type>(loc: &hdf5::Location, name: &str, at: &str) -> Result<T> {
    let attr = loc
        .attr(name)
        .map_err(|_| Error::format(format!("{at}@{name}"), "missing attribute"))?;
    Ok(attr.read_scalar::<T>()?)
}

fn standardization_str(s: Standardization) -> &'static str {
    match s {
        Standardization::None => "none",
        Standardization::Pixelwise => "pixelwise",
        Standardization::SpatialFallback => "spatial-fallback",
    }
}

fn parse_standardization(s: &str) -> Option<Standardization> {
    match s {
        "none" => Some(Standardization::None),
        "pixelwise" => Some(Standardization::Pixelwise),
        "spatial-fallback" => Some(Standardization::SpatialFallback),
        _ => None,
    }
}

fn to_f32(values: &[f64]) -> Vec<f32> {
    values.iter().map(|&v| v as f32).collect()
}

fn write_array<T: H5Type>(group: &Group, name: &str, shape: &[usize], data: &[T]) -> Result<()> {
    let mut chunk = shape.to_vec();
    if chunk.len() == 3 {
        chunk[0] = 1;
    }
    let ds = group
        .new_dataset::<T>()
        .shape(shape)
        .chunk(chunk)
        .deflate(DEFLATE_LEVEL)
        .create(name)?;
    ds.write_raw(data)?;
    Ok(())
}

/// Sequential writer; samples must be appended in index order.
pub struct ContainerWriter {
    file: File,
    path: PathBuf,
    written: usize,
}

impl ContainerWriter {
    pub fn create(path: impl AsRef<Path>, header: &Header) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path)?;
        write_str_attr(&file, "format", FORMAT_NAME)?;
        write_attr(&file, "format_version", &FORMAT_VERSION)?;
        write_str_attr(&file, "kind", header.kind.as_str())?;
        write_str_attr(&file, "tool_version", &header.tool_version)?;
        write_str_attr(&file, "config", &header.config)?;
        write_str_attr(&file, "config_hash", &header.config_hash)?;
        write_attr(&file, "seed", &header.seed)?;
        write_str_attr(&file, "channel_order", CHANNEL_ORDER)?;
        file.create_group("samples")?;
        Ok(Self {
            file,
            path,
            written: 0,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one sample. Any of the three arrays may be absent.
    pub fn append(
        &mut self,
        fields: Option<&FieldEnsemble>,
        params: Option<&ParamFields>,
        mask: Option<&[u8]>,
        attrs: &SampleAttrs,
    ) -> Result<usize> {
        let k = self.written;
        let group = self.file.create_group(&sample_path(k))?;
        if let Some(f) = fields {
            write_array(
                &group,
                "fields",
                &[f.replicates(), f.height(), f.width()],
                &to_f32(f.as_slice()),
            )?;
        }
        if let Some(p) = params {
            let (h, w) = p.shape();
            write_array(&group, "params", &[3, h, w], &to_f32(&p.to_channels()))?;
        }
        if let Some(m) = mask {
            let (h, w) = match (params, fields) {
                (Some(p), _) => p.shape(),
                (None, Some(f)) => (f.height(), f.width()),
                (None, None) => {
                    return Err(Error::Dimension(
                        "mask needs fields or params for its shape".into(),
                    ))
                }
            };
            if m.len() != h * w {
                return Err(Error::Dimension(format!(
                    "mask has {} cells, expected {}",
                    m.len(),
                    h * w
                )));
            }
            write_array(&group, "mask", &[h, w], m)?;
        }
        write_attr(&group, "seed", &attrs.seed)?;
        write_str_attr(&group, "split", &attrs.split)?;
        write_str_attr(
            &group,
            "standardization",
            standardization_str(attrs.standardization),
        )?;
        write_str_attr(&group, "provenance", &attrs.provenance)?;
        self.written += 1;
        Ok(k)
    }

    pub fn finish(self) -> Result<usize> {
        write_attr(&self.file, "n_samples", &(self.written as u64))?;
        self.file.flush()?;
        Ok(self.written)
    }
}

pub struct ContainerReader {
    file: File,
    path: String,
    header: Header,
    n_samples: usize,
}

impl ContainerReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        // Failures surface as typed errors; the library's own stderr trace is noise.
        hdf5::silence_errors(true);
        let path_str = path.as_ref().display().to_string();
        if !path.as_ref().exists() {
            return Err(Error::format(&path_str, "file does not exist"));
        }
        let file = File::open(path.as_ref())
            .map_err(|e| Error::format(&path_str, format!("not a readable HDF5 file: {e}")))?;
        let format = read_str_attr(&file, "format", "/")?;
        if format != FORMAT_NAME {
            return Err(Error::format(
                "/@format",
                format!("unexpected format {format:?}"),
            ));
        }
        let version: u32 = read_attr(&file, "format_version", "/")?;
        if version != FORMAT_VERSION {
            return Err(Error::format(
                "/@format_version",
                format!("unsupported version {version}"),
            ));
        }
        let order = read_str_attr(&file, "channel_order", "/")?;
        if order != CHANNEL_ORDER {
            return Err(Error::format(
                "/@channel_order",
                format!("unexpected order {order:?}"),
            ));
        }
        let kind_str = read_str_attr(&file, "kind", "/")?;
        let kind = ContainerKind::parse(&kind_str)
            .ok_or_else(|| Error::format("/@kind", format!("unknown kind {kind_str:?}")))?;
        let header = Header {
            kind,
            tool_version: read_str_attr(&file, "tool_version", "/")?,
            config: read_str_attr(&file, "config", "/")?,
            config_hash: read_str_attr(&file, "config_hash", "/")?,
            seed: read_attr(&file, "seed", "/")?,
        };
        let n_samples = read_attr::<u64>(&file, "n_samples", "/")? as usize;
        let samples = file
            .group("samples")
            .map_err(|_| Error::format("/samples", "missing group"))?;
        let present = samples.len() as usize;
        if present != n_samples {
            return Err(Error::format(
                "/samples",
                format!("header lists {n_samples} samples, found {present}"),
            ));
        }
        Ok(Self {
            file,
            path: path_str,
            header,
            n_samples,
        })
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    fn group(&self, k: usize) -> Result<Group> {
        if k >= self.n_samples {
            return Err(Error::format(
                format!("/{}", sample_path(k)),
                format!("sample index out of range (n_samples = {})", self.n_samples),
            ));
        }
        self.file
            .group(&sample_path(k))
            .map_err(|_| Error::format(format!("/{}", sample_path(k)), "missing group"))
    }

    fn read_array<T: H5Type>(&self, k: usize, name: &str) -> Result<Option<(Vec<usize>, Vec<T>)>> {
        let group = self.group(k)?;
        let at = format!("/{}/{name}", sample_path(k));
        if !group.link_exists(name) {
            return Ok(None);
        }
        let ds = group
            .dataset(name)
            .map_err(|e| Error::format(&at, format!("unreadable dataset: {e}")))?;
        let shape = ds.shape();
        let data = ds
            .read_raw::<T>()
            .map_err(|e| Error::format(&at, format!("unreadable payload: {e}")))?;
        Ok(Some((shape, data)))
    }

    /// Raw float32 payload and shape of `fields` or `params`.
    pub fn raw_f32(&self, k: usize, name: &str) -> Result<Option<(Vec<usize>, Vec<f32>)>> {
        self.read_array::<f32>(k, name)
    }

    pub fn sample_attrs(&self, k: usize) -> Result<SampleAttrs> {
        let group = self.group(k)?;
        let at = format!("/{}", sample_path(k));
        let std_str = read_str_attr(&group, "standardization", &at)?;
        Ok(SampleAttrs {
            seed: read_attr(&group, "seed", &at)?,
            split: read_str_attr(&group, "split", &at)?,
            standardization: parse_standardization(&std_str).ok_or_else(|| {
                Error::format(
                    format!("{at}@standardization"),
                    format!("unknown value {std_str:?}"),
                )
            })?,
            provenance: read_str_attr(&group, "provenance", &at)?,
        })
    }

    pub fn fields(&self, k: usize) -> Result<FieldEnsemble> {
        let at = format!("/{}/fields", sample_path(k));
        let (shape, data) = self
            .read_array::<f32>(k, "fields")?
            .ok_or_else(|| Error::format(&at, "missing dataset"))?;
        if shape.len() != 3 || shape.contains(&0) {
            return Err(Error::format(
                &at,
                format!("expected non-empty [M, H, W], found {shape:?}"),
            ));
        }
        let mut ens = FieldEnsemble::from_vec(
            shape[0],
            shape[1],
            shape[2],
            data.into_iter().map(f64::from).collect(),
        )
        .map_err(|e| Error::format(&at, e.to_string()))?;
        let attrs = self.sample_attrs(k)?;
        ens.seed = attrs.seed;
        ens.standardization = attrs.standardization;
        Ok(ens)
    }

    pub fn params(&self, k: usize) -> Result<ParamFields> {
        let at = format!("/{}/params", sample_path(k));
        let (shape, data) = self
            .read_array::<f32>(k, "params")?
            .ok_or_else(|| Error::format(&at, "missing dataset"))?;
        if shape.len() != 3 || shape[0] != 3 || shape[1] == 0 || shape[2] == 0 {
            return Err(Error::format(
                &at,
                format!("expected [3, H, W], found {shape:?}"),
            ));
        }
        let wide: Vec<f64> = data.into_iter().map(f64::from).collect();
        ParamFields::from_channels(shape[1], shape[2], &wide)
            .map_err(|e| Error::format(&at, e.to_string()))
    }

    pub fn mask(&self, k: usize) -> Result<Option<Vec<u8>>> {
        Ok(self.read_array::<u8>(k, "mask")?.map(|(_, d)| d))
    }
}

/// Writes a single-sample ensemble file.
pub fn write_ensemble(path: impl AsRef<Path>, header: &Header, ens: &FieldEnsemble) -> Result<()> {
    let mut w = ContainerWriter::create(path, header)?;
    w.append(
        Some(ens),
        None,
        None,
        &SampleAttrs {
            seed: ens.seed,
            split: "none".into(),
            standardization: ens.standardization,
            provenance: "{}".into(),
        },
    )?;
    w.finish()?;
    Ok(())
}

/// Writes a single-sample parameter file, optionally with a convergence mask.
pub fn write_params(
    path: impl AsRef<Path>,
    header: &Header,
    params: &ParamFields,
    mask: Option<&[u8]>,
    provenance: &str,
) -> Result<()> {
    let mut w = ContainerWriter::create(path, header)?;
    w.append(
        None,
        Some(params),
        mask,
        &SampleAttrs {
            seed: header.seed,
            split: "none".into(),
            standardization: Standardization::None,
            provenance: provenance.into(),
        },
    )?;
    w.finish()?;
    Ok(())
}
