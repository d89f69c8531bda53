//! Random parameter images built from eight spatial pattern families.
//!
//! A parameter field is produced by choosing a pattern family, drawing its
//! shape hyperparameters and its parameter values from the priors, and
//! optionally blending it with a second independently drawn pattern. The
//! result is brought back into the parameter's support (`theta` is wrapped
//! modulo pi, the others are clamped).
//!
//! Coordinates are normalized so that columns map to `s_x in [-1, 1]` and
//! rows to `s_y in [-1, 1]`.

use std::f64::consts::{FRAC_PI_4, PI};

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::grid::{Field, GridGeometry};
use crate::rng::stream_rng;
use crate::sar::{support, ParamKind};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "kebab-case")]
pub enum PatternKind {
    Constant,
    Coastline,
    Taper,
    Bump,
    Sinwave,
    DoubleBump,
    DoubleCoastline,
    GpBased,
}

impl PatternKind {
    pub const ALL: [PatternKind; 8] = [
        PatternKind::Constant,
        PatternKind::Coastline,
        PatternKind::Taper,
        PatternKind::Bump,
        PatternKind::Sinwave,
        PatternKind::DoubleBump,
        PatternKind::DoubleCoastline,
        PatternKind::GpBased,
    ];
}

/// Which branch of the `kappa2` mixture prior produced a draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorBranch {
    LogUniform,
    Uniform,
    Single,
}

/// Value priors: `kappa2 ~ 0.6 logU(1e-4, 2) + 0.4 U(1e-4, 2)`,
/// `rho ~ U(1, 7)`, `theta ~ U(-pi/2, pi/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamPrior {
    pub kind: ParamKind,
}

impl ParamPrior {
    pub const KAPPA2_LOG_WEIGHT: f64 = 0.6;

    pub fn new(kind: ParamKind) -> Self {
        Self { kind }
    }

    pub fn sample_with_branch<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, PriorBranch) {
        let (lo, hi) = self.kind.support();
        match self.kind {
            ParamKind::Kappa2 => {
                if rng.random::<f64>() < Self::KAPPA2_LOG_WEIGHT {
                    let v = rng.random_range(lo.ln()..hi.ln()).exp();
                    (v.clamp(lo, hi), PriorBranch::LogUniform)
                } else {
                    (rng.random_range(lo..hi), PriorBranch::Uniform)
                }
            }
            _ => (rng.random_range(lo..hi), PriorBranch::Single),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_with_branch(rng).0
    }
}

/// Shape of one sigmoidal coastline boundary `s_y = v(s_x)` with
/// `v(s_x) = alpha s_x + beta sin(2 pi omega s_x) + epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoastlineShape {
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl CoastlineShape {
    pub const EPSILON_HALF_WIDTH: f64 = 0.25;

    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            alpha: rng.random_range(-2.0..2.0),
            beta: rng.random_range(0.1..0.5),
            omega: rng.random_range(0.4..3.0),
            gamma: rng.random_range(3.0..50.0),
            epsilon: rng.random_range(-Self::EPSILON_HALF_WIDTH..Self::EPSILON_HALF_WIDTH),
        }
    }

    pub fn boundary(&self, sx: f64) -> f64 {
        self.alpha * sx + self.beta * (2.0 * PI * self.omega * sx).sin() + self.epsilon
    }

    /// Logistic step in `[0, 1]` across the boundary.
    pub fn step(&self, sx: f64, sy: f64) -> f64 {
        1.0 / (1.0 + (-self.gamma * (sy - self.boundary(sx))).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub amplitude: f64,
    pub width: f64,
    pub x: f64,
    pub y: f64,
}

impl GaussianBump {
    pub fn at(&self, sx: f64, sy: f64) -> f64 {
        let r2 = (sx - self.x).powi(2) + (sy - self.y).powi(2);
        self.amplitude * (-r2 / self.width).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum GpScaling {
    /// Rescale the realization to span `[min, max]`.
    MinMax { min: f64, max: f64 },
    /// `base * (1 + magnitude * (2 g - 1))` with `g` the realization in `[0, 1]`.
    Perturbation { base: f64, magnitude: f64 },
}

/// One pattern family with its hyperparameters and parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Pattern {
    Constant {
        value: f64,
    },
    Coastline {
        low: f64,
        high: f64,
        shape: CoastlineShape,
    },
    Taper {
        low: f64,
        high: f64,
        sigma: f64,
    },
    Bump {
        base: f64,
        bump: GaussianBump,
    },
    Sinwave {
        base: f64,
        amplitude: f64,
        frequency: f64,
        orientation: Orientation,
    },
    DoubleBump {
        base: f64,
        bumps: [GaussianBump; 2],
    },
    DoubleCoastline {
        low: f64,
        high: f64,
        w1: f64,
        w2: f64,
        first: CoastlineShape,
        second: CoastlineShape,
    },
    GpBased {
        n_basis: usize,
        weights_seed: u64,
        scaling: GpScaling,
    },
}

impl Pattern {
    pub fn kind(&self) -> PatternKind {
        match self {
            Pattern::Constant { .. } => PatternKind::Constant,
            Pattern::Coastline { .. } => PatternKind::Coastline,
            Pattern::Taper { .. } => PatternKind::Taper,
            Pattern::Bump { .. } => PatternKind::Bump,
            Pattern::Sinwave { .. } => PatternKind::Sinwave,
            Pattern::DoubleBump { .. } => PatternKind::DoubleBump,
            Pattern::DoubleCoastline { .. } => PatternKind::DoubleCoastline,
            Pattern::GpBased { .. } => PatternKind::GpBased,
        }
    }
}

/// A pattern drawn for a specific parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub param: ParamKind,
    pub pattern: Pattern,
}

impl PatternSpec {
    pub fn kind(&self) -> PatternKind {
        self.pattern.kind()
    }
}

/// Prior on the Bump amplitude, which depends on the parameter.
pub fn bump_amplitude_range(param: ParamKind) -> (f64, f64) {
    match param {
        ParamKind::Kappa2 => (0.1, 0.5),
        ParamKind::Rho => (0.1, 1.5),
        ParamKind::Theta => (0.1, FRAC_PI_4),
    }
}

pub const BUMP_WIDTH: (f64, f64) = (0.2, 0.5);
pub const TAPER_SIGMA: (f64, f64) = (0.05, 1.0);
pub const SINWAVE_FREQUENCY: (f64, f64) = (1.5, 5.0);
pub const STACK_WEIGHT: (f64, f64) = (0.1, 0.9);
pub const GP_BASIS: (usize, usize) = (6, 32);
pub const GP_PERTURBATION: (f64, f64) = (0.05, 0.3);

fn ordered_pair<R: Rng + ?Sized>(prior: &ParamPrior, rng: &mut R) -> (f64, f64) {
    let a = prior.sample(rng);
    let b = prior.sample(rng);
    (a.min(b), a.max(b))
}

fn sample_bump<R: Rng + ?Sized>(param: ParamKind, centered: bool, rng: &mut R) -> GaussianBump {
    let (alo, ahi) = bump_amplitude_range(param);
    let amplitude = rng.random_range(alo..ahi);
    let width = rng.random_range(BUMP_WIDTH.0..BUMP_WIDTH.1);
    let (x, y) = if centered {
        (0.0, 0.0)
    } else {
        (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
    };
    GaussianBump {
        amplitude,
        width,
        x,
        y,
    }
}

/// Draws hyperparameters and parameter values for `kind`.
///
/// Families written around a single level (`Constant`, `Bump`, `Sinwave`,
/// `DoubleBump`, perturbation-scaled `GpBased`) draw one value from the
/// prior; families spanning two levels draw two and order them.
pub fn sample_pattern_spec<R: Rng + ?Sized>(
    kind: PatternKind,
    param: ParamKind,
    rng: &mut R,
) -> PatternSpec {
    let prior = ParamPrior::new(param);
    let pattern = match kind {
        PatternKind::Constant => Pattern::Constant {
            value: prior.sample(rng),
        },
        PatternKind::Coastline => {
            let (low, high) = ordered_pair(&prior, rng);
            Pattern::Coastline {
                low,
                high,
                shape: CoastlineShape::sample(rng),
            }
        }
        PatternKind::Taper => {
            let (low, high) = ordered_pair(&prior, rng);
            Pattern::Taper {
                low,
                high,
                sigma: rng.random_range(TAPER_SIGMA.0..TAPER_SIGMA.1),
            }
        }
        PatternKind::Bump => Pattern::Bump {
            base: prior.sample(rng),
            bump: sample_bump(param, true, rng),
        },
        PatternKind::Sinwave => {
            let base = prior.sample(rng);
            let (lo, hi) = param.support();
            let room = (base - lo).min(hi - base).max(0.0);
            let amplitude = if room > 0.0 {
                rng.random_range(0.0..room)
            } else {
                0.0
            };
            let frequency = rng.random_range(SINWAVE_FREQUENCY.0..SINWAVE_FREQUENCY.1);
            let orientation = if rng.random::<bool>() {
                Orientation::Horizontal
            } else {
                Orientation::Vertical
            };
            Pattern::Sinwave {
                base,
                amplitude,
                frequency,
                orientation,
            }
        }
        PatternKind::DoubleBump => Pattern::DoubleBump {
            base: prior.sample(rng),
            bumps: [
                sample_bump(param, false, rng),
                sample_bump(param, false, rng),
            ],
        },
        PatternKind::DoubleCoastline => {
            let (low, high) = ordered_pair(&prior, rng);
            let w1 = rng.random_range(0.1..0.9);
            let w2 = rng.random_range(0.1..(1.0 - w1));
            Pattern::DoubleCoastline {
                low,
                high,
                w1,
                w2,
                first: CoastlineShape::sample(rng),
                second: CoastlineShape::sample(rng),
            }
        }
        PatternKind::GpBased => {
            let n_basis = rng.random_range(GP_BASIS.0..=GP_BASIS.1);
            let weights_seed = rng.random::<u64>();
            let scaling = if rng.random::<bool>() {
                let (min, max) = param.support();
                GpScaling::MinMax { min, max }
            } else {
                GpScaling::Perturbation {
                    base: prior.sample(rng),
                    magnitude: rng.random_range(GP_PERTURBATION.0..GP_PERTURBATION.1),
                }
            };
            Pattern::GpBased {
                n_basis,
                weights_seed,
                scaling,
            }
        }
    };
    PatternSpec { param, pattern }
}

fn std_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Low-rank Gaussian-process realization rescaled to `[0, 1]`.
///
/// Gaussian radial basis functions sit on an `n_basis x n_basis` lattice
/// over the unit square with bandwidth equal to the lattice spacing, and
/// carry i.i.d. standard normal weights from stream 0 of `weights_seed`.
pub fn gp_realization(n_basis: usize, weights_seed: u64, geometry: &GridGeometry) -> Field {
    let nb = n_basis.max(2);
    let spacing = 2.0 / (nb - 1) as f64;
    let centers: Vec<f64> = (0..nb).map(|k| -1.0 + spacing * k as f64).collect();
    let mut rng = stream_rng(weights_seed, 0);
    let weights: Vec<f64> = (0..nb * nb)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let denom = 2.0 * spacing * spacing;
    let (h, w) = (geometry.height, geometry.width);
    let basis_x: Vec<Vec<f64>> = (0..w)
        .map(|j| {
            let (sx, _) = geometry.coords(0, j);
            centers
                .iter()
                .map(|c| (-(sx - c).powi(2) / denom).exp())
                .collect()
        })
        .collect();
    let basis_y: Vec<Vec<f64>> = (0..h)
        .map(|i| {
            let (_, sy) = geometry.coords(i, 0);
            centers
                .iter()
                .map(|c| (-(sy - c).powi(2) / denom).exp())
                .collect()
        })
        .collect();
    // weights are indexed [row center b][column center a]
    let mut field = Field::from_fn(h, w, |i, j| {
        let mut acc = 0.0;
        for (b, ey) in basis_y[i].iter().enumerate() {
            let row = &weights[b * nb..(b + 1) * nb];
            let inner: f64 = row.iter().zip(&basis_x[j]).map(|(wt, ex)| wt * ex).sum();
            acc += ey * inner;
        }
        acc
    });
    let (lo, hi) = (field.min(), field.max());
    let span = hi - lo;
    for v in field.as_mut_slice() {
        *v = if span > 0.0 { (*v - lo) / span } else { 0.5 };
    }
    field
}

/// Evaluates a pattern on the grid, before any support clamping.
pub fn evaluate_pattern(spec: &PatternSpec, geometry: &GridGeometry) -> Field {
    let (h, w) = (geometry.height, geometry.width);
    let at = |f: &dyn Fn(f64, f64) -> f64| {
        Field::from_fn(h, w, |i, j| {
            let (sx, sy) = geometry.coords(i, j);
            f(sx, sy)
        })
    };
    match &spec.pattern {
        Pattern::Constant { value } => Field::filled(h, w, *value),
        Pattern::Coastline { low, high, shape } => {
            at(&|sx, sy| low + (high - low) * shape.step(sx, sy))
        }
        Pattern::Taper { low, high, sigma } => at(&|sx, sy| {
            let psi = std_normal_cdf((sx + sy) / sigma);
            low * psi + high * (1.0 - psi)
        }),
        Pattern::Bump { base, bump } => at(&|sx, sy| base + bump.at(sx, sy)),
        Pattern::Sinwave {
            base,
            amplitude,
            frequency,
            orientation,
        } => at(&|sx, sy| match orientation {
            Orientation::Horizontal => base + amplitude * (PI * frequency * sx).sin(),
            Orientation::Vertical => base + amplitude * (PI * frequency * sy).cos(),
        }),
        Pattern::DoubleBump { base, bumps } => {
            at(&|sx, sy| base + bumps[0].at(sx, sy) + bumps[1].at(sx, sy))
        }
        Pattern::DoubleCoastline {
            low,
            high,
            w1,
            w2,
            first,
            second,
        } => {
            at(&|sx, sy| low + (high - low) * (w1 * first.step(sx, sy) + w2 * second.step(sx, sy)))
        }
        Pattern::GpBased {
            n_basis,
            weights_seed,
            scaling,
        } => {
            let g = gp_realization(*n_basis, *weights_seed, geometry);
            match *scaling {
                GpScaling::MinMax { min, max } => g.map(|v| min + (max - min) * v),
                GpScaling::Perturbation { base, magnitude } => {
                    g.map(|v| base * (1.0 + magnitude * (2.0 * v - 1.0)))
                }
            }
        }
    }
}

/// Pointwise `w p1 + (1 - w) p2`.
pub fn stack_patterns(p1: &Field, p2: &Field, w: f64) -> Result<Field> {
    p2.check_shape(p1.height(), p1.width(), "stacked pattern")?;
    if !(w > STACK_WEIGHT.0 && w < STACK_WEIGHT.1) {
        return Err(Error::InvalidParameter(format!(
            "stacking weight must lie in (0.1, 0.9), got {w}"
        )));
    }
    let data = p1
        .as_slice()
        .iter()
        .zip(p2.as_slice())
        .map(|(a, b)| w * a + (1.0 - w) * b)
        .collect();
    Field::from_vec(p1.height(), p1.width(), data)
}

/// Brings a field into the parameter's support; returns how many cells moved.
pub fn enforce_support(param: ParamKind, field: &mut Field) -> usize {
    let mut moved = 0;
    let (lo, hi) = param.support();
    for v in field.as_mut_slice() {
        let new = match param {
            ParamKind::Theta => support::wrap_theta(*v),
            _ => v.clamp(lo, hi),
        };
        if new != *v {
            moved += 1;
            *v = new;
        }
    }
    moved
}

/// Pattern-family frequencies and stacking probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PatternConfig {
    /// Relative weight per family; missing families get weight 0 when the
    /// map is non-empty, and all families are equally likely when it is empty.
    pub frequencies: std::collections::BTreeMap<PatternKind, f64>,
    pub stacking_probability: f64,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            frequencies: Default::default(),
            stacking_probability: 0.5,
        }
    }
}

impl PatternConfig {
    pub fn weights(&self) -> [f64; 8] {
        if self.frequencies.is_empty() {
            return [1.0; 8];
        }
        PatternKind::ALL.map(|k| self.frequencies.get(&k).copied().unwrap_or(0.0))
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.stacking_probability) {
            return Err(Error::Config(format!(
                "stacking_probability must be in [0, 1], got {}",
                self.stacking_probability
            )));
        }
        let w = self.weights();
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config(
                "pattern frequencies must be non-negative with a positive total".into(),
            ));
        }
        Ok(())
    }
}

/// Everything needed to rebuild a parameter field exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRecipe {
    pub primary: PatternSpec,
    pub stacked: Option<StackedPattern>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedPattern {
    pub pattern: PatternSpec,
    pub weight: f64,
}

impl FieldRecipe {
    pub fn param(&self) -> ParamKind {
        self.primary.param
    }

    /// Evaluates, stacks and clamps. Returns the field and the number of
    /// cells moved by clamping.
    pub fn realize(&self, geometry: &GridGeometry) -> Result<(Field, usize)> {
        let mut field = evaluate_pattern(&self.primary, geometry);
        if let Some(s) = &self.stacked {
            field = stack_patterns(&field, &evaluate_pattern(&s.pattern, geometry), s.weight)?;
        }
        let moved = enforce_support(self.param(), &mut field);
        Ok((field, moved))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub field: Field,
    pub recipe: FieldRecipe,
    pub clamped: usize,
}

/// Draws one parameter field: family by configured frequency, optional
/// stacking, then support enforcement.
pub fn sample_param_field<R: Rng + ?Sized>(
    param: ParamKind,
    config: &PatternConfig,
    geometry: &GridGeometry,
    rng: &mut R,
) -> Result<SampledField> {
    config.validate()?;
    let chooser = WeightedIndex::new(config.weights())
        .map_err(|e| Error::Config(format!("pattern frequencies: {e}")))?;
    let primary = sample_pattern_spec(PatternKind::ALL[chooser.sample(rng)], param, rng);
    let stacked = if rng.random::<f64>() < config.stacking_probability {
        let pattern = sample_pattern_spec(PatternKind::ALL[chooser.sample(rng)], param, rng);
        let weight = loop {
            let w = rng.random_range(STACK_WEIGHT.0..STACK_WEIGHT.1);
            if w > STACK_WEIGHT.0 {
                break w;
            }
        };
        Some(StackedPattern { pattern, weight })
    } else {
        None
    };
    let recipe = FieldRecipe { primary, stacked };
    let (field, clamped) = recipe.realize(geometry)?;
    Ok(SampledField {
        field,
        recipe,
        clamped,
    })
}
