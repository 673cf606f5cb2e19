//! JSON run configuration.
//!
//! A config file holds one [`RunConfig`] object or an array of them (a sweep).
//! Relative paths inside a config are resolved against the config file's
//! directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use idewave_core::{
    DensityField, Fecundity, FecundityTable, Grid, KernelSpec, ModelParams, OperatorContext,
    VerifyOptions, WaveOptions,
};

use crate::io::read_columns;
use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub fecundity: FecunditySection,
    pub kernel_adult: KernelSection,
    /// Defaults to `kernel_adult`.
    #[serde(default)]
    pub kernel_juvenile: Option<KernelSection>,
    pub grid: GridSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub s: f64,
    pub r: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "p_A")]
    pub p_a: f64,
    #[serde(rename = "p_J")]
    pub p_j: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FecunditySection {
    #[default]
    BevertonHolt,
    /// CSV with columns `u,F`.
    Tabulated { path: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSection {
    Gaussian {
        sigma: f64,
    },
    Laplace {
        b: f64,
    },
    /// CSV with columns `x,K` on a grid symmetric about 0.
    Tabulated {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

/// A wave speed: a number, `"cstar"`, or a multiple such as `"1.5cstar"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SpeedSpec {
    Value(f64),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Speed {
    Value(f64),
    MultipleOfCStar(f64),
}

impl SpeedSpec {
    pub fn parse(&self) -> Result<Speed, String> {
        match self {
            SpeedSpec::Value(v) => Ok(Speed::Value(*v)),
            SpeedSpec::Text(t) => parse_speed(t),
        }
    }
}

pub fn parse_speed(text: &str) -> Result<Speed, String> {
    let t = text.trim();
    if let Some(head) = t.strip_suffix("cstar") {
        let head = head.trim().trim_end_matches('*').trim();
        if head.is_empty() {
            return Ok(Speed::MultipleOfCStar(1.0));
        }
        return head
            .parse()
            .map(Speed::MultipleOfCStar)
            .map_err(|_| format!("cannot parse speed {text:?}"));
    }
    t.parse().map(Speed::Value).map_err(|_| {
        format!("speed must be a number, \"cstar\" or a multiple like \"1.5cstar\", got {text:?}")
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSection {
    /// `level` (default `M`) left of `at`, zero right of it.
    Step {
        #[serde(default)]
        at: f64,
        #[serde(default)]
        level: Option<f64>,
    },
    Constant {
        value: f64,
    },
    /// CSV with columns `x,u`, linearly interpolated onto the grid.
    File {
        path: PathBuf,
    },
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection::Step {
            at: 0.0,
            level: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveSection {
    pub tol: f64,
    pub max_iter: usize,
    pub a_tol: f64,
    pub a_max_iter: usize,
    pub edge_tol: f64,
    pub edge_margin: f64,
    pub half_height: Option<f64>,
    pub ramp_width: Option<f64>,
    pub align_grid: bool,
}

impl Default for WaveSection {
    fn default() -> Self {
        let d = WaveOptions::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            a_tol: d.a_tol,
            a_max_iter: d.a_max_iter,
            edge_tol: d.edge_tol,
            edge_margin: d.edge_margin,
            half_height: d.half_height,
            ramp_width: d.ramp_width,
            align_grid: d.align_grid,
        }
    }
}

impl WaveSection {
    pub fn options(&self) -> WaveOptions {
        WaveOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            a_tol: self.a_tol,
            a_max_iter: self.a_max_iter,
            edge_tol: self.edge_tol,
            edge_margin: self.edge_margin,
            half_height: self.half_height,
            ramp_width: self.ramp_width,
            align_grid: self.align_grid,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub edge_margin: f64,
    pub residual_tol: f64,
    pub monotonicity_tol: f64,
    pub boundary_tol: f64,
    pub drift_tol: f64,
    pub n_gen: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        let d = VerifyOptions::default();
        Self {
            edge_margin: d.edge_margin,
            residual_tol: d.residual_tol,
            monotonicity_tol: d.monotonicity_tol,
            boundary_tol: d.boundary_tol,
            drift_tol: d.drift_tol,
            n_gen: d.n_gen,
        }
    }
}

impl VerifySection {
    pub fn options(&self) -> VerifyOptions {
        VerifyOptions {
            edge_margin: self.edge_margin,
            residual_tol: self.residual_tol,
            monotonicity_tol: self.monotonicity_tol,
            boundary_tol: self.boundary_tol,
            drift_tol: self.drift_tol,
            n_gen: self.n_gen,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub speed: Option<PathBuf>,
    pub scan: Option<PathBuf>,
    pub wave: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub trajectory: Option<PathBuf>,
    pub front: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub mu_max: f64,
    pub speed_tol: f64,
    pub fecundity_check_points: usize,
    pub c: Option<SpeedSpec>,
    pub wave: WaveSection,
    pub verify: VerifySection,
    pub n_gen: usize,
    /// Front tracking level; `M/2` when unset.
    pub level: Option<f64>,
    /// Inclusive generation range; the second half of the run when unset.
    pub fit_window: Option<(usize, usize)>,
    pub initial: InitialSection,
    pub outputs: OutputSection,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            mu_max: idewave_core::analysis::DEFAULT_MU_MAX,
            speed_tol: idewave_core::analysis::DEFAULT_SPEED_TOL,
            fecundity_check_points: 101,
            c: None,
            wave: WaveSection::default(),
            verify: VerifySection::default(),
            n_gen: 60,
            level: None,
            fit_window: None,
            initial: InitialSection::default(),
            outputs: OutputSection::default(),
        }
    }
}

/// One parsed config entry with its paths made absolute.
#[derive(Debug, Clone)]
pub struct Entry {
    pub config: RunConfig,
    /// Position in a sweep, `None` for a single config.
    pub index: Option<usize>,
}

/// A config file: its entries and the SHA-256 of its bytes.
#[derive(Debug, Clone)]
pub struct ConfigFile {
    pub entries: Vec<Entry>,
    pub sha256: String,
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Reads, parses and checks a config file. Every error here is a usage
/// error.
pub fn load(path: &Path) -> Result<ConfigFile, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::Config(format!("{}: not UTF-8: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let parse_err = |e: serde_path_to_error::Error<serde_json::Error>| {
        let field = e.path().to_string();
        CliError::Config(format!(
            "{}: field `{field}`: {}",
            path.display(),
            e.inner()
        ))
    };
    let mut de = serde_json::Deserializer::from_str(text);
    let entries = if text.trim_start().starts_with('[') {
        let list: Vec<RunConfig> = serde_path_to_error::deserialize(&mut de).map_err(parse_err)?;
        if list.is_empty() {
            return Err(CliError::Config(format!(
                "{}: empty config list",
                path.display()
            )));
        }
        list.into_iter()
            .enumerate()
            .map(|(i, config)| Entry {
                config,
                index: Some(i),
            })
            .collect()
    } else {
        let config: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(parse_err)?;
        vec![Entry {
            config,
            index: None,
        }]
    };
    de.end()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;

    let mut entries = entries;
    for entry in &mut entries {
        resolve_paths(&mut entry.config, &base);
        check_entry(entry).map_err(|msg| {
            let at = entry.index.map(|i| format!("[{i}]")).unwrap_or_default();
            CliError::Config(format!("{}{at}: {msg}", path.display()))
        })?;
    }
    Ok(ConfigFile {
        entries,
        sha256: hex_sha256(&bytes),
    })
}

fn resolve(p: &mut PathBuf, base: &Path) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn resolve_paths(c: &mut RunConfig, base: &Path) {
    if let FecunditySection::Tabulated { path } = &mut c.fecundity {
        resolve(path, base);
    }
    for k in std::iter::once(&mut c.kernel_adult).chain(c.kernel_juvenile.as_mut()) {
        if let KernelSection::Tabulated { path } = k {
            resolve(path, base);
        }
    }
    if let InitialSection::File { path } = &mut c.run.initial {
        resolve(path, base);
    }
    let o = &mut c.run.outputs;
    for p in [
        &mut o.speed,
        &mut o.scan,
        &mut o.wave,
        &mut o.report,
        &mut o.trajectory,
        &mut o.front,
    ]
    .into_iter()
    .flatten()
    {
        resolve(p, base);
    }
}

fn check_entry(e: &Entry) -> Result<(), String> {
    let c = &e.config;
    let mut files = Vec::new();
    if let FecunditySection::Tabulated { path } = &c.fecundity {
        files.push(("fecundity table", path));
    }
    for k in std::iter::once(&c.kernel_adult).chain(c.kernel_juvenile.as_ref()) {
        if let KernelSection::Tabulated { path } = k {
            files.push(("kernel table", path));
        }
    }
    if let InitialSection::File { path } = &c.run.initial {
        files.push(("initial condition", path));
    }
    for (what, path) in files {
        if !path.is_file() {
            return Err(format!("{what} file {} does not exist", path.display()));
        }
    }
    grid(c).map_err(|e| format!("grid: {e}"))?;
    if let Some(spec) = &c.run.c {
        spec.parse()?;
    }
    if let Some((lo, hi)) = c.run.fit_window {
        if lo < 1 || hi < lo + 2 {
            return Err(format!(
                "fit_window [{lo}, {hi}] must start at 1 or later and span at least 3 generations"
            ));
        }
    }
    Ok(())
}

pub fn grid(c: &RunConfig) -> Result<Grid, idewave_core::SpatialError> {
    Grid::from_range(c.grid.x_min, c.grid.x_max, c.grid.n)
}

/// Parameters as written, without validation.
pub fn raw_params(c: &RunConfig) -> ModelParams {
    let m = &c.model;
    ModelParams::unvalidated(m.s, m.r, m.m, m.p_a, m.p_j)
}

pub fn fecundity(c: &RunConfig) -> Result<Fecundity, CliError> {
    match &c.fecundity {
        FecunditySection::BevertonHolt => Ok(Fecundity::BevertonHolt),
        FecunditySection::Tabulated { path } => {
            let (u, f) = read_columns(path, ["u", "F"])?;
            FecundityTable::new(u, f)
                .map(Fecundity::Tabulated)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }
}

fn kernel(k: &KernelSection) -> Result<KernelSpec, CliError> {
    let spec = match k {
        KernelSection::Gaussian { sigma } => KernelSpec::gaussian(*sigma),
        KernelSection::Laplace { b } => KernelSpec::laplace(*b),
        KernelSection::Tabulated { path } => {
            let (x, v) = read_columns(path, ["x", "K"])?;
            return KernelSpec::tabulated(x, v)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())));
        }
    };
    spec.map_err(|e| CliError::Config(e.to_string()))
}

/// Builds the operator context. Invalid parameters are usage errors.
pub fn context(c: &RunConfig) -> Result<OperatorContext, CliError> {
    let params = ModelParams::new(c.model.s, c.model.r, c.model.m, c.model.p_a, c.model.p_j)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let k_a = kernel(&c.kernel_adult)?;
    let k_j = match &c.kernel_juvenile {
        Some(k) => kernel(k)?,
        None => k_a.clone(),
    };
    let g = grid(c).map_err(|e| CliError::Config(e.to_string()))?;
    OperatorContext::new(params, fecundity(c)?, k_a, k_j, g)
        .map_err(|e| CliError::Config(e.to_string()))
}

/// Initial density for `simulate`.
pub fn initial_field(c: &RunConfig, ctx: &OperatorContext) -> Result<DensityField, CliError> {
    let g = ctx.grid();
    let m = ctx.params().carrying_capacity();
    let field = match &c.run.initial {
        InitialSection::Step { at, level } => DensityField::step(g, level.unwrap_or(m), *at),
        InitialSection::Constant { value } => DensityField::constant(g, *value),
        InitialSection::File { path } => {
            let (x, u) = read_columns(path, ["x", "u"])?;
            if x.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(CliError::Config(format!(
                    "{}: x must be strictly increasing",
                    path.display()
                )));
            }
            let last = u.len() - 1;
            let interp = |p: f64| {
                if p <= x[0] {
                    return u[0];
                }
                if p >= x[last] {
                    return u[last];
                }
                let j = x.partition_point(|&v| v <= p) - 1;
                let t = (p - x[j]) / (x[j + 1] - x[j]);
                u[j] + t * (u[j + 1] - u[j])
            };
            DensityField::from_fn(g, interp, u[0], u[last])
        }
    };
    DensityField::new(field.grid, field.values, field.ext_left, field.ext_right)
        .map_err(|e| CliError::Config(format!("initial condition: {e}")))
}
