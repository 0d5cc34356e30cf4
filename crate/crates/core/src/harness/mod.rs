//! Named experiments: parameter validation, deterministic seeding and report emission.

mod bands;
mod ergodic;
mod structure;
mod tiles;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fit::{power_fit, PowerFit};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown experiment `{0}` (run `rtlab list` for the registry)")]
    Unknown(String),
    #[error("invalid config for {experiment}: {message}")]
    Config { experiment: String, message: String },
    #[error("{experiment} failed: {message}")]
    Run { experiment: String, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Informative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub measured: f64,
    pub threshold: Option<f64>,
    pub detail: String,
}

/// One measurement row of `cells.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub group: String,
    pub label: String,
    pub x: Option<f64>,
    pub seed: Option<u64>,
    pub measured: f64,
    pub reference: Option<f64>,
}

impl Cell {
    pub fn new(group: &str, label: impl Into<String>, measured: f64) -> Self {
        Cell {
            group: group.to_string(),
            label: label.into(),
            x: None,
            seed: None,
            measured,
            reference: None,
        }
    }

    pub fn at(mut self, x: f64) -> Self {
        self.x = Some(x);
        self
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn against(mut self, reference: f64) -> Self {
        self.reference = Some(reference);
        self
    }
}

/// Least-squares log-log fit over the cells of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub group: String,
    pub variable: String,
    pub exponent: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub max_abs_residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpCitation {
    pub op: String,
    pub anchor: String,
}

/// A CSV table written to `plotdata/<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "empty_object")]
    pub params: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl ExperimentSpec {
    pub fn new(experiment: &str, seed: u64, params: Value) -> Self {
        ExperimentSpec {
            experiment: experiment.to_string(),
            seed,
            params,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
    /// Kernel override for experiments that take a `kernel` parameter.
    pub kernel: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// The spec with every parameter filled in.
    pub spec: ExperimentSpec,
    pub tool_version: String,
    pub operations: Vec<OpCitation>,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    pub fits: Vec<FitRecord>,
    pub cells: Vec<Cell>,
    pub wall_clock_s: f64,
    #[serde(skip)]
    pub plots: Vec<PlotData>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn fit(&self, group: &str) -> Option<&FitRecord> {
        self.fits.iter().find(|f| f.group == group)
    }

    /// `cells.csv`: one row per cell, with the group's fit repeated on each row.
    pub fn cells_csv(&self) -> Result<Vec<u8>> {
        let fits: BTreeMap<&str, &FitRecord> = self.fits.iter().map(|f| (f.group.as_str(), f)).collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "index",
            "group",
            "label",
            "x",
            "seed",
            "measured",
            "reference",
            "fit_exponent",
            "stderr",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (i, c) in self.cells.iter().enumerate() {
            let fit = fits.get(c.group.as_str());
            w.write_record([
                i.to_string(),
                c.group.clone(),
                c.label.clone(),
                opt(c.x),
                c.seed.map(|s| s.to_string()).unwrap_or_default(),
                c.measured.to_string(),
                opt(c.reference),
                opt(fit.map(|f| f.exponent)),
                opt(fit.map(|f| f.stderr)),
            ])?;
        }
        w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))
    }

    pub fn plot_csv(plot: &PlotData) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&plot.header)?;
        for row in &plot.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))
    }

    /// Writes `report.json`, `cells.csv` and `plotdata/*.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), serde_json::to_vec_pretty(self)?)?;
        fs::write(dir.join("cells.csv"), self.cells_csv()?)?;
        if !self.plots.is_empty() {
            let pd = dir.join("plotdata");
            fs::create_dir_all(&pd)?;
            for p in &self.plots {
                fs::write(pd.join(format!("{}.csv", p.name)), Self::plot_csv(p)?)?;
            }
        }
        Ok(())
    }
}

/// Per-experiment parameters: unknown keys are rejected and missing keys take defaults.
pub(crate) trait Params: Serialize + DeserializeOwned + Default {
    fn check(&self) -> std::result::Result<(), String> {
        Ok(())
    }
}

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Measurements accumulated by a running experiment.
pub struct Ctx {
    experiment: &'static str,
    stream: [u8; 32],
    cells: Vec<Cell>,
    fits: Vec<FitRecord>,
    checks: Vec<Check>,
    plots: Vec<PlotData>,
}

/// `SHA-256("rtlab" ‖ seed_le ‖ name)`: the root of every random stream of an experiment.
pub fn stream_seed(seed: u64, experiment: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"rtlab");
    h.update(seed.to_le_bytes());
    h.update(experiment.as_bytes());
    h.finalize().into()
}

impl Ctx {
    fn new(experiment: &'static str, seed: u64) -> Self {
        Ctx {
            experiment,
            stream: stream_seed(seed, experiment),
            cells: Vec::new(),
            fits: Vec::new(),
            checks: Vec::new(),
            plots: Vec::new(),
        }
    }

    fn derive(&self, label: &str) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.stream);
        h.update(label.as_bytes());
        h.finalize().into()
    }

    /// Independent generator for a labelled sub-task; labels make parallel cells
    /// reproducible regardless of scheduling.
    pub fn rng(&self, label: &str) -> ChaCha20Rng {
        ChaCha20Rng::from_seed(self.derive(label))
    }

    pub fn seed(&self, label: &str) -> u64 {
        let d = self.derive(label);
        u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
    }

    pub fn cell(&mut self, cell: Cell) {
        self.cells.push(cell);
    }

    pub fn cells(&mut self, cells: impl IntoIterator<Item = Cell>) {
        self.cells.extend(cells);
    }

    /// A tolerance check; `pass` decides between `pass` and `fail`.
    pub fn check(&mut self, name: &str, pass: bool, measured: f64, threshold: Option<f64>, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            measured,
            threshold,
            detail: detail.into(),
        });
    }

    /// A lower-bound measurement recorded without a verdict.
    pub fn inform(&mut self, name: &str, measured: f64, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            verdict: Verdict::Informative,
            measured,
            threshold: None,
            detail: detail.into(),
        });
    }

    /// Fits `measured ≈ c·x^e` over the cells of `group`.
    pub fn fit(&mut self, group: &str, variable: &str) -> Result<PowerFit> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .cells
            .iter()
            .filter(|c| c.group == group)
            .filter_map(|c| c.x.map(|x| (x, c.measured)))
            .unzip();
        let fit = power_fit(&xs, &ys).map_err(|e| self.fail(format!("fit of {group}: {e}")))?;
        self.fits.push(FitRecord {
            group: group.to_string(),
            variable: variable.to_string(),
            exponent: fit.exponent,
            intercept: fit.intercept,
            stderr: fit.stderr,
            max_abs_residual: fit.max_abs_residual(),
            points: fit.points,
        });
        Ok(fit)
    }

    pub fn plot(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) {
        self.plots.push(PlotData {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows,
        });
    }

    pub fn fail(&self, message: impl std::fmt::Display) -> HarnessError {
        HarnessError::Run {
            experiment: self.experiment.to_string(),
            message: message.to_string(),
        }
    }
}

/// Registers a CSV table produced by a module writer as plot data.
pub(crate) fn plot_from_csv(ctx: &mut Ctx, name: &str, bytes: &[u8]) -> Result<()> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    ctx.plots.push(PlotData {
        name: name.to_string(),
        header,
        rows,
    });
    Ok(())
}

type Validator =fn(&Value) -> std::result::Result<Value, String>;
type Runner = fn(&Value, &mut Ctx) -> Result<()>;

struct Def {
    name: &'static str,
    summary: &'static str,
    takes_kernel: bool,
    validate: Validator,
    run: Runner,
}

fn normalize<P: Params>(v: &Value) -> std::result::Result<Value, String> {
    let p: P = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
    p.check()?;
    serde_json::to_value(&p).map_err(|e| e.to_string())
}

pub(crate) fn parse<P: Params>(v: &Value, ctx: &Ctx) -> Result<P> {
    serde_json::from_value(v.clone()).map_err(|e| ctx.fail(e))
}

fn registry() -> Vec<Def> {
    macro_rules! def {
        ($name:expr, $summary:expr, $kernel:expr, $module:ident :: $p:ident, $run:path) => {
            Def {
                name: $name,
                summary: $summary,
                takes_kernel: $kernel,
                validate: normalize::<$module::$p>,
                run: $run,
            }
        };
    }
    vec![
        def!("verify-grid", "nestedness and disjointness of the grids G_{N,j,L}", false, structure::GridParams, structure::verify_grid),
        def!("verify-norms", "variation, oscillation and entropy inequalities on random short sequences", false, structure::NormParams, structure::verify_norms),
        def!("verify-kernels", "kernel admissibility and the discrete transfer kernel identities", true, structure::KernelParams, structure::verify_kernels),
        def!("birkhoff", "Birkhoff averages and orbit equidistribution", false, ergodic::BirkhoffParams, ergodic::birkhoff),
        def!("wiener-wintner", "Wiener-Wintner averages: resonance and geometric-sum bounds", false, ergodic::WwParams, ergodic::wiener_wintner),
        def!("cotlar", "Cotlar's ergodic Hilbert series along lacunary N", false, ergodic::CotlarParams, ergodic::cotlar),
        def!("return-times", "return-times Hilbert series and maximal return-times norms", false, ergodic::ReturnParams, ergodic::return_times),
        def!("bourgain-L", "growth in L of the maximal band operator", false, bands::BourgainLParams, bands::bourgain_l),
        def!("bourgain-J", "growth in J of the band oscillation operator", false, bands::BourgainJParams, bands::bourgain_j),
        def!("tree-select", "greedy forest selection by size", false, tiles::TreeParams, tiles::tree_select),
        def!("wavepacket", "window partition of unity and single-scale reconstruction", false, tiles::WaveParams, tiles::wavepacket),
        def!("model-op", "maximal model operator under grid refinement", false, bands::ModelParams, bands::model_op),
        def!("sign-lower-bound", "random sign patterns on unit bands", false, bands::SignParams, bands::sign_lower_bound),
        def!("transfer-constants", "best transfer constants C(φ)(a) and their l^p aggregate", false, ergodic::TransferParams, ergodic::transfer_constants),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentInfo {
    pub name: String,
    pub summary: String,
    pub takes_kernel: bool,
    pub defaults: Value,
    pub operations: Vec<OpCitation>,
}

fn citations(name: &str) -> Vec<OpCitation> {
    let all: BTreeMap<String, Vec<(String, String)>> =
        serde_json::from_str(include_str!("anchors.json")).expect("anchors.json is valid");
    all.get(name)
        .map(|v| {
            v.iter()
                .map(|(op, anchor)| OpCitation {
                    op: op.clone(),
                    anchor: anchor.clone(),
                })
                .collect()
        })
        .unwrap_or_default()
}

/// Registry dump with each experiment's default parameters.
pub fn list() -> Vec<ExperimentInfo> {
    registry()
        .into_iter()
        .map(|d| ExperimentInfo {
            name: d.name.to_string(),
            summary: d.summary.to_string(),
            takes_kernel: d.takes_kernel,
            defaults: (d.validate)(&empty_object()).expect("defaults are valid"),
            operations: citations(d.name),
        })
        .collect()
}

fn lookup(name: &str) -> Result<Def> {
    registry()
        .into_iter()
        .find(|d| d.name == name)
        .ok_or_else(|| HarnessError::Unknown(name.to_string()))
}

fn with_kernel(def: &Def, params: &Value, kernel: Option<&str>) -> Result<Value> {
    let Some(k) = kernel else {
        return Ok(params.clone());
    };
    if !def.takes_kernel {
        return Err(HarnessError::Config {
            experiment: def.name.to_string(),
            message: "this experiment takes no kernel".into(),
        });
    }
    let mut p = params.clone();
    match p.as_object_mut() {
        Some(map) => {
            map.insert("kernel".into(), Value::String(k.to_string()));
            Ok(p)
        }
        None => Err(HarnessError::Config {
            experiment: def.name.to_string(),
            message: "params must be a JSON object".into(),
        }),
    }
}

/// Checks the spec against the experiment's schema and returns the completed parameters.
pub fn validate(spec: &ExperimentSpec) -> Result<Value> {
    let def = lookup(&spec.experiment)?;
    (def.validate)(&spec.params).map_err(|message| HarnessError::Config {
        experiment: def.name.to_string(),
        message,
    })
}

pub fn run(spec: &ExperimentSpec, opts: &RunOptions) -> Result<ExperimentReport> {
    let def = lookup(&spec.experiment)?;
    let params = with_kernel(&def, &spec.params, opts.kernel.as_deref())?;
    let spec = ExperimentSpec {
        params: validate(&ExperimentSpec {
            params,
            ..spec.clone()
        })?,
        ..spec.clone()
    };
    let body = || -> Result<ExperimentReport> {
        let start = Instant::now();
        let mut ctx = Ctx::new(def.name, spec.seed);
        (def.run)(&spec.params, &mut ctx)?;
        let verdict = if ctx.checks.iter().any(|c| c.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if ctx.checks.iter().any(|c| c.verdict == Verdict::Pass) {
            Verdict::Pass
        } else {
            Verdict::Informative
        };
        Ok(ExperimentReport {
            spec: spec.clone(),
            tool_version: TOOL_VERSION.to_string(),
            operations: citations(def.name),
            verdict,
            checks: ctx.checks,
            fits: ctx.fits,
            cells: ctx.cells,
            wall_clock_s: start.elapsed().as_secs_f64(),
            plots: ctx.plots,
        })
    };
    match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Config {
                experiment: def.name.to_string(),
                message: format!("thread pool: {e}"),
            })?
            .install(body),
        None => body(),
    }
}
