//! Command-line front end: QI checks, probes, synthesis and the reference
//! examples. Exit codes: 0 pass, 1 witness or failed check, 2 input error.

mod input;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use quadinv_core::feedback::DEFAULT_COND_TOL;
use quadinv_core::fir::fir_subspace_qi_check;
use quadinv_core::probe::{
    convexity_probe, probe_hmap_image, probe_image, reproduce_example, sample_subspace,
    ConvexityOptions, ExampleId, ExampleOptions, ExampleReport, ProbeReport, SamplingScheme,
    Verdict,
};
use quadinv_core::synthesis::{h2_model_match, SynthesisOptions, SynthesisResult};
use quadinv_core::{pattern_qi_check, subspace_qi_check, Error, Pattern, QiReport};
use serde::{Deserialize, Serialize};

pub use input::{InputError, Problem};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "quadinv",
    version,
    about = "Quadratic invariance checks, convexity probes and structured H2 synthesis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test whether the controller subspace is quadratically invariant under G.
    QiCheck(InputArgs),
    /// Sample the subspace, map it through the plant and probe the image for convexity.
    Probe(ProbeArgs),
    /// H2 model matching over the subspace (requires QI).
    Synth(InputArgs),
    /// Rebuild one of the embedded reference examples.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Relative tolerance for subspace membership tests.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// FIR truncation horizon.
    #[arg(long, default_value_t = 32)]
    pub horizon: usize,
    /// Number of controller samples for probing.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Seed for every randomized step.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Problem file: plant blocks plus "basis" or "pattern".
    #[arg(long, short)]
    pub input: PathBuf,
    /// Separate subspace file with "basis" or "pattern".
    #[arg(long)]
    pub subspace: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Image {
    /// Closed-loop maps if P11, P12, P21 are given, else h_G.
    Auto,
    ClosedLoop,
    Hmap,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Gap threshold for witnesses; default max(1% of diameter, 1.1 x coverage radius).
    #[arg(long)]
    pub reject_tol: Option<f64>,
    /// Where to write the sampled cloud as CSV (default: next to --out).
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Image::Auto)]
    pub image: Image,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Which example: a, b or affine.
    #[arg(long, value_parser = parse_example)]
    pub example: ExampleId,
    /// Where to write the sampled cloud as CSV (examples a and b).
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

fn parse_example(s: &str) -> Result<ExampleId, String> {
    s.parse()
}

/// Output of `qi-check`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QiOutput {
    Static(QiReport<quadinv_core::Dense>),
    Fir(QiReport<quadinv_core::FirTransferMatrix>),
}

/// Output of `probe`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ProbeOutput {
    pub seed: u64,
    pub image: String,
    pub samples: usize,
    pub excluded: usize,
    pub cloud_csv: Option<PathBuf>,
    pub report: ProbeReport,
}

/// Output of `synth`: either a result or a refusal.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SynthOutput {
    Solved {
        #[serde(flatten)]
        result: Box<SynthesisResult>,
    },
    NotQuadraticallyInvariant {
        report: Box<QiReport<quadinv_core::FirTransferMatrix>>,
    },
    Failed {
        message: String,
    },
}

enum Failure {
    Input(InputError),
    Other(String),
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Other(e.to_string())
    }
}

type Outcome = Result<i32, Failure>;

/// Runs the parsed command, writing reports to `out` and diagnostics to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::QiCheck(a) => qi_check(&a, out, err),
        Command::Probe(a) => probe(&a, out, err),
        Command::Synth(a) => synth(&a, out),
        Command::Reproduce(a) => reproduce(&a, out, err),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Input(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
        Err(Failure::Other(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INPUT
        }
    }
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Other(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| Failure::Other(e.to_string()))?;
    if let Some(p) = path {
        std::fs::write(p, format!("{text}\n"))
            .map_err(|e| Failure::Other(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

fn qi_check(a: &InputArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let problem = Problem::load(&a.input, a.subspace.as_deref())?;
    let tol = a.common.tol;
    let report = if problem.is_fir() {
        let s = problem.fir_subspace(a.common.horizon)?;
        match fir_subspace_qi_check(&s, &problem.fir_g(), tol) {
            Ok(r) => QiOutput::Fir(r),
            Err(e @ Error::Inertness { .. }) => {
                let _ = writeln!(err, "{e}");
                return Ok(EXIT_FAIL);
            }
            Err(e) => return Err(InputError::new(&a.input, e.to_string()).into()),
        }
    } else if let Some(p) = problem.pattern() {
        let g = problem.static_g()?;
        let support = Pattern::support_of(&g, 0.0);
        // Validates the pattern shape against G.
        problem.static_basis()?;
        let r =
            pattern_qi_check(p, &support).map_err(|e| InputError::new(&a.input, e.to_string()))?;
        QiOutput::Static(r)
    } else {
        let basis = problem.static_basis()?;
        let g = problem.static_g()?;
        QiOutput::Static(
            subspace_qi_check(&basis, &g, tol)
                .map_err(|e| InputError::new(&a.input, e.to_string()))?,
        )
    };
    emit(&report, a.common.out.as_deref(), out)?;
    let qi = match &report {
        QiOutput::Static(r) => r.qi,
        QiOutput::Fir(r) => r.qi,
    };
    Ok(if qi { EXIT_PASS } else { EXIT_FAIL })
}

fn probe(a: &ProbeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let args = &a.input;
    let problem = Problem::load(&args.input, args.subspace.as_deref())?;
    if problem.is_fir() {
        return Err(InputError::new(&args.input, "probe works on static plants only").into());
    }
    let basis = problem.static_basis()?;
    let g = problem.static_g()?;
    let d = basis.dim();
    let ranges = match &problem.file.ranges {
        Some(r) => r.clone(),
        None => vec![(-1.0, 1.0); d],
    };
    let seed = args.common.seed;
    let n = args.common.samples.max(1);
    let scheme = match problem.file.scheme.as_deref().unwrap_or("grid") {
        "grid" => SamplingScheme::Grid {
            ranges,
            points_per_dim: grid_points_per_dim(n, d),
        },
        "random" => SamplingScheme::Random { ranges, count: n },
        other => {
            return Err(InputError::new(
                &args.input,
                format!("unknown scheme {other:?}; expected \"grid\" or \"random\""),
            )
            .into())
        }
    };
    let samples = sample_subspace(&basis, &g, &scheme, seed, DEFAULT_COND_TOL)
        .map_err(|e| InputError::new(&args.input, e.to_string()))?;
    let use_plant = match a.image {
        Image::Auto => problem.has_full_plant(),
        Image::ClosedLoop => true,
        Image::Hmap => false,
    };
    let (cloud, image) = if use_plant {
        (
            probe_image(&problem.static_plant()?, &samples)?,
            "closed_loop",
        )
    } else {
        (probe_hmap_image(&g, &samples)?, "hmap")
    };
    let report = convexity_probe(
        &cloud,
        &ConvexityOptions {
            reject_tol: a.reject_tol,
            seed,
            ..Default::default()
        },
    );
    let cloud_path = a
        .cloud
        .clone()
        .or_else(|| args.common.out.as_ref().map(|p| p.with_extension("csv")));
    if let Some(p) = &cloud_path {
        let f = std::fs::File::create(p)
            .map_err(|e| Failure::Other(format!("cannot write {}: {e}", p.display())))?;
        cloud.write_csv(f)?;
    }
    let _ = writeln!(
        err,
        "seed {seed}: {} samples, {} outside M",
        cloud.len(),
        samples.excluded.len()
    );
    let verdict = report.verdict;
    emit(
        &ProbeOutput {
            seed,
            image: image.into(),
            samples: cloud.len(),
            excluded: samples.excluded.len(),
            cloud_csv: cloud_path,
            report,
        },
        args.common.out.as_deref(),
        out,
    )?;
    Ok(if verdict == Verdict::Pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    })
}

/// Largest odd count with `count^d <= samples`; odd so that symmetric ranges
/// include their midpoint (K = 0 on the default box).
fn grid_points_per_dim(samples: usize, d: usize) -> usize {
    if d == 0 {
        return 1;
    }
    let mut m = (samples as f64).powf(1.0 / d as f64).floor() as usize;
    while m.pow(d as u32) > samples {
        m -= 1;
    }
    if m.is_multiple_of(2) {
        m = m.saturating_sub(1);
    }
    m.max(3)
}

fn synth(a: &InputArgs, out: &mut dyn Write) -> Outcome {
    let problem = Problem::load(&a.input, a.subspace.as_deref())?;
    let h = a.common.horizon;
    let plant = problem.fir_plant()?;
    let s = problem.fir_subspace(h)?;
    let opts = SynthesisOptions {
        qi_tol: a.common.tol,
        ..Default::default()
    };
    let (output, code) = match h2_model_match(&plant, &s, h, &opts) {
        Ok(r) => (
            SynthOutput::Solved {
                result: Box::new(r),
            },
            EXIT_PASS,
        ),
        Err(Error::NotQuadraticallyInvariant(report)) => {
            (SynthOutput::NotQuadraticallyInvariant { report }, EXIT_FAIL)
        }
        Err(e @ (Error::Inertness { .. } | Error::Singular { .. })) => (
            SynthOutput::Failed {
                message: e.to_string(),
            },
            EXIT_FAIL,
        ),
        Err(e) => return Err(InputError::new(&a.input, e.to_string()).into()),
    };
    emit(&output, a.common.out.as_deref(), out)?;
    Ok(code)
}

fn reproduce(a: &ReproduceArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let opts = ExampleOptions {
        seed: a.common.seed,
        match_tol: a.common.tol,
        probe: ConvexityOptions {
            seed: a.common.seed,
            ..Default::default()
        },
        ..Default::default()
    };
    let report: ExampleReport = reproduce_example(a.example, &opts)?;
    let _ = writeln!(err, "example {} (seed {})", a.example, report.seed);
    for c in &report.checks {
        let _ = writeln!(
            err,
            "{} {}: value {:.3e}, threshold {:.3e} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold,
            c.detail
        );
    }
    if let (Some(p), Some(cloud)) = (&a.cloud, &report.cloud) {
        let f = std::fs::File::create(p)
            .map_err(|e| Failure::Other(format!("cannot write {}: {e}", p.display())))?;
        cloud.write_csv(f)?;
    }
    emit(&report, a.common.out.as_deref(), out)?;
    Ok(if report.passed { EXIT_PASS } else { EXIT_FAIL })
}
