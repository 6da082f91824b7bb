use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use gptkit::born::{self, BornMatrix, BornReport, Provenance, VERIFY_TOL};
use gptkit::device::{
    self, classical_identity_measurement, depolarizing_device, depolarizing_fit, parallel_update_device,
    random_ic_measurement, DepolarizingFit, LeftInverse, ReferenceDevice, ReferenceMeasurement, Sign,
    DEPOLARIZING_TOL, FIT_TOL,
};
use gptkit::io::{read_device, to_json_string, DeviceFile};
use gptkit::morpho::{weight_morphophoricity_check, MorphoReport};
use gptkit::quantum::{self, DesignSummary, Field};
use gptkit::space::{make_space, GptSpace, SpaceKind};

/// Reference devices, Born matrices and morphophoricity for finite-dimensional GPTs.
#[derive(Parser)]
#[command(name = "gptkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a reference device and write it as JSON.
    Build(BuildArgs),
    /// Run every applicable check on a device file.
    Check(CheckArgs),
    /// Numerically minimize the Schatten-p norm over Born matrices of a device.
    Minimize(MinimizeArgs),
    /// Bundled fixtures.
    Fixtures {
        #[command(subcommand)]
        command: FixturesCommand,
    },
}

#[derive(Subcommand)]
enum FixturesCommand {
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    SicD2,
    SicD3,
    Pauli6,
    RealTrine,
    RealSicD3,
}

const FIXTURES: [(Fixture, &str, &str); 5] = [
    (Fixture::SicD2, "sic-d2", "qubit SIC-POVM with its parallel-update states, alpha = 3"),
    (Fixture::SicD3, "sic-d3", "qutrit Weyl-Heisenberg SIC-POVM, alpha = 4"),
    (Fixture::Pauli6, "pauli6", "qubit Pauli eigenbasis measurement, six outcomes, alpha = 3"),
    (Fixture::RealTrine, "real-trine", "rebit trine, alpha = 2"),
    (Fixture::RealSicD3, "real-sic-d3", "real d = 3 icosahedral lines, alpha = 2.5"),
];

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    #[value(name = "+", alias = "plus")]
    Plus,
    #[value(name = "-", alias = "minus")]
    Minus,
}

impl From<SignArg> for Sign {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Plus => Sign::Plus,
            SignArg::Minus => Sign::Minus,
        }
    }
}

#[derive(Args)]
struct BuildArgs {
    /// A bundled fixture.
    #[arg(long, value_enum, conflicts_with_all = ["space", "identity", "random_ic", "effects"])]
    fixture: Option<Fixture>,
    /// Space label (classical3, qc2, qr3, square, ball3, ...) or a JSON space descriptor.
    #[arg(long, required_unless_present = "fixture")]
    space: Option<String>,
    /// Use the identity measurement of a classical space.
    #[arg(long, requires = "space", conflicts_with_all = ["random_ic", "effects"])]
    identity: bool,
    /// Draw an informationally complete measurement with this many outcomes.
    #[arg(long, value_name = "N", requires_all = ["space", "seed"], conflicts_with = "effects")]
    random_ic: Option<usize>,
    /// JSON file with one effect row per outcome, in Bloch coordinates.
    #[arg(long, value_name = "FILE", requires = "space")]
    effects: Option<PathBuf>,
    /// Seed for --random-ic.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the parallel-update states instead of the pseudoinverse construction.
    #[arg(long)]
    parallel_update: bool,
    #[arg(long, value_enum, default_value = "+")]
    sign: SignArg,
    /// Output file; standard output if omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    device: PathBuf,
    /// Schatten exponents for the deformation report (1, 2, inf); repeatable.
    #[arg(long = "p", value_parser = parse_schatten, default_value = "2")]
    p: Vec<f64>,
    /// For real quantum devices, also check the Born identity in vectorized coordinates.
    #[arg(long)]
    real_vectorized: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MinimizeArgs {
    device: PathBuf,
    #[arg(long = "p", value_parser = parse_schatten, default_value = "2")]
    p: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_schatten(s: &str) -> std::result::Result<f64, String> {
    match s {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => match s.parse::<f64>() {
            Ok(p) if p == 1.0 || p == 2.0 => Ok(p),
            _ => Err(format!("unsupported Schatten exponent {s}; use 1, 2 or inf")),
        },
    }
}

#[derive(Serialize)]
struct Verdict {
    name: String,
    residual: f64,
    threshold: f64,
    pass: bool,
}

impl Verdict {
    fn new(name: impl Into<String>, residual: f64, threshold: f64) -> Self {
        Self { name: name.into(), residual, threshold, pass: residual.is_finite() && residual <= threshold }
    }
}

#[derive(Serialize)]
struct DeviceSummary {
    space: SpaceKind,
    label: String,
    n: usize,
    r: usize,
    alpha: Option<f64>,
    unbiased: bool,
    mic: bool,
}

#[derive(Serialize)]
struct BornEntry {
    provenance: Provenance,
    born_identity: f64,
    protourgleichung: f64,
    deformation: std::collections::BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct ReportBundle {
    device_summary: DeviceSummary,
    depolarizing: DepolarizingFit,
    born_matrices: Vec<BornEntry>,
    morpho: MorphoReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    design: Option<DesignSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vectorized_born_identity: Option<quantum::VectorizedIdentity>,
    verdicts: Vec<Verdict>,
}

#[derive(Serialize)]
struct MinimizeReport {
    p: String,
    numeric: BornReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form: Option<BornReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_difference: Option<f64>,
    protourgleichung: Verdict,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Build(args) => {
            let device = build(&args)?;
            emit(&DeviceFile::from_device(&device), args.output.as_ref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Check(args) => check(&args),
        Command::Minimize(args) => {
            let device = load(&args.device)?;
            emit(&minimize(&device, args.p)?, args.output.as_ref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Fixtures { command: FixturesCommand::List } => {
            for (_, name, description) in FIXTURES {
                writeln!(std::io::stdout(), "{name:<12} {description}").ok();
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn emit<T: Serialize>(value: &T, output: Option<&PathBuf>) -> Result<()> {
    let text = to_json_string(value)?;
    match output {
        Some(path) => fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}").and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn parse_space(spec: &str) -> Result<Arc<GptSpace>> {
    let kind = if spec.trim_start().starts_with('{') {
        serde_json::from_str::<SpaceKind>(spec).context("parsing space descriptor")?
    } else {
        SpaceKind::parse_label(spec).ok_or_else(|| anyhow!("unknown space label {spec:?}"))?
    };
    Ok(Arc::new(make_space(kind)?))
}

fn build(args: &BuildArgs) -> Result<ReferenceDevice> {
    if let Some(fixture) = args.fixture {
        return Ok(match fixture {
            Fixture::SicD2 => quantum::sic_d2(),
            Fixture::SicD3 => quantum::wh_sic(3, None)?,
            Fixture::Pauli6 => quantum::pauli6(),
            Fixture::RealTrine => quantum::real_sic(2)?,
            Fixture::RealSicD3 => quantum::real_sic(3)?,
        });
    }
    let space = parse_space(args.space.as_deref().expect("clap requires --space"))?;
    let measurement: ReferenceMeasurement = if args.identity {
        classical_identity_measurement(space)?
    } else if let Some(n) = args.random_ic {
        let seed = args.seed.expect("clap requires --seed");
        random_ic_measurement(space, n, None, &mut ChaCha8Rng::seed_from_u64(seed))?
    } else if let Some(path) = &args.effects {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let rows: Vec<Vec<f64>> = serde_json::from_str(&text).context("parsing effect rows")?;
        let effects = gptkit::linalg::from_rows(&rows).ok_or_else(|| anyhow!("effect rows have different lengths"))?;
        device::decompose_measurement(space, effects)?
    } else {
        bail!("give one of --identity, --random-ic or --effects together with --space");
    };
    let sign = args.sign.into();
    Ok(if args.parallel_update {
        parallel_update_device(measurement, sign)?
    } else {
        depolarizing_device(measurement, &LeftInverse::Pseudoinverse, sign)?
    })
}

fn load(path: &Path) -> Result<ReferenceDevice> {
    read_device(path).with_context(|| format!("loading {}", path.display()))
}

fn load_declared(path: &Path) -> Result<ReferenceDevice> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file = DeviceFile::from_json(&text)?;
    let violations = file.validate_structure();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("invalid device file: {v}");
        }
        bail!("{} invariant(s) violated in {}", violations.len(), path.display());
    }
    Ok(file.into_declared_device()?)
}

/// Born matrices that apply to `device`: the MIC inverse, natural and simple ones when
/// `α` is known, and the Frobenius minimizer.
fn born_matrices(device: &ReferenceDevice) -> Result<Vec<BornMatrix>> {
    let mut out = Vec::new();
    if device.n() == device.r() {
        out.push(born::mic_born_matrix(device)?);
    }
    if device.alpha().is_some() {
        out.push(born::natural_born_matrix(device)?);
        out.push(born::simple_born_matrix(device)?);
    }
    if device.n() > device.r() || out.is_empty() {
        out.push(born::minimal_born_matrix_numeric(device.self_conditional(), 2.0, Some(device.r()))?);
    }
    Ok(out)
}

fn check(args: &CheckArgs) -> Result<ExitCode> {
    let device = load_declared(&args.device)?;
    let space = device.space().clone();
    let fit = depolarizing_fit(&device);
    let mut verdicts = Vec::new();
    if let Some(alpha) = device.alpha() {
        verdicts.push(Verdict::new("declared_alpha", device.depolarizing_defect(alpha), DEPOLARIZING_TOL));
    }
    verdicts.push(Verdict::new("depolarizing", fit.residual, FIT_TOL));
    if let Some(cp) = fit.completely_positive {
        let (_, d) = space.kind().quantum().expect("completely_positive is set for quantum spaces");
        let lower = -1.0 / ((d * d) as f64 - 1.0);
        let outside = (lower - fit.parameter).max(fit.parameter - 1.0).max(0.0);
        let v = Verdict::new("completely_positive", outside, 1e-9);
        debug_assert_eq!(v.pass, cp);
        verdicts.push(v);
    }

    let mut entries = Vec::new();
    let mut reference_phi = None;
    for b in born_matrices(&device)? {
        let report = born::born_report(&device, &b, &args.p);
        let name = b.provenance.name();
        verdicts.push(Verdict::new(format!("born_identity/{name}"), report.residuals.born_identity, VERIFY_TOL));
        if matches!(b.provenance, Provenance::Natural | Provenance::Simple) {
            verdicts.push(Verdict::new(
                format!("protourgleichung/{name}"),
                report.residuals.protourgleichung,
                VERIFY_TOL,
            ));
        }
        if !matches!(b.provenance, Provenance::Natural | Provenance::Simple) || reference_phi.is_none() {
            reference_phi = Some(b.phi.clone());
        }
        entries.push(BornEntry {
            provenance: b.provenance,
            born_identity: report.residuals.born_identity,
            protourgleichung: report.residuals.protourgleichung,
            deformation: report.deformation,
        });
    }

    // The design test applies to pure reference states only.
    let design = match space.kind().quantum().map(|_| quantum::device_two_design_check(&device)) {
        Some(Ok(report)) => Some(report.summary()),
        Some(Err(gptkit::Error::Purity { .. })) | None => None,
        Some(Err(e)) => return Err(e.into()),
    };
    let mut vectorized = None;
    if args.real_vectorized {
        match space.kind().quantum() {
            Some((Field::Real, _)) => {
                let phi = reference_phi.as_ref().ok_or_else(|| anyhow!("no Born matrix available"))?;
                let v = quantum::vectorized_born_identity(&device, phi)?;
                verdicts.push(Verdict::new("vectorized_born_identity", v.residual, VERIFY_TOL));
                vectorized = Some(v);
            }
            _ => bail!("--real-vectorized needs a real quantum space, found {}", space.kind().label()),
        }
    }

    let m = device.measurement();
    let bundle = ReportBundle {
        device_summary: DeviceSummary {
            space: space.kind(),
            label: space.kind().label(),
            n: device.n(),
            r: device.r(),
            alpha: device.alpha(),
            unbiased: m.is_unbiased(1e-10),
            mic: device.n() == device.r(),
        },
        depolarizing: fit,
        born_matrices: entries,
        morpho: weight_morphophoricity_check(m)?,
        design,
        vectorized_born_identity: vectorized,
        verdicts,
    };
    emit(&bundle, args.output.as_ref())?;
    let failed: Vec<&Verdict> = bundle.verdicts.iter().filter(|v| !v.pass).collect();
    for v in &failed {
        eprintln!("FAIL {}: residual {:e} > {:e}", v.name, v.residual, v.threshold);
    }
    Ok(if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn minimize(device: &ReferenceDevice, p: f64) -> Result<MinimizeReport> {
    let numeric = born::minimal_born_matrix_numeric(device.self_conditional(), p, Some(device.r()))?;
    let closed = if p == 2.0 && device.alpha().is_some() && device.measurement().is_unbiased(1e-10) {
        Some(born::minimal_frobenius_born_matrix(device)?)
    } else {
        None
    };
    let max_difference = closed.as_ref().map(|c| gptkit::linalg::max_abs(&(&c.phi - &numeric.phi)));
    let numeric_report = born::born_report(device, &numeric, &[p]);
    let proto = Verdict::new("protourgleichung", numeric_report.residuals.protourgleichung, VERIFY_TOL);
    Ok(MinimizeReport {
        p: born::schatten_key(p),
        numeric: numeric_report,
        closed_form: closed.map(|c| born::born_report(device, &c, &[p])),
        max_difference,
        protourgleichung: proto,
    })
}
