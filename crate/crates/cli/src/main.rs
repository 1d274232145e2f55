use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use hydrospin::acceptance;
use hydrospin::analysis::{
    default_grid, duration_report, gate_error, sector_aligned_error, sensitivity_threshold, FrozenGate, SweepParam,
    SweepScope,
};
use hydrospin::protocols::{
    encode_logical, encode_product, init_cascade, init_cascade_monte_carlo, initial_pair_state, qubit_basis,
    readout_logical, CascadeMode, SpinPair,
};
use hydrospin::spinspace::jz_sector_projectors;
use hydrospin::{execute, train_unitary, BitTrain, CompileOptions, DeviceConfig, GateKind, GateSetup, LogicalQubit};

/// Simulator and bit-train compiler for electron/donor spin qubits.
#[derive(Parser, Debug)]
#[command(name = "hydrospin", version)]
struct Cli {
    /// `key = value` device configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for sampled runs.
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,
    /// Directory for output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Trotter step length in cycles (same as --override dt_cycles=N).
    #[arg(long, global = true)]
    dt: Option<u64>,
    /// Configuration override, `key=value`; may be repeated.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CompileArgs {
    /// Merge adjacent idle segments in the emitted train.
    #[arg(long)]
    merge: bool,
    /// Compile every pulse separately instead of fusing hyperfine steps.
    #[arg(long)]
    literal: bool,
}

impl CompileArgs {
    fn options(&self) -> CompileOptions {
        let base = if self.literal {
            CompileOptions::literal()
        } else {
            CompileOptions::default()
        };
        CompileOptions {
            merge_waits: self.merge,
            ..base
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compile a library gate to a bit-train file.
    Gate {
        /// swap_en, entangler, cnot or rot.
        name: String,
        /// Target of `rot`: 8 floats, re/im pairs of a 2x2 matrix, row-major.
        #[arg(long, num_args = 1..=8, value_delimiter = ',', allow_negative_numbers = true)]
        matrix: Option<Vec<f64>>,
        #[command(flatten)]
        compile: CompileArgs,
    },
    /// Execute a bit-train file on an encoded input state.
    Run {
        train: PathBuf,
        /// Per-qubit inputs, comma separated: 0, 1, +, -, +i or -i.
        /// Unlisted qubits start in 0.
        #[arg(long, default_value = "")]
        state: String,
        /// Compare against this library gate.
        #[arg(long)]
        ideal: Option<String>,
        #[arg(long, num_args = 1..=8, value_delimiter = ',', allow_negative_numbers = true)]
        matrix: Option<Vec<f64>>,
    },
    /// Sensitivity sweep of a compiled gate against one parameter.
    Sweep {
        gate: String,
        /// f, B, A or g_e_interface.
        param: String,
        #[arg(long, default_value_t = acceptance::ERROR_BUDGET)]
        budget: f64,
        /// Perturb only the donor at this site.
        #[arg(long)]
        site: Option<usize>,
        #[arg(long, num_args = 1..=8, value_delimiter = ',', allow_negative_numbers = true)]
        matrix: Option<Vec<f64>>,
        #[command(flatten)]
        compile: CompileArgs,
    },
    /// Initialization cascade on one electron/donor pair.
    Init {
        #[arg(long, default_value_t = 8)]
        rounds: usize,
        /// Sampled trajectories; 0 runs the exact density-matrix mode only.
        #[arg(long, default_value_t = 0)]
        trajectories: usize,
        #[arg(long, value_enum, default_value_t = InitInput::Mixed)]
        input: InitInput,
        /// Start from the thermal state at this temperature (K) instead.
        #[arg(long, conflicts_with = "input")]
        temperature: Option<f64>,
        /// Use compiled trains for the cascade pulses instead of ideal ones.
        #[arg(long)]
        compiled: bool,
    },
    /// Run the acceptance suite.
    Check {
        /// Run only these criteria (1-9).
        #[arg(long = "id", value_parser = clap::value_parser!(u8).range(1..=9))]
        ids: Vec<u8>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum InitInput {
    /// Maximally mixed pair.
    Mixed,
    /// Logical |0⟩.
    Zero,
    /// Logical |1⟩.
    One,
}

/// Bad command-line usage that clap cannot catch.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.downcast_ref::<Usage>().is_some() { 1 } else { 2 })
        }
    }
}

fn load_config(cli: &Cli) -> Result<DeviceConfig> {
    let base = match &cli.config {
        Some(path) => DeviceConfig::read(path).with_context(|| format!("reading {}", path.display()))?,
        None => DeviceConfig::default(),
    };
    let mut overrides = cli.overrides.clone();
    if let Some(dt) = cli.dt {
        overrides.push(format!("dt_cycles={dt}"));
    }
    Ok(base.with_overrides(&overrides)?)
}

fn gate_kind(name: &str, matrix: Option<&[f64]>) -> Result<GateKind> {
    GateKind::parse(name, matrix).map_err(|e| usage(e.to_string()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config = load_config(&cli)?;
    let mut report = config.header("# ");
    let out_file = match &cli.command {
        Command::Gate { name, matrix, compile } => {
            cmd_gate(&cli, &config, name, matrix.as_deref(), &compile.options(), &mut report)?;
            None
        }
        Command::Run {
            train,
            state,
            ideal,
            matrix,
        } => {
            let ideal = ideal.as_deref().map(|g| gate_kind(g, matrix.as_deref())).transpose()?;
            cmd_run(&config, train, state, ideal, &mut report)?;
            Some("run.txt".to_string())
        }
        Command::Sweep {
            gate,
            param,
            budget,
            site,
            matrix,
            compile,
        } => {
            let kind = gate_kind(gate, matrix.as_deref())?;
            let param = SweepParam::parse(param).map_err(|e| usage(e.to_string()))?;
            let scope = site.map_or(SweepScope::Global, SweepScope::Site);
            cmd_sweep(&config, kind, param, scope, *budget, &compile.options(), &mut report)?;
            Some(format!("sweep_{gate}_{}.csv", param.name()))
        }
        Command::Init {
            rounds,
            trajectories,
            input,
            temperature,
            compiled,
        } => {
            let mode = if *compiled {
                CascadeMode::Compiled(CompileOptions::default())
            } else {
                CascadeMode::Ideal
            };
            cmd_init(&config, cli.seed, *rounds, *trajectories, *input, *temperature, &mode, &mut report)?;
            Some("init.txt".to_string())
        }
        Command::Check { ids } => {
            let ids: Vec<u8> = if ids.is_empty() { (1..=9).collect() } else { ids.clone() };
            let mut failed = false;
            for id in ids {
                let r = acceptance::run(id);
                failed |= !r.passed;
                let _ = writeln!(report, "{r}");
            }
            print!("{report}");
            write_out(&cli, "check.txt", &report)?;
            return Ok(if failed { ExitCode::from(3) } else { ExitCode::SUCCESS });
        }
    };
    print!("{report}");
    if let Some(name) = out_file {
        write_out(&cli, &name, &report)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn write_out(cli: &Cli, name: &str, text: &str) -> Result<()> {
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_gate(
    cli: &Cli,
    config: &DeviceConfig,
    name: &str,
    matrix: Option<&[f64]>,
    options: &CompileOptions,
    report: &mut String,
) -> Result<()> {
    let p = &config.params;
    let setup = GateSetup::new(gate_kind(name, matrix)?, config.layout(), p)?;
    let train = setup.compile(p, options)?;
    let u = train_unitary(&train, &setup.layout, p)?;
    let ideal = setup.ideal(p)?;
    let err = gate_error(&u, &ideal, &qubit_basis(&setup.layout, &setup.qubits)?)?;
    let sector = sector_aligned_error(&u, &ideal, &setup.layout.register())?;

    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(format!("{name}.train"));
    let mut text = report.clone();
    let _ = writeln!(text, "# gate {name}: {}", setup.seq);
    text.push_str(&train.to_text());
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;

    let (cycles, us) = duration_report(&train, p);
    let _ = writeln!(report, "gate {name}");
    let _ = writeln!(report, "pulses {}", setup.seq);
    let _ = writeln!(report, "cycles {cycles}");
    let _ = writeln!(report, "duration_us {us:.6}");
    let _ = writeln!(report, "on_segments {}", train.on_segments());
    let _ = writeln!(report, "avg_error {:.3e}", err.avg_error);
    let _ = writeln!(report, "leakage {:.3e}", err.leakage);
    let _ = writeln!(report, "sector_aligned_error {sector:.3e}");
    let _ = writeln!(report, "train {}", path.display());
    Ok(())
}

fn parse_qubit_state(token: &str) -> Result<(Complex64, Complex64)> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    Ok(match token {
        "0" => (c(1.0, 0.0), c(0.0, 0.0)),
        "1" => (c(0.0, 0.0), c(1.0, 0.0)),
        "+" => (c(h, 0.0), c(h, 0.0)),
        "-" => (c(h, 0.0), c(-h, 0.0)),
        "+i" => (c(h, 0.0), c(0.0, h)),
        "-i" => (c(h, 0.0), c(0.0, -h)),
        other => return Err(usage(format!("unknown qubit state {other:?}; use 0, 1, +, -, +i or -i"))),
    })
}

fn cmd_run(config: &DeviceConfig, path: &Path, state: &str, ideal: Option<GateKind>, report: &mut String) -> Result<()> {
    let p = &config.params;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let train = BitTrain::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    let layout = config.layout();
    train.validate(&layout)?;
    let reg = layout.register();
    let qubits = LogicalQubit::from_layout(&layout);
    let tokens: Vec<&str> = state.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    if tokens.len() > qubits.len() {
        return Err(usage(format!("{} qubit states given, layout has {} qubits", tokens.len(), qubits.len())));
    }
    let mut inputs = Vec::new();
    for (k, q) in qubits.iter().enumerate() {
        let (a, b) = parse_qubit_state(tokens.get(k).copied().unwrap_or("0"))?;
        inputs.push((SpinPair::of_qubit(&reg, *q)?, a, b));
    }
    let input = encode_product(&reg, &inputs)?;
    let out = execute(&input, &train, &layout, p)?;
    let (cycles, us) = duration_report(&train, p);
    let _ = writeln!(report, "train {}", path.display());
    let _ = writeln!(report, "cycles {cycles}");
    let _ = writeln!(report, "duration_us {us:.6}");
    for (k, (pair, _, _)) in inputs.iter().enumerate() {
        let r = readout_logical(&reg, &out.state, *pair)?;
        let _ = writeln!(
            report,
            "qubit {k} alpha {:+.9}{:+.9}i beta {:+.9}{:+.9}i leakage {:.3e}",
            r.alpha.re, r.alpha.im, r.beta.re, r.beta.im, r.leakage
        );
    }
    let rho = out.state.to_density();
    for (proj, jz) in jz_sector_projectors(&reg).iter().zip(reg.jz_values()) {
        let _ = writeln!(report, "sector jz={jz:+} weight {:.9}", rho.expectation(proj.matrix()));
    }
    if let Some(kind) = ideal {
        let name = kind.name();
        let setup = GateSetup::new(kind, layout.clone(), p)?;
        let u = train_unitary(&train, &layout, p)?;
        let target = setup.ideal(p)?;
        let err = gate_error(&u, &target, &qubit_basis(&layout, &setup.qubits)?)?;
        let sector = sector_aligned_error(&u, &target, &reg)?;
        let _ = writeln!(report, "ideal {name}");
        let _ = writeln!(report, "avg_error {:.3e}", err.avg_error);
        let _ = writeln!(report, "worst_error {:.3e}", err.worst_error);
        let _ = writeln!(report, "leakage {:.3e}", err.leakage);
        let _ = writeln!(report, "sector_aligned_error {sector:.3e}");
    }
    Ok(())
}

fn cmd_sweep(
    config: &DeviceConfig,
    kind: GateKind,
    param: SweepParam,
    scope: SweepScope,
    budget: f64,
    options: &CompileOptions,
    report: &mut String,
) -> Result<()> {
    let p = &config.params;
    let name = kind.name();
    let setup = GateSetup::new(kind, config.layout(), p)?;
    let gate = FrozenGate::new(&setup, p, options)?;
    let result = sensitivity_threshold(&gate, param, scope, budget, &default_grid())?;
    let scope_text = match scope {
        SweepScope::Global => "global".to_string(),
        SweepScope::Site(s) => format!("site {s}"),
    };
    let _ = writeln!(report, "# sweep {name} {} ({scope_text}) budget {budget:e}", param.name());
    let _ = writeln!(report, "# nominal_error {:.3e}", result.nominal_error);
    let _ = writeln!(report, "# threshold_plus {:.3e}", result.threshold_plus);
    let _ = writeln!(report, "# threshold_minus {:.3e}", result.threshold_minus);
    let _ = writeln!(report, "# monotone {}", result.monotone);
    let mut csv = Vec::new();
    result.write_csv(&mut csv)?;
    report.push_str(&String::from_utf8(csv)?);
    let _ = writeln!(report, "THRESHOLD {} {:e}", param.name(), result.threshold);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_init(
    config: &DeviceConfig,
    seed: u64,
    rounds: usize,
    trajectories: usize,
    input: InitInput,
    temperature: Option<f64>,
    mode: &CascadeMode,
    report: &mut String,
) -> Result<()> {
    let p = &config.params;
    let rho = match (temperature, input) {
        (Some(t), _) => initial_pair_state(p, Some(t))?,
        (None, InitInput::Mixed) => initial_pair_state(p, None)?,
        (None, InitInput::Zero) => encode_logical(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))?.to_density(),
        (None, InitInput::One) => encode_logical(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))?.to_density(),
    };
    let input_text = match temperature {
        Some(t) => format!("thermal {t} K"),
        None => format!("{input:?}").to_lowercase(),
    };
    let mode_text = if matches!(mode, CascadeMode::Ideal) { "ideal" } else { "compiled" };
    let _ = writeln!(report, "# init input {input_text}, {mode_text} pulses, max {rounds} rounds, seed {seed}");
    let exact = init_cascade(&rho, rounds, p, mode)?;
    let _ = writeln!(report, "round,reached,p_singlet,p_triplet");
    for r in &exact.log {
        let _ = writeln!(report, "{},{:.9},{:.9},{:.9}", r.round, r.reached, r.p_singlet, r.p_triplet);
    }
    let _ = writeln!(report, "rounds {}", exact.rounds);
    let _ = writeln!(report, "yield_zero {:.6}", exact.yield_zero);
    let _ = writeln!(report, "discarded {:.6}", exact.discarded);
    let _ = writeln!(report, "residual {:.6}", exact.residual);
    if trajectories > 0 {
        let mc = init_cascade_monte_carlo(&rho, rounds, trajectories, seed, p, mode)?;
        let (y, s) = (mc.yield_zero(), mc.yield_sigma());
        let _ = writeln!(report, "trajectories {trajectories}");
        let _ = writeln!(report, "sampled_yield_zero {y:.6} +- {s:.6}");
        let _ = writeln!(report, "sampled_ci95 [{:.6}, {:.6}]", y - 1.96 * s, y + 1.96 * s);
        let _ = writeln!(report, "sampled_counts zero {} discarded {} residual {}", mc.zero, mc.discarded, mc.residual);
        let hist: Vec<String> = mc.rounds_histogram.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(report, "rounds_histogram {}", hist.join(","));
    }
    Ok(())
}
