use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use visprog::backends::{plan_with_registry, sidecar_router, Registry};
use visprog::dsl::Program;
use visprog::executor::{self, render_trace, ArtifactStore, Overrides, StepTrace, Value};
use visprog::geometry::ImageBuffer;
use visprog::service::cli::{build_registry, load_config, read_image, read_program, write_file, CliError};
use visprog::service::{ablate, router, scene_summary, serve, write_ablation, AppState, DEFAULT_SWEEP};

#[derive(Parser)]
#[command(name = "visprog", version, about = "Plan, run and inspect visual edit programs")]
struct Cli {
    /// Seed for the translator.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON translation config (keys T, N, eta, beta, mode, seed).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Bind a role to a remote endpoint or back to the stub: `role=url|stub`.
    #[arg(long = "backend", global = true)]
    backends: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print plan candidates for an instruction.
    Plan {
        #[arg(long)]
        image: PathBuf,
        instruction: String,
    },
    /// Execute a program to completion.
    Run {
        #[command(flatten)]
        source: ProgramSource,
        /// Output PNG.
        #[arg(long)]
        out: PathBuf,
        /// Directory for trace.json and report.html.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Execute interactively: enter = next, r = repeat, b = back, q = quit.
    Step {
        #[command(flatten)]
        source: ProgramSource,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Translate one region under several CFG scales and under IN guidance.
    Ablate {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        selector: String,
        #[arg(long)]
        source: String,
        #[arg(long)]
        target: String,
        #[arg(long = "w", value_delimiter = ',', default_values_t = DEFAULT_SWEEP)]
        ws: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the session API, or the stub sidecar with `--sidecar`.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long)]
        sidecar: bool,
    },
}

#[derive(Args)]
struct ProgramSource {
    #[arg(long)]
    image: PathBuf,
    /// Program file.
    #[arg(long, conflicts_with = "instruction", required_unless_present = "instruction")]
    program: Option<PathBuf>,
    /// Plan from an instruction instead of a program file.
    #[arg(long)]
    instruction: Option<String>,
    /// Candidate index when planning.
    #[arg(long, default_value_t = 0)]
    plan: usize,
}

impl ProgramSource {
    fn load(&self, registry: &Registry) -> Result<(ImageBuffer, Program), CliError> {
        let image = read_image(&self.image)?;
        let program = match (&self.program, &self.instruction) {
            (Some(path), _) => read_program(path)?,
            (None, Some(instruction)) => {
                let plans = plan(registry, &image, instruction)?;
                let n = plans.len();
                plans
                    .into_iter()
                    .nth(self.plan)
                    .ok_or_else(|| CliError::Plan(format!("plan {} out of range (have {n})", self.plan)))?
            }
            (None, None) => unreachable!("clap requires one source"),
        };
        Ok((image, program))
    }
}

fn plan(registry: &Registry, image: &ImageBuffer, instruction: &str) -> Result<Vec<Program>, CliError> {
    let scene = scene_summary(registry, image).map_err(|e| CliError::Plan(e.to_string()))?;
    let plans = plan_with_registry(registry, instruction, &scene).map_err(|e| CliError::Plan(e.to_string()))?;
    Ok(plans.into_iter().map(|p| p.program).collect())
}

fn print_step(t: &StepTrace) {
    println!("[{}] {} -> {} {} {}", t.line, t.op, t.output.name, t.output.tag.as_str(), t.output.digest);
}

fn save_value(path: &Path, value: &Value) -> Result<(), CliError> {
    match value {
        Value::Image(img) => write_file(path, &img.to_png()),
        Value::Region(r) => write_file(path, &r.patch().to_png()),
        Value::Prompt(s) => write_file(path, s.as_bytes()),
        other => write_file(path, format!("{other:?}").as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = cli.config.as_deref().map(load_config).transpose()?;
    let registry = build_registry(config, &cli.backends)?;
    match cli.command {
        Command::Plan { image, instruction } => {
            let image = read_image(&image)?;
            for (k, p) in plan(&registry, &image, &instruction)?.iter().enumerate() {
                println!("# plan {k}\n{p}");
            }
            Ok(())
        }
        Command::Run { source, out, report } => {
            let (image, program) = source.load(&registry)?;
            let store = ArtifactStore::new();
            let (value, trace) = executor::run(&program, image, &registry, cli.seed, &store)?;
            trace.iter().for_each(print_step);
            save_value(&out, &value)?;
            if let Some(dir) = report {
                let report = render_trace(&trace, &store)?;
                write_file(&dir.join("trace.json"), report.json.as_bytes())?;
                write_file(&dir.join("report.html"), report.html.as_bytes())?;
            }
            Ok(())
        }
        Command::Step { source, out } => {
            let (image, program) = source.load(&registry)?;
            let store = ArtifactStore::new();
            let mut state = executor::init_state(image, cli.seed)?;
            let stdin = std::io::stdin();
            let mut lines = stdin.lock().lines();
            loop {
                match program.statements.get(state.pc) {
                    Some(s) => print!("{}> {s} [enter/r/b/q] ", state.pc),
                    None => print!("done [r/b/q] "),
                }
                std::io::stdout().flush().map_err(|e| CliError::Io(e.to_string()))?;
                let Some(line) = lines.next() else { break };
                let line = line.map_err(|e| CliError::Io(e.to_string()))?;
                let outcome = match line.trim() {
                    "" | "n" => executor::step(&mut state, &program, &registry, &store).map(|t| print_step(&t)),
                    "r" => executor::repeat(&mut state, &program, &registry, &store, &Overrides::default()).map(|t| print_step(&t)),
                    "b" => executor::rollback(&mut state, &program, &registry, &store),
                    "q" => break,
                    other => {
                        println!("unknown command `{other}`");
                        Ok(())
                    }
                };
                if let Err(e) = outcome {
                    println!("error: {e}");
                }
            }
            if let (Some(path), Some(last)) = (out, state.pc.checked_sub(1)) {
                save_value(&path, &state.bindings[&program.statements[last].output_var])?;
            }
            Ok(())
        }
        Command::Ablate { image, selector, source, target, ws, out } => {
            let image = read_image(&image)?;
            let report = ablate(&registry, &image, &selector, &source, &target, &ws, cli.seed)?;
            write_ablation(&report, &out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
            for (o, row) in report.outputs.iter().zip(&report.rms) {
                let row: Vec<String> = row.iter().map(|v| format!("{v:8.3}")).collect();
                println!("{:10} {}", o.name, row.join(" "));
            }
            Ok(())
        }
        Command::Serve { addr, sidecar } => {
            let app = if sidecar { sidecar_router(registry) } else { router(AppState::new(registry)) };
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
            eprintln!("listening on http://{addr}");
            rt.block_on(serve(addr, app)).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}
