//! `qhe-lab`: keys, ciphertexts and worked examples from the command line.
//!
//! Exit codes: 0 on success, 2 on domain errors (running out of gadgets, a
//! failed demo or self-test), 1 on I/O and parse errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qhe_lab_core::acceptance::{self, DEFAULT_SEED};
use qhe_lab_core::barrington::BranchingProgram;
use qhe_lab_core::bench::{bench, render_table};
use qhe_lab_core::classical_he::HeScheme;
use qhe_lab_core::demo::run_demo;
use qhe_lab_core::doc::{read_document, write_document, DocKind, DocumentEnvelope};
use qhe_lab_core::gadget::{gh_gadget, gh_plan};
use qhe_lab_core::gardenhose::GHProtocol;
use qhe_lab_core::session::{BundleDoc, CiphertextDoc, EvalStep, KeygenParams, StatePreset};
use qhe_lab_core::tp::{GadgetBackend, GadgetSource, QuantumCircuit};
use qhe_lab_core::QheError;

#[derive(Parser, Debug)]
#[command(name = "qhe-lab", version, about = "Quantum homomorphic encryption with teleportation gadgets")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, env = "QHE_LAB_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a key bundle with one gadget per level.
    Keygen {
        #[arg(long, default_value = "transparent")]
        scheme: HeScheme,
        #[arg(long, default_value_t = 8)]
        kappa: usize,
        #[arg(long = "levels", short = 'L')]
        levels: usize,
        #[arg(long, default_value = "toy-gh")]
        gadget_source: GadgetSource,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encrypt a preset state.
    Enc {
        #[arg(long)]
        bundle: PathBuf,
        /// zero, plus or random.
        #[arg(long, default_value = "zero")]
        state_spec: StatePreset,
        #[arg(long, default_value_t = 1)]
        wires: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a circuit file on a ciphertext.
    Eval {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        circuit_privacy: bool,
        #[arg(long, default_value = "auto")]
        backend: GadgetBackend,
    },
    /// Decrypt and compare with the expected plaintext.
    Dec {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run a worked example: toy, barrington-or or bv-chain.
    Demo { name: String },
    /// Trace the water in a garden-hose protocol.
    GhEval {
        /// Protocol document; the TOY decryption protocol if omitted.
        #[arg(long)]
        protocol: Option<PathBuf>,
        #[arg(long)]
        alice: usize,
        #[arg(long)]
        bob: usize,
    },
    /// Write a built-in object as a document: toy-protocol, or-program,
    /// toy-gadget or toy-plan.
    Export {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the kind and summary of any document.
    Inspect { file: PathBuf },
    /// Run the acceptance criteria.
    Selftest {
        /// Run only this criterion.
        #[arg(long)]
        criterion: Option<usize>,
    },
    /// Gadget qubit counts and keygen time against L.
    Bench {
        #[arg(long, default_value = "1,2,4,8", value_delimiter = ',')]
        levels_range: Vec<usize>,
        #[arg(long, default_value = "or-example")]
        gadget_source: GadgetSource,
        #[arg(long, default_value = "transparent")]
        scheme: HeScheme,
        #[arg(long, default_value_t = 8)]
        kappa: usize,
        /// Also write the rows as a report document.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Io(String),
    Qhe(QheError),
    /// A demo or check ran and failed.
    Check(String),
}

impl From<QheError> for Failure {
    fn from(e: QheError) -> Self {
        Failure::Qhe(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Qhe(e) if !e.is_domain() => 1,
            Failure::Qhe(_) | Failure::Check(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Io(m) | Failure::Check(m) => m.clone(),
            Failure::Qhe(e) => e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn read_doc<T: serde::de::DeserializeOwned>(kind: DocKind, path: &Path) -> Result<T, Failure> {
    let text = read_text(path)?;
    read_document(kind, &text).map_err(|e| Failure::Qhe(with_path(e, path)))
}

fn with_path(e: QheError, path: &Path) -> QheError {
    match e {
        QheError::Document(m) => QheError::Document(format!("{}: {m}", path.display())),
        e => e,
    }
}

/// Writes to `out`, or to stdout when no path is given.
fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Io(e.to_string())),
    }
}

// Summaries go to stderr when the document itself goes to stdout.
fn note(out: Option<&Path>, line: &str) {
    if out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn load_pair(bundle: &Path, input: &Path) -> Result<CiphertextDoc, Failure> {
    let b: BundleDoc = read_doc(DocKind::Bundle, bundle)?;
    let c: CiphertextDoc = read_doc(DocKind::Qciphertext, input)?;
    if b.params != c.session.keygen {
        return Err(Failure::Qhe(QheError::Document(format!(
            "{} was not encrypted under {}",
            input.display(),
            bundle.display()
        ))));
    }
    b.load()?;
    Ok(c)
}

fn run(cli: Cli) -> CmdResult {
    let seed = cli.seed;
    match cli.command {
        Command::Keygen { scheme, kappa, levels, gadget_source, out } => {
            let params = KeygenParams { scheme, kappa, levels, source: gadget_source, seed };
            let (doc, _) = BundleDoc::generate(params)?;
            emit(out.as_deref(), &write_document(DocKind::Bundle, &doc)?)?;
            note(
                out.as_deref(),
                &format!(
                    "bundle: {} gadgets ({gadget_source}, {} qubits in total), {} keysets",
                    doc.gadget_count,
                    doc.gadget_qubits,
                    doc.bundle.keysets.len()
                ),
            );
        }
        Command::Enc { bundle, state_spec, wires, out } => {
            let b: BundleDoc = read_doc(DocKind::Bundle, &bundle)?;
            let (doc, _) = CiphertextDoc::encrypt(&b, state_spec, wires, seed)?;
            emit(out.as_deref(), &write_document(DocKind::Qciphertext, &doc)?)?;
            note(out.as_deref(), &format!("encrypted {wires}-wire {state_spec} state under key 0"));
        }
        Command::Eval { bundle, circuit, input, out, circuit_privacy, backend } => {
            let c = load_pair(&bundle, &input)?;
            let text = read_text(&circuit)?;
            // Parse up front so errors name the file.
            let parsed = QuantumCircuit::from_text(&text, c.session.num_wires).map_err(|e| match e {
                QheError::Parse { line, message } => {
                    QheError::Parse { line, message: format!("{}: {message}", circuit.display()) }
                }
                e => e,
            })?;
            let step = EvalStep { circuit: parsed.to_text(), circuit_privacy, backend, seed };
            let (doc, _, report) = c.eval(step)?;
            emit(out.as_deref(), &write_document(DocKind::Qciphertext, &doc)?)?;
            note(
                out.as_deref(),
                &format!(
                    "evaluated {} gates ({} T): {} gadgets consumed, {} recryptions, {} HE nodes, key index {}",
                    parsed.gates().len(),
                    report.t_count,
                    report.gadgets_consumed,
                    report.recryptions_performed,
                    report.he_eval_node_count,
                    report.final_key_index
                ),
            );
        }
        Command::Dec { bundle, input } => {
            let c = load_pair(&bundle, &input)?;
            let (_, f, stats) = c.decrypt(seed)?;
            println!(
                "decrypted {} wires: {} HE decryptions, {} gate applications",
                c.session.num_wires, stats.he_decryptions, stats.gate_applications
            );
            println!("fidelity {f:.9}");
            if f < 1.0 - 1e-9 {
                return Err(Failure::Check(format!("fidelity {f:.9} against the expected state")));
            }
        }
        Command::Demo { name } => {
            let d = run_demo(&name, seed)?;
            print!("{}", d.transcript);
            if !d.passed {
                return Err(Failure::Check(format!("demo {name} failed")));
            }
        }
        Command::GhEval { protocol, alice, bob } => {
            let p = match protocol {
                Some(path) => read_doc(DocKind::Ghprotocol, &path)?,
                None => GHProtocol::toy_dec(),
            };
            let flow = p.eval_flow(alice, bob)?;
            println!("path {}", flow.render());
            println!("output {}", flow.output(&p) as u8);
        }
        Command::Export { name, out } => {
            let text = match name.as_str() {
                "toy-protocol" => write_document(DocKind::Ghprotocol, &GHProtocol::toy_dec())?,
                "or-program" => write_document(DocKind::Program, &BranchingProgram::or_example())?,
                "toy-gadget" => write_document(DocKind::Gadget, &gh_gadget(&GHProtocol::toy_dec(), 0)?)?,
                "toy-plan" => write_document(DocKind::Plan, &gh_plan(&GHProtocol::toy_dec(), 0)?)?,
                _ => {
                    return Err(Failure::Qhe(QheError::Parse {
                        line: 0,
                        message: format!(
                            "nothing called '{name}' to export (toy-protocol, or-program, toy-gadget, toy-plan)"
                        ),
                    }))
                }
            };
            emit(out.as_deref(), &text)?;
        }
        Command::Inspect { file } => {
            let env = DocumentEnvelope::from_json(&read_text(&file)?).map_err(|e| with_path(e, &file))?;
            println!("{} document, format version {}", env.kind, env.format_version);
            match env.kind {
                DocKind::Bundle => {
                    let b: BundleDoc = env.payload_as(DocKind::Bundle)?;
                    println!("{} gadgets, {} qubits, source {}", b.gadget_count, b.gadget_qubits, b.params.source);
                }
                DocKind::Qciphertext => {
                    let c: CiphertextDoc = env.payload_as(DocKind::Qciphertext)?;
                    println!(
                        "{} wires at key index {}, {} evaluations",
                        c.ciphertext.num_wires,
                        c.ciphertext.key_index,
                        c.session.evals.len()
                    );
                }
                _ => {}
            }
        }
        Command::Selftest { criterion } => {
            let results = match criterion {
                Some(id) => vec![acceptance::run_criterion(id, seed)
                    .ok_or_else(|| Failure::Qhe(QheError::Parse { line: 0, message: format!("no criterion {id}") }))?],
                None => acceptance::run_all(seed),
            };
            for r in &results {
                println!("{r}");
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("selftest: {} passed, {failed} failed", results.len() - failed);
            if failed > 0 {
                return Err(Failure::Check(format!("{failed} criteria failed")));
            }
        }
        Command::Bench { levels_range, gadget_source, scheme, kappa, out } => {
            let rows = bench(scheme, kappa, gadget_source, &levels_range, seed)?;
            print!("{}", render_table(&rows));
            if let Some(p) = out {
                emit(Some(&p), &write_document(DocKind::Report, &rows)?)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
