use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use diglossia_core::corpus::{self, Format};
use diglossia_core::metrics::VarietyClassifier;
use diglossia_core::rng;
use diglossia_core::synthlang::{build_corpora, SynthConfig};
use diglossia_core::templating;
use diglossia_core::VarietyRegistry;
use diglossia_harness::data::{prepare, SplitSets, REGISTRY_FILE};
use diglossia_harness::experiment::{self, collect_run, evaluate_model, run_experiment};
use diglossia_harness::reference::{compare_table, EMBEDDED_REFERENCE};
use diglossia_harness::spec::{resolve_output, BitextFile, DataSource, MonoFile, Variant};
use diglossia_harness::tradeoff::{self, emit_tradeoff};
use diglossia_harness::{ExperimentSpec, HarnessError, Result, OUTPUT_ROOT_ENV};
use diglossia_model::{checkpoint, decode_grid, generate, DecodeConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "diglossia", version, about = "Dialect-fidelity trade-off experiments")]
struct Cli {
    /// Overrides every seed taken from configuration files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Root for relative output paths.
    #[arg(long, global = true, env = OUTPUT_ROOT_ENV)]
    output_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic standard language, its dialects and bitext.
    SynthData {
        /// TOML file with synthesis settings (defaults when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split corpora, render chat examples, fit tokenizer and classifier.
    Prepare(PrepareArgs),
    /// Train one (lambda, learning rate) variant.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        lr: f64,
        #[arg(long)]
        out: PathBuf,
        /// Prepared data directory; prepared from the config into `<out>/data` when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Decode prompts from a checkpoint to JSONL.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// JSONL file of rendered chat examples.
        #[arg(long)]
        prompts: PathBuf,
        /// All 25 (top-p, temperature) configurations.
        #[arg(long, conflicts_with_all = ["top_p", "temperature"])]
        grid: bool,
        #[arg(long, default_value_t = 1.0)]
        top_p: f64,
        #[arg(long, default_value_t = 0.0)]
        temperature: f64,
        #[arg(long, default_value_t = 48)]
        max_new_tokens: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a checkpoint on an evaluation split directory.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Split directory holding `mt/*.jsonl`, `gen/*.jsonl` and `registry.tsv`.
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Split label written to the report rows.
        #[arg(long, default_value = "dev")]
        split: String,
        /// Score fidelity over the decoding grid instead of greedy only.
        #[arg(long)]
        grid: bool,
        /// Also score translation over the decoding grid.
        #[arg(long)]
        grid_diglossia: bool,
        #[arg(long, default_value_t = 48)]
        max_new_tokens: usize,
    },
    /// Run a full experiment: data, baseline, every variant, trade-off.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the spec's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        grid_diglossia: bool,
    },
    /// Rebuild trade-off records from a finished run directory.
    Tradeoff {
        #[arg(long)]
        run: PathBuf,
        /// Defaults to `<run>/tradeoff.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render computed trade-off records next to the reference tables.
    Compare {
        #[arg(long)]
        tradeoff: PathBuf,
        /// Reference CSV; the bundled table when omitted.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PrepareArgs {
    /// Experiment spec whose data section is used.
    #[arg(long, conflicts_with_all = ["bitext", "mono"])]
    config: Option<PathBuf>,
    /// Directory of bitext files (JSONL, or TSV named `<src>-<tgt>.tsv`).
    #[arg(long)]
    bitext: Option<PathBuf>,
    /// Directory of monolingual files (JSONL, or TSV named `<variety>.tsv`).
    #[arg(long)]
    mono: Option<PathBuf>,
    /// Variety registry; looked up next to the corpus directories when omitted.
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Ask for the translation only in translation instructions.
    #[arg(long, conflicts_with = "no_output_clause")]
    output_clause: bool,
    #[arg(long)]
    no_output_clause: bool,
    /// Share of completion instructions written in English.
    #[arg(long)]
    gen_instruction_mix: Option<f64>,
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Validation(msg.into())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(invalid(format!("{}: no such file", path.display())))
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

fn load_spec(path: &Path, seed: Option<u64>) -> Result<ExperimentSpec> {
    let spec = ExperimentSpec::load(path)?;
    Ok(match seed {
        Some(s) => spec.with_seed(s),
        None => spec,
    })
}

fn synth_data(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
            toml::from_str::<SynthConfig>(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?
        }
        None => SynthConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| invalid(e.to_string()))?;
    let corpora = build_corpora(&cfg)?;
    write_file(&out.join(REGISTRY_FILE), corpora.registry.to_tsv())?;
    write_file(&out.join("bitext").join("synth.jsonl"), corpus::bitext_to_jsonl(&corpora.bitext))?;
    write_file(&out.join("mono").join("synth.jsonl"), corpus::mono_to_jsonl(&corpora.mono))?;
    eprintln!(
        "wrote {} bitext pairs and {} monolingual sentences to {}",
        corpora.bitext.len(),
        corpora.mono.len(),
        out.display()
    );
    Ok(())
}

fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| invalid(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && Format::from_path(p).is_some())
        .collect();
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem().unwrap_or_default().to_string_lossy().into_owned()
}

fn find_registry(args: &PrepareArgs) -> Result<PathBuf> {
    if let Some(r) = &args.registry {
        return Ok(r.clone());
    }
    for dir in args.bitext.iter().chain(&args.mono) {
        for candidate in [dir.join(REGISTRY_FILE), dir.join("..").join(REGISTRY_FILE)] {
            if candidate.is_file() {
                return Ok(candidate);
            }
        }
    }
    Err(invalid("no registry.tsv found; pass --registry"))
}

fn prepare_cmd(args: &PrepareArgs, seed: Option<u64>) -> Result<()> {
    let mut spec = match &args.config {
        Some(p) => load_spec(p, seed)?,
        None => {
            if args.bitext.is_none() && args.mono.is_none() {
                return Err(invalid("prepare needs --config or at least one of --bitext/--mono"));
            }
            let mut spec = ExperimentSpec::from_toml("")?;
            if let Some(s) = seed {
                spec = spec.with_seed(s);
            }
            spec.data.source = DataSource::Files;
            spec.data.registry = Some(find_registry(args)?);
            if let Some(dir) = &args.bitext {
                for path in corpus_files(dir)? {
                    let (src, tgt) = match Format::from_path(&path) {
                        Some(Format::Tsv) => {
                            let name = stem(&path);
                            let (s, t) = name.split_once('-').ok_or_else(|| {
                                invalid(format!("{}: TSV bitext must be named <src>-<tgt>.tsv", path.display()))
                            })?;
                            (Some(s.to_string()), Some(t.to_string()))
                        }
                        _ => (None, None),
                    };
                    spec.data.bitext.push(BitextFile {
                        path,
                        src,
                        tgt,
                        dataset: None,
                        header: false,
                    });
                }
            }
            if let Some(dir) = &args.mono {
                for path in corpus_files(dir)? {
                    let variety = (Format::from_path(&path) == Some(Format::Tsv)).then(|| stem(&path));
                    spec.data.mono.push(MonoFile {
                        path,
                        variety,
                        dataset: None,
                        header: false,
                    });
                }
            }
            spec
        }
    };
    if args.output_clause {
        spec.data.strict_output_clause = true;
    }
    if args.no_output_clause {
        spec.data.strict_output_clause = false;
    }
    if let Some(mix) = args.gen_instruction_mix {
        spec.data.english_fraction = mix;
    }
    spec.validate()?;
    let data = prepare(&spec)?;
    data.save(&args.out)?;
    eprintln!("{}", serde_json::to_string(&data.summary).expect("summary serializes"));
    Ok(())
}

fn train_cmd(config: &Path, lambda: f64, lr: f64, out: &Path, data: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let spec = load_spec(config, seed)?;
    let variant = Variant {
        lambda,
        learning_rate: lr,
    };
    spec.train_config(&variant).validate().map_err(|e| invalid(e.to_string()))?;
    let prepared = match data {
        Some(dir) => diglossia_harness::data::PreparedData::load(dir)?,
        None => diglossia_harness::data::prepare_or_load(&spec, &out.join("data"))?,
    };
    let outcome = experiment::train_variant(&spec, &prepared, &variant, out)?;
    match outcome.best() {
        Some(best) => println!(
            "best checkpoint: step {} ({}), dev chrf++ {:?}",
            best.step,
            best.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            best.macro_chrf
        ),
        None => println!("no checkpoint written"),
    }
    Ok(())
}

#[derive(Serialize)]
struct GenConfigOut {
    top_p: f64,
    temperature: f64,
}

#[derive(Serialize)]
struct GenLine {
    prompt_id: String,
    config: GenConfigOut,
    text: String,
    token_count: usize,
}

fn generate_cmd(
    ckpt: &Path,
    prompts: &Path,
    configs: Vec<DecodeConfig>,
    out: Option<&Path>,
    seed: u64,
) -> Result<()> {
    require_file(ckpt)?;
    require_file(prompts)?;
    for c in &configs {
        c.validate().map_err(|e| invalid(e.to_string()))?;
    }
    let text = std::fs::read_to_string(prompts).map_err(io_err(prompts))?;
    let chats = templating::from_jsonl(&text).map_err(|e| invalid(format!("{}: {e}", prompts.display())))?;
    let loaded = checkpoint::load(ckpt)?;
    let mut lines = String::new();
    for cfg in &configs {
        for chat in &chats {
            let prompt = loaded.tokenizer.encode_prompt(chat.user_text());
            let mut r = rng::stream(seed, rng::label(chat.id()));
            let g = generate(&loaded.model, &loaded.tokenizer, &prompt, cfg, &mut r)?;
            let line = GenLine {
                prompt_id: chat.id().to_string(),
                config: GenConfigOut {
                    top_p: cfg.top_p,
                    temperature: cfg.temperature,
                },
                text: g.text,
                token_count: g.ids.len(),
            };
            lines.push_str(&serde_json::to_string(&line).expect("line serializes"));
            lines.push('\n');
        }
    }
    match out {
        Some(p) => write_file(p, lines),
        None => {
            print!("{lines}");
            Ok(())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate_cmd(
    ckpt: &Path,
    dev: &Path,
    classifier: &Path,
    out: &Path,
    split: &str,
    grid: bool,
    grid_diglossia: bool,
    max_new_tokens: usize,
    seed: u64,
) -> Result<()> {
    require_file(ckpt)?;
    require_file(classifier)?;
    let registry_path = dev.join(REGISTRY_FILE);
    require_file(&registry_path)?;
    let registry = VarietyRegistry::load(&registry_path)?;
    let sets = SplitSets::load(dev)?;
    let text = std::fs::read_to_string(classifier).map_err(io_err(classifier))?;
    let classifier = VarietyClassifier::from_json(&text)?;
    let loaded = checkpoint::load(ckpt)?;
    let step = loaded.meta.get("step").and_then(|s| s.as_u64()).unwrap_or(0);
    let greedy = vec![DecodeConfig::greedy(max_new_tokens)];
    let dig = if grid_diglossia { decode_grid(max_new_tokens) } else { greedy.clone() };
    let fid = if grid { decode_grid(max_new_tokens) } else { greedy };
    let report = evaluate_model(
        &loaded.model,
        &loaded.tokenizer,
        &registry,
        &classifier,
        &[(split, &sets)],
        &dig,
        &fid,
        &stem(ckpt),
        step,
        seed,
    )?;
    write_file(out, report.to_csv_string()?)?;
    write_file(&out.with_extension("jsonl"), report.to_jsonl())?;
    for dim in [
        diglossia_core::metrics::Dimension::Diglossia,
        diglossia_core::metrics::Dimension::Fidelity,
    ] {
        if let Ok(v) = report.macro_average(dim) {
            println!("{split} {dim} macro: {v:.4}");
        }
    }
    Ok(())
}

fn sweep_cmd(config: &Path, out: Option<PathBuf>, grid_diglossia: bool, seed: Option<u64>) -> Result<()> {
    let mut spec = load_spec(config, seed)?;
    if let Some(o) = out {
        spec.output_dir = o;
    }
    if grid_diglossia {
        spec.eval.grid_diglossia = true;
    }
    let outcome = run_experiment(&spec)?;
    println!(
        "{}: trained {}, reused {}, {} trade-off records",
        outcome.dir.display(),
        outcome.trained,
        outcome.skipped,
        outcome.records.len()
    );
    for r in outcome.records.iter().filter(|r| r.is_best) {
        println!(
            "best {} {} lambda={:?} lr={:?}: top_p={} T={} diglossia={:.2} fidelity={:.3}",
            r.split, r.tag, r.lambda, r.learning_rate, r.top_p, r.temperature, r.diglossia, r.fidelity
        );
    }
    Ok(())
}

fn tradeoff_cmd(run: &Path, out: Option<&Path>) -> Result<()> {
    let reports = collect_run(run)?;
    let records = emit_tradeoff(&reports)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| run.join(experiment::TRADEOFF_CSV));
    write_file(&path, tradeoff::to_csv(&records)?)?;
    println!("{} records written to {}", records.len(), path.display());
    Ok(())
}

fn compare_cmd(tradeoff_csv: &Path, reference: Option<&Path>, out: Option<&Path>) -> Result<()> {
    require_file(tradeoff_csv)?;
    let text = std::fs::read_to_string(tradeoff_csv).map_err(io_err(tradeoff_csv))?;
    let records = tradeoff::from_csv(&text)?;
    let reference_text = match reference {
        Some(p) => {
            require_file(p)?;
            std::fs::read_to_string(p).map_err(io_err(p))?
        }
        None => EMBEDDED_REFERENCE.to_string(),
    };
    let table = compare_table(&records, &reference_text)?;
    match out {
        Some(p) => write_file(p, table),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    // the library resolves spec output directories through the variable
    if let Some(root) = &cli.output_root {
        std::env::set_var(OUTPUT_ROOT_ENV, root);
    }
    let out = |p: &Path| resolve_output(p);
    let seed = cli.seed;
    match cli.command {
        Command::SynthData { config, out: o } => synth_data(config.as_deref(), &out(&o), seed),
        Command::Prepare(mut args) => {
            args.out = out(&args.out);
            prepare_cmd(&args, seed)
        }
        Command::Train {
            config,
            lambda,
            lr,
            out: o,
            data,
        } => train_cmd(&config, lambda, lr, &out(&o), data.as_deref(), seed),
        Command::Generate {
            checkpoint,
            prompts,
            grid,
            top_p,
            temperature,
            max_new_tokens,
            out: o,
        } => {
            let configs = if grid {
                decode_grid(max_new_tokens)
            } else {
                vec![DecodeConfig {
                    temperature,
                    top_p,
                    max_new_tokens,
                }]
            };
            generate_cmd(&checkpoint, &prompts, configs, o.as_deref().map(out).as_deref(), seed.unwrap_or(42))
        }
        Command::Evaluate {
            checkpoint,
            dev,
            classifier,
            out: o,
            split,
            grid,
            grid_diglossia,
            max_new_tokens,
        } => evaluate_cmd(
            &checkpoint,
            &dev,
            &classifier,
            &out(&o),
            &split,
            grid,
            grid_diglossia,
            max_new_tokens,
            seed.unwrap_or(42),
        ),
        Command::Sweep {
            config,
            out: o,
            grid_diglossia,
        } => sweep_cmd(&config, o, grid_diglossia, seed),
        Command::Tradeoff { run, out: o } => tradeoff_cmd(&out(&run), o.as_deref().map(out).as_deref()),
        Command::Compare {
            tradeoff,
            reference,
            out: o,
        } => compare_cmd(&tradeoff, reference.as_deref(), o.as_deref().map(out).as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
