//! `locsent`: certify, decide, stretch and combine local sentences.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use locsent::combinators::{
    build_big_phi, build_phi_n, build_psi_prime_n, build_sn, build_tn, star, star_psi,
    CombinatorResult,
};
use locsent::finder::{decide_with, Answer, FinderOptions, Question};
use locsent::fixtures::fixture;
use locsent::indiscernible::{IndiscernibleWitness, Kind};
use locsent::locality::{certify, LocalityReport, Verdict};
use locsent::parser::parse_file;
use locsent::spectrum::{finite_spectrum, Membership};
use locsent::stretch::{
    blocks_agree, build_template, type_word, ultimately_periodic, word_of_model, OrderSpec,
};
use locsent::syntax::RelId;
use locsent::Error;

#[derive(Parser, Debug)]
#[command(
    name = "locsent",
    version,
    about = "Workbench for local first-order sentences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Closure bound; overrides the file's `steps` line.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Largest model size examined by certification.
    #[arg(long, global = true, default_value_t = 4, value_parser = positive)]
    max_size: usize,
    /// Number of indiscernibles; defaults to the computed N.
    #[arg(long, global = true)]
    big_n: Option<usize>,
    /// Node budget.
    #[arg(long, global = true, default_value_t = 10_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    budget: u64,
    /// Worker threads for the model finder.
    #[arg(long, global = true, value_parser = positive)]
    workers: Option<usize>,
    /// Largest size listed by `spectrum`.
    #[arg(long, global = true, default_value_t = 6)]
    ceiling: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Human-readable report.
    Text,
    /// Bare model or witness dumps.
    Dump,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Checks the closure bound on all models up to `--max-size`.
    Certify { input: String },
    /// Certifies, then decides one of: arbitrarily-large-finite, infinite,
    /// omega-model, regular-cardinal-model.
    Decide { input: String, question: Question },
    /// Finite spectrum up to `--ceiling`.
    Spectrum { input: String },
    /// Stretches a special witness along `k` or `omega-prefix(p)`.
    Stretch { input: String, order: OrderSpec },
    /// Builds a sentence: star φ | star-psi φ ψ | phi-n n | Phi | Sn φ n |
    /// psi-prime ψ n | Tn ψ n.
    Combine {
        name: String,
        inputs: Vec<String>,
        /// Base sentence of the tower (defaults to the bundled `phi0`).
        #[arg(long)]
        phi0: Option<String>,
        /// Outer sentence of `Tn` (defaults to the bundled `theta`).
        #[arg(long)]
        theta: Option<String>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Re-checks a witness dump against a sentence.
    Verify { input: String, witness: PathBuf },
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

/// Failure classes, each with its exit code.
enum Failure {
    Usage(anyhow::Error),
    Budget(String),
    Refused(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Budget(_) => 2,
            Failure::Refused(_) => 3,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(
                Error::Precondition(_)
                | Error::NotUnary(_)
                | Error::SymbolClash(_)
                | Error::NotAPartition(_),
            ) => Failure::Refused(e),
            _ => Failure::Usage(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

type Run = std::result::Result<String, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            match &f {
                Failure::Usage(e) | Failure::Refused(e) => eprintln!("error: {e:#}"),
                Failure::Budget(out) => print!("{out}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: &Cli) -> Run {
    match &cli.command {
        Command::Certify { input } => cmd_certify(cli, input),
        Command::Decide { input, question } => cmd_decide(cli, input, *question),
        Command::Spectrum { input } => cmd_spectrum(cli, input),
        Command::Stretch { input, order } => cmd_stretch(cli, input, *order),
        Command::Combine {
            name,
            inputs,
            phi0,
            theta,
            output,
        } => {
            let text = cmd_combine(cli, name, inputs, phi0.as_deref(), theta.as_deref())?;
            match output {
                Some(path) => {
                    std::fs::write(path, &text)
                        .with_context(|| format!("writing {}", path.display()))?;
                    Ok(String::new())
                }
                None => Ok(text),
            }
        }
        Command::Verify { input, witness } => cmd_verify(cli, input, witness),
    }
}

/// Reads a sentence file, or a bundled fixture when no such file exists.
fn load(cli: &Cli, input: &str) -> anyhow::Result<CombinatorResult> {
    let path = Path::new(input);
    if !path.exists() {
        let mut c =
            fixture(input).map_err(|_| anyhow!("no file or bundled sentence named `{input}`"))?;
        if let Some(n) = cli.steps {
            c.n = n;
        }
        return Ok(c);
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {input}"))?;
    let file = parse_file(&text).with_context(|| format!("parsing {input}"))?;
    let n = cli
        .steps
        .or(file.steps)
        .ok_or_else(|| anyhow!("{input} has no `steps` line; pass --steps"))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or(input);
    Ok(CombinatorResult::base(name, file.sentence, n))
}

fn report_text(r: &LocalityReport) -> String {
    let mut out = String::new();
    let verdict = match &r.verdict {
        Verdict::Pass => "yes".to_string(),
        Verdict::Fail(cx) => format!("no ({cx})"),
        Verdict::BudgetExceeded => "budget-exceeded".to_string(),
    };
    let _ = writeln!(out, "certified {verdict}");
    let _ = writeln!(
        out,
        "steps {}\nmax-size {}\nmodels {}\nobserved-steps {}",
        r.n, r.m, r.models, r.observed_steps
    );
    let _ = writeln!(
        out,
        "nodes {} conflicts {}",
        r.stats.nodes, r.stats.conflicts
    );
    out
}

fn cmd_certify(cli: &Cli, input: &str) -> Run {
    let c = load(cli, input)?;
    let (report, cert) = certify(&c.sentence, c.n, cli.max_size, cli.budget)?;
    let mut out = String::new();
    if cli.format == Format::Text {
        out.push_str(&report_text(&report));
    }
    match (&report.verdict, cert) {
        (Verdict::Pass, Some(cert)) => {
            let m = cert.metrics;
            if cli.format == Format::Text {
                let _ = writeln!(out, "v {} v' {} q {} N {}", m.v, m.v_prime, m.q, m.big_n);
            }
            Ok(out)
        }
        (Verdict::Fail(cx), _) => {
            out.push_str(&cx.model().dump());
            print!("{out}");
            Err(Failure::Refused(anyhow!(
                "not local at bound {}: {cx}",
                c.n
            )))
        }
        _ => Err(Failure::Budget(out)),
    }
}

fn cmd_decide(cli: &Cli, input: &str, question: Question) -> Run {
    let c = load(cli, input)?;
    let (report, cert) = certify(&c.sentence, c.n, cli.max_size, cli.budget)?;
    let cert = match (&report.verdict, cert) {
        (Verdict::Pass, Some(cert)) => cert,
        (Verdict::Fail(cx), _) => {
            return Err(Failure::Refused(anyhow!(
                "not local at bound {}: {cx}",
                c.n
            )))
        }
        _ => return Err(Failure::Budget(report_text(&report))),
    };
    let mut opts = FinderOptions::from_certificate(&cert, cli.budget);
    if let Some(n) = cli.big_n {
        opts.generators = n;
    }
    let r = decide_with(&cert, question, opts)?;
    let out = match cli.format {
        Format::Text => r.to_string(),
        Format::Dump => r.witness.as_ref().map(|w| w.dump()).unwrap_or_default(),
    };
    match r.answer {
        Answer::BudgetExceeded => Err(Failure::Budget(out)),
        _ => Ok(out),
    }
}

fn cmd_spectrum(cli: &Cli, input: &str) -> Run {
    let c = load(cli, input)?;
    let table = finite_spectrum(&c.sentence, cli.ceiling, cli.budget)?;
    let members: Vec<String> = table.members().iter().map(|k| k.to_string()).collect();
    let mut out = String::new();
    let _ = writeln!(out, "spectrum {{{}}}", members.join(", "));
    for (k, m) in &table.rows {
        let tag = match m {
            Membership::Member(_) => "yes",
            Membership::NonMember => "no",
            Membership::BudgetExceeded => "budget-exceeded",
        };
        let _ = writeln!(out, "size {k} {tag}");
        if let (Format::Dump, Membership::Member(model)) = (cli.format, m) {
            out.push_str(&model.dump());
        }
    }
    if table.complete() {
        Ok(out)
    } else {
        Err(Failure::Budget(out))
    }
}

fn cmd_stretch(cli: &Cli, input: &str, order: OrderSpec) -> Run {
    let c = load(cli, input)?;
    let cert = locsent::locality::LocalCertificate::assume(c.sentence.clone(), c.n)?;
    let mut opts = FinderOptions::from_certificate(&cert, cli.budget);
    opts.generators = cli.big_n.unwrap_or(opts.generators).max(3);
    let r = decide_with(&cert, Question::OmegaModel, opts)?;
    let w: IndiscernibleWitness = match (r.answer, &r.witness) {
        (Answer::Yes, Some(w)) => w.clone(),
        (Answer::BudgetExceeded, _) => return Err(Failure::Budget(r.to_string())),
        _ => {
            return Err(Failure::Refused(anyhow!(
                "no finite model generated by special indiscernibles"
            )))
        }
    };
    debug_assert_eq!(w.kind, Kind::Special);
    let tpl = build_template(&w)?;
    let (m, gens) = tpl.stretch(order)?;
    if cli.format == Format::Dump {
        return Ok(m.dump());
    }
    let mut out = String::new();
    let _ = writeln!(out, "order {order}\norder-type {}", tpl.order_type(order));
    let _ = writeln!(
        out,
        "ground {} block {}",
        tpl.template.ground, tpl.template.block
    );
    let gens: Vec<String> = gens.iter().map(|g| g.to_string()).collect();
    let _ = writeln!(out, "generators ({})", gens.join(", "));
    out.push_str(&m.dump());
    let sig = m.signature();
    let letters: Vec<RelId> = sig.relations().filter(|&r| sig.rel_arity(r) == 1).collect();
    if !letters.is_empty() {
        let word = word_of_model(&m, &letters).unwrap_or_else(|_| type_word(&m));
        let _ = writeln!(out, "word {word}");
        let block = tpl.template.block;
        let agree = blocks_agree(&word, tpl.template.ground, block, 1);
        match ultimately_periodic(&word.letters, block) {
            Some(p) if agree => {
                let _ = writeln!(out, "{p}");
            }
            _ => {
                let _ = writeln!(out, "periodicity undetermined on {} blocks", order.points());
            }
        }
    }
    Ok(out)
}

fn arg<'a>(inputs: &'a [String], i: usize, what: &str) -> anyhow::Result<&'a str> {
    inputs
        .get(i)
        .map(String::as_str)
        .ok_or_else(|| anyhow!("missing argument: {what}"))
}

fn level(inputs: &[String], i: usize) -> anyhow::Result<usize> {
    arg(inputs, i, "level n")?
        .parse()
        .map_err(|_| anyhow!("level must be a natural number"))
}

fn cmd_combine(
    cli: &Cli,
    name: &str,
    inputs: &[String],
    phi0: Option<&str>,
    theta: Option<&str>,
) -> Run {
    let phi0 = || load(cli, phi0.unwrap_or("phi0"));
    let result = match name {
        "star" => star(&load(cli, arg(inputs, 0, "φ")?)?)?,
        "star-psi" => star_psi(
            &load(cli, arg(inputs, 0, "φ")?)?,
            &load(cli, arg(inputs, 1, "ψ")?)?,
        )?,
        "phi-n" => build_phi_n(&phi0()?, level(inputs, 0)?)?,
        "Phi" => build_big_phi(&phi0()?)?,
        "Sn" => build_sn(
            &load(cli, arg(inputs, 0, "φ")?)?,
            &phi0()?,
            level(inputs, 1)?,
        )?,
        "psi-prime" => build_psi_prime_n(
            &load(cli, arg(inputs, 0, "ψ")?)?,
            &phi0()?,
            level(inputs, 1)?,
        )?,
        "Tn" => {
            let theta = load(cli, theta.unwrap_or("theta"))?;
            build_tn(
                &theta,
                &load(cli, arg(inputs, 0, "ψ")?)?,
                &phi0()?,
                level(inputs, 1)?,
            )?
        }
        other => {
            return Err(Failure::Usage(anyhow!(
                "unknown construction `{other}` (star, star-psi, phi-n, Phi, Sn, psi-prime, Tn)"
            )))
        }
    };
    Ok(format!("{result}\n"))
}

fn cmd_verify(cli: &Cli, input: &str, witness: &Path) -> Run {
    let c = load(cli, input)?;
    let text = std::fs::read_to_string(witness)
        .with_context(|| format!("reading {}", witness.display()))?;
    let w = IndiscernibleWitness::parse(c.sentence.signature_arc().clone(), &text)
        .with_context(|| format!("parsing {}", witness.display()))?;
    let model = w.model.satisfies(&c.sentence)?;
    let indiscernible = w.verify(w.steps + 1)?;
    let yn = |b: bool| if b { "yes" } else { "no" };
    let out = format!(
        "model {}\n{} indiscernibles {}\n",
        yn(model),
        w.kind,
        yn(indiscernible)
    );
    if model && indiscernible {
        Ok(out)
    } else {
        print!("{out}");
        Err(Failure::Refused(anyhow!("witness rejected")))
    }
}
