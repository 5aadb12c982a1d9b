use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use triplekit::markup::{parse_tree, serialize, Layout, ParseOptions};
use triplekit::persist::{verify, Persistence};
use triplekit::rdfio::{isomorphic, load_rdf_with, write_rdf_xml, RdfOptions};
use triplekit::service::{start, ServiceConfig};
use triplekit::store::Store;

#[derive(Parser)]
#[command(name = "triplekit", version, about = "RDF triple store toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the canonical serialization of an XML or HTML document.
    Canon {
        file: PathBuf,
        /// Parse in HTML mode.
        #[arg(long)]
        html: bool,
        /// Break element-only content over indented lines.
        #[arg(long)]
        indent: bool,
    },
    /// RDF/XML tools.
    Rdf {
        #[command(subcommand)]
        command: RdfCommand,
    },
    /// Persistence directory tools.
    Db {
        #[command(subcommand)]
        command: DbCommand,
    },
    /// Run the HTTP server.
    Serve(ServeArgs),
}

#[derive(Args)]
struct RdfInput {
    file: PathBuf,
    /// Source name used for blank node identifiers; defaults to the file name.
    #[arg(long)]
    source: Option<String>,
    /// Base IRI for relative references.
    #[arg(long)]
    base: Option<String>,
}

#[derive(Subcommand)]
enum RdfCommand {
    /// Print the triples of a document, one per line.
    Parse(RdfInput),
    /// Write a document back as RDF/XML and check that it reparses to the same graph.
    Roundtrip(RdfInput),
}

#[derive(Subcommand)]
enum DbCommand {
    /// Replace the journal of a source with a fresh snapshot.
    Snapshot {
        source: String,
        #[arg(long, env = "TRIPLEKIT_DB")]
        db: PathBuf,
    },
    /// Check every snapshot and journal in a directory.
    Verify { dir: PathBuf },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "TRIPLEKIT_HOST", default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "TRIPLEKIT_PORT", default_value_t = 3020, value_parser = clap::value_parser!(u16).range(1..))]
    port: u16,
    #[arg(long, env = "TRIPLEKIT_WORKERS", default_value_t = 4, value_parser = clap::value_parser!(u16).range(1..))]
    workers: u16,
    /// Persistence directory.
    #[arg(long, env = "TRIPLEKIT_DB")]
    db: Option<PathBuf>,
    #[arg(long, env = "TRIPLEKIT_ENTAILMENT", default_value = "rdfs")]
    entailment: String,
    /// Do not serve the administration pages.
    #[arg(long)]
    no_admin: bool,
}

fn canon(file: &Path, html: bool, indent: bool) -> Result<()> {
    let opts = if html { ParseOptions::html() } else { ParseOptions::xml() }.source_name(file.display().to_string());
    let reader = BufReader::new(File::open(file).with_context(|| format!("opening {}", file.display()))?);
    let nodes = parse_tree(reader, &opts)?;
    let layout = if indent { Layout::Indented } else { Layout::Compact };
    let mut out = serialize(&nodes, layout)?;
    if !out.ends_with('\n') {
        out.push('\n');
    }
    io::stdout().write_all(out.as_bytes())?;
    Ok(())
}

fn read_rdf(input: &RdfInput) -> Result<Vec<triplekit::rdfio::Triple>> {
    let source = match &input.source {
        Some(s) => s.clone(),
        None => input.file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into()),
    };
    let mut opts = RdfOptions::new(source);
    if let Some(b) = &input.base {
        opts = opts.base(b);
    }
    let reader = BufReader::new(File::open(&input.file).with_context(|| format!("opening {}", input.file.display()))?);
    Ok(load_rdf_with(reader, &opts)?)
}

fn rdf(command: &RdfCommand) -> Result<()> {
    let mut out = io::BufWriter::new(io::stdout().lock());
    match command {
        RdfCommand::Parse(input) => {
            for t in read_rdf(input)? {
                writeln!(out, "{t}")?;
            }
        }
        RdfCommand::Roundtrip(input) => {
            let triples = read_rdf(input)?;
            let mut doc = Vec::new();
            write_rdf_xml(&mut doc, &triples)?;
            let again = load_rdf_with(&doc[..], &RdfOptions::new("roundtrip"))?;
            if !isomorphic(&triples, &again) {
                bail!("round trip changed the graph: {} triples became {}", triples.len(), again.len());
            }
            out.write_all(&doc)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn db(command: &DbCommand) -> Result<()> {
    match command {
        DbCommand::Snapshot { source, db } => {
            let store = Store::new();
            let persistence = Persistence::attach(&store, db)?;
            if !store.read().sources().iter().any(|(s, _)| s == source) {
                bail!("no triples for source {source:?} in {}", db.display());
            }
            persistence.save_snapshot(source)?;
            let count = store.read().sources().into_iter().find(|(s, _)| s == source).map_or(0, |(_, n)| n);
            println!("{source}: {count} triples written to snapshot");
        }
        DbCommand::Verify { dir } => {
            let reports = verify(dir)?;
            for r in &reports {
                println!(
                    "{}: snapshot {} triples, journal {} transactions{}",
                    r.source,
                    r.snapshot_triples,
                    r.journal_transactions,
                    if r.partial { ", incomplete trailing transaction" } else { "" }
                );
            }
            println!("{} sources ok", reports.len());
        }
    }
    Ok(())
}

fn serve(args: &ServeArgs) -> Result<()> {
    let config = ServiceConfig {
        host: args.host.clone(),
        port: args.port,
        workers: args.workers as usize,
        db: args.db.clone(),
        entailment: args.entailment.clone(),
        admin: !args.no_admin,
    };
    let running = start(&config)?;
    log::info!("{} workers, {} entailment, admin {}", config.workers, config.entailment, if config.admin { "on" } else { "off" });
    println!("serving on {}", running.url("/"));
    loop {
        std::thread::park();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level)).init();
    let result = match &cli.command {
        Command::Canon { file, html, indent } => canon(file, *html, *indent),
        Command::Rdf { command } => rdf(command),
        Command::Db { command } => db(command),
        Command::Serve(args) => serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
