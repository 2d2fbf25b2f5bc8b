//! Benchmark command-line front end.
//!
//! Three subcommands drive the library on instance files: `enumerate`
//! writes the exhaustive topology landscape of a small instance,
//! `optimize` runs the novelty-driven binary PSO over a list of seeds and
//! persists every evaluated design plus the visited-topology archive, and
//! `analyze` prints the full structural response of one sized topology.
//!
//! Exit codes: 0 on success, 2 on validation errors (bad instance,
//! parameters or arguments), 3 on I/O failures.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use truss_core::{
    analyze, enumerate, run_nbpso, top_k_distinct, weight, EnumerateConfig, EvaluatedDesign,
    Instance, InstanceError, LowerConfig, SearchError, SearchParams, SizingError, Topology,
};

#[derive(Parser)]
#[command(name = "truss-bench", version, about = "Bilevel truss topology and sizing benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exhaustively evaluate every topology of a small instance and write
    /// the landscape table (one row per bit string).
    Enumerate {
        /// Instance file (JSON)
        #[arg(long)]
        instance: PathBuf,
        /// Output directory for the landscape CSV
        #[arg(long)]
        out: PathBuf,
        /// Independent lower-level runs per feasible topology
        #[arg(long, default_value_t = 30)]
        runs: usize,
        /// Base seed for the lower-level run streams
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the m ≤ 12 tractability guard
        #[arg(long)]
        force: bool,
    },
    /// Run the novelty-driven binary PSO for each seed and persist every
    /// evaluated design and the final archive.
    Optimize {
        /// Instance file (JSON)
        #[arg(long)]
        instance: PathBuf,
        /// Search parameter file (JSON); defaults apply when omitted
        #[arg(long)]
        params: Option<PathBuf>,
        /// Comma-separated list of run seeds
        #[arg(long)]
        seeds: String,
        /// Output directory for per-seed records and archives
        #[arg(long)]
        out: PathBuf,
    },
    /// Analyze one sized topology and print displacements, stresses,
    /// reactions and constraint ratios.
    Analyze {
        /// Instance file (JSON)
        #[arg(long)]
        instance: PathBuf,
        /// Topology bit string, one character per group
        #[arg(long)]
        bits: String,
        /// Comma-separated areas, one per group (inactive entries ignored)
        #[arg(long)]
        areas: String,
    },
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Io(m) => m,
        }
    }
}

impl From<InstanceError> for CliError {
    fn from(err: InstanceError) -> Self {
        match err {
            InstanceError::Io { .. } => CliError::Io(err.to_string()),
            _ => CliError::Validation(err.to_string()),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(err: SearchError) -> Self {
        CliError::Validation(err.to_string())
    }
}

impl From<SizingError> for CliError {
    fn from(err: SizingError) -> Self {
        CliError::Validation(err.to_string())
    }
}

fn io_err(context: &str, err: std::io::Error) -> CliError {
    CliError::Io(format!("{context}: {err}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Enumerate {
            instance,
            out,
            runs,
            seed,
            force,
        } => cmd_enumerate(&instance, &out, runs, seed, force),
        Command::Optimize {
            instance,
            params,
            seeds,
            out,
        } => cmd_optimize(&instance, params.as_deref(), &seeds, &out),
        Command::Analyze {
            instance,
            bits,
            areas,
        } => cmd_analyze(&instance, &bits, &areas),
    }
}

fn content_hash(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_err("reading instance file", e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| io_err(&format!("writing {}", path.display()), e))
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// One persisted run: which instance and mode produced it, the exact
/// parameter snapshot and seed, every evaluated design, and the wall
/// time. Re-running with the stored seed and parameters reproduces the
/// same designs, so the wall time stays out of the CSV payloads (they
/// replay byte-identically) and is reported on stdout instead.
struct RunRecord {
    instance_name: String,
    instance_sha256: String,
    mode: &'static str,
    params_snapshot: String,
    seed: u64,
    wall: std::time::Duration,
}

impl RunRecord {
    fn header(&self) -> String {
        format!(
            "# instance: {}\n# instance_sha256: {}\n# mode: {}\n# seed: {}\n# params: {}\n",
            self.instance_name, self.instance_sha256, self.mode, self.seed, self.params_snapshot
        )
    }
}

/// Per-group areas of a design as a semicolon-joined list; inactive
/// groups are empty fields. Allows recomputing the reported weight from
/// the file alone.
fn areas_field(design: &EvaluatedDesign) -> String {
    match &design.sizing {
        Some(sizing) => sizing
            .areas
            .iter()
            .map(|a| a.map(|v| v.to_string()).unwrap_or_default())
            .collect::<Vec<_>>()
            .join(";"),
        None => String::new(),
    }
}

/// Sidecar table carrying the sizing vector behind each reported weight:
/// one row per distinct topology that reached the lower level.
fn designs_sidecar(header: &str, designs: &[&EvaluatedDesign]) -> String {
    let mut csv = String::from(header);
    csv.push_str("bits,feasible,weight,areas\n");
    let mut seen = std::collections::HashSet::new();
    for design in designs {
        if design.sizing.is_none() || !seen.insert(design.topology_bits.clone()) {
            continue;
        }
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            design.topology_bits,
            design.weight.is_some(),
            fmt_opt(design.weight),
            areas_field(design)
        );
    }
    csv
}

fn cmd_enumerate(
    instance_path: &Path,
    out: &Path,
    runs: usize,
    seed: u64,
    force: bool,
) -> Result<(), CliError> {
    let instance = Instance::load(instance_path)?;
    let hash = content_hash(instance_path)?;
    std::fs::create_dir_all(out).map_err(|e| io_err("creating output directory", e))?;

    let cfg = EnumerateConfig {
        runs_per_topology: runs,
        lower: LowerConfig::default(),
        seed,
        force,
    };
    let started = Instant::now();
    let mut designs = enumerate(&instance, &cfg)?;
    let record = RunRecord {
        instance_name: instance.name().to_string(),
        instance_sha256: hash.clone(),
        mode: "enumerate",
        params_snapshot: serde_json::to_string(&cfg).expect("config serializes"),
        seed,
        wall: started.elapsed(),
    };

    // one row per topology, sorted by d_H then bits
    designs.sort_by(|a, b| {
        a.d_hamming
            .cmp(&b.d_hamming)
            .then_with(|| a.topology_bits.cmp(&b.topology_bits))
    });

    let mut csv = record.header();
    csv.push_str("bits,d_hamming,feasible,median_weight\n");
    for design in &designs {
        let upper_feasible = design.sizing.is_some();
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            design.topology_bits,
            design.d_hamming,
            upper_feasible,
            fmt_opt(design.weight)
        );
    }
    let path = out.join(format!("{}_enumerate.csv", instance.name()));
    write_file(&path, &csv)?;

    let refs: Vec<&EvaluatedDesign> = designs.iter().collect();
    let sidecar = designs_sidecar(&record.header(), &refs);
    write_file(&out.join(format!("{}_enumerate_designs.csv", instance.name())), &sidecar)?;

    let feasible = designs.iter().filter(|d| d.sizing.is_some()).count();
    let sized = designs.iter().filter(|d| d.weight.is_some()).count();
    println!(
        "{}: {} topologies, {} upper-feasible, {} with feasible sizing; wall time {:.2?}",
        instance.name(),
        designs.len(),
        feasible,
        sized,
        record.wall
    );
    print_top3(&instance, &designs);
    println!("landscape written to {}", path.display());
    Ok(())
}

fn parse_seeds(seeds: &str) -> Result<Vec<u64>, CliError> {
    let list: Result<Vec<u64>, _> = seeds
        .split(',')
        .map(|s| s.trim().parse::<u64>())
        .collect();
    let list = list.map_err(|e| CliError::Validation(format!("bad --seeds list: {e}")))?;
    if list.is_empty() {
        return Err(CliError::Validation("--seeds list is empty".into()));
    }
    Ok(list)
}

fn cmd_optimize(
    instance_path: &Path,
    params_path: Option<&Path>,
    seeds: &str,
    out: &Path,
) -> Result<(), CliError> {
    let instance = Instance::load(instance_path)?;
    let hash = content_hash(instance_path)?;
    let seeds = parse_seeds(seeds)?;
    let base_params: SearchParams = match params_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err("reading params file", e))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("bad params file: {e}")))?
        }
        None => SearchParams::default(),
    };
    std::fs::create_dir_all(out).map_err(|e| io_err("creating output directory", e))?;

    let params_json = serde_json::to_string(&base_params).expect("params serialize");
    let mut all_designs: Vec<EvaluatedDesign> = Vec::new();
    for &seed in &seeds {
        let mut params = base_params.clone();
        params.seed = seed;
        let started = Instant::now();
        let run = run_nbpso(&instance, &params)?;
        let record = RunRecord {
            instance_name: instance.name().to_string(),
            instance_sha256: hash.clone(),
            mode: "nbpso",
            params_snapshot: params_json.clone(),
            seed,
            wall: started.elapsed(),
        };

        let mut records_csv = record.header();
        records_csv.push_str("iter,particle,bits,novelty,feasible,weight\n");
        for record in &run.records {
            let _ = writeln!(
                records_csv,
                "{},{},{},{},{},{}",
                record.iteration,
                record.particle,
                record.design.topology_bits,
                record.novelty,
                record.design.weight.is_some(),
                fmt_opt(record.design.weight)
            );
        }
        let records_path = out.join(format!("{}_seed{}_records.csv", instance.name(), seed));
        write_file(&records_path, &records_csv)?;

        let mut archive_csv = record.header();
        archive_csv.push_str("bits,first_seen_iteration\n");
        for (topology, iteration) in run.archive.entries() {
            let _ = writeln!(archive_csv, "{topology},{iteration}");
        }
        let archive_path = out.join(format!("{}_seed{}_archive.csv", instance.name(), seed));
        write_file(&archive_path, &archive_csv)?;

        let refs: Vec<&EvaluatedDesign> = run.records.iter().map(|r| &r.design).collect();
        let sidecar = designs_sidecar(&record.header(), &refs);
        write_file(&out.join(format!("{}_seed{}_designs.csv", instance.name(), seed)), &sidecar)?;

        let best = run.best_weight();
        println!(
            "seed {seed}: {} evaluations, archive {} topologies, best weight {}, {} repair restarts, wall time {:.2?}",
            run.records.len(),
            run.archive.len(),
            best.map(|w| w.to_string()).unwrap_or_else(|| "-".into()),
            run.repair_restarts,
            record.wall
        );
        all_designs.extend(run.records.into_iter().map(|r| r.design));
    }

    print_top3(&instance, &all_designs);
    Ok(())
}

/// Print the three lightest distinct feasible designs: weight, bits and
/// the member ids each design removes from the ground structure.
fn print_top3(instance: &Instance, designs: &[EvaluatedDesign]) {
    let top = top_k_distinct(designs, 3);
    if top.is_empty() {
        println!("no feasible designs found");
        return;
    }
    if top.len() < 3 {
        println!("warning: only {} distinct feasible designs available", top.len());
    }
    for (label, design) in ["(a)", "(b)", "(c)"].iter().zip(top.iter()) {
        let topology = design.topology();
        let removed: Vec<String> = (0..instance.group_count())
            .filter(|g| !topology.is_active(*g))
            .flat_map(|g| instance.groups()[g].iter().map(|id| id.to_string()))
            .collect();
        println!(
            "{label} weight {} bits {} d_H {} removed members [{}]",
            design.weight.map(|w| w.to_string()).unwrap_or_default(),
            design.topology_bits,
            design.d_hamming,
            removed.join(",")
        );
    }
}

fn parse_areas(areas: &str, m: usize) -> Result<Vec<f64>, CliError> {
    let list: Result<Vec<f64>, _> = areas.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let list = list.map_err(|e| CliError::Validation(format!("bad --areas list: {e}")))?;
    if list.len() != m {
        return Err(CliError::Validation(format!(
            "--areas needs one value per group ({m}), got {}",
            list.len()
        )));
    }
    Ok(list)
}

fn cmd_analyze(instance_path: &Path, bits: &str, areas: &str) -> Result<(), CliError> {
    let instance = Instance::load(instance_path)?;
    let topology = Topology::from_bit_string(bits)?;
    if topology.len() != instance.group_count() {
        return Err(CliError::Validation(format!(
            "--bits needs {} characters, got {}",
            instance.group_count(),
            topology.len()
        )));
    }
    let areas = parse_areas(areas, instance.group_count())?;

    let w = weight(&instance, &topology, &areas).map_err(|e| CliError::Validation(e.to_string()))?;
    println!("instance: {}", instance.name());
    println!("topology: {} (d_H {})", topology, topology.d_hamming());
    println!("weight: {w}");

    let mut worst_stress = 0.0f64;
    let mut worst_disp = 0.0f64;
    let mut stable_everywhere = true;
    for (c, case) in instance.load_cases().iter().enumerate() {
        println!("load case {c}:");
        let result = analyze(&instance, &topology, &areas, case)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        if !result.stable {
            stable_everywhere = false;
            println!("  internally unstable (mechanism); no response computed");
            continue;
        }
        let limits = instance.member_limits();
        for (member_id, sigma) in &result.stresses {
            let idx = instance
                .members()
                .iter()
                .position(|m| m.id == *member_id)
                .expect("member exists");
            let limit = &limits[idx];
            let ratio = if *sigma >= 0.0 {
                sigma / limit.tension
            } else {
                -sigma / limit.compression
            };
            worst_stress = worst_stress.max(ratio);
            println!("  member {member_id}: stress {sigma:.6} (ratio {ratio:.4})");
        }
        for (node_id, components) in &result.displacements {
            let formatted: Vec<String> = components.iter().map(|u| format!("{u:.6}")).collect();
            println!("  node {node_id}: displacement [{}]", formatted.join(", "));
            for (axis, u) in components.iter().enumerate() {
                if let Some(limit) = instance.displacement_limits()[axis] {
                    worst_disp = worst_disp.max(u.abs() / limit);
                }
            }
        }
        for (node_id, axis, force) in &result.reactions {
            println!("  node {node_id} axis {axis}: reaction {force:.6}");
        }
    }
    if stable_everywhere {
        println!("max stress ratio: {worst_stress:.6}");
        println!("max displacement ratio: {worst_disp:.6}");
        let feasible = worst_stress <= 1.0 + truss_core::CONSTRAINT_TOL
            && worst_disp <= 1.0 + truss_core::CONSTRAINT_TOL;
        println!("verdict: {}", if feasible { "feasible" } else { "constraint-violating" });
    } else {
        println!("verdict: internally unstable");
    }
    Ok(())
}
