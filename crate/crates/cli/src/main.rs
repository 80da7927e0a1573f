//! `superunit`: generate chips, compile them, simulate sweeps, analyze
//! ensembles and emit plot data.
//!
//! Exit codes: 0 ok, 2 unencodable chip, 3 uncoverable stabilizer, 1 other.
//! Failures print one machine-readable `error kind=<kind> message=<text>` line
//! on stderr.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use superunit::formats::{self, ResultRow};
use superunit::lattice::{generate_chip, Chip, Device};
use superunit::metrics::{self, ChipMetrics, Mode};
use superunit::montecarlo::{run_logical_error_rate, trace_syndromes, Prepared, RunConfig};
use superunit::pipeline::{compile, Compiled};
use superunit::Error;

#[derive(Parser)]
#[command(name = "superunit", version, about = "Defect-tolerant surface code toolchain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write chip files from (distance, yield, seed) or normalize a chip description.
    Gen(GenArgs),
    /// Compile chips into circuit text, stabilizer dumps and metrics.
    Compile(ChipArgs),
    /// Estimate logical error rates.
    Sim(SimArgs),
    /// Correlate metrics with rates and cull an ensemble.
    Analyze(AnalyzeArgs),
    /// Emit gnuplot data and scripts from a results CSV.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct OutArg {
    /// Output directory.
    #[arg(long, env = "SUPERUNIT_OUT", default_value = "superunit-out")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct ChipArgs {
    /// Chip JSON, a grid text file, or a directory of chip JSON files.
    #[arg(long)]
    chip_file: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    distance: usize,
    #[arg(long = "yield", default_value_t = 1.0)]
    yield_: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    chip: ChipArgs,
    /// Number of chips; seeds run from `--seed` upward.
    #[arg(long, default_value_t = 1)]
    count: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    chip: ChipArgs,
    /// Physical error rate; repeat for a sweep.
    #[arg(long = "p", required = true)]
    p: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    target_errors: u64,
    #[arg(long, default_value_t = 1_000_000)]
    max_rounds: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    idle_noise: Switch,
    /// Also write this many rounds of raw syndrome outcomes at the first p.
    #[arg(long)]
    trace_rounds: Option<u64>,
    /// Also write both nests and their 3-D view.
    #[arg(long)]
    dump_nest: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Directory written by `sim` (results.csv, metrics.csv, status.csv).
    #[arg(long = "in")]
    input: PathBuf,
    /// Keep fraction; repeat for several culling levels.
    #[arg(long, default_value = "0.5")]
    cull: Vec<f64>,
    /// Reference p; defaults to the only p present.
    #[arg(long = "p")]
    p: Option<f64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct ReportArgs {
    /// Results CSV.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "logical X error rate")]
    title: String,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Other(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<metrics::MetricsError> for CliError {
    fn from(e: metrics::MetricsError) -> Self {
        CliError::Other(e.to_string())
    }
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(Error::Unencodable(_)) => "unencodable",
            CliError::Core(Error::Uncoverable(_)) => "uncoverable",
            CliError::Core(Error::Invalid(_)) => "invalid",
            CliError::Core(Error::Io(_)) => "io",
            CliError::Core(Error::Json(_)) => "json",
            CliError::Other(_) => "other",
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Core(Error::Unencodable(_)) => 2,
            CliError::Core(Error::Uncoverable(_)) => 3,
            _ => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Other(s) => s.clone(),
        }
    }
}

type Res<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Compile(a) => cmd_compile(&a),
        Command::Sim(a) => cmd_sim(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Report(a) => cmd_report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Grid text: one row per line, `x` for a faulty device, any other
/// non-space character for a working one.
fn chip_from_grid(text: &str, seed: u64) -> Res<Chip> {
    let rows: Vec<Vec<char>> = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.chars().filter(|c| !c.is_whitespace()).collect())
        .collect();
    let n = rows.len();
    if n < 3 || n % 2 == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Core(Error::Invalid(format!(
            "grid must be square with odd side >= 3, got {n} rows"
        ))));
    }
    let devices = (0..n * n)
        .map(|i| Device {
            role: superunit::lattice::role_at(i / n, i % n),
            working: rows[i / n][i % n] != 'x',
        })
        .collect::<Vec<_>>();
    let working = devices.iter().filter(|d| d.working).count();
    Ok(Chip {
        distance: n.div_ceil(2),
        yield_: working as f64 / (n * n) as f64,
        seed,
        devices,
    })
}

fn load_chip(path: &Path, seed: u64) -> Res<Chip> {
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        Ok(formats::chip_from_json(&text)?)
    } else {
        chip_from_grid(&text, seed)
    }
}

fn validate(a: &ChipArgs) -> Res<()> {
    if !(a.yield_ > 0.0 && a.yield_ <= 1.0) {
        return Err(CliError::Core(Error::Invalid(format!(
            "yield {} outside (0, 1]",
            a.yield_
        ))));
    }
    if a.distance < 2 {
        return Err(CliError::Core(Error::Invalid(format!(
            "distance {} below 2",
            a.distance
        ))));
    }
    Ok(())
}

/// Chips named by file stem, or one generated chip.
fn chips(a: &ChipArgs) -> Res<Vec<(String, Chip)>> {
    validate(a)?;
    match &a.chip_file {
        Some(p) if p.is_dir() => {
            let mut files: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(CliError::Other(format!("no chip files in {}", p.display())));
            }
            files.iter().map(|f| Ok((stem(f), load_chip(f, a.seed)?))).collect()
        }
        Some(p) => Ok(vec![(stem(p), load_chip(p, a.seed)?)]),
        None => Ok(vec![(
            chip_id(a.distance, a.yield_, a.seed),
            generate_chip(a.distance, a.yield_, a.seed),
        )]),
    }
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "chip".into())
}

fn chip_id(d: usize, y: f64, seed: u64) -> String {
    format!("d{d}_y{y}_s{seed}")
}

fn cmd_gen(a: &GenArgs) -> Res<()> {
    let out = &a.chip.out.out;
    fs::create_dir_all(out)?;
    let list: Vec<(String, Chip)> = match &a.chip.chip_file {
        Some(_) => chips(&a.chip)?,
        None => {
            validate(&a.chip)?;
            (0..a.count)
                .map(|i| {
                    let seed = a.chip.seed + i;
                    (
                        chip_id(a.chip.distance, a.chip.yield_, seed),
                        generate_chip(a.chip.distance, a.chip.yield_, seed),
                    )
                })
                .collect()
        }
    };
    for (id, chip) in &list {
        let path = out.join(format!("{id}.json"));
        fs::write(&path, formats::chip_to_json(chip))?;
        let working = chip.devices.iter().filter(|d| d.working).count();
        println!("{} devices={} working={}", path.display(), chip.n_devices(), working);
    }
    Ok(())
}

/// Compile every chip. With a single chip, failures are errors; with several,
/// they are recorded as statuses.
fn compile_all(list: &[(String, Chip)]) -> Res<Vec<(String, Chip, Result<Compiled, Error>)>> {
    let out: Vec<_> = list
        .iter()
        .map(|(id, chip)| (id.clone(), chip.clone(), compile(chip)))
        .collect();
    if out.len() == 1 {
        if let Err(e) = &out[0].2 {
            return Err(CliError::Core(match e {
                Error::Unencodable(s) => Error::Unencodable(s.clone()),
                Error::Uncoverable(s) => Error::Uncoverable(s.clone()),
                other => Error::Invalid(other.to_string()),
            }));
        }
    }
    Ok(out)
}

fn status_name(r: &Result<Compiled, Error>) -> &'static str {
    match r {
        Ok(_) => "ok",
        Err(Error::Unencodable(_)) => "unencodable",
        Err(Error::Uncoverable(_)) => "uncoverable",
        Err(_) => "error",
    }
}

fn write_status(dir: &Path, compiled: &[(String, Chip, Result<Compiled, Error>)]) -> Res<()> {
    let mut s = String::from("# superunit status v1\nchip_id,d,y,status\n");
    for (id, chip, r) in compiled {
        s.push_str(&format!("{id},{},{},{}\n", chip.distance, chip.yield_, status_name(r)));
    }
    fs::write(dir.join("status.csv"), s)?;
    Ok(())
}

fn write_metrics_file(dir: &Path, rows: &[(String, ChipMetrics)]) -> Res<()> {
    let mut buf = Vec::new();
    formats::write_metrics(&mut buf, rows)?;
    fs::write(dir.join("metrics.csv"), buf)?;
    Ok(())
}

fn cmd_compile(a: &ChipArgs) -> Res<()> {
    let out = &a.out.out;
    fs::create_dir_all(out)?;
    let compiled = compile_all(&chips(a)?)?;
    let mut rows = Vec::new();
    for (id, _, r) in &compiled {
        if let Ok(c) = r {
            fs::write(out.join(format!("{id}.circuit.txt")), c.whole.to_text())?;
            fs::write(
                out.join(format!("{id}.stabilizers.txt")),
                superunit::stabilizers::dump(&c.stabilizers),
            )?;
            rows.push((id.clone(), metrics::compute_metrics(c)));
            println!(
                "{id}: {} stabilizers, steps per round {:.3}",
                c.stabilizers.len(),
                c.whole.steps_per_round
            );
        } else {
            println!("{id}: {}", status_name(r));
        }
    }
    write_status(out, &compiled)?;
    write_metrics_file(out, &rows)
}

fn cmd_sim(a: &SimArgs) -> Res<()> {
    if a.p.iter().any(|&p| !(0.0..=0.02).contains(&p)) {
        return Err(CliError::Core(Error::Invalid("p must lie in [0, 0.02]".into())));
    }
    if a.target_errors == 0 || a.max_rounds == 0 || a.workers == 0 {
        return Err(CliError::Core(Error::Invalid(
            "targets, rounds and workers must be positive".into(),
        )));
    }
    let out = &a.chip.out.out;
    fs::create_dir_all(out)?;
    let compiled = compile_all(&chips(&a.chip)?)?;
    write_status(out, &compiled)?;
    let cfg = RunConfig {
        p: a.p.clone(),
        target_errors: a.target_errors,
        max_rounds: a.max_rounds,
        workers: a.workers,
        seed: a.chip.seed,
        ..RunConfig::default()
    };
    let mut results = Vec::new();
    let mut metric_rows = Vec::new();
    for (id, chip, r) in compiled {
        let Ok(c) = r else { continue };
        metric_rows.push((id.clone(), metrics::compute_metrics(&c)));
        let prep = Prepared::from_compiled(c, matches!(a.idle_noise, Switch::On));
        if a.dump_nest {
            let homes: Vec<_> = prep.compiled.stabilizers.stabilizers.iter().map(|s| s.home()).collect();
            for n in &prep.nests {
                let kind = n.kind;
                fs::write(out.join(format!("{id}.nest_{kind}.txt")), formats::nest_dump(n))?;
                let p = a.p.iter().copied().find(|&p| p > 0.0).unwrap_or(1e-3);
                fs::write(
                    out.join(format!("{id}.nest_{kind}.view")),
                    formats::nest_visualization(n, &homes, p),
                )?;
            }
        }
        if let Some(rounds) = a.trace_rounds {
            let rows = trace_syndromes(&prep, a.p[0], rounds, a.chip.seed);
            let mut buf = Vec::new();
            formats::write_trace(&mut buf, &rows)?;
            fs::write(out.join(format!("{id}.trace.csv")), buf)?;
        }
        for point in run_logical_error_rate(&prep, &cfg) {
            eprintln!(
                "{id} p={} rounds={} x={} z={} x_rate={:.4e}",
                point.p, point.rounds, point.x_errors, point.z_errors, point.x_rate
            );
            results.push(ResultRow::new(&id, &chip, &point));
        }
    }
    let mut buf = Vec::new();
    formats::write_results(&mut buf, &results)?;
    fs::write(out.join("results.csv"), buf)?;
    write_metrics_file(out, &metric_rows)?;
    println!("{}", out.join("results.csv").display());
    Ok(())
}

fn read_metrics(path: &Path) -> Res<BTreeMap<String, ChipMetrics>> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let head: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::Other("empty metrics file".into()))?
        .split(',')
        .collect();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != head.len() {
            return Err(CliError::Other(format!(
                "metrics row has {} fields, header {}",
                f.len(),
                head.len()
            )));
        }
        let get = |name: &str| -> Res<f64> {
            let i = head
                .iter()
                .position(|h| *h == name)
                .ok_or_else(|| CliError::Other(format!("missing column {name}")))?;
            f[i].parse()
                .map_err(|_| CliError::Other(format!("bad value {} in {name}", f[i])))
        };
        let m = ChipMetrics {
            n_stabilizers: get("n_stabilizers")? as usize,
            n_faulty_qubits: get("n_faulty_qubits")? as usize,
            n_faulty_data: get("n_faulty_data")? as usize,
            n_faulty_syndrome: get("n_faulty_syndrome")? as usize,
            reduced_distance: get("reduced_distance")? as usize,
            n_z_stabs: get("n_z_stabs")? as usize,
            biggest_qubits_z: get("biggest_qubits_z")?,
            average_qubits_z: get("average_qubits_z")?,
            biggest_dataq_z: get("biggest_dataq_z")?,
            average_dataq_z: get("average_dataq_z")?,
            deepest_depth_z: get("deepest_depth_z")?,
            average_depth_z: get("average_depth_z")?,
            biggest_kq_z: get("biggest_kq_z")?,
            average_kq_z: get("average_kq_z")?,
            biggest_kdq_z: get("biggest_kdq_z")?,
            average_kdq_z: get("average_kdq_z")?,
            biggest_cycle_z: get("biggest_cycle_z")?,
            average_cycle_z: get("average_cycle_z")?,
            biggest_cq_z: get("biggest_cq_z")?,
            average_cq_z: get("average_cq_z")?,
            biggest_cdq_z: get("biggest_cdq_z")?,
            average_cdq_z: get("average_cdq_z")?,
            z_measurements_per_step: get("z_measurements_per_step")?,
            steps_per_round: get("steps_per_round")?,
        };
        out.insert(f[0].to_string(), m);
    }
    Ok(out)
}

fn cmd_analyze(a: &AnalyzeArgs) -> Res<()> {
    let results = formats::read_results(fs::File::open(a.input.join("results.csv"))?)?;
    let metrics_by_chip = read_metrics(&a.input.join("metrics.csv"))?;
    let status = fs::read_to_string(a.input.join("status.csv"))?;
    let original = status
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .count();
    let p = match a.p {
        Some(p) => p,
        None => {
            let mut ps: Vec<f64> = results.iter().map(|r| r.p).collect();
            ps.sort_by(f64::total_cmp);
            ps.dedup();
            match ps.as_slice() {
                [p] => *p,
                _ => return Err(CliError::Other("several p present; pass --p".into())),
            }
        }
    };
    let at_p: Vec<&ResultRow> = results.iter().filter(|r| (r.p - p).abs() < 1e-12).collect();
    let mut ms = Vec::new();
    let mut rates = Vec::new();
    for r in &at_p {
        let m = metrics_by_chip
            .get(&r.chip_id)
            .ok_or_else(|| CliError::Other(format!("no metrics for {}", r.chip_id)))?;
        ms.push(m.clone());
        rates.push(r.x_rate);
    }
    let out = &a.out.out;
    fs::create_dir_all(out)?;
    let mut corr = Vec::new();
    for mode in [Mode::Linear, Mode::Logarithmic] {
        // Zero rates have no logarithm; log mode uses only positive ones.
        let keep: Vec<usize> = (0..rates.len())
            .filter(|&i| mode == Mode::Linear || rates[i] > 0.0)
            .collect();
        let sub_m: Vec<ChipMetrics> = keep.iter().map(|&i| ms[i].clone()).collect();
        let sub_r: Vec<f64> = keep.iter().map(|&i| rates[i]).collect();
        for (rank, (name, r)) in metrics::rank_metrics(&sub_m, &sub_r, mode).into_iter().enumerate() {
            corr.push((name, mode, r, rank + 1));
        }
    }
    let mut buf = Vec::new();
    formats::write_correlations(&mut buf, &corr)?;
    fs::write(out.join("correlation.csv"), buf)?;
    let records: Vec<(String, f64)> = at_p.iter().map(|r| (r.chip_id.clone(), r.x_rate)).collect();
    let mut report = format!(
        "# superunit culling v1\n# p={p} generated={original} encodable={}\nkeep_fraction,kept,geomean_x_rate,chips\n",
        records.len()
    );
    let all = metrics::geometric_mean(&rates);
    report.push_str(&format!(
        "all,{},{},{}\n",
        records.len(),
        fmt_opt(all),
        join_ids(&records)
    ));
    for &f in &a.cull {
        let kept = metrics::cull(&records, f, original.max(records.len()))?;
        let gm = metrics::geometric_mean(&kept.iter().map(|r| r.1).collect::<Vec<_>>());
        report.push_str(&format!("{f},{},{},{}\n", kept.len(), fmt_opt(gm), join_ids(&kept)));
        println!("keep {f}: {} chips, geometric mean {}", kept.len(), fmt_opt(gm));
    }
    fs::write(out.join("culling.csv"), report)?;
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), |v| format!("{v:e}"))
}

fn join_ids(records: &[(String, f64)]) -> String {
    records.iter().map(|r| r.0.as_str()).collect::<Vec<_>>().join(" ")
}

fn cmd_report(a: &ReportArgs) -> Res<()> {
    let rows = formats::read_results(fs::File::open(&a.input)?)?;
    let mut curves: BTreeMap<String, Vec<ResultRow>> = BTreeMap::new();
    for r in rows {
        curves.entry(r.chip_id.clone()).or_default().push(r);
    }
    let curves: Vec<(String, Vec<ResultRow>)> = curves.into_iter().collect();
    let labels: Vec<String> = curves.iter().map(|c| c.0.clone()).collect();
    let out = &a.out.out;
    fs::create_dir_all(out)?;
    fs::write(out.join("plot.dat"), formats::gnuplot_data(&curves))?;
    fs::write(
        out.join("plot.gp"),
        formats::gnuplot_script("plot.dat", &labels, &a.title, "plot.png"),
    )?;
    println!("{}", out.join("plot.gp").display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use superunit::lattice::Role;

    #[test]
    fn grid_parses() {
        let chip = chip_from_grid("ooooo\nooooo\nooxoo\nooooo\nooooo\n", 0).unwrap();
        assert_eq!(chip.distance, 3);
        assert_eq!(chip.n_faulty(), 1);
        assert_eq!(chip.role(superunit::DeviceId::new(2, 2)), Role::Data);
        assert!(chip_from_grid("ooo\noo\nooo\n", 0).is_err());
    }
}
