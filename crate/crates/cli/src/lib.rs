//! The `homdyn` command line: argument parsing, command dispatch and output.
//!
//! Every command prints JSON lines on stdout. With `--out DIR` (or
//! `run.out` in the config) it also writes `DIR/<command>.jsonl` and, where a
//! table makes sense, `DIR/<command>.csv`.

pub mod experiments;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_rational::BigRational;
use serde::Serialize;
use serde_json::{json, Value};

use homdyn::config::ExperimentConfig;
use homdyn::form::{parse_forms, TernaryForm};
use homdyn::lattice::{in_compact, parse_points};
use homdyn::markov::{binary_spectrum, fat_form_scan, markov_triples, reports_csv, spectrum_csv, ternary_min};
use homdyn::Error;

use experiments::{
    birkhoff_experiment, close_pairs, default_family, equidist_scan, generic_experiment, sample_orbit, shear_experiment,
    sub_seed, BumpSpec,
};

#[derive(Debug, Parser)]
#[command(name = "homdyn", version, about = "Experiments with closed SO(2,1) orbits on the space of unimodular lattices")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed, overriding `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, overriding `run.out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Heights of lattices read from a basis file, with membership in the
    /// compact parts of the configured heights.
    Alpha1 { file: PathBuf },
    /// Markov triples and binary spectrum values up to a bound.
    Markov {
        #[arg(long, default_value_t = 30)]
        bound: u64,
        /// Flag spectrum values above this rational.
        #[arg(long)]
        epsilon: Option<String>,
    },
    /// Box minima and μ for each form of a form file.
    Ternary {
        file: PathBuf,
        #[arg(long, default_value_t = 10)]
        n: i64,
        /// Mark forms with μ above this rational.
        #[arg(long)]
        epsilon: Option<String>,
    },
    /// Averages D_t^f on the orbit of the first form of a file.
    Birkhoff {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        t: Vec<f64>,
        /// battery:K, radius:K:RHO or constant:C.
        #[arg(long, default_value = "battery:5")]
        bump: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        points: usize,
    },
    /// Genericity pass fraction on the orbit of the first form of a file.
    Generic {
        file: PathBuf,
        #[arg(long, default_value_t = 3.0)]
        t: f64,
        #[arg(long, default_value_t = 6)]
        n_max: u32,
        #[arg(long, default_value = "battery:5")]
        bump: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Multiplies every tolerance.
        #[arg(long, default_value_t = 1.0)]
        factor: f64,
    },
    /// Shearing deviations for random transverse displacements.
    Shear {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// Nearest transverse displacements between samples of two orbits.
    ClosePairs {
        file_a: PathBuf,
        file_b: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 20)]
        keep: usize,
    },
    /// Orbit means against Haar means over a family of forms.
    EquidistScan {
        /// Form file; default x² + y² − p z² for primes p ≤ 200.
        file: Option<PathBuf>,
        #[arg(long, default_value = "battery:5")]
        bump: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Alpha1 { .. } => "alpha1",
            Command::Markov { .. } => "markov",
            Command::Ternary { .. } => "ternary",
            Command::Birkhoff { .. } => "birkhoff",
            Command::Generic { .. } => "generic",
            Command::Shear { .. } => "shear",
            Command::ClosePairs { .. } => "close-pairs",
            Command::EquidistScan { .. } => "equidist-scan",
        }
    }
}

/// Failure of a command, with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Drift { .. }
            | Error::NormOverflow { .. }
            | Error::IllConditioned { .. }
            | Error::CuspOverflow { .. } => 3,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn invalid(message: String) -> Failure {
    Failure { code: 2, message }
}

/// JSON lines and an optional CSV table.
#[derive(Debug, Default)]
pub struct Output {
    pub lines: Vec<Value>,
    pub csv: Option<String>,
}

impl Output {
    fn push<T: Serialize>(&mut self, command: &str, kind: &str, value: &T) {
        let mut v = serde_json::to_value(value).expect("report serializes");
        if let Value::Object(map) = &mut v {
            map.insert("command".into(), json!(command));
            map.insert("kind".into(), json!(kind));
        }
        self.lines.push(v);
    }

    pub fn jsonl(&self) -> String {
        self.lines.iter().map(|v| v.to_string() + "\n").collect()
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn read_forms(path: &Path) -> Result<Vec<TernaryForm>, Failure> {
    let forms = parse_forms(&read(path)?)?;
    if forms.is_empty() {
        return Err(invalid(format!("{}: no forms", path.display())));
    }
    Ok(forms)
}

fn rational(s: &str) -> Result<BigRational, Failure> {
    s.trim().parse::<BigRational>().map_err(|_| invalid(format!("not a rational: {s:?}")))
}

/// Loads and validates the configuration, applying the command line
/// overrides.
pub fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_toml(&read(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.run.out = o.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command.
pub fn run(cfg: &ExperimentConfig, command: &Command) -> Result<Output, Failure> {
    let name = command.name();
    let seed = cfg.run.seed;
    let mut out = Output::default();
    match command {
        Command::Alpha1 { file } => {
            let points = parse_points(&read(file)?)?;
            let grid = &cfg.space.alpha1_grid;
            let mut csv = String::from("index,alpha1");
            for r in grid {
                csv += &format!(",in_{r}");
            }
            csv.push('\n');
            for (i, p) in points.iter().enumerate() {
                let inside: Vec<bool> = grid.iter().map(|&r| in_compact(p, r)).collect();
                out.push(name, "point", &json!({"index": i, "alpha1": p.alpha1(), "grid": grid, "in_compact": inside}));
                csv += &format!("{i},{}", p.alpha1());
                for b in &inside {
                    csv += &format!(",{b}");
                }
                csv.push('\n');
            }
            out.csv = Some(csv);
        }
        Command::Markov { bound, epsilon } => {
            let eps = epsilon.as_deref().map(rational).transpose()?;
            for t in markov_triples(*bound)? {
                out.push(name, "triple", &t);
            }
            let spectrum = binary_spectrum(*bound)?;
            for v in &spectrum {
                let mut row = serde_json::to_value(v).expect("serializes");
                if let Some(e) = &eps {
                    row["above_epsilon"] = json!(v.value > *e);
                }
                out.push(name, "spectrum", &row);
            }
            out.csv = Some(spectrum_csv(&spectrum));
        }
        Command::Ternary { file, n, epsilon } => {
            let forms = read_forms(file)?;
            let reports = forms.iter().map(|f| ternary_min(f, *n)).collect::<homdyn::Result<Vec<_>>>()?;
            let included = match epsilon {
                Some(e) => Some(fat_form_scan(&forms, &rational(e)?, *n)?),
                None => None,
            };
            for (i, r) in reports.iter().enumerate() {
                let mut row = serde_json::to_value(r).expect("serializes");
                if let Some(rows) = &included {
                    row["included"] = json!(rows[i].included);
                }
                out.push(name, "form", &row);
            }
            out.csv = Some(reports_csv(&reports));
        }
        Command::Birkhoff { file, t, bump, samples, points } => {
            let form = &read_forms(file)?[0];
            let spec: BumpSpec = bump.parse()?;
            let rows = birkhoff_experiment(cfg, form, t, &spec, *samples, *points, seed)?;
            let mut csv = String::from("point,function,t,raw_average,mu_estimate,D_value,quadrature_error_bound\n");
            for r in &rows {
                out.push(name, "average", r);
                let a = &r.report;
                csv += &format!(
                    "{},{},{},{},{},{},{}\n",
                    r.point, r.function, a.t, a.raw_average, a.mu_estimate, a.d_value, a.quadrature_error_bound
                );
            }
            out.csv = Some(csv);
        }
        Command::Generic { file, t, n_max, bump, samples, points, factor } => {
            let form = &read_forms(file)?[0];
            let spec: BumpSpec = bump.parse()?;
            let (rows, summary) = generic_experiment(cfg, form, *t, *n_max, &spec, *samples, *points, *factor, seed)?;
            let mut csv = String::from("point,passed,worst_ratio\n");
            for r in &rows {
                out.push(name, "point", r);
                csv += &format!("{},{},{}\n", r.point, r.passed, r.worst_ratio);
            }
            out.push(name, "summary", &summary);
            out.csv = Some(csv);
        }
        Command::Shear { trials } => {
            if *trials == 0 {
                return Err(invalid("trials must be positive".into()));
            }
            let s = shear_experiment(*trials, seed)?;
            let mut csv = String::from("n,trials,violations_en,violations_c,violations_en_s0,max_ratio_en\n");
            for b in &s.by_n {
                csv += &format!(
                    "{},{},{},{},{},{}\n",
                    b.n, b.trials, b.violations_en, b.violations_c, b.violations_en_s0, b.max_ratio_en
                );
            }
            out.push(name, "summary", &s);
            out.csv = Some(csv);
        }
        Command::ClosePairs { file_a, file_b, samples, delta, keep } => {
            if !(*delta > 0.0 && *delta <= 0.5) {
                return Err(invalid(format!("delta = {delta} must lie in (0, 0.5]")));
            }
            let fa = &read_forms(file_a)?[0];
            let fb = &read_forms(file_b)?[0];
            // both orbits share the walk specification, seed included
            let walk_seed = sub_seed(seed, "close-pairs", 0);
            let (_, a) = sample_orbit(cfg, fa, *samples, walk_seed)?;
            let (_, b) = sample_orbit(cfg, fb, *samples, walk_seed)?;
            let (pairs, summary) = close_pairs(&a.points, &b.points, *delta, *keep, cfg.flows.iota)?;
            let mut csv = String::from("index_a,index_b,norm_r,norm_h,ratio\n");
            for p in &pairs {
                out.push(name, "pair", p);
                csv += &format!(
                    "{},{},{},{},{}\n",
                    p.index_a,
                    p.index_b,
                    p.norm_r,
                    p.norm_h,
                    p.ratio.map_or(String::new(), |r| r.to_string())
                );
            }
            out.push(name, "summary", &summary);
            out.csv = Some(csv);
        }
        Command::EquidistScan { file, bump, samples } => {
            let family = match file {
                Some(p) => read_forms(p)?,
                None => default_family(200),
            };
            let spec: BumpSpec = bump.parse()?;
            let (rows, summary) = equidist_scan(cfg, &family, &spec, *samples, seed)?;
            let mut csv = String::from("form,disc,discrepancy,raw_discrepancy,support_hits\n");
            for r in &rows {
                out.push(name, "form", r);
                csv += &format!("{},{},{},{},{}\n", r.form, r.disc, r.discrepancy, r.raw_discrepancy, r.support_hits);
            }
            out.push(name, "summary", &summary);
            out.csv = Some(csv);
        }
    }
    Ok(out)
}

/// Writes the output files of a command into `dir`.
pub fn write_output(dir: &Path, command: &str, out: &Output) -> Result<(), Failure> {
    let io = |e: std::io::Error| invalid(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join(format!("{command}.jsonl")), out.jsonl()).map_err(io)?;
    if let Some(csv) = &out.csv {
        std::fs::write(dir.join(format!("{command}.csv")), csv).map_err(io)?;
    }
    Ok(())
}

/// Parses, runs and writes; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let result = load_config(&cli).and_then(|cfg| {
        let out = run(&cfg, &cli.command)?;
        print!("{}", out.jsonl());
        if !cfg.run.out.is_empty() {
            write_output(Path::new(&cfg.run.out), cli.command.name(), &out)?;
        }
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("homdyn: {}", f.message);
            f.code
        }
    }
}
