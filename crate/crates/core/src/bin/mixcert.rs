use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mixcert::examples;
use mixcert::fractional::{self, SurrogateSummary};
use mixcert::kkt;
use mixcert::oracle::{self, GridSpec};
use mixcert::region::{self, MultiplierRegion};
use mixcert::report::{certify_candidate, CertifyOptions};
use mixcert::schema::{parse_problem_file, ProblemFile};
use mixcert::{Error, Result, Tolerances};

#[derive(Parser)]
#[command(name = "mixcert", version, about = "Global optimality certificates for mixed-variable programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the multipliers, run every certificate and cross-check with the oracle.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Oracle points per continuous axis.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        no_oracle: bool,
    },
    /// Evaluate the local necessary condition.
    CheckLocal {
        #[command(flatten)]
        common: Common,
    },
    /// Solve the multiplier region at a point.
    Multipliers {
        #[command(flatten)]
        common: Common,
    },
    /// Exhaustive grid search for the global minimum.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        rounds: Option<usize>,
        /// Also list KKT candidates found on the grid.
        #[arg(long)]
        candidates: bool,
    },
    /// Build the quadratic surrogate of a fractional program at a point.
    Reformulate {
        #[command(flatten)]
        common: Common,
    },
    /// Run the bundled examples.
    Examples {
        /// `all` or one of e1..e4.
        #[arg(long)]
        run: Option<String>,
        #[arg(long)]
        list: bool,
        #[arg(long)]
        no_oracle: bool,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Problem file, or the name of a bundled example.
    file: String,
    /// Candidate point `x1,x2,...`; defaults to the candidates listed in the file.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    /// Fixed multipliers `l1,l2,...`.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// Write a JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    tol_psd: Option<f64>,
    #[arg(long)]
    tol_feas: Option<f64>,
}

impl Common {
    fn tolerances(&self) -> Tolerances {
        let mut t = Tolerances::default();
        if let Some(v) = self.tol_psd {
            t.psd_rel = v;
        }
        if let Some(v) = self.tol_feas {
            t.feasibility = v;
        }
        t
    }

    fn load(&self) -> Result<ProblemFile> {
        load(&self.file)
    }

    fn points(&self, file: &ProblemFile) -> Result<Vec<Vec<f64>>> {
        match &self.point {
            Some(s) => Ok(vec![parse_list(s, "--point")?]),
            None if !file.candidates.is_empty() => Ok(file.candidates.clone()),
            None => Err(Error::Contract("no --point given and the file lists no candidates".into())),
        }
    }

    fn lambda(&self) -> Result<Option<Vec<f64>>> {
        self.lambda.as_deref().map(|s| parse_list(s, "--lambda")).transpose()
    }
}

fn load(name: &str) -> Result<ProblemFile> {
    let path = Path::new(name);
    if path.exists() {
        return parse_problem_file(path);
    }
    let stem = path.file_name().and_then(|s| s.to_str()).unwrap_or(name);
    examples::bundled(stem).ok_or_else(|| Error::Io(format!("{name}: no such file or bundled example")))
}

fn parse_list(s: &str, flag: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Contract(format!("{flag}: cannot parse {t:?}: {e}")))
        })
        .collect()
}

fn write_report<T: Serialize>(path: &Option<PathBuf>, value: &T) -> Result<()> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(p, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(", "))
}

fn certify_all(
    file: &ProblemFile,
    points: &[Vec<f64>],
    opts: &CertifyOptions,
    report: &Option<PathBuf>,
) -> Result<i32> {
    let mut reports = Vec::new();
    for x in points {
        let r = certify_candidate(&file.problem, x, opts)?;
        print!("{}", r.render_text());
        println!();
        reports.push(r);
    }
    let codes: Vec<i32> = reports.iter().map(|r| r.exit_code()).collect();
    let code = if codes.contains(&1) { 1 } else { codes.into_iter().max().unwrap_or(0) };
    if reports.len() == 1 {
        write_report(report, &reports[0])?;
    } else {
        write_report(report, &reports)?;
    }
    Ok(code)
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Certify { common, grid, no_oracle } => {
            let file = common.load()?;
            let opts = CertifyOptions {
                tol: common.tolerances(),
                oracle: !no_oracle,
                grid: grid.map(|g| GridSpec {
                    points_per_axis: g,
                    refinement_rounds: GridSpec::default_for(&file.problem).refinement_rounds,
                }),
                lambda: common.lambda()?,
                ..CertifyOptions::default()
            };
            certify_all(&file, &common.points(&file)?, &opts, &common.report)
        }
        Command::CheckLocal { common } => {
            let file = common.load()?;
            let tol = common.tolerances();
            let fixed = common.lambda()?;
            let mut code = 0;
            let mut out = Vec::new();
            for x in common.points(&file)? {
                let p = &file.problem;
                let x = p.bounds().snap(&x, tol.snap);
                if !p.is_feasible(&x, &tol) {
                    println!("{}: infeasible", fmt(&x));
                    code = code.max(2);
                    continue;
                }
                let lambda = match &fixed {
                    Some(l) => Some(l.clone()),
                    None => region::solve_multiplier_region(p, &x, &tol)?.stationary().map(|s| s.to_vec()),
                };
                let Some(lambda) = lambda else {
                    println!("{}: no multiplier satisfies the necessary condition", fmt(&x));
                    code = code.max(2);
                    continue;
                };
                let v = kkt::necessary(p, &x, &lambda, &tol)?;
                let slack = kkt::slackness_residual(p, &x, &lambda)?;
                println!(
                    "{} with λ = {}: necessary condition {} (worst violation {:e}), slackness residual {:e}",
                    fmt(&x),
                    fmt(&lambda),
                    if v.holds { "holds" } else { "fails" },
                    v.worst_violation + 0.0,
                    slack + 0.0
                );
                for c in &v.per_coordinate {
                    println!("  x{} {:?}: {:e}", c.index + 1, c.provenance, c.lhs + 0.0);
                }
                if !(v.holds && slack <= tol.slackness) {
                    code = code.max(2);
                }
                out.push(v);
            }
            write_report(&common.report, &out)?;
            Ok(code)
        }
        Command::Multipliers { common } => {
            let file = common.load()?;
            let tol = common.tolerances();
            let mut out: Vec<MultiplierRegion> = Vec::new();
            for x in common.points(&file)? {
                let x = file.problem.bounds().snap(&x, tol.snap);
                let r = region::solve_multiplier_region(&file.problem, &x, &tol)?;
                match &r {
                    MultiplierRegion::Empty => println!("{}: empty", fmt(&x)),
                    MultiplierRegion::Point { lambda } => println!("{}: unique {}", fmt(&x), fmt(lambda)),
                    MultiplierRegion::Polytope(poly) => {
                        println!("{}: polytope over constraints {:?}", fmt(&x), poly.active);
                        for (j, (lo, hi)) in poly.intervals.iter().enumerate() {
                            println!("  λ{} ∈ [{lo}, {hi}]", j + 1);
                        }
                        println!("  stationary {}", fmt(&poly.stationary));
                        for v in &poly.vertices {
                            println!("  vertex {}", fmt(v));
                        }
                    }
                }
                out.push(r);
            }
            write_report(&common.report, &out)?;
            Ok(0)
        }
        Command::Oracle {
            common,
            grid,
            rounds,
            candidates,
        } => {
            let file = common.load()?;
            let tol = common.tolerances();
            let d = GridSpec::default_for(&file.problem);
            let ppa = grid.unwrap_or(d.points_per_axis);
            let r = oracle::global_search_with(&file.problem, ppa, rounds.unwrap_or(d.refinement_rounds), &tol)?;
            println!(
                "best {} at {} ({} feasible of {} grid points, {} points/axis)",
                r.best_value,
                fmt(&r.best_point),
                r.feasible_count,
                r.evaluated,
                ppa
            );
            println!(
                "values: min {} q1 {} median {} q3 {} max {}",
                r.summary.min, r.summary.q1, r.summary.median, r.summary.q3, r.summary.max
            );
            if candidates {
                for x in oracle::candidate_scan_with(&file.problem, ppa.min(201), &tol)? {
                    println!("candidate {} value {}", fmt(&x), file.problem.objective(&x)?);
                }
            }
            write_report(&common.report, &r)?;
            Ok(0)
        }
        Command::Reformulate { common } => {
            let file = common.load()?;
            let tol = common.tolerances();
            let mut out = Vec::new();
            for x in common.points(&file)? {
                let x = file.problem.bounds().snap(&x, tol.snap);
                let s = SurrogateSummary::from(&fractional::reformulate(&file.problem, &x, &tol)?);
                println!("anchor {}: e0 = {}, c = {}, signs {}", fmt(&s.anchor), s.e0, s.c, fmt(&s.xi));
                for (j, m) in s.matrices.iter().enumerate() {
                    println!("  Q{j} = {:?}, q{j} = {}, r{j} = {}", m.rows(), fmt(&s.linear[j]), s.constants[j]);
                }
                out.push(s);
            }
            write_report(&common.report, &out)?;
            Ok(0)
        }
        Command::Examples {
            run,
            list,
            no_oracle,
            report,
        } => {
            if list || run.is_none() {
                for (name, src) in examples::ALL {
                    let f = mixcert::schema::parse_problem_str(src)?;
                    println!("{name}: {}", f.description.unwrap_or_default());
                }
                return Ok(0);
            }
            let which = run.unwrap_or_default();
            let names: Vec<&str> = if which == "all" {
                examples::ALL.iter().map(|(n, _)| *n).collect()
            } else {
                vec![which.as_str()]
            };
            let opts = CertifyOptions {
                oracle: !no_oracle,
                ..CertifyOptions::default()
            };
            let mut code = 0;
            let mut reports = Vec::new();
            for name in names {
                let file = examples::bundled(name)
                    .ok_or_else(|| Error::Io(format!("{name}: no such bundled example")))?;
                for x in &file.candidates {
                    let r = certify_candidate(&file.problem, x, &opts)?;
                    print!("{}", r.render_text());
                    println!();
                    if r.exit_code() == 1 {
                        code = 1;
                    }
                    reports.push(r);
                }
            }
            write_report(&report, &reports)?;
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
