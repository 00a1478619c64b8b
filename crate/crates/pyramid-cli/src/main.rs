use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pyramid_fe::calculus::FormField;
use pyramid_fe::dofs::vandermonde;
use pyramid_fe::interp::{check_counterexample, run_suite, Status, SuiteOptions};
use pyramid_fe::ratpoly::{parse_rational, rational_to_string, Rational};
use pyramid_fe::spaces::{basis, BasisSet};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "pyramid", version, about = "High-order pyramid finite elements: bases, DOFs and exact checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Args)]
struct Output {
    /// Write to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct Space {
    /// Form degree s
    #[arg(long = "form", value_parser = clap::value_parser!(u8).range(0..=3))]
    form: u8,
    /// Polynomial order k
    #[arg(long = "order", value_parser = clap::value_parser!(u32).range(1..))]
    order: u32,
}

#[derive(Subcommand)]
enum Command {
    /// Export a basis, optionally with values at points
    Tabulate {
        #[command(flatten)]
        space: Space,
        /// CSV file with one point xi,eta,zeta per row
        #[arg(long)]
        points: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Run the verification suite for k = 1..max-order
    Verify {
        #[arg(long = "max-order", default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
        max_order: u32,
        /// Quadrature points per direction (default depends on k)
        #[arg(long = "quad-n", value_parser = clap::value_parser!(u64).range(1..))]
        quad_n: Option<u64>,
        #[arg(long = "counterexample-degree", default_value_t = 10)]
        counterexample_degree: u32,
        #[arg(long, default_value_t = SuiteOptions::default().seed)]
        seed: u64,
        #[arg(long = "corrupt-basis", hide = true)]
        corrupt_basis: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Export the exact DOF-by-basis matrix
    Vandermonde {
        #[command(flatten)]
        space: Space,
        #[command(flatten)]
        output: Output,
    },
    /// Show that a field with polynomial face traces need not be a polynomial
    Counterexample {
        #[arg(long = "counterexample-degree", default_value_t = 10)]
        counterexample_degree: u32,
        #[command(flatten)]
        output: Output,
    },
}

fn emit(output: &Output, body: &str) -> Result<()> {
    match &output.out {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

fn csv_table<R, I, S>(header: &[&str], rows: R) -> Result<String>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

struct PointRecord {
    function: String,
    point: Vec<String>,
    status: &'static str,
    values: Vec<String>,
    error: Option<String>,
}

fn read_points(path: &Path) -> Result<Vec<Result<[Rational; 3], String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        let line = rec.iter().collect::<Vec<_>>().join(",");
        let parsed: Result<Vec<Rational>, _> = rec.iter().map(parse_rational).collect();
        out.push(match parsed {
            Ok(v) if v.len() == 3 => Ok([v[0].clone(), v[1].clone(), v[2].clone()]),
            Ok(_) => Err(format!("expected 3 coordinates in '{line}'")),
            // a leading row with no numbers is a header
            Err(_) if i == 0 && rec.iter().all(|c| parse_rational(c).is_err()) => continue,
            Err(_) => Err(format!("unparsable point '{line}'")),
        });
    }
    Ok(out)
}

fn point_values(b: &BasisSet, points: &[Result<[Rational; 3], String>]) -> Vec<PointRecord> {
    let mut out = Vec::new();
    for p in points {
        for f in &b.functions {
            let field: &FormField = &f.finite;
            let rec = match p {
                Err(e) => PointRecord { function: f.label(), point: vec![], status: "error", values: vec![], error: Some(e.clone()) },
                Ok(q) => {
                    let point = q.iter().map(rational_to_string).collect();
                    match field.evaluate(q) {
                        Ok(Some(v)) => PointRecord {
                            function: f.label(),
                            point,
                            status: "ok",
                            values: v.iter().map(rational_to_string).collect(),
                            error: None,
                        },
                        Ok(None) => PointRecord { function: f.label(), point, status: "trace-only", values: vec![], error: None },
                        Err(e) => PointRecord { function: f.label(), point, status: "error", values: vec![], error: Some(e.to_string()) },
                    }
                }
            };
            out.push(rec);
        }
    }
    out
}

fn tabulate(space: &Space, points: Option<&Path>, output: &Output) -> Result<u8> {
    let b = basis(space.form as usize, space.order)?;
    let records = match points {
        Some(p) => Some(point_values(&b, &read_points(p)?)),
        None => None,
    };
    let failed = records.as_ref().is_some_and(|r| r.iter().any(|r| r.status == "error"));
    let body = match output.format {
        Format::Json => {
            let mut v = b.to_json();
            if let Some(rs) = &records {
                v["values"] = rs
                    .iter()
                    .map(|r| {
                        json!({ "function": r.function, "point": r.point, "status": r.status,
                                "values": r.values, "error": r.error })
                    })
                    .collect();
            }
            pretty(&v)
        }
        Format::Csv => match &records {
            Some(rs) => csv_table(
                &["function", "xi", "eta", "zeta", "status", "values", "error"],
                rs.iter().map(|r| {
                    let pt = if r.point.is_empty() { vec![String::new(); 3] } else { r.point.clone() };
                    let mut row = vec![r.function.clone()];
                    row.extend(pt);
                    row.extend([r.status.to_string(), r.values.join(";"), r.error.clone().unwrap_or_default()]);
                    row
                }),
            )?,
            None => csv_table(
                &["index", "function", "components"],
                b.functions.iter().enumerate().map(|(i, f)| {
                    let comps: Vec<String> = f.finite.components().iter().map(|c| c.to_string()).collect();
                    [i.to_string(), f.label(), comps.join(";")]
                }),
            )?,
        },
        Format::Text => {
            let mut s = format!("U{} order {}: {} functions\n", b.s, b.k, b.len());
            for f in &b.functions {
                let fin: Vec<String> = f.finite.components().iter().map(|c| c.to_string()).collect();
                let inf: Vec<String> = f.infinite.components().iter().map(|c| c.to_string()).collect();
                s.push_str(&format!("{}\n  finite:   ({})\n  infinite: ({})\n", f.label(), fin.join(", "), inf.join(", ")));
            }
            if let Some(rs) = &records {
                for r in rs {
                    s.push_str(&format!("{} at ({}): {} {}\n", r.function, r.point.join(", "), r.status, r.values.join(", ")));
                    if let Some(e) = &r.error {
                        s.push_str(&format!("  error: {e}\n"));
                    }
                }
            }
            s
        }
    };
    emit(output, &body)?;
    Ok(u8::from(failed))
}

fn cmd_vandermonde(space: &Space, output: &Output) -> Result<u8> {
    let v = vandermonde(space.form as usize, space.order)?;
    let body = match output.format {
        Format::Json => pretty(&v.to_json()?),
        Format::Csv => v.to_csv(),
        Format::Text => {
            let det = v.determinant()?;
            format!("U{} order {}: {}x{} matrix, determinant {}\n{}", v.s, v.k, v.size(), v.size(), rational_to_string(&det), v.to_csv())
        }
    };
    emit(output, &body)?;
    Ok(0)
}

fn cmd_verify(opts: SuiteOptions, output: &Output) -> Result<u8> {
    let report = run_suite(&opts);
    let body = match output.format {
        Format::Json => pretty(&report.to_json()),
        Format::Text => report.to_text(),
        Format::Csv => csv_table(
            &["name", "k", "status", "runtime_ms"],
            report.checks.iter().map(|c| {
                let st = match c.status {
                    Status::Pass => "pass",
                    Status::Fail => "fail",
                    Status::Skipped => "skipped",
                };
                [c.name.clone(), c.k.map_or(String::new(), |k| k.to_string()), st.to_string(), format!("{:.1}", c.runtime_ms)]
            }),
        )?,
    };
    emit(output, &body)?;
    for c in report.failed() {
        eprintln!("check failed: {} (k = {:?})", c.name, c.k);
    }
    Ok(u8::from(!report.all_passed()))
}

fn cmd_counterexample(d: u32, output: &Output) -> Result<u8> {
    let (status, witness) = check_counterexample(d)?;
    let v = json!({ "status": status, "witness": witness });
    let body = match output.format {
        Format::Json => pretty(&v),
        Format::Csv => {
            let m = witness.as_object().cloned().unwrap_or_default();
            csv_table(&["key", "value"], m.into_iter().map(|(k, x)| [k, x.to_string()]))?
        }
        Format::Text => {
            let mut s = format!("status: {}\n", v["status"].as_str().unwrap_or("?"));
            if let Value::Object(m) = &witness {
                for (k, x) in m {
                    s.push_str(&format!("  {k}: {x}\n"));
                }
            }
            s
        }
    };
    emit(output, &body)?;
    Ok(u8::from(status == Status::Fail))
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Tabulate { space, points, output } => tabulate(&space, points.as_deref(), &output),
        Command::Vandermonde { space, output } => cmd_vandermonde(&space, &output),
        Command::Verify { max_order, quad_n, counterexample_degree, seed, corrupt_basis, output } => {
            let opts = SuiteOptions {
                max_k: max_order,
                quad_n: quad_n.map(|n| n as usize),
                counterexample_degree,
                seed,
                corrupt_basis,
            };
            cmd_verify(opts, &output)
        }
        Command::Counterexample { counterexample_degree, output } => cmd_counterexample(counterexample_degree, &output),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
