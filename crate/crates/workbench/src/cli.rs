//! `debias` command line. Output is a JSON envelope on stdout; errors go to
//! stderr. Exit codes: 0 success, 1 validation error, 2 I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use debias_core::tuner::SweepPoint;
use serde::Serialize;
use serde_json::json;

use crate::config::WorkbenchConfig;
use crate::error::{Result, WorkbenchError};
use crate::render::{heatmap, line_chart, preset_table, Scale};
use crate::workspace::Workspace;
use crate::{parse_theta_list, Envelope};

#[derive(Debug, Parser)]
#[command(name = "debias", version, about = "Per-category word-embedding debias workbench")]
struct Cli {
    /// Session file to read and update.
    #[arg(long, global = true, default_value = "session.json")]
    session: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load embeddings, gender pairs and labels into a new session.
    Load {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// JSON configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the gender axis and its explained variance.
    Axis,
    /// Update per-category theta in the session and optionally export.
    Debias {
        /// `category=theta`, comma separated or repeated; `*` sets all.
        #[arg(long = "set")]
        set: Vec<String>,
        /// Write the debiased embeddings here (word2vec text).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify under the session config and print the confusion matrix.
    Classify {
        /// Temporary `category=theta` overrides, not saved.
        #[arg(long = "set")]
        set: Vec<String>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Sweep theta for one category (cached in the session).
    Sweep {
        #[arg(long)]
        category: String,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Pareto front and balanced theta for one category.
    Pareto {
        #[arg(long)]
        category: String,
        /// Use the points of a saved `sweep` output instead of the session.
        #[arg(long)]
        sweep_file: Option<PathBuf>,
    },
    /// Preset table over every category.
    Presets {
        /// Print a plain-text table instead of JSON.
        #[arg(long)]
        text: bool,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Compare the balanced config against theta = 1 everywhere.
    CompareHard {
        /// Heatmap of the row-normalized difference.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// k-means inertia curve over the original vectors.
    Elbow {
        #[arg(long, default_value_t = 1)]
        k_min: usize,
        #[arg(long, default_value_t = 10)]
        k_max: usize,
    },
    /// Serve the JSON API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, data: T) -> Result<()> {
    let text = serde_json::to_string_pretty(&Envelope::new(data)).map_err(WorkbenchError::json("output"))?;
    writeln!(out, "{text}").map_err(WorkbenchError::io("<stdout>"))
}

fn write_svg(path: &Path, svg: &str) -> Result<()> {
    fs::write(path, svg).map_err(WorkbenchError::io(path))
}

fn theta_overrides(items: &[String]) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for item in items {
        out.extend(parse_theta_list(item, '=')?);
    }
    Ok(out)
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let session_path = cli.session;
    match cli.command {
        Command::Load {
            embeddings,
            pairs,
            labels,
            config,
        } => {
            let config = match config {
                Some(p) => WorkbenchConfig::load(&p)?,
                None => WorkbenchConfig::default(),
            };
            let mut ws = Workspace::create(&embeddings, &pairs, &labels, config)?;
            ws.set_path(session_path.clone());
            ws.save()?;
            emit(
                stdout,
                json!({
                    "session": session_path,
                    "id": ws.session.id,
                    "load_report": ws.load_report,
                    "categories": ws.categories(),
                    "explained_variance_ratio": ws.session.direction.explained_variance_ratio(),
                }),
            )
        }
        Command::Axis => {
            let ws = Workspace::open(&session_path)?;
            emit(stdout, ws.axis())
        }
        Command::Debias { set, out } => {
            let mut ws = Workspace::open(&session_path)?;
            let config = ws.config_with(&theta_overrides(&set)?)?;
            ws.session.debias = config.clone();
            ws.save()?;
            if let Some(path) = &out {
                ws.export_to(&config, path)?;
            }
            emit(stdout, json!({ "config": config, "exported": out }))
        }
        Command::Classify { set, svg } => {
            let ws = Workspace::open(&session_path)?;
            let config = ws.config_with(&theta_overrides(&set)?)?;
            let report = ws.classify(&config)?;
            if let Some(path) = svg {
                let r = heatmap(
                    "Row-normalized confusion matrix",
                    &report.confusion.categories,
                    &report.confusion.row_normalized,
                    Scale::Sequential,
                )?;
                write_svg(&path, &r.rendered)?;
            }
            emit(stdout, report)
        }
        Command::Sweep { category, svg } => {
            let mut ws = Workspace::open(&session_path)?;
            let report = ws.sweep(&category)?;
            ws.save()?;
            if let Some(path) = svg {
                let front = ws.pareto_of(&report.points)?.front_thetas;
                write_svg(&path, &line_chart(&category, &report.points, &front)?.rendered)?;
            }
            emit(stdout, report)
        }
        Command::Pareto {
            category,
            sweep_file,
        } => {
            let mut ws = Workspace::open(&session_path)?;
            let result = match sweep_file {
                Some(p) => {
                    let points = read_sweep_file(&p)?;
                    ws.pareto_of(&points)?
                }
                None => {
                    let r = ws.pareto(&category)?;
                    ws.save()?;
                    r
                }
            };
            emit(stdout, result)
        }
        Command::Presets { text, svg } => {
            let mut ws = Workspace::open(&session_path)?;
            let table = ws.presets()?;
            ws.save()?;
            if let Some(path) = svg {
                write_svg(&path, &preset_table(&table)?.rendered)?;
            }
            if text {
                write!(stdout, "{}", table.to_text()).map_err(WorkbenchError::io("<stdout>"))
            } else {
                emit(stdout, table)
            }
        }
        Command::CompareHard { svg } => {
            let mut ws = Workspace::open(&session_path)?;
            let cmp = ws.compare_hard()?;
            ws.save()?;
            if let Some(path) = svg {
                let r = heatmap(
                    "Balanced minus hard debias (row-normalized)",
                    &cmp.diff.categories,
                    &cmp.diff.values,
                    Scale::Diverging,
                )?;
                write_svg(&path, &r.rendered)?;
            }
            emit(stdout, cmp)
        }
        Command::Elbow { k_min, k_max } => {
            if k_min == 0 || k_min > k_max {
                return Err(WorkbenchError::Invalid(format!("bad k range {k_min}..={k_max}")));
            }
            let ws = Workspace::open(&session_path)?;
            emit(stdout, ws.elbow(k_min..=k_max)?)
        }
        Command::Serve { port, host } => {
            let ws = Workspace::open(&session_path)?;
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|_| WorkbenchError::Invalid(format!("bad address {host}:{port}")))?;
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(WorkbenchError::io("<runtime>"))?;
            let _ = writeln!(stderr, "listening on http://{addr}");
            runtime.block_on(crate::server::serve(ws, addr))
        }
    }
}

/// Accepts the envelope `sweep` prints or a bare list of points.
fn read_sweep_file(path: &Path) -> Result<Vec<SweepPoint>> {
    let text = fs::read_to_string(path).map_err(WorkbenchError::io(path))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(WorkbenchError::json(path.display().to_string()))?;
    let points = value
        .get("data")
        .and_then(|d| d.get("points"))
        .cloned()
        .unwrap_or(value);
    serde_json::from_value(points).map_err(WorkbenchError::json(path.display().to_string()))
}
