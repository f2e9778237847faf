use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use mirrorability::cascade::{load_model, save_model};
use mirrorability::error::{Error, Result};
use mirrorability::experiment::{run_simulation, ExperimentConfig, SimConfig};
use mirrorability::io::{
    parse_error_table, parse_landmarks, parse_symmetry_file, parse_widths, write_comparison,
    write_comparison_samples, write_curve, write_json, write_matrix, write_per_point, write_per_sample,
    write_selection, write_skipped, EvaluationSummary, ReportHeader, TOOL_VERSION,
};
use mirrorability::metrics::{
    evaluate_records, pearson, per_point_stats, sorted_error_curve, ErrorKey, ErrorRow, SampleRecord,
    Skipped,
};
use mirrorability::selection::{consistency_matrix, select_top_m, ConsistencyMode, DEFAULT_TOP_M};
use mirrorability::shape::NormalizationSpec;

#[derive(Parser)]
#[command(name = "mirrorability", version, about = "Mirror-error evaluation and mirror-feedback experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KeyArg {
    Em,
    Ea,
}

impl From<KeyArg> for ErrorKey {
    fn from(k: KeyArg) -> Self {
        match k {
            KeyArg::Em => ErrorKey::MirrorError,
            KeyArg::Ea => ErrorKey::AlignmentError,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Mirror (and alignment) errors of a method's detections.
    Evaluate {
        /// Detections on the original images.
        #[arg(long)]
        original: PathBuf,
        /// Detections on the mirror images, in mirror-image coordinates.
        #[arg(long)]
        mirror: PathBuf,
        /// `sample_id,width[,height]` per image.
        #[arg(long)]
        widths: PathBuf,
        /// Ground-truth landmarks.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        symmetry: PathBuf,
        /// bbox | interocular:i,j | fixed:v
        #[arg(long, default_value = "bbox")]
        norm: NormalizationSpec,
        #[arg(long)]
        out: PathBuf,
    },
    /// Top-M samples by mirror or alignment error.
    SelectDifficult {
        #[arg(long)]
        errors: PathBuf,
        #[arg(long, value_enum)]
        key: KeyArg,
        #[arg(long, default_value_t = DEFAULT_TOP_M)]
        top: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Consistency between the difficult-sample selections of several methods.
    Consistency {
        /// Report directories (or per-sample error files), one per method.
        #[arg(long, num_args = 1.., required = true)]
        sets: Vec<PathBuf>,
        /// em-ea | em-em | ea-ea
        #[arg(long, default_value = "em-ea")]
        mode: ConsistencyMode,
        #[arg(long, default_value_t = DEFAULT_TOP_M)]
        top: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a cascade on synthetic scenes.
    TrainCascade {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare mirror feedback with no-restart and variance-restart inference.
    FeedbackEval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correlation study with a simulated detector.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn evaluate(
    original: &Path,
    mirror: &Path,
    widths: &Path,
    gt: Option<&Path>,
    symmetry: &Path,
    norm: &NormalizationSpec,
    out: &Path,
) -> Result<()> {
    let map = parse_symmetry_file(symmetry)?;
    let k = Some(map.num_points());
    let originals = parse_landmarks(original, k)?;
    let mut mirrors: HashMap<String, _> = parse_landmarks(mirror, k)?.into_iter().collect();
    let mut metas = parse_widths(widths)?;
    let mut gts: Option<HashMap<String, _>> = gt
        .map(|p| parse_landmarks(p, k).map(|rows| rows.into_iter().collect()))
        .transpose()?;

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let missing = |id: &str, what: &str| Skipped {
        sample_id: id.to_string(),
        error: Error::MissingError {
            sample_id: id.to_string(),
            key: what.to_string(),
        },
    };
    for (id, det) in originals {
        let Some(det_m) = mirrors.remove(&id) else {
            skipped.push(missing(&id, "mirror detection"));
            continue;
        };
        let Some(meta) = metas.remove(&id) else {
            skipped.push(missing(&id, "image width"));
            continue;
        };
        let truth = match gts.as_mut() {
            Some(g) => match g.remove(&id) {
                Some(t) => Some(t),
                None => {
                    skipped.push(missing(&id, "ground truth"));
                    continue;
                }
            },
            None => None,
        };
        records.push(SampleRecord::new(det, det_m, truth, meta));
    }
    let (done, failed) = evaluate_records(&records, &map, norm);
    skipped.extend(failed);

    fs::create_dir_all(out)?;
    let header = ReportHeader::new(None, Some(norm.to_string()));
    let rows: Vec<ErrorRow> = done.iter().map(ErrorRow::from).collect();
    write_file(&out.join("per_sample.csv"), |w| write_per_sample(w, &header, &rows))?;
    write_file(&out.join("skipped.csv"), |w| write_skipped(w, &header, &skipped))?;
    if done.len() >= 2 {
        let stats = per_point_stats(&done, &map, norm)?;
        write_file(&out.join("per_point.csv"), |w| write_per_point(w, &header, &stats))?;
    }

    let has_gt = gt.is_some();
    let e_m: Vec<f64> = rows.iter().filter_map(|r| r.e_m).collect();
    let e_a: Vec<f64> = rows.iter().filter_map(|r| r.e_a).collect();
    let summary = EvaluationSummary {
        tool_version: TOOL_VERSION.to_string(),
        norm: norm.to_string(),
        num_samples: rows.len(),
        num_skipped: skipped.len(),
        mean_e_m: mean(e_m.iter().copied()),
        mean_e_a: has_gt.then(|| mean(e_a.iter().copied())).flatten(),
        mean_e_a_mirror: has_gt
            .then(|| mean(rows.iter().filter_map(|r| r.e_a_mirror)))
            .flatten(),
        pearson_r: has_gt.then(|| pearson(&e_m, &e_a).ok()).flatten(),
        spearman_r: has_gt
            .then(|| mirrorability::metrics::spearman(&e_m, &e_a).ok())
            .flatten(),
    };
    write_file(&out.join("summary.json"), |w| write_json(w, &summary))?;
    if has_gt {
        let curve = sorted_error_curve(&rows)?;
        write_file(&out.join("sorted_curve.csv"), |w| write_curve(w, &header, &curve))?;
    }
    Ok(())
}

fn error_table_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("per_sample.csv")
    } else {
        p.to_path_buf()
    }
}

fn method_id(p: &Path) -> String {
    let p = if p.is_dir() { p } else { p.parent().unwrap_or(p) };
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Evaluate {
            original,
            mirror,
            widths,
            gt,
            symmetry,
            norm,
            out,
        } => evaluate(&original, &mirror, &widths, gt.as_deref(), &symmetry, &norm, &out),
        Command::SelectDifficult { errors, key, top, out } => {
            let path = error_table_path(&errors);
            let rows = parse_error_table(&path)?;
            let set = select_top_m(&method_id(&errors), &rows, key.into(), top)?;
            write_file(&out, |w| write_selection(w, &ReportHeader::default(), &set))
        }
        Command::Consistency { sets, mode, top, out } => {
            let methods = sets
                .iter()
                .map(|p| Ok((method_id(p), parse_error_table(&error_table_path(p))?)))
                .collect::<Result<Vec<_>>>()?;
            let matrix = consistency_matrix(&methods, mode, top)?;
            write_file(&out, |w| write_matrix(w, &ReportHeader::default(), &matrix))
        }
        Command::TrainCascade { config, out } => {
            let cfg: ExperimentConfig = read_json(&config)?;
            let (model, report) = cfg.train()?;
            save_model(&out, &model)?;
            let first = report.mean_error.first().copied().unwrap_or(f64::NAN);
            let last = report.mean_error.last().copied().unwrap_or(f64::NAN);
            println!(
                "trained {} stages on {} placements; mean training error {first} -> {last}",
                model.num_stages(),
                report.num_samples
            );
            Ok(())
        }
        Command::FeedbackEval { model, config, out } => {
            let cfg: ExperimentConfig = read_json(&config)?;
            let model = load_model(&model)?;
            let eval = cfg.feedback_eval(&model)?;
            fs::create_dir_all(&out)?;
            let header = ReportHeader::new(Some(cfg.seed), Some(cfg.normalization().to_string()));
            write_file(&out.join("comparison.csv"), |w| {
                write_comparison(w, &header, &eval.report.rows)
            })?;
            write_file(&out.join("samples.csv"), |w| {
                write_comparison_samples(w, &header, &eval.report.samples)
            })?;
            write_file(&out.join("summary.json"), |w| {
                write_json(
                    w,
                    &serde_json::json!({
                        "tool_version": TOOL_VERSION,
                        "seed": cfg.seed,
                        "norm": cfg.normalization().to_string(),
                        "calibration": eval.calibration,
                        "rows": eval.report.rows,
                    }),
                )
            })
        }
        Command::Simulate { config, out } => {
            let cfg: SimConfig = read_json(&config)?;
            let res = run_simulation(&cfg)?;
            fs::create_dir_all(&out)?;
            let header = ReportHeader::new(Some(cfg.seed), Some("detection_box".into()));
            write_file(&out.join("per_sample.csv"), |w| {
                header.write(w)?;
                writeln!(w, "sample_id,difficulty,e_m,e_a")?;
                for r in &res.rows {
                    writeln!(w, "{},{},{},{}", r.sample_id, r.difficulty, r.e_m, r.e_a)?;
                }
                Ok(())
            })?;
            write_file(&out.join("summary.json"), |w| write_json(w, &res.summary))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
