use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::Path;

use mlpvo::baselines::{fit_thresholds, ThresholdSpec};
use mlpvo::dataset::{
    generate_dataset, generate_scene, observe_all, parse_boxes, parse_key_values, parse_records, split,
    write_boxes, write_records, FeatureRecord, FrameBox, GeneratorConfig,
};
use mlpvo::depth_filter::{DepthFilterParams, DEFAULT_ETA, DEFAULT_MIN_POINTS};
use mlpvo::features::LabeledFeature;
use mlpvo::geometry::Pose;
use mlpvo::metrics::Scores;
use mlpvo::mlp::{read_model, train, write_model, MlpModel, TrainConfig};
use mlpvo::pipeline::{
    ate, frames_from_records, parse_trajectory, run_naive_sequence, run_pipeline_sequence, write_trajectory,
    LabelOracle, RobustKernel, RobustSolverConfig, SequenceResult, DEFAULT_HUBER_DELTA,
};

use crate::table::{parse_csv, render_table};
use crate::{CliError, CliResult, EvalArgs, GenArgs, ReportArgs, TrainArgs, TrainingFlags, VoArgs};

pub const CONFIG_FILE: &str = "config.resolved";

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::file(path, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::file(path, e))
}

fn write_with<F>(path: &Path, f: F) -> CliResult<()>
where
    F: FnOnce(&mut Vec<u8>) -> mlpvo::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::file(path, e))?;
    fs::write(path, buf).map_err(|e| CliError::file(path, e))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::file(path, e))
}

fn read_key_values(path: Option<&Path>) -> CliResult<Vec<(usize, String, String)>> {
    match path {
        Some(p) => parse_key_values(&read_text(p)?).map_err(|e| CliError::file(p, e)),
        None => Ok(Vec::new()),
    }
}

fn parse_value<T: std::str::FromStr>(path: Option<&Path>, line: usize, key: &str, value: &str) -> CliResult<T> {
    value.parse().map_err(|_| {
        let at = path.map(|p| format!("{}: ", p.display())).unwrap_or_default();
        CliError::Config(format!("{at}line {line}: invalid value `{value}` for `{key}`"))
    })
}

fn unknown_key(path: Option<&Path>, line: usize, key: &str, known: &[&str]) -> CliError {
    let at = path.map(|p| format!("{}: ", p.display())).unwrap_or_default();
    CliError::Config(format!("{at}line {line}: unknown key `{key}` (known: {})", known.join(", ")))
}

fn load_records(path: &Path) -> CliResult<Vec<FeatureRecord>> {
    let file = fs::File::open(path).map_err(|e| CliError::file(path, e))?;
    parse_records(BufReader::new(file)).map_err(|e| CliError::file(path, e))
}

fn load_model(path: &Path) -> CliResult<MlpModel> {
    let file = fs::File::open(path).map_err(|e| CliError::file(path, e))?;
    read_model(BufReader::new(file)).map_err(|e| CliError::file(path, e))
}

fn labeled(records: &[FeatureRecord]) -> Vec<LabeledFeature> {
    records.iter().map(FeatureRecord::labeled).collect()
}

pub fn cmd_gen(args: &GenArgs) -> CliResult<()> {
    let pairs = read_key_values(args.config.as_deref())?;
    let cfg = GeneratorConfig::from_key_values(pairs).map_err(|e| match &args.config {
        Some(p) => CliError::file(p, e),
        None => e.into(),
    })?;
    create_dir(&args.out)?;

    let dataset = generate_dataset(&cfg, cfg.dataset_records, args.seed)?;
    write_with(&args.out.join("dataset.csv"), |w| write_records(&dataset, w))?;

    let scene = generate_scene(&cfg, args.seed)?;
    let frames = observe_all(&scene)?;
    let records: Vec<FeatureRecord> = frames.iter().flat_map(|f| f.records.iter().copied()).collect();
    let boxes: Vec<FrameBox> = frames
        .iter()
        .flat_map(|f| {
            f.boxes.iter().map(|b| FrameBox {
                frame_id: f.frames.0 as i64,
                bbox: *b,
            })
        })
        .collect();
    write_with(&args.out.join("records.csv"), |w| write_records(&records, w))?;
    write_with(&args.out.join("boxes.txt"), |w| write_boxes(&boxes, w))?;
    let gt: Vec<(i64, Pose)> = scene.trajectory.iter().enumerate().map(|(i, p)| (i as i64, *p)).collect();
    write_with(&args.out.join("groundtruth.txt"), |w| write_trajectory(&gt, w))?;
    write_text(&args.out.join(CONFIG_FILE), &format!("seed = {}\n{}", args.seed, cfg.to_text()))?;

    let dynamic = dataset.iter().filter(|r| r.class == 1).count();
    println!(
        "dataset: {} records ({} dynamic); scene: {} frames, {} records, {} boxes",
        dataset.len(),
        dynamic,
        scene.frames(),
        records.len(),
        boxes.len()
    );
    Ok(())
}

const TRAIN_KEYS: &[&str] = &[
    "epochs",
    "batch_size",
    "learning_rate",
    "gamma",
    "milestones",
    "beta1",
    "beta2",
    "adam_epsilon",
];

fn parse_list(path: Option<&Path>, line: usize, key: &str, value: &str) -> CliResult<Vec<usize>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(path, line, key, s))
        .collect()
}

/// Defaults, then the config file, then command-line flags.
pub fn resolve_train_config(path: Option<&Path>, seed: u64, flags: &TrainingFlags) -> CliResult<TrainConfig> {
    let mut cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    for (line, key, value) in read_key_values(path)? {
        let v = value.as_str();
        match key.as_str() {
            "epochs" => cfg.epochs = parse_value(path, line, &key, v)?,
            "batch_size" => cfg.batch_size = parse_value(path, line, &key, v)?,
            "learning_rate" => cfg.learning_rate = parse_value(path, line, &key, v)?,
            "gamma" => cfg.lr_decay_gamma = parse_value(path, line, &key, v)?,
            "milestones" => cfg.lr_milestones = parse_list(path, line, &key, v)?,
            "beta1" => cfg.beta1 = parse_value(path, line, &key, v)?,
            "beta2" => cfg.beta2 = parse_value(path, line, &key, v)?,
            "adam_epsilon" => cfg.adam_epsilon = parse_value(path, line, &key, v)?,
            _ => return Err(unknown_key(path, line, &key, TRAIN_KEYS)),
        }
    }
    if let Some(v) = flags.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = flags.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = flags.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = flags.gamma {
        cfg.lr_decay_gamma = v;
    }
    if let Some(v) = &flags.milestones {
        cfg.lr_milestones = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train_config_text(cfg: &TrainConfig) -> String {
    let milestones: Vec<String> = cfg.lr_milestones.iter().map(usize::to_string).collect();
    let mut s = String::new();
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "epochs = {}", cfg.epochs);
    let _ = writeln!(s, "batch_size = {}", cfg.batch_size);
    let _ = writeln!(s, "learning_rate = {:?}", cfg.learning_rate);
    let _ = writeln!(s, "gamma = {:?}", cfg.lr_decay_gamma);
    let _ = writeln!(s, "milestones = {}", milestones.join(","));
    let _ = writeln!(s, "beta1 = {:?}", cfg.beta1);
    let _ = writeln!(s, "beta2 = {:?}", cfg.beta2);
    let _ = writeln!(s, "adam_epsilon = {:?}", cfg.adam_epsilon);
    s
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let cfg = resolve_train_config(args.config.as_deref(), args.seed, &args.training)?;
    let records = load_records(&args.dataset)?;
    let parts = split(&records, args.seed)?;
    let outcome = train(&labeled(&parts.train), &labeled(&parts.val), &cfg)?;
    create_dir(&args.out)?;

    write_with(&args.out.join("model.txt"), |w| write_model(&outcome.model, w))?;
    let mut history = String::from("epoch,learning_rate,train_loss,train_accuracy,val_loss,val_accuracy\n");
    for h in &outcome.history {
        let _ = writeln!(
            history,
            "{},{:?},{:?},{:?},{:?},{:?}",
            h.epoch, h.learning_rate, h.train_loss, h.train_accuracy, h.val_loss, h.val_accuracy
        );
    }
    write_text(&args.out.join("history.csv"), &history)?;
    write_text(
        &args.out.join(CONFIG_FILE),
        &format!("dataset = {}\n{}", args.dataset.display(), train_config_text(&cfg)),
    )?;

    let first = &outcome.history[0];
    let last = outcome.history.last().expect("at least one epoch");
    let best = outcome.best();
    println!(
        "train loss {:.4} -> {:.4}; best val accuracy {:.4} at epoch {}",
        first.train_loss, last.train_loss, best.val_accuracy, best.epoch
    );
    Ok(())
}

/// One row of the classification report.
#[derive(Debug, Clone)]
pub struct MethodScores {
    pub method: String,
    pub scores: Scores,
}

/// MLP and threshold baselines on the test split; thresholds are fitted on
/// the training split.
pub fn evaluate(
    records: &[FeatureRecord],
    model: &MlpModel,
    seed: u64,
    baselines: bool,
) -> CliResult<Vec<MethodScores>> {
    let parts = split(records, seed)?;
    let test = labeled(&parts.test);
    let truth: Vec<u8> = test.iter().map(|s| s.label).collect();
    let vectors: Vec<_> = test.iter().map(|s| s.vector).collect();
    let predicted: Vec<u8> = model.predict_batch(&vectors).iter().map(|p| p.label).collect();
    let mut rows = vec![MethodScores {
        method: "MLP".into(),
        scores: Scores::evaluate(&truth, &predicted)?,
    }];
    if baselines {
        let train_set = labeled(&parts.train);
        for spec in [
            ThresholdSpec::reprojection_epipolar(),
            ThresholdSpec::reprojection_only(),
            ThresholdSpec::epipolar_only(),
        ] {
            let c = fit_thresholds(&train_set, &spec)?;
            rows.push(MethodScores {
                method: spec.name.clone(),
                scores: Scores::evaluate(&truth, &c.classify_batch(&vectors))?,
            });
        }
    }
    Ok(rows)
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    let records = load_records(&args.dataset)?;
    let model = load_model(&args.model)?;
    let rows = evaluate(&records, &model, args.seed, !args.no_baselines)?;
    create_dir(&args.out)?;
    let mut csv = String::from("method,accuracy,precision,recall,f1\n");
    for r in &rows {
        let s = &r.scores;
        let _ = writeln!(
            csv,
            "{},{:.6},{:.6},{:.6},{:.6}",
            r.method, s.accuracy, s.precision, s.recall, s.f1
        );
    }
    write_text(&args.out.join("metrics.csv"), &csv)?;
    write_text(
        &args.out.join(CONFIG_FILE),
        &format!(
            "dataset = {}\nmodel = {}\nseed = {}\nbaselines = {}\n",
            args.dataset.display(),
            args.model.display(),
            args.seed,
            !args.no_baselines
        ),
    )?;
    print_csv(&csv);
    Ok(())
}

const VO_KEYS: &[&str] = &["eta", "min_points", "huber", "max_iterations", "epsilon"];

/// Depth-filter and solver settings: defaults, then the config file, then flags.
pub fn resolve_vo_config(
    path: Option<&Path>,
    eta: Option<f64>,
    huber: Option<f64>,
) -> CliResult<(DepthFilterParams, RobustSolverConfig, f64)> {
    let mut eta_v = DEFAULT_ETA;
    let mut min_points = DEFAULT_MIN_POINTS;
    let mut huber_v = DEFAULT_HUBER_DELTA;
    let mut solver = RobustSolverConfig::with_kernel(RobustKernel::Huber(DEFAULT_HUBER_DELTA));
    for (line, key, value) in read_key_values(path)? {
        let v = value.as_str();
        match key.as_str() {
            "eta" => eta_v = parse_value(path, line, &key, v)?,
            "min_points" => min_points = parse_value(path, line, &key, v)?,
            "huber" => huber_v = parse_value(path, line, &key, v)?,
            "max_iterations" => solver.max_iterations = parse_value(path, line, &key, v)?,
            "epsilon" => solver.epsilon = parse_value(path, line, &key, v)?,
            _ => return Err(unknown_key(path, line, &key, VO_KEYS)),
        }
    }
    eta_v = eta.unwrap_or(eta_v);
    huber_v = huber.unwrap_or(huber_v);
    let params = DepthFilterParams::new(eta_v, min_points)?;
    solver.kernel = RobustKernel::Huber(huber_v);
    solver.validate()?;
    Ok((params, solver, huber_v))
}

fn diagnostics_csv(result: &SequenceResult) -> String {
    let mut s = String::from(
        "frame,points,outside_box,background,classified_static,classified_dynamic,\
         coarse_points,fine_points,coarse_iterations,fine_iterations,coarse_fallback,fine_fallback\n",
    );
    for (i, f) in result.frames.iter().enumerate() {
        let d = &f.diagnostics;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            i + 1,
            d.points,
            d.outside_box,
            d.background,
            d.classified_static,
            d.classified_dynamic,
            d.coarse_points,
            d.fine_points,
            d.coarse_iterations,
            d.fine_iterations,
            u8::from(d.coarse_fallback),
            u8::from(d.fine_fallback)
        );
    }
    s
}

pub fn cmd_vo(args: &VoArgs) -> CliResult<()> {
    let (params, solver, huber) = resolve_vo_config(args.config.as_deref(), args.eta, args.huber)?;
    let scene_cfg_path = args.scene.join(CONFIG_FILE);
    let pairs = parse_key_values(&read_text(&scene_cfg_path)?).map_err(|e| CliError::file(&scene_cfg_path, e))?;
    let scene_cfg = GeneratorConfig::from_key_values(pairs.into_iter().filter(|(_, k, _)| k != "seed"))
        .map_err(|e| CliError::file(&scene_cfg_path, e))?;
    let k = scene_cfg.intrinsics()?;

    let records = load_records(&args.scene.join("records.csv"))?;
    let boxes_path = args.scene.join("boxes.txt");
    let boxes = parse_boxes(BufReader::new(
        fs::File::open(&boxes_path).map_err(|e| CliError::file(&boxes_path, e))?,
    ))
    .map_err(|e| CliError::file(&boxes_path, e))?;
    let gt_path = args.scene.join("groundtruth.txt");
    let gt = parse_trajectory(BufReader::new(
        fs::File::open(&gt_path).map_err(|e| CliError::file(&gt_path, e))?,
    ))
    .map_err(|e| CliError::file(&gt_path, e))?;
    let model = load_model(&args.model)?;

    let frames = frames_from_records(&records, &boxes);
    if frames.len() + 1 != gt.len() {
        return Err(CliError::file(
            &gt_path,
            mlpvo::Error::InsufficientData(format!(
                "{} frame pairs in records but {} ground-truth poses",
                frames.len(),
                gt.len()
            )),
        ));
    }
    let gt_poses: Vec<Pose> = gt.iter().map(|(_, p)| *p).collect();
    let ids: Vec<i64> = gt.iter().map(|(id, _)| *id).collect();

    let pipeline = run_pipeline_sequence(&frames, &model, &params, &solver, &k)?;
    let naive = run_naive_sequence(&frames, &solver, &k)?;
    let oracle = run_pipeline_sequence(&frames, &LabelOracle, &params, &solver, &k)?;

    create_dir(&args.out)?;
    let mut csv = String::from("variant,ate_m,improvement_over_naive\n");
    let naive_ate = ate(&naive.trajectory, &gt_poses)?;
    for (name, result) in [("pipeline", &pipeline), ("naive", &naive), ("oracle", &oracle)] {
        let tagged: Vec<(i64, Pose)> = ids.iter().copied().zip(result.trajectory.iter().copied()).collect();
        write_with(&args.out.join(format!("trajectory_{name}.txt")), |w| write_trajectory(&tagged, w))?;
        let e = ate(&result.trajectory, &gt_poses)?;
        let ratio = if e > 0.0 { naive_ate / e } else { f64::INFINITY };
        let _ = writeln!(csv, "{name},{e:.9},{ratio:.4}");
    }
    write_text(&args.out.join("ate.csv"), &csv)?;
    write_text(&args.out.join("diagnostics.csv"), &diagnostics_csv(&pipeline))?;
    write_text(
        &args.out.join(CONFIG_FILE),
        &format!(
            "scene = {}\nmodel = {}\neta = {:?}\nmin_points = {}\nhuber = {:?}\nmax_iterations = {}\nepsilon = {:?}\n",
            args.scene.display(),
            args.model.display(),
            params.eta,
            params.min_points,
            huber,
            solver.max_iterations,
            solver.epsilon
        ),
    )?;
    print_csv(&csv);
    Ok(())
}

fn print_csv(csv: &str) {
    if let Some((header, rows)) = parse_csv(csv) {
        print!("{}", render_table(&header, &rows));
    }
}

pub fn cmd_report(args: &ReportArgs) -> CliResult<()> {
    let text = read_text(&args.csv)?;
    let (header, rows) = parse_csv(&text).ok_or_else(|| {
        CliError::file(&args.csv, mlpvo::Error::InsufficientData("no header line".into()))
    })?;
    print!("{}", render_table(&header, &rows));
    Ok(())
}
