use crate::config::{echo_config, FileConfig};
use clap::Args;
use retain_core::error::{Error, Result};
use retain_core::interpretation::{
    contributions, event_evolution, max_contribution_profile, no_event_profile,
    write_profile_csv, AnnotatedContribution, ContributionProfile, EventKind,
};
use retain_core::metrics::{
    build_tracks, cg_ega, evaluate, write_cgega_points_csv, write_report_csv, write_report_json,
};
use retain_core::models::{
    load_model, retain_forward, save_model, BaselineParameters, RetainParameters,
};
use retain_core::pipeline::{
    fit_standardizer, ingest_csv, make_windows, split_protocol, write_ingest_csv, Fold,
    PipelineConfig, SampleWindow, StandardizationParams,
};
use retain_core::synth::{simulate, SimConfig};
use retain_core::training::{train, TrainConfig};
use retain_core::{Model, ModelDimensions};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const SIGNALS: [&str; 3] = ["glucose", "insulin", "cho"];
const STEP_MINUTES: i64 = 5;

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

// --- shared flag groups ----------------------------------------------------

#[derive(Args, Debug)]
pub struct DimArgs {
    /// History length in 5-min steps (default 36 = 3 h)
    #[arg(long)]
    pub history: Option<usize>,
    /// Prediction horizon in 5-min steps (default 6 = 30 min)
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Embedding size (default 64)
    #[arg(long)]
    pub embed: Option<usize>,
    /// Recurrent hidden size (default 128)
    #[arg(long)]
    pub hidden: Option<usize>,
}

impl DimArgs {
    fn resolve(&self, file: &FileConfig) -> Result<ModelDimensions> {
        let defaults = ModelDimensions::default();
        let dims = ModelDimensions {
            inputs: 3,
            history: file.resolve(self.history, "history", defaults.history)?,
            horizon: file.resolve(self.horizon, "horizon", defaults.horizon)?,
            embed: file.resolve(self.embed, "embed", defaults.embed)?,
            hidden: file.resolve(self.hidden, "hidden", defaults.hidden)?,
        };
        dims.validate()?;
        Ok(dims)
    }
}

fn dim_entries(dims: &ModelDimensions) -> Vec<(&'static str, String)> {
    vec![
        ("history", dims.history.to_string()),
        ("horizon", dims.horizon.to_string()),
        ("embed", dims.embed.to_string()),
        ("hidden", dims.hidden.to_string()),
    ]
}

/// Reads every `*.csv` under `data` (sorted by name, stem = patient id) and
/// windows each patient's series.
fn load_patients(
    data: &Path,
    dims: &ModelDimensions,
) -> Result<Vec<(String, Vec<SampleWindow>)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(data)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |e| e == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Contract(format!(
            "no CSV files under {}",
            data.display()
        )));
    }
    let mut patients = Vec::new();
    for path in paths {
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("patient")
            .to_string();
        let series = ingest_csv(&path, &id, &PipelineConfig::default())?;
        patients.push((id, make_windows(&series, dims)));
    }
    Ok(patients)
}

/// Fits the standardizer on the fold's training windows and standardizes all
/// three window sets.
fn standardize_fold(
    fold: &Fold,
) -> Result<(
    Vec<SampleWindow>,
    Vec<SampleWindow>,
    Vec<SampleWindow>,
    StandardizationParams,
)> {
    let std_params = fit_standardizer(&fold.train)?;
    Ok((
        std_params.apply(&fold.train)?,
        std_params.apply(&fold.valid)?,
        std_params.apply(&fold.test)?,
        std_params,
    ))
}

// --- generate ----------------------------------------------------------

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Key=value config file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for the per-patient CSVs
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of simulated patients
    #[arg(long)]
    pub patients: Option<usize>,
    /// Days of data per patient
    #[arg(long)]
    pub days: Option<u32>,
    /// Base RNG seed; patient i uses seed + i
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let out = file
        .resolve_opt(args.out.clone(), "out")?
        .ok_or_else(|| Error::Contract("--out (or config key 'out') is required".into()))?;
    let patients = file.resolve(args.patients, "patients", 5)?;
    let days = file.resolve(args.days, "days", 31)?;
    let seed = file.resolve(args.seed, "seed", 0)?;
    if patients == 0 {
        return Err(Error::Contract("patients must be positive".into()));
    }
    ensure_dir(&out)?;
    for i in 1..=patients {
        let config = SimConfig {
            seed: seed + i as u64,
            days,
            ..SimConfig::default()
        };
        let id = format!("patient_{}", i);
        let series = simulate(&id, &config)?;
        let mut w = create(&out.join(format!("{}.csv", id)))?;
        write_ingest_csv(&series, &mut w)?;
        w.flush()?;
    }
    echo_config(
        &out,
        &[
            ("command", "generate".into()),
            ("patients", patients.to_string()),
            ("days", days.to_string()),
            ("seed", seed.to_string()),
        ],
    )?;
    println!("generated {} patients under {}", patients, out.display());
    Ok(())
}

// --- train ---------------------------------------------------------------

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory of raw per-patient CSVs
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Architecture: retain | lstm
    #[arg(long)]
    pub model: Option<String>,
    /// Held-out patient; omit to train every leave-one-patient-out fold
    #[arg(long)]
    pub test_patient: Option<String>,
    #[command(flatten)]
    pub dims: DimArgs,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep every n-th training window (1 = all)
    #[arg(long)]
    pub stride: Option<usize>,
}

fn init_model(kind: &str, dims: ModelDimensions, seed: u64) -> Result<Model> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    match kind {
        "retain" => Ok(Model::Retain(RetainParameters::init(dims, &mut rng)?)),
        "lstm" => Ok(Model::Baseline(BaselineParameters::init(dims, &mut rng)?)),
        other => Err(Error::Contract(format!(
            "unknown model '{}'; expected retain or lstm",
            other
        ))),
    }
}

fn subsample(windows: Vec<SampleWindow>, stride: usize) -> Vec<SampleWindow> {
    if stride <= 1 {
        return windows;
    }
    windows.into_iter().step_by(stride).collect()
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let data = file
        .resolve_opt(args.data.clone(), "data")?
        .ok_or_else(|| Error::Contract("--data is required".into()))?;
    let out = file
        .resolve_opt(args.out.clone(), "out")?
        .ok_or_else(|| Error::Contract("--out is required".into()))?;
    let kind = file.resolve(args.model.clone(), "model", "retain".to_string())?;
    let test_patient = file.resolve_opt(args.test_patient.clone(), "test_patient")?;
    let dims = args.dims.resolve(&file)?;
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        learning_rate: file.resolve(args.learning_rate, "learning_rate", defaults.learning_rate)?,
        batch_size: file.resolve(args.batch_size, "batch_size", defaults.batch_size)?,
        max_epochs: file.resolve(args.max_epochs, "max_epochs", defaults.max_epochs)?,
        patience: file.resolve(args.patience, "patience", defaults.patience)?,
        seed: file.resolve(args.seed, "seed", defaults.seed)?,
        ..defaults
    };
    config.validate()?;
    let stride = file.resolve(args.stride, "stride", 1)?;
    if stride == 0 {
        return Err(Error::Contract("stride must be positive".into()));
    }

    let patients = load_patients(&data, &dims)?;
    let folds = split_protocol(&patients)?;
    ensure_dir(&out)?;

    for fold in &folds {
        if let Some(ref only) = test_patient {
            if fold.test_patient != *only {
                continue;
            }
        }
        let (train_set, valid_set, _, std_params) = standardize_fold(fold)?;
        let train_set = subsample(train_set, stride);
        let valid_set = subsample(valid_set, stride);
        let mut model = init_model(&kind, dims, config.seed)?;
        let report = train(&mut model, &train_set, &valid_set, &std_params, &config)?;
        save_model(&model, &out.join(format!("model_{}.bin", fold.test_patient)))?;
        let mut w = create(&out.join(format!("train_report_{}.csv", fold.test_patient)))?;
        report.write_csv(&mut w)?;
        w.flush()?;
        println!(
            "fold {}: best epoch {} valid MSE {:.6}",
            fold.test_patient,
            report.best_epoch,
            report.best_valid_mse()
        );
    }
    if test_patient.is_some()
        && !folds
            .iter()
            .any(|f| Some(&f.test_patient) == test_patient.as_ref())
    {
        return Err(Error::Contract(format!(
            "test patient '{}' not in data",
            test_patient.unwrap()
        )));
    }

    let mut entries = vec![
        ("command", "train".into()),
        ("data", data.display().to_string()),
        ("model", kind),
        (
            "test_patient",
            test_patient.clone().unwrap_or_else(|| "all".into()),
        ),
        ("learning_rate", config.learning_rate.to_string()),
        ("batch_size", config.batch_size.to_string()),
        ("max_epochs", config.max_epochs.to_string()),
        ("patience", config.patience.to_string()),
        ("seed", config.seed.to_string()),
        ("stride", stride.to_string()),
    ];
    entries.extend(dim_entries(&dims));
    echo_config(&out, &entries)?;
    Ok(())
}

// --- evaluate --------------------------------------------------------------

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Directory holding model_<patient>.bin files from `train`
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub dims: DimArgs,
    /// Score the true targets against themselves (pipeline check)
    #[arg(long)]
    pub oracle: bool,
    /// Maximum time-lag search shift in 5-min steps (default = horizon)
    #[arg(long)]
    pub max_shift: Option<usize>,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let data = file
        .resolve_opt(args.data.clone(), "data")?
        .ok_or_else(|| Error::Contract("--data is required".into()))?;
    let out = file
        .resolve_opt(args.out.clone(), "out")?
        .ok_or_else(|| Error::Contract("--out is required".into()))?;
    let dims = args.dims.resolve(&file)?;
    let oracle = file.resolve_flag(args.oracle, "oracle")?;
    let max_shift = file.resolve(args.max_shift, "max_shift", dims.horizon)?;
    let models = file.resolve_opt(args.models.clone(), "models")?;
    if !oracle && models.is_none() {
        return Err(Error::Contract("--models is required unless --oracle".into()));
    }

    let patients = load_patients(&data, &dims)?;
    let folds = split_protocol(&patients)?;

    let mut all_windows = Vec::new();
    let mut predictions = Vec::new();
    for fold in &folds {
        let (_, _, test_std, std_params) = standardize_fold(fold)?;
        let preds: Vec<f64> = if oracle {
            test_std.iter().map(|w| w.y).collect()
        } else {
            let path = models
                .as_ref()
                .unwrap()
                .join(format!("model_{}.bin", fold.test_patient));
            let model = load_model(&path)?;
            let md = model.dims();
            // embed/hidden are the model's own business; the window shape
            // and target offset must match the data we just built
            if (md.inputs, md.history, md.horizon) != (dims.inputs, dims.history, dims.horizon) {
                return Err(Error::Contract(format!(
                    "model {} was trained with different window dimensions",
                    path.display()
                )));
            }
            let mut preds = Vec::with_capacity(test_std.len());
            for w in &test_std {
                preds.push(std_params.destandardize_prediction(model.predict(&w.x)?));
            }
            preds
        };
        all_windows.extend(test_std);
        predictions.extend(preds);
    }

    let report = evaluate(&all_windows, &predictions, max_shift)?;
    ensure_dir(&out)?;
    let mut w = create(&out.join("report.csv"))?;
    write_report_csv(&report, &mut w)?;
    w.flush()?;
    let mut w = create(&out.join("report.json"))?;
    write_report_json(&report, &mut w)?;
    w.flush()?;
    let tracks: Vec<_> = build_tracks(&all_windows, &predictions)?
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    let (outcomes, _) = cg_ega(&tracks)?;
    let mut w = create(&out.join("cgega_points.csv"))?;
    write_cgega_points_csv(&outcomes, &mut w)?;
    w.flush()?;

    let mut entries = vec![
        ("command", "evaluate".into()),
        ("data", data.display().to_string()),
        (
            "models",
            models.map_or("none".into(), |m| m.display().to_string()),
        ),
        ("oracle", oracle.to_string()),
        ("max_shift", max_shift.to_string()),
    ];
    entries.extend(dim_entries(&dims));
    echo_config(&out, &entries)?;
    println!(
        "population RMSE {:.3} +/- {:.3} mg/dL over {} patients",
        report.mean.rmse,
        report.std.rmse,
        report.per_patient.len()
    );
    Ok(())
}

// --- interpret -------------------------------------------------------------

#[derive(Args, Debug)]
pub struct InterpretArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Trained attention-model weight file
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    /// Fold to explain (the held-out patient)
    #[arg(long)]
    pub test_patient: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Steps without any event for the quiet profile (default 12 = 1 h)
    #[arg(long)]
    pub event_window: Option<usize>,
    /// Re-verify the decomposition identity on every sample and report the
    /// worst residual
    #[arg(long)]
    pub audit: bool,
}

fn write_evolution_csv<W: Write>(
    evolution: &[ContributionProfile],
    out: &mut W,
) -> Result<()> {
    writeln!(out, "event_lag_min,signal,offset_min,value,count")?;
    for (lag, profile) in evolution.iter().enumerate() {
        let values = match &profile.values {
            Some(v) => v,
            None => continue,
        };
        let h_len = values.rows()?;
        for (j, name) in SIGNALS.iter().enumerate() {
            for i in 0..h_len {
                let offset = -((h_len - 1 - i) as i64) * STEP_MINUTES;
                writeln!(
                    out,
                    "{},{},{},{:.12e},{}",
                    lag as i64 * STEP_MINUTES,
                    name,
                    offset,
                    values.at(i, j),
                    profile.count
                )?;
            }
        }
    }
    Ok(())
}

pub fn cmd_interpret(args: &InterpretArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let data = file
        .resolve_opt(args.data.clone(), "data")?
        .ok_or_else(|| Error::Contract("--data is required".into()))?;
    let model_file = file
        .resolve_opt(args.model_file.clone(), "model_file")?
        .ok_or_else(|| Error::Contract("--model-file is required".into()))?;
    let out = file
        .resolve_opt(args.out.clone(), "out")?
        .ok_or_else(|| Error::Contract("--out is required".into()))?;
    let test_patient = file.resolve_opt(args.test_patient.clone(), "test_patient")?;
    let event_window = file.resolve(args.event_window, "event_window", 12)?;
    let audit = file.resolve_flag(args.audit, "audit")?;

    let model = load_model(&model_file)?;
    let params = match &model {
        Model::Retain(p) => p,
        Model::Baseline(_) => {
            return Err(Error::Contract(
                "interpretation requires the attention model, got lstm".into(),
            ))
        }
    };
    let dims = *model.dims();
    let patients = load_patients(&data, &dims)?;
    let folds = split_protocol(&patients)?;
    let fold = match &test_patient {
        Some(id) => folds
            .iter()
            .find(|f| f.test_patient == *id)
            .ok_or_else(|| Error::Contract(format!("test patient '{}' not in data", id)))?,
        None => &folds[0],
    };
    let (_, _, test_std, _) = standardize_fold(fold)?;

    let mut annotated = Vec::with_capacity(test_std.len());
    let mut max_residual = 0.0f64;
    for w in &test_std {
        let trace = retain_forward(params, &w.x)?;
        let map = contributions(params, &trace, &w.x)?;
        if audit {
            let total: f64 = map.omega.data().iter().sum::<f64>() + map.bias;
            let residual =
                (total - trace.prediction).abs() / trace.prediction.abs().max(1.0);
            max_residual = max_residual.max(residual);
        }
        annotated.push(AnnotatedContribution {
            map,
            insulin_lag: w.insulin_lag,
            cho_lag: w.cho_lag,
        });
    }

    ensure_dir(&out)?;
    let maps: Vec<_> = annotated.iter().map(|a| a.map.clone()).collect();
    let mut w = create(&out.join("max_profile.csv"))?;
    write_profile_csv(
        &max_contribution_profile(&maps)?,
        &SIGNALS,
        STEP_MINUTES,
        &mut w,
    )?;
    w.flush()?;
    for (kind, name) in [(EventKind::Insulin, "event_insulin"), (EventKind::Cho, "event_cho")] {
        let evolution = event_evolution(&annotated, kind, dims.history);
        let mut w = create(&out.join(format!("{}.csv", name)))?;
        write_evolution_csv(&evolution, &mut w)?;
        w.flush()?;
    }
    let mut w = create(&out.join("no_event.csv"))?;
    write_profile_csv(
        &no_event_profile(&annotated, event_window),
        &SIGNALS,
        STEP_MINUTES,
        &mut w,
    )?;
    w.flush()?;

    if audit {
        std::fs::write(
            out.join("audit.txt"),
            format!(
                "samples = {}\nmax_relative_residual = {:.3e}\n",
                annotated.len(),
                max_residual
            ),
        )?;
        println!(
            "decomposition audit: {} samples, max relative residual {:.3e}",
            annotated.len(),
            max_residual
        );
    }

    let mut entries = vec![
        ("command", "interpret".into()),
        ("data", data.display().to_string()),
        ("model_file", model_file.display().to_string()),
        (
            "test_patient",
            test_patient.unwrap_or_else(|| fold.test_patient.clone()),
        ),
        ("event_window", event_window.to_string()),
        ("audit", audit.to_string()),
    ];
    entries.extend(dim_entries(&dims));
    echo_config(&out, &entries)?;
    Ok(())
}
