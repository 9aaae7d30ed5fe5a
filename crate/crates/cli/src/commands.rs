//! The pipeline stages. Each command reads its inputs from disk, writes its
//! artifacts, and returns a summary for printing.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::{info, warn};
use ossmm_core::dsp::spectral::{DEFAULT_SPECTROGRAM_HOP_S, DEFAULT_SPECTROGRAM_WIN_S};
use ossmm_core::dsp::{periodogram, spectrogram, EOG_WINDOW};
use ossmm_core::features::eog::{detect_spindles, SPINDLE_BAND_HZ};
use ossmm_core::features::{
    csv_header, extract_all, extract_frames, names, read_features_csv, write_features_csv, EpochSignals,
    FeatureRow,
};
use ossmm_core::ingest::{
    align, discover_nights, frame_range, label_windows, load_night, IngestSummary, LoadedNight, FRAMES_FILE,
    LABELS_FILE, META_FILE,
};
use ossmm_core::ml::{
    class_distribution, evaluate, fit_resampled, named_importance, predict, run_cv, select_config,
    ClassifierConfig, ClassifierKind, CvResults, Dataset, TrainedModel, MODEL_FORMAT_VERSION,
};
use ossmm_core::stream::{OnlineSession, ReplayEvent};
use ossmm_core::synth::corpus::{choose_test_nights, DEFAULT_EPOCHS_PER_NIGHT, DEFAULT_NIGHTS};
use ossmm_core::synth::{generate_corpus, read_manifest, CorpusManifest, CorpusOptions, CORPUS_MANIFEST};
use ossmm_core::{
    Baselines, DatasetSplit, EvaluationReport, FeatureImportance, SleepStage, FS_HZ, N_CLASSES,
};
use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::error::CliError;
use crate::provenance::{read_json, sha256_bytes, write_bytes, write_json, Provenance};

pub const CORPUS_PROVENANCE: &str = "corpus.provenance.json";
pub const INGEST_REPORT: &str = "ingest.json";
pub const FEATURES_CSV: &str = "features.csv";
pub const FEATURES_META: &str = "features.csv.meta.json";
pub const SPLIT_FILE: &str = "split.json";
pub const CV_FILE: &str = "cv.json";
pub const MODELS_DIR: &str = "models";
pub const REPORT_FILE: &str = "report.json";
pub const INSPECT_DIR: &str = "inspect";
pub const TOP_IMPORTANCES: usize = 10;

pub fn model_file_name(kind: ClassifierKind) -> &'static str {
    match kind {
        ClassifierKind::Svm => "svm.json",
        ClassifierKind::RandomForest => "random_forest.json",
        ClassifierKind::GradientBoostedTrees => "gradient_boosted_trees.json",
    }
}

fn rel(parts: &[&str]) -> String {
    parts.join("/")
}

// ---------------------------------------------------------------- corpus

struct CorpusNight {
    meta_id: String,
    dir: PathBuf,
    dir_name: String,
}

fn corpus_nights(corpus: &Path) -> Result<Vec<CorpusNight>, CliError> {
    if !corpus.is_dir() {
        return Err(CliError::missing(corpus, "synth"));
    }
    let found = discover_nights(corpus)?;
    if found.is_empty() {
        return Err(CliError::missing(&corpus.join("*").join(META_FILE), "synth"));
    }
    let mut nights: Vec<((i64, String), CorpusNight)> = found
        .into_iter()
        .map(|(meta, dir)| {
            let dir_name = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let key = (meta.start_utc.timestamp_millis(), meta.night_id.clone());
            (
                key,
                CorpusNight {
                    meta_id: meta.night_id,
                    dir,
                    dir_name,
                },
            )
        })
        .collect();
    // Chronological, id as tie break.
    nights.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(nights.into_iter().map(|(_, n)| n).collect())
}

fn hash_corpus(prov: &mut Provenance, corpus: &Path, nights: &[CorpusNight]) -> Result<(), CliError> {
    for n in nights {
        for file in [META_FILE, LABELS_FILE, FRAMES_FILE] {
            prov.add(corpus, &rel(&[&n.dir_name, file]), "synth")?;
        }
    }
    if corpus.join(CORPUS_MANIFEST).is_file() {
        prov.add(corpus, CORPUS_MANIFEST, "synth")?;
    }
    Ok(())
}

fn load(n: &CorpusNight) -> Result<LoadedNight, CliError> {
    let loaded = load_night(&n.dir)?;
    for w in &loaded.labels.warnings {
        warn!("{}: {w}", n.meta_id);
    }
    Ok(loaded)
}

// ----------------------------------------------------------------- synth

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRecord {
    pub provenance: Provenance,
    pub n_nights: usize,
    pub epochs_per_night: usize,
    /// SHA-256 of every generated file.
    pub outputs: BTreeMap<String, String>,
}

pub fn cmd_synth(s: &Settings, nights: Option<usize>, epochs: Option<usize>) -> Result<CorpusManifest, CliError> {
    let corpus = s.corpus()?;
    let opts = CorpusOptions {
        n_nights: nights.unwrap_or(DEFAULT_NIGHTS),
        epochs_per_night: epochs.unwrap_or(DEFAULT_EPOCHS_PER_NIGHT),
        ..CorpusOptions::new(s.seed)
    };
    opts.profiles.validate().map_err(CliError::invalid)?;
    // Nights of an earlier, larger corpus would otherwise be picked up again.
    if let Ok(old) = read_manifest(corpus) {
        let keep: Vec<String> = (0..opts.n_nights).map(ossmm_core::synth::corpus::night_id).collect();
        for n in old.nights.iter().filter(|n| !keep.contains(&n.night_id)) {
            let dir = corpus.join(&n.night_id);
            if dir.join(META_FILE).is_file() {
                std::fs::remove_dir_all(&dir).map_err(|e| anyhow::anyhow!("{}: {e}", dir.display()))?;
            }
        }
    }
    info!(
        "generating {} nights of {} epochs into {}",
        opts.n_nights,
        opts.epochs_per_night,
        corpus.display()
    );
    let manifest = generate_corpus(corpus, &opts)?;
    let mut hashes = Provenance::new(s.seed);
    for n in &manifest.nights {
        for file in [META_FILE, LABELS_FILE, FRAMES_FILE] {
            hashes.add(corpus, &rel(&[&n.night_id, file]), "synth")?;
        }
    }
    hashes.add(corpus, CORPUS_MANIFEST, "synth")?;
    let record = SynthRecord {
        provenance: Provenance::new(s.seed),
        n_nights: opts.n_nights,
        epochs_per_night: opts.epochs_per_night,
        outputs: hashes.inputs,
    };
    write_json(&corpus.join(CORPUS_PROVENANCE), &record)?;
    Ok(manifest)
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NightIngest {
    pub night_id: String,
    pub frames: usize,
    pub summary: IngestSummary,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub provenance: Provenance,
    pub nights: Vec<NightIngest>,
    pub total: IngestSummary,
    pub reconciles: bool,
}

pub fn cmd_ingest(s: &Settings) -> Result<IngestReport, CliError> {
    let corpus = s.corpus()?;
    let out = s.out()?;
    let nights = corpus_nights(corpus)?;
    let mut prov = Provenance::new(s.seed);
    hash_corpus(&mut prov, corpus, &nights)?;
    let mut per_night = Vec::with_capacity(nights.len());
    for n in &nights {
        let loaded = load(n)?;
        let (_, summary) = align(&loaded.recording, &loaded.labels)?;
        per_night.push(NightIngest {
            night_id: n.meta_id.clone(),
            frames: loaded.recording.frames.len(),
            summary,
            warnings: loaded.labels.warnings.clone(),
        });
    }
    let total: IngestSummary = per_night.iter().map(|n| n.summary).sum();
    let report = IngestReport {
        provenance: prov,
        nights: per_night,
        total,
        reconciles: total.reconciles(),
    };
    write_json(&out.join(INGEST_REPORT), &report)?;
    Ok(report)
}

// --------------------------------------------------------------- extract

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub provenance: Provenance,
    /// `config`, `manifest` or `seeded`.
    pub source: String,
    pub calendar: Vec<String>,
    pub split: DatasetSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesMeta {
    pub provenance: Provenance,
    pub features_sha256: String,
    pub columns: Vec<String>,
    pub rows: usize,
    pub rows_per_night: BTreeMap<String, usize>,
    pub ingest: IngestSummary,
}

fn check_split(split: &DatasetSplit, calendar: &[String]) -> Result<(), CliError> {
    split.validate(calendar)?;
    if let Some(n) = split.train_nights.iter().find(|n| !calendar.contains(n)) {
        return Err(CliError::invalid(format!("train night {n} is not in the corpus")));
    }
    Ok(())
}

fn resolve_split(s: &Settings, corpus: &Path, calendar: &[String]) -> Result<(DatasetSplit, &'static str), CliError> {
    if let Some(split) = &s.split {
        check_split(split, calendar)?;
        return Ok((split.clone(), "config"));
    }
    if corpus.join(CORPUS_MANIFEST).is_file() {
        let manifest = read_manifest(corpus).map_err(|e| CliError::invalid(e.to_string()))?;
        check_split(&manifest.split, calendar)?;
        return Ok((manifest.split, "manifest"));
    }
    let test = choose_test_nights(s.seed, calendar.len())?;
    let (test_nights, train_nights): (Vec<_>, Vec<_>) = calendar
        .iter()
        .enumerate()
        .partition(|(i, _)| test.contains(i));
    let split = DatasetSplit {
        train_nights: train_nights.into_iter().map(|(_, n)| n.clone()).collect(),
        test_nights: test_nights.into_iter().map(|(_, n)| n.clone()).collect(),
    };
    Ok((split, "seeded"))
}

pub fn cmd_extract(s: &Settings) -> Result<FeaturesMeta, CliError> {
    let corpus = s.corpus()?;
    let out = s.out()?;
    let nights = corpus_nights(corpus)?;
    let calendar: Vec<String> = nights.iter().map(|n| n.meta_id.clone()).collect();
    let (split, source) = resolve_split(s, corpus, &calendar)?;
    let mut prov = Provenance::new(s.seed);
    hash_corpus(&mut prov, corpus, &nights)?;

    let mut rows: Vec<FeatureRow> = Vec::new();
    let mut rows_per_night = BTreeMap::new();
    let mut ingest = IngestSummary::default();
    for n in &nights {
        let loaded = load(n)?;
        let (epochs, summary) = align(&loaded.recording, &loaded.labels)?;
        let night_rows = extract_all(&epochs)?;
        info!("{}: {} qualified epochs", n.meta_id, night_rows.len());
        rows_per_night.insert(n.meta_id.clone(), night_rows.len());
        ingest += summary;
        rows.extend(night_rows);
    }
    let mut bytes = Vec::new();
    write_features_csv(&mut bytes, &rows)?;
    write_bytes(&out.join(FEATURES_CSV), &bytes)?;
    let meta = FeaturesMeta {
        provenance: prov.clone(),
        features_sha256: sha256_bytes(&bytes),
        columns: csv_header().iter().map(|c| c.to_string()).collect(),
        rows: rows.len(),
        rows_per_night,
        ingest,
    };
    write_json(&out.join(FEATURES_META), &meta)?;
    write_json(
        &out.join(SPLIT_FILE),
        &SplitRecord {
            provenance: prov,
            source: source.to_string(),
            calendar,
            split,
        },
    )?;
    Ok(meta)
}

// -------------------------------------------------------- shared loading

fn load_features(out: &Path, prov: &mut Provenance) -> Result<Vec<FeatureRow>, CliError> {
    let path = out.join(FEATURES_CSV);
    prov.add(out, FEATURES_CSV, "extract")?;
    let file = std::fs::File::open(&path).map_err(|_| CliError::missing(&path, "extract"))?;
    let rows = read_features_csv(std::io::BufReader::new(file))?;
    if rows.is_empty() {
        return Err(CliError::invalid(format!("{} holds no rows", path.display())));
    }
    Ok(rows)
}

fn load_split(s: &Settings, out: &Path, prov: &mut Provenance) -> Result<DatasetSplit, CliError> {
    if let Some(split) = &s.split {
        let text = serde_json::to_string(split).map_err(anyhow::Error::from)?;
        prov.inputs.insert("config:split".into(), sha256_bytes(text.as_bytes()));
        return Ok(split.clone());
    }
    let record: SplitRecord = read_json(&out.join(SPLIT_FILE), "extract")?;
    prov.add(out, SPLIT_FILE, "extract")?;
    Ok(record.split)
}

fn require_nights(data: &Dataset, nights: &[String], role: &str) -> Result<(), CliError> {
    let have = data.nights();
    if let Some(n) = nights.iter().find(|n| !have.contains(n)) {
        return Err(CliError::invalid(format!(
            "{role} night {n} has no rows in {FEATURES_CSV}"
        )));
    }
    Ok(())
}

// -------------------------------------------------------------------- cv

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRecord {
    pub provenance: Provenance,
    pub k_folds: usize,
    pub grid: Vec<ClassifierConfig>,
    pub results: CvResults,
}

pub fn cmd_cv(s: &Settings) -> Result<CvRecord, CliError> {
    let out = s.out()?;
    let mut prov = Provenance::new(s.seed);
    let rows = load_features(out, &mut prov)?;
    let split = load_split(s, out, &mut prov)?;
    let data = Dataset::from_rows(&rows);
    require_nights(&data, &split.train_nights, "train")?;
    let train = data.select_nights(&split.train_nights);
    let n_train = train.nights().len();
    if n_train < s.k_folds {
        return Err(CliError::invalid(format!(
            "{} folds need at least as many train nights, have {n_train}",
            s.k_folds
        )));
    }
    info!(
        "cross-validating {} configs over {} folds of {} nights",
        s.grid.len(),
        s.k_folds,
        n_train
    );
    let results = run_cv(&train, &s.grid, s.k_folds, s.seed)?;
    let record = CvRecord {
        provenance: prov,
        k_folds: s.k_folds,
        grid: s.grid.clone(),
        results,
    };
    write_json(&out.join(CV_FILE), &record)?;
    Ok(record)
}

// ----------------------------------------------------------------- train

/// A trained model with the provenance of its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub provenance: Provenance,
    pub model: TrainedModel,
}

pub fn read_model_file(path: &Path) -> Result<ModelFile, CliError> {
    let file: ModelFile = read_json(path, "train")?;
    if file.model.format_version != MODEL_FORMAT_VERSION {
        return Err(CliError::invalid(format!(
            "{}: unsupported model format version {}",
            path.display(),
            file.model.format_version
        )));
    }
    Ok(file)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub models: Vec<(ClassifierKind, PathBuf, usize)>,
}

pub fn cmd_train(s: &Settings) -> Result<TrainSummary, CliError> {
    let out = s.out()?;
    let mut prov = Provenance::new(s.seed);
    let rows = load_features(out, &mut prov)?;
    let split = load_split(s, out, &mut prov)?;
    let cv: CvRecord = read_json(&out.join(CV_FILE), "cv")?;
    prov.add(out, CV_FILE, "cv")?;
    let data = Dataset::from_rows(&rows);
    require_nights(&data, &split.train_nights, "train")?;
    let train = data.select_nights(&split.train_nights);
    let mut models = Vec::new();
    for kind in ClassifierKind::ALL {
        let Ok(cfg) = select_config(&cv.results.summaries, kind) else {
            continue;
        };
        info!("training {} on {} rows", kind.name(), train.len());
        let model = fit_resampled(&cfg, &train.x, &train.y, s.seed)?;
        let path = out.join(MODELS_DIR).join(model_file_name(kind));
        let text = serde_json::to_string(&ModelFile {
            provenance: prov.clone(),
            model,
        })
        .map_err(anyhow::Error::from)?;
        write_bytes(&path, (text + "\n").as_bytes())?;
        models.push((kind, path, train.len()));
    }
    if models.is_empty() {
        return Err(CliError::invalid(format!("{CV_FILE} lists no configurations")));
    }
    Ok(TrainSummary { models })
}

// ------------------------------------------------------------------ eval

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub kind: ClassifierKind,
    pub model_file: String,
    pub config: ClassifierConfig,
    pub report: EvaluationReport,
    pub top_importances: Vec<FeatureImportance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub provenance: Provenance,
    pub train_nights: Vec<String>,
    pub test_nights: Vec<String>,
    pub n_test: usize,
    /// Class shares of the test split, classifier order.
    pub test_class_distribution: [f64; N_CLASSES],
    pub baselines: Baselines,
    pub models: Vec<ModelEvaluation>,
}

pub fn cmd_eval(s: &Settings, model: Option<&Path>) -> Result<EvalReport, CliError> {
    let out = s.out()?;
    let mut prov = Provenance::new(s.seed);
    let rows = load_features(out, &mut prov)?;
    let split = load_split(s, out, &mut prov)?;
    let files: Vec<(String, PathBuf)> = match model {
        Some(p) => {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string());
            vec![(name, p.to_path_buf())]
        }
        None => ClassifierKind::ALL
            .iter()
            .map(|&k| (rel(&[MODELS_DIR, model_file_name(k)]), out.join(MODELS_DIR).join(model_file_name(k))))
            .filter(|(_, p)| p.is_file())
            .collect(),
    };
    if files.is_empty() {
        return Err(CliError::missing(
            &out.join(MODELS_DIR).join(model_file_name(ClassifierKind::RandomForest)),
            "train",
        ));
    }
    let data = Dataset::from_rows(&rows);
    require_nights(&data, &split.test_nights, "test")?;
    let test = data.select_nights(&split.test_nights);
    let dist = class_distribution(&test.y);
    let mut models = Vec::new();
    let mut baselines = None;
    for (name, path) in files {
        let file = read_model_file(&path)?;
        let digest = crate::provenance::sha256_file(&path)?;
        prov.inputs.insert(format!("model:{name}"), digest);
        let pred = predict(&file.model, &test.x)?;
        let mut report = evaluate(&test.y, &pred)?;
        report.importances = named_importance(&file.model).ok();
        baselines = Some(report.baselines);
        models.push(ModelEvaluation {
            kind: file.model.config.kind(),
            model_file: name,
            config: file.model.config,
            top_importances: report.top_importances(TOP_IMPORTANCES),
            report,
        });
    }
    let report = EvalReport {
        provenance: prov,
        train_nights: split.train_nights,
        test_nights: split.test_nights,
        n_test: test.len(),
        test_class_distribution: dist,
        baselines: baselines.expect("at least one model"),
        models,
    };
    write_json(&out.join(REPORT_FILE), &report)?;
    Ok(report)
}

/// Plain-text rendering of an evaluation report.
pub fn render_eval(r: &EvalReport) -> String {
    let mut s = String::new();
    let stages: Vec<&str> = SleepStage::CLASSES.iter().map(|c| c.as_label()).collect();
    s += &format!("test nights: {} ({} epochs)\n", r.test_nights.join(", "), r.n_test);
    s += &format!(
        "baselines: stratified chance {:.3}, majority class {:.3}\n",
        r.baselines.stratified_chance, r.baselines.majority_class
    );
    for m in &r.models {
        s += &format!(
            "\n{}: accuracy {:.3}, macro F1 {:.3}\n",
            m.kind.name(),
            m.report.accuracy,
            m.report.macro_f1
        );
        s += &format!("  confusion (rows true, columns predicted): {}\n", stages.join(" | "));
        for (stage, row) in stages.iter().zip(&m.report.confusion) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
            s += &format!("  {stage:>11}  {}\n", cells.join("  "));
        }
        if !m.top_importances.is_empty() {
            s += "  top features (MDI):\n";
            for f in &m.top_importances {
                s += &format!("    {:<28} {:.3}\n", f.name, f.weight);
            }
        }
    }
    s
}

// -------------------------------------------------------------- simulate

fn find_night<'a>(nights: &'a [CorpusNight], id: &str, corpus: &Path) -> Result<&'a CorpusNight, CliError> {
    nights
        .iter()
        .find(|n| n.meta_id == id)
        .ok_or_else(|| CliError::missing(&corpus.join(id).join(META_FILE), "synth"))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulateSummary {
    pub epochs: usize,
    pub qualified: usize,
    pub triggers: usize,
}

/// Replays one night through the online session, writing one JSON line
/// per closed epoch.
pub fn cmd_simulate<W: Write>(
    s: &Settings,
    night: &str,
    model: Option<&Path>,
    realtime: bool,
    mut sink: W,
) -> Result<SimulateSummary, CliError> {
    let corpus = s.corpus()?;
    let model_path = match model {
        Some(p) => p.to_path_buf(),
        None => s.out()?.join(MODELS_DIR).join(model_file_name(ClassifierKind::RandomForest)),
    };
    let file = read_model_file(&model_path)?;
    let nights = corpus_nights(corpus)?;
    let loaded = load(find_night(&nights, night, corpus)?)?;
    let mut session = OnlineSession::new(&file.model, s.policy, 0);
    let mut summary = SimulateSummary::default();
    let mut emit = |e: ReplayEvent, sink: &mut W| -> Result<(), CliError> {
        summary.epochs += 1;
        summary.qualified += e.qualified as usize;
        summary.triggers += e.trigger.is_some() as usize;
        let line = serde_json::to_string(&e).map_err(anyhow::Error::from)?;
        writeln!(sink, "{line}")?;
        if realtime {
            sink.flush()?;
        }
        Ok(())
    };
    let wall = Instant::now();
    let t_first = loaded.recording.frames.first().map_or(0, |f| f.t_ms);
    for &frame in &loaded.recording.frames {
        if realtime {
            let due = Duration::from_millis(frame.t_ms - t_first);
            if let Some(wait) = due.checked_sub(wall.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        if let Some(e) = session.push(frame)? {
            emit(e, &mut sink)?;
        }
    }
    if let Some(e) = session.finish()? {
        emit(e, &mut sink)?;
    }
    Ok(summary)
}

// --------------------------------------------------------------- inspect

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectRecord {
    pub provenance: Provenance,
    pub night_id: String,
    pub epoch_idx: usize,
    pub stage: SleepStage,
    pub window_ms: (i64, i64),
    pub sample_count: usize,
    /// Detected spindles, seconds from the epoch start.
    pub spindles_s: Vec<(f64, f64)>,
    pub features: Option<BTreeMap<String, f64>>,
    /// SHA-256 of each exported CSV.
    pub outputs: BTreeMap<String, String>,
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(anyhow::Error::from)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string())).map_err(anyhow::Error::from)?;
    }
    Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
}

pub fn inspect_dir(out: &Path, night: &str, epoch: usize) -> PathBuf {
    out.join(INSPECT_DIR).join(format!("{night}_e{epoch:04}"))
}

/// Exports PSD, spectrogram, spindle-band and time-series CSVs of one epoch.
pub fn cmd_inspect(s: &Settings, night: &str, epoch: usize) -> Result<InspectRecord, CliError> {
    let corpus = s.corpus()?;
    let out = s.out()?;
    let nights = corpus_nights(corpus)?;
    let n = find_night(&nights, night, corpus)?;
    let mut prov = Provenance::new(s.seed);
    hash_corpus(&mut prov, corpus, std::slice::from_ref(n))?;
    let loaded = load(n)?;
    let windows = label_windows(loaded.recording.start_utc, &loaded.labels.records);
    let Some(&window) = windows.get(epoch) else {
        return Err(CliError::invalid(format!(
            "{night} has {} epochs, no epoch {epoch}",
            windows.len()
        )));
    };
    let frames = &loaded.recording.frames[frame_range(&loaded.recording.frames, window)];
    let fs = FS_HZ as f64;
    let sig = EpochSignals::from_frames(frames);
    let psd = periodogram(&sig.eog, fs, EOG_WINDOW)
        .map_err(|e| CliError::invalid(format!("{night} epoch {epoch}: {e}")))?;
    let spec = spectrogram(&sig.eog, fs, DEFAULT_SPECTROGRAM_WIN_S, DEFAULT_SPECTROGRAM_HOP_S)
        .map_err(|e| CliError::invalid(format!("{night} epoch {epoch}: {e}")))?;

    let dir = inspect_dir(out, night, epoch);
    let mut outputs = BTreeMap::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<(), CliError> {
        outputs.insert(name.to_string(), sha256_bytes(&bytes));
        write_bytes(&dir.join(name), &bytes)
    };
    let h = |cols: &[&str]| cols.iter().map(|c| c.to_string()).collect::<Vec<_>>();

    put(
        "psd.csv",
        csv_bytes(
            &h(&["freq_hz", "power"]),
            psd.freqs_hz.iter().zip(&psd.power).map(|(&f, &p)| vec![f, p]),
        )?,
    )?;
    let mut header = vec!["start_s".to_string()];
    header.extend(spec.freqs_hz.iter().map(|f| f.to_string()));
    put(
        "spectrogram.csv",
        csv_bytes(
            &header,
            spec.starts_s.iter().zip(&spec.power).map(|(&t, col)| {
                let mut r = vec![t];
                r.extend(col);
                r
            }),
        )?,
    )?;
    let band = spec.band_series(SPINDLE_BAND_HZ.0, SPINDLE_BAND_HZ.1);
    put(
        "spindle_band.csv",
        csv_bytes(
            &h(&["start_s", "center_s", "power"]),
            spec.starts_s
                .iter()
                .zip(&band)
                .map(|(&t, &p)| vec![t, t + spec.win_s / 2.0, p]),
        )?,
    )?;
    let t0 = window.t0_ms;
    put(
        "timeseries.csv",
        csv_bytes(
            &h(&["t_s", "eog", "ppg", "ax", "ay", "az", "gx", "gy", "gz"]),
            frames.iter().enumerate().map(|(i, f)| {
                vec![
                    (f.t_ms as i64 - t0) as f64 / 1000.0,
                    sig.eog[i],
                    sig.ppg[i],
                    sig.accel[0][i],
                    sig.accel[1][i],
                    sig.accel[2][i],
                    sig.gyro[0][i],
                    sig.gyro[1][i],
                    sig.gyro[2][i],
                ]
            }),
        )?,
    )?;
    let spindles_s = detect_spindles(&sig.eog, fs)
        .iter()
        .map(|sp| (sp.start as f64 / fs, sp.end as f64 / fs))
        .collect();
    let features = extract_frames(frames).ok().map(|fv| {
        names()
            .iter()
            .zip(fv.values())
            .map(|(n, &v)| (n.to_string(), v))
            .collect()
    });
    let record = InspectRecord {
        provenance: prov,
        night_id: night.to_string(),
        epoch_idx: epoch,
        stage: loaded.labels.stages[epoch],
        window_ms: (window.t0_ms, window.end_ms),
        sample_count: frames.len(),
        spindles_s,
        features,
        outputs,
    };
    write_json(&dir.join("inspect.json"), &record)?;
    Ok(record)
}
