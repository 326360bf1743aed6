use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};

use super::config::{provenance_header, RunConfig};
use crate::classifiers::{Family, HyperParams, KnnWeights, TrainedModel};
use crate::error::{Error, Result};
use crate::features::{
    balance_dataset, emit_dataset_csv, extract_features, extract_trace, read_dataset_csv, window_packets, FeatureVector,
    Label,
};
use crate::ingest::{assign_direction, emit_canonical_csv, parse_canonical_csv, parse_pcap, Direction, PacketRecord};
use crate::rng::derive_seed;
use crate::select::{
    grid_search, permutation_importance, select_features, stratified_split, EvalReport, GridSpec, SplitSpec,
};
use crate::sim::{
    run_sim_with, sweep, sweep_csv, PacketDelay, Scheduler, SimOptions, SweepRow, SweepSummary, Trigger,
};
use crate::synth::{default_nonvr_profiles, default_vr_profiles, gen_labeled_corpus, gen_vr_trace, read_manifest, VrProfile};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path.display().to_string(), e)
}

fn write_artifact(path: &Path, header: &str, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, format!("{header}{body}")).map_err(io_err(path))
}

fn read_trace(path: &Path) -> Result<Vec<PacketRecord>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let parsed = parse_canonical_csv(BufReader::new(file)).map_err(|e| Error::in_file(path.display().to_string(), e))?;
    for w in &parsed.warnings {
        warn!("{}: line {}: {}", path.display(), w.line, w.message);
    }
    Ok(parsed.records)
}

fn display_paths(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(" ")
}

pub fn ingest(config: &RunConfig, input: &Path, client_ip: Ipv4Addr, out: &Path) -> Result<()> {
    let bytes = fs::read(input).map_err(io_err(input))?;
    let is_pcap = bytes.len() >= 4
        && matches!(
            u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]),
            0xa1b2_c3d4 | 0xd4c3_b2a1 | 0xa1b2_3c4d | 0x4d3c_b2a1
        );
    let (records, dropped) = if is_pcap {
        let entries = parse_pcap(&bytes).map_err(|e| Error::in_file(input.display().to_string(), e))?;
        let directed = assign_direction(&entries, client_ip);
        (directed.records, directed.dropped)
    } else {
        let parsed = parse_canonical_csv(bytes.as_slice()).map_err(|e| Error::in_file(input.display().to_string(), e))?;
        for w in &parsed.warnings {
            warn!("{}: line {}: {}", input.display(), w.line, w.message);
        }
        (parsed.records, 0)
    };
    if records.is_empty() {
        warn!("no packets to or from {client_ip} in {}", input.display());
    }
    let dl = records.iter().filter(|r| r.direction == Direction::Dl).count();
    let duration_us = match (records.first(), records.last()) {
        (Some(a), Some(b)) => b.timestamp_us - a.timestamp_us,
        _ => 0,
    };
    let header = provenance_header(
        "ingest",
        config,
        &[("input", input.display().to_string()), ("client_ip", client_ip.to_string())],
    );
    let mut body = Vec::new();
    emit_canonical_csv(&records, &mut body).map_err(io_err(out))?;
    write_artifact(out, &header, &String::from_utf8(body).expect("CSV is UTF-8"))?;
    println!(
        "packets: {} (DL {dl}, UL {}), dropped: {dropped}, duration: {:.3} s",
        records.len(),
        records.len() - dl,
        duration_us as f64 / 1e6
    );
    Ok(())
}

pub fn synth(config: &RunConfig, out_dir: &Path) -> Result<()> {
    let mut corpus = gen_labeled_corpus(
        &default_vr_profiles(),
        &default_nonvr_profiles(),
        config.synth_duration_ms,
        config.seed,
    )?;
    let header = provenance_header("synth", config, &[]);
    let manifest = corpus.write(out_dir, &header)?;
    println!(
        "wrote {} VR and {} Non-VR traces ({} ms each), manifest {}",
        corpus.vr.len(),
        corpus.nonvr.len(),
        config.synth_duration_ms,
        manifest.display()
    );
    Ok(())
}

pub fn extract(
    config: &RunConfig,
    manifest: Option<&Path>,
    vr: &[PathBuf],
    nonvr: &[PathBuf],
    unlabeled: &[PathBuf],
    out: &Path,
) -> Result<()> {
    let extraction = config.extraction()?;
    let mut vr_paths = vr.to_vec();
    let mut nonvr_paths = nonvr.to_vec();
    if let Some(m) = manifest {
        let base = m.parent().unwrap_or(Path::new("."));
        for entry in read_manifest(m)? {
            let path = base.join(entry.path.as_ref().ok_or_else(|| {
                Error::Config(format!("{}: entry {} has no trace path", m.display(), entry.name))
            })?);
            if entry.label == Label::Vr.as_u8() {
                vr_paths.push(path);
            } else {
                nonvr_paths.push(path);
            }
        }
    }
    let load = |paths: &[PathBuf], label: Option<Label>| -> Result<Vec<FeatureVector>> {
        let mut rows = Vec::new();
        for p in paths {
            rows.extend(extract_trace(&read_trace(p)?, &extraction, label));
        }
        Ok(rows)
    };
    let (rows, summary) = if !unlabeled.is_empty() {
        if !(vr_paths.is_empty() && nonvr_paths.is_empty()) {
            return Err(Error::Config("--unlabeled cannot be combined with labeled inputs".into()));
        }
        let rows = load(unlabeled, None)?;
        let s = format!("count of obtained samples (unlabeled): {}", rows.len());
        (rows, s)
    } else {
        let v = load(&vr_paths, Some(Label::Vr))?;
        let n = load(&nonvr_paths, Some(Label::NonVr))?;
        let rows = balance_dataset(&v, &n)?;
        let kept = rows.len() / 2;
        let s = format!(
            "count of obtained VR samples: {}\ncount of obtained Non-VR samples: {}\nbalanced dataset: {kept} per class",
            v.len(),
            n.len()
        );
        (rows, s)
    };
    let inputs = [vr_paths.as_slice(), nonvr_paths.as_slice(), unlabeled].concat();
    let header = provenance_header("extract", config, &[("inputs", display_paths(&inputs))]);
    let mut body = Vec::new();
    emit_dataset_csv(&rows, &mut body)?;
    write_artifact(out, &header, &String::from_utf8(body).expect("CSV is UTF-8"))?;
    println!("{summary}");
    Ok(())
}

struct Split {
    x_train: Vec<Vec<f64>>,
    y_train: Vec<u8>,
    x_valid: Vec<Vec<f64>>,
    y_valid: Vec<u8>,
}

fn read_dataset(path: &Path) -> Result<Vec<FeatureVector>> {
    read_dataset_csv(path).map_err(|e| Error::in_file(path.display().to_string(), e))
}

fn labeled(rows: &[FeatureVector], path: &Path) -> Result<(Vec<Vec<f64>>, Vec<u8>)> {
    let mut x = Vec::with_capacity(rows.len());
    let mut y = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let label = r
            .label
            .ok_or_else(|| Error::Config(format!("{}: row {} has no label", path.display(), i + 1)))?;
        x.push(r.values.to_vec());
        y.push(label.as_u8());
    }
    Ok((x, y))
}

fn load_split(config: &RunConfig, dataset: &Path) -> Result<Split> {
    let rows = read_dataset(dataset)?;
    let (x, y) = labeled(&rows, dataset)?;
    let spec = SplitSpec {
        train_fraction: config.train_fraction,
        ..SplitSpec::new(config.seed)
    };
    let (train, valid) = stratified_split(&y, &spec)?;
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<u8>) { (idx.iter().map(|&i| x[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect()) };
    let (x_train, y_train) = pick(&train);
    let (x_valid, y_valid) = pick(&valid);
    Ok(Split {
        x_train,
        y_train,
        x_valid,
        y_valid,
    })
}

/// Fixed hyperparameters used by `train`.
pub fn default_params(family: Family) -> HyperParams {
    match family {
        Family::Lr => HyperParams::Lr {
            c: 1.0,
            solver: "liblinear".into(),
        },
        Family::Knn => HyperParams::Knn {
            n_neighbors: 5,
            weights: KnnWeights::Uniform,
        },
        Family::Dt => HyperParams::Dt {
            max_depth: 10,
            min_samples_split: 5,
        },
        Family::Rf => HyperParams::Rf {
            n_estimators: 50,
            max_depth: 10,
            min_samples_split: 5,
        },
        Family::Nb => HyperParams::Nb { var_smoothing: 1e-9 },
    }
}

fn read_model(path: &Path) -> Result<TrainedModel> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    TrainedModel::from_json(&text).map_err(|e| Error::in_file(path.display().to_string(), e))
}

fn write_model(path: &Path, header: &str, model: &TrainedModel) -> Result<()> {
    write_artifact(path, header, &(model.to_json() + "\n"))
}

fn emit_report(report: &EvalReport, header: &str, path: Option<&Path>) -> Result<()> {
    let text = report.to_text();
    print!("{text}");
    if let Some(p) = path {
        write_artifact(p, header, &text)?;
    }
    Ok(())
}

pub fn train(config: &RunConfig, dataset: &Path, model_path: &Path, report: Option<&Path>) -> Result<()> {
    let split = load_split(config, dataset)?;
    let params = default_params(config.family);
    let model = TrainedModel::fit_all(&split.x_train, &split.y_train, &params, config.seed)?;
    let header = provenance_header("train", config, &[("dataset", dataset.display().to_string())]);
    write_model(model_path, &header, &model)?;
    let r = EvalReport::evaluate(&model, &split.x_valid, &split.y_valid)?;
    emit_report(&r, &header, report)
}

pub fn gridsearch(
    config: &RunConfig,
    dataset: &Path,
    model_path: &Path,
    cv_table: Option<&Path>,
    report: Option<&Path>,
) -> Result<()> {
    let split = load_split(config, dataset)?;
    let spec = GridSpec {
        cv_folds: config.cv_folds,
        ..GridSpec::for_family(config.family)
    };
    let result = grid_search(&split.x_train, &split.y_train, &spec, config.seed)?;
    let header = provenance_header("gridsearch", config, &[("dataset", dataset.display().to_string())]);
    write_model(model_path, &header, &result.model)?;
    if let Some(p) = cv_table {
        let mut s = String::from("candidate,params,mean_score");
        for k in 0..spec.cv_folds {
            let _ = write!(s, ",fold_{}", k + 1);
        }
        s.push('\n');
        for (i, row) in result.table.iter().enumerate() {
            let _ = write!(s, "{i},\"{}\",{}", row.params.describe(), row.mean_score);
            for f in &row.fold_scores {
                let _ = write!(s, ",{f}");
            }
            s.push('\n');
        }
        write_artifact(p, &header, &s)?;
    }
    let best = result.best();
    println!(
        "best of {} candidates: {} (cv mean {:.5})",
        result.table.len(),
        best.params.describe(),
        best.mean_score
    );
    let r = EvalReport::evaluate(&result.model, &split.x_valid, &split.y_valid)?;
    println!("validation accuracy: {:.5}", r.accuracy);
    emit_report(&r, &header, report)
}

/// Wall-clock time to extract and classify the first sample of `trace`.
fn time_one_sample(model: &TrainedModel, trace: &[PacketRecord], config: &RunConfig) -> Result<Option<(f64, f64)>> {
    let extraction = config.extraction()?;
    let start = Instant::now();
    let samples = window_packets(trace, &extraction);
    let Some(first) = samples.first() else {
        return Ok(None);
    };
    let fv = extract_features(first, &extraction);
    let extracted = start.elapsed();
    model.predict(&fv.values)?;
    let total = start.elapsed();
    Ok(Some((extracted.as_secs_f64() * 1e3, (total - extracted).as_secs_f64() * 1e3)))
}

pub fn eval(
    config: &RunConfig,
    dataset: &Path,
    model_path: &Path,
    all: bool,
    report: Option<&Path>,
    trace: Option<&Path>,
) -> Result<()> {
    let model = read_model(model_path)?;
    let (x, y) = if all {
        let rows = read_dataset(dataset)?;
        labeled(&rows, dataset)?
    } else {
        let s = load_split(config, dataset)?;
        (s.x_valid, s.y_valid)
    };
    let r = EvalReport::evaluate(&model, &x, &y)?;
    let header = provenance_header(
        "eval",
        config,
        &[
            ("dataset", dataset.display().to_string()),
            ("model_file", model_path.display().to_string()),
        ],
    );
    emit_report(&r, &header, report)?;

    // Timing goes to stdout only; it would break reproducible reports.
    let records = match trace {
        Some(p) => read_trace(p)?,
        None => {
            let ms = (config.omega_ms as u64).max(1);
            gen_vr_trace(&VrProfile::default(), ms, derive_seed(config.seed, 0x7))
        }
    };
    match time_one_sample(&model, &records, config)? {
        Some((extract_ms, predict_ms)) => {
            let total = extract_ms + predict_ms;
            println!(
                "per-sample latency ({} ms sample): extraction {extract_ms:.3} ms + prediction {predict_ms:.3} ms = {total:.3} ms ({} 1 s budget)",
                config.omega_ms,
                if total < 1000.0 { "within" } else { "EXCEEDS" }
            );
        }
        None => warn!("latency not measured: trace has no packets"),
    }
    Ok(())
}

pub fn importance(
    config: &RunConfig,
    dataset: &Path,
    model_path: &Path,
    out: Option<&Path>,
    refit: Option<&Path>,
    report: Option<&Path>,
) -> Result<()> {
    let model = read_model(model_path)?;
    let split = load_split(config, dataset)?;
    let imps = permutation_importance(&model, &split.x_valid, &split.y_valid, config.n_repeats, config.seed)?;
    let header = provenance_header(
        "importance",
        config,
        &[
            ("dataset", dataset.display().to_string()),
            ("model_file", model_path.display().to_string()),
        ],
    );
    let mut r = EvalReport::evaluate(&model, &split.x_valid, &split.y_valid)?;
    r.importances = imps.clone();
    if let Some(p) = out {
        write_artifact(p, &header, &r.importances_csv())?;
    }
    // Selection only has to succeed when a refit depends on it.
    let selected = match select_features(&imps) {
        Ok(s) => s,
        Err(e) if refit.is_some() => return Err(e.into()),
        Err(e) => {
            warn!("{e}; every feature is excluded");
            Vec::new()
        }
    };
    r.excluded = imps
        .iter()
        .filter(|i| !selected.contains(&i.feature))
        .map(|i| i.name.clone())
        .collect();
    r.excluded.sort();
    if let Some(p) = refit {
        let refitted = TrainedModel::fit(&split.x_train, &split.y_train, &selected, &model.params, config.seed)?;
        write_model(p, &header, &refitted)?;
        let rr = EvalReport::evaluate(&refitted, &split.x_valid, &split.y_valid)?;
        println!(
            "refit on {} selected features: validation accuracy {:.5}",
            selected.len(),
            rr.accuracy
        );
    }
    emit_report(&r, &header, report)
}

fn write_delays<W: Write>(w: &mut W, load: f64, scheduler: Scheduler, packets: &[PacketDelay]) -> std::io::Result<()> {
    for p in packets {
        writeln!(
            w,
            "{load},{scheduler},{},{},{}",
            p.class,
            p.arrival_ns,
            p.completion_ns - p.arrival_ns
        )?;
    }
    Ok(())
}

pub fn simulate(
    config: &RunConfig,
    only: Option<Scheduler>,
    out: &Path,
    summary_path: Option<&Path>,
    delays: Option<&Path>,
) -> Result<()> {
    let model = match &config.model {
        Some(p) => Some(read_model(p)?),
        None => {
            info!("no model given: the priority flip uses the oracle label");
            None
        }
    };
    let trigger = match &model {
        Some(m) => Trigger::Model {
            model: m,
            extraction: config.extraction()?,
        },
        None => Trigger::Oracle,
    };
    let base = config.sim_config();
    let loads = &config.bg_loads_mbps;
    let header = provenance_header(
        "simulate",
        config,
        &[(
            "trigger",
            match &config.model {
                Some(p) => format!("model {}", p.display()),
                None => "oracle".into(),
            },
        )],
    );
    let mut dump = match delays {
        Some(p) => {
            let mut w = BufWriter::new(fs::File::create(p).map_err(io_err(p))?);
            w.write_all(header.as_bytes())
                .and_then(|_| w.write_all(b"load_mbps,scheduler,class,arrival_ns,delay_ns\n"))
                .map_err(io_err(p))?;
            Some((p, w))
        }
        None => None,
    };
    let rows: Vec<SweepRow> = if only.is_none() && dump.is_none() {
        sweep(&base, loads, &trigger)?
    } else {
        let schedulers = match only {
            Some(s) => vec![s],
            None => vec![Scheduler::Fifo, Scheduler::VrPriority],
        };
        let mut rows = Vec::new();
        for (i, &load) in loads.iter().enumerate() {
            for &scheduler in &schedulers {
                // same seeds as `sweep`
                let seed = derive_seed(base.seed, i as u64);
                let cfg = crate::sim::SimConfig {
                    bg_load_mbps: load,
                    scheduler,
                    seed,
                    ..base.clone()
                };
                let options = SimOptions {
                    trigger,
                    record_packets: dump.is_some(),
                    ..SimOptions::default()
                };
                let o = run_sim_with(&cfg, &options)?;
                if let Some((p, w)) = &mut dump {
                    write_delays(w, load, scheduler, &o.packets).map_err(io_err(p))?;
                }
                rows.push(SweepRow {
                    load_mbps: load,
                    scheduler,
                    seed,
                    stats: o.stats,
                });
            }
        }
        rows
    };
    if let Some((p, mut w)) = dump {
        w.flush().map_err(io_err(p))?;
    }
    write_artifact(out, &header, &sweep_csv(&rows))?;

    let mut s = String::new();
    let _ = writeln!(s, "{:>9} {:>9} {:>10} {:>10} {:>10} {:>10}", "load", "scheduler", "vr_med_ms", "vr_p99_ms", "bg_med_ms", "bg_p99_ms");
    for r in &rows {
        let _ = writeln!(
            s,
            "{:>9} {:>9} {:>10.3} {:>10.3} {:>10.3} {:>10.3}{}",
            r.load_mbps,
            r.scheduler.as_str(),
            r.stats.vr.median_ms,
            r.stats.vr.p99_ms,
            r.stats.bg.median_ms,
            r.stats.bg.p99_ms,
            if r.stats.unstable { "  UNSTABLE" } else { "" }
        );
        if r.scheduler == Scheduler::VrPriority && r.stats.priority_from_ms.is_none() {
            let _ = writeln!(s, "          (classifier did not label the VR flow as VR: FIFO kept)");
        }
    }
    for f in SweepSummary::from_rows(&rows) {
        let _ = writeln!(
            s,
            "load {} Mbps: VR p99 fifo/priority {:.2}x, BG p99 priority/fifo {:.2}x",
            f.load_mbps,
            f.vr_improvement(),
            f.bg_penalty()
        );
    }
    let unstable: Vec<String> = rows
        .iter()
        .filter(|r| r.stats.unstable)
        .map(|r| format!("{} Mbps/{}", r.load_mbps, r.scheduler))
        .collect();
    if !unstable.is_empty() {
        let _ = writeln!(s, "WARNING: queue still growing at the end of: {}", unstable.join(", "));
        warn!("unstable runs: {}", unstable.join(", "));
    }
    print!("{s}");
    if let Some(p) = summary_path {
        write_artifact(p, &header, &s)?;
    }
    Ok(())
}
