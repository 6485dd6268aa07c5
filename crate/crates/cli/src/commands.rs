use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use fabseg_core::classify::{
    classify_thing, describe_component, detect_linkages, ClassifyParams, ComponentShape, LinkComponent, ThingComponent,
    ThingReport,
};
use fabseg_core::corpus::{build_index, evaluate, ingest, load_index, CorpusIndex, IngestOptions, IngestOutcome};
use fabseg_core::labels::FunctionalityLabel;
use fabseg_core::mesh::{parse_mesh, remesh, write_obj, MeshFormat, RemeshParams, TriangleMesh};
use fabseg_core::shape::ShapeParams;
use fabseg_core::spectral::{
    segment, stability_sweep, stabilization_resolution, stable_run_length, SegmentParams, SegmentationResult,
};
use fabseg_core::stylize::{apply_style, build_mask, provenance, StyleSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::CliError;
use crate::*;

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Remesh(a) => remesh_cmd(cli, a),
        Command::Segment(a) => segment_cmd(cli, a),
        Command::Classify(a) => classify_cmd(cli, a),
        Command::Link(a) => link_cmd(cli, a),
        Command::Stylize(a) => stylize_cmd(cli, a),
        Command::Sweep(a) => sweep_cmd(cli, a),
        Command::Corpus(CorpusCommand::Ingest(a)) => ingest_cmd(cli, a),
        Command::Corpus(CorpusCommand::Index(a)) => index_cmd(cli, a),
        Command::Corpus(CorpusCommand::Eval(a)) => eval_cmd(cli, a),
        Command::Serve(a) => serve_cmd(cli, a),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh").to_string()
}

fn read_mesh(path: &Path) -> Result<TriangleMesh, CliError> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    parse_mesh(&bytes, MeshFormat::from_extension(path), &stem(path))
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn read_segmentation(path: &Path, mesh: &TriangleMesh) -> Result<SegmentationResult, CliError> {
    let seg: SegmentationResult = read_json(path)?;
    seg.validate(mesh.face_count())
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(seg)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    fs::write(path, text).map_err(CliError::io(path))
}

/// Pretty JSON to `out`, or to stdout.
fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::new(ErrorKind::Internal, e.to_string()))?;
    text.push('\n');
    match out {
        Some(path) => write_text(path, &text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| CliError::data(format!("stdout: {e}")))
        }
    }
}

fn note(cli: &Cli, message: impl AsRef<str>) {
    if !cli.quiet {
        eprintln!("{}", message.as_ref());
    }
}

fn load_corpus(dir: &Path) -> Result<CorpusIndex, CliError> {
    let (index, stats) = load_index(dir)?;
    if stats.computed > 0 {
        tracing::warn!(recomputed = stats.computed, "index sidecars were stale and have been rebuilt");
    }
    Ok(index)
}

fn remesh_cmd(cli: &Cli, a: &RemeshArgs) -> Result<(), CliError> {
    let params = RemeshParams {
        target_resolution: a.target,
        tolerance_fraction: a.tolerance,
        seed: cli.seed,
    };
    params.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let mesh = read_mesh(&a.input)?;
    let out = remesh(&mesh, &params)?;
    write_text(&a.out, &write_obj(&out))?;
    note(cli, format!("{} faces -> {} faces", mesh.face_count(), out.face_count()));
    Ok(())
}

fn segment_params(cli: &Cli, k_min: Option<u64>, k_max: Option<u64>, m: Option<u64>) -> Result<SegmentParams, CliError> {
    let defaults = SegmentParams::default();
    let params = SegmentParams {
        seed: cli.seed,
        m: m.map_or(defaults.m, |m| m as usize),
        k_min: k_min.map_or(defaults.k_min, |k| k as usize),
        k_max: k_max.map(|k| k as usize),
        ..defaults
    };
    params.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(params)
}

fn segment_cmd(cli: &Cli, a: &SegmentArgs) -> Result<(), CliError> {
    let params = segment_params(cli, a.k_min, a.k_max, a.m)?;
    let mesh = read_mesh(&a.input)?;
    let result = segment(&mesh, a.k.map(|k| k as usize), &params)?;
    emit(&result, a.out.as_deref())?;
    note(cli, format!("{} faces -> {} segments", mesh.face_count(), result.k));
    Ok(())
}

struct Component {
    id: String,
    mesh: TriangleMesh,
    seg: SegmentationResult,
}

fn describe_all(components: &[Component], params: &ShapeParams) -> Result<Vec<ComponentShape>, CliError> {
    components
        .iter()
        .map(|c| describe_component(&c.mesh, &c.seg, params).map_err(CliError::from))
        .collect()
}

fn run_classify(components: &[Component], index: &CorpusIndex, params: &ClassifyParams) -> Result<ThingReport, CliError> {
    let shapes = describe_all(components, &index.params)?;
    let parts: Vec<ThingComponent<'_>> = components
        .iter()
        .zip(&shapes)
        .map(|(c, shape)| ThingComponent { mesh_id: &c.id, shape })
        .collect();
    Ok(classify_thing(&parts, index, params)?)
}

fn classify_cmd(cli: &Cli, a: &ClassifyArgs) -> Result<(), CliError> {
    if a.input.len() != a.seg.len() {
        return Err(CliError::usage(format!(
            "--in given {} times but --seg {} times",
            a.input.len(),
            a.seg.len()
        )));
    }
    let params = ClassifyParams {
        n_meshes: a.n_meshes as usize,
        n_segments: a.n_segments as usize,
        alpha: a.alpha,
        linkage: a.linkage.into(),
    };
    let mut components = Vec::with_capacity(a.input.len());
    for (input, seg) in a.input.iter().zip(&a.seg) {
        let mesh = read_mesh(input)?;
        let seg = read_segmentation(seg, &mesh)?;
        let id = stem(input);
        if components.iter().any(|c: &Component| c.id == id) {
            return Err(CliError::usage(format!("two components are named {id:?}")));
        }
        components.push(Component { id, mesh, seg });
    }
    let index = load_corpus(&a.corpus)?;
    let report = run_classify(&components, &index, &params)?;
    for w in &report.warnings {
        note(cli, format!("warning: {w}"));
    }
    emit(&report, a.out.as_deref())
}

/// Components of a thing directory, sorted by name.
fn read_thing_dir(dir: &Path) -> Result<(Vec<Component>, Vec<Option<Vec<FunctionalityLabel>>>), CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(CliError::io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| MeshFormat::from_extension(p).is_some())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::data(format!("{}: no .obj or .stl components", dir.display())));
    }
    let mut components = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let id = stem(&path);
        let mesh = read_mesh(&path)?;
        let seg = read_segmentation(&dir.join(format!("{id}.seg.json")), &mesh)?;
        let label_path = dir.join(format!("{id}.labels.json"));
        labels.push(if label_path.exists() {
            let l: Vec<FunctionalityLabel> = read_json(&label_path)?;
            if l.len() != seg.k {
                return Err(CliError::data(format!(
                    "{}: {} labels for {} segments",
                    label_path.display(),
                    l.len(),
                    seg.k
                )));
            }
            Some(l)
        } else {
            None
        });
        components.push(Component { id, mesh, seg });
    }
    Ok((components, labels))
}

#[derive(Serialize)]
struct LinkOutput {
    linkages: fabseg_core::classify::LinkageSet,
    warnings: Vec<String>,
}

fn link_cmd(cli: &Cli, a: &LinkArgs) -> Result<(), CliError> {
    let (components, given) = read_thing_dir(&a.thing)?;
    if let Some(corpus) = &a.corpus {
        let index = load_corpus(corpus)?;
        let params = ClassifyParams {
            alpha: a.alpha,
            linkage: a.linkage.into(),
            ..ClassifyParams::default()
        };
        let report = run_classify(&components, &index, &params)?;
        return emit(&report, a.out.as_deref());
    }
    let shape_params = ShapeParams {
        seed: cli.seed,
        ..ShapeParams::default()
    };
    let shapes = describe_all(&components, &shape_params)?;
    let externals: Vec<Vec<FunctionalityLabel>> = components
        .iter()
        .zip(given)
        .map(|(c, l)| l.unwrap_or_else(|| vec![FunctionalityLabel::Aesthetic; c.seg.k]))
        .collect();
    let links: Vec<LinkComponent<'_>> = components
        .iter()
        .zip(&shapes)
        .zip(&externals)
        .map(|((c, shape), external)| LinkComponent {
            mesh_id: &c.id,
            shape,
            external,
        })
        .collect();
    let (linkages, warnings) = detect_linkages(&links, a.alpha, a.linkage.into(), shape_params.weight)?;
    for w in &warnings {
        note(cli, format!("warning: {w}"));
    }
    emit(&LinkOutput { linkages, warnings }, a.out.as_deref())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LabelsFile {
    Plain(Vec<FunctionalityLabel>),
    Report(ThingReport),
}

fn stylize_cmd(cli: &Cli, a: &StylizeArgs) -> Result<(), CliError> {
    let mut spec = StyleSpec {
        amplitude: a.amplitude,
        frequency: a.frequency,
        octaves: a.octaves,
        seed: cli.seed,
        ..StyleSpec::default()
    };
    if let Some(Palette(colors)) = &a.palette {
        spec.palette.clone_from(colors);
    }
    let mesh = read_mesh(&a.input)?;
    let seg = read_segmentation(&a.seg, &mesh)?;
    let labels = match read_json::<LabelsFile>(&a.labels)? {
        LabelsFile::Plain(l) => l,
        LabelsFile::Report(report) => {
            let id = a.mesh_id.clone().unwrap_or_else(|| stem(&a.input));
            report
                .labels
                .into_iter()
                .find(|c| c.mesh_id == id)
                .ok_or_else(|| CliError::data(format!("{}: no component {id:?}", a.labels.display())))?
                .labels
        }
    };
    let mask = build_mask(&mesh, &seg, &labels)?;
    let styled = apply_style(&mesh, &mask, &spec)?;
    write_text(&a.out, &write_obj(&styled))?;
    let record = provenance(&mesh, &styled, &mask, &spec);
    let sidecar = a.provenance.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".style.json");
        PathBuf::from(p)
    });
    emit(&record, Some(&sidecar))?;
    note(
        cli,
        format!("{} of {} vertices kept fixed", mask.masked_count(), mesh.vertex_count()),
    );
    Ok(())
}

fn sweep_cmd(cli: &Cli, a: &SweepArgs) -> Result<(), CliError> {
    let remesh_params = RemeshParams {
        tolerance_fraction: a.tolerance,
        seed: cli.seed,
        ..RemeshParams::default()
    };
    if a.resolutions.is_empty() || a.resolutions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::usage("--resolutions must be non-empty and strictly ascending"));
    }
    RemeshParams {
        target_resolution: a.resolutions[0],
        ..remesh_params
    }
    .validate()
    .map_err(|e| CliError::usage(e.to_string()))?;
    let mesh = read_mesh(&a.input)?;
    let points = stability_sweep(&mesh, &a.resolutions, &remesh_params, &SegmentParams::with_seed(cli.seed))?;
    for p in &points {
        note(cli, format!("{:>7} faces  k = {:<3} {:.1} s", p.face_count, p.predicted_k, p.wall_time_secs));
    }
    let out = json!({
        "points": points,
        "stabilization_resolution": stabilization_resolution(&points),
        "stable_points": stable_run_length(&points),
    });
    emit(&out, a.out.as_deref())
}

fn ingest_options(cli: &Cli, a: &IngestArgs) -> Result<IngestOptions, CliError> {
    let options = IngestOptions {
        remesh: RemeshParams {
            target_resolution: a.target,
            seed: cli.seed,
            ..RemeshParams::default()
        },
        segment: SegmentParams::with_seed(cli.seed),
    };
    options.remesh.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(options)
}

fn ingest_summary(outcome: &IngestOutcome) -> serde_json::Value {
    json!({
        "accepted": outcome.entries.iter().map(|e| json!({
            "thing_id": e.thing_id,
            "group": e.group,
            "faces": e.mesh.face_count(),
            "segments": e.segmentation.k,
        })).collect::<Vec<_>>(),
        "rejected": outcome.rejected,
        "warnings": outcome.warnings,
    })
}

fn ingest_cmd(cli: &Cli, a: &IngestArgs) -> Result<(), CliError> {
    let options = ingest_options(cli, a)?;
    let outcome = ingest(&a.manifest, &options)?;
    note(
        cli,
        format!("{} accepted, {} rejected", outcome.entries.len(), outcome.rejected.len()),
    );
    emit(&ingest_summary(&outcome), a.out.as_deref())
}

fn index_cmd(cli: &Cli, a: &IndexArgs) -> Result<(), CliError> {
    let options = ingest_options(cli, &a.ingest)?;
    let params = ShapeParams {
        base_points: a.base_points,
        seed: cli.seed,
        ..ShapeParams::default()
    };
    params.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let outcome = ingest(&a.ingest.manifest, &options)?;
    let (index, stats) = build_index(&outcome.entries, &params, Some(&a.index))?;
    note(
        cli,
        format!(
            "indexed {} entries ({} segments); {} MRGs computed, {} reused",
            index.len(),
            index.segment_count(),
            stats.computed,
            stats.loaded
        ),
    );
    let mut summary = ingest_summary(&outcome);
    summary["index"] = json!({
        "dir": a.index,
        "entries": index.len(),
        "segments": index.segment_count(),
        "stats": stats,
    });
    emit(&summary, a.ingest.out.as_deref())
}

fn eval_cmd(cli: &Cli, a: &EvalArgs) -> Result<(), CliError> {
    let index = load_corpus(&a.index)?;
    let params = ClassifyParams {
        alpha: a.alpha,
        ..ClassifyParams::default()
    };
    let report = evaluate(&index, a.folds as usize, cli.seed, &params)?;
    let f = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
    note(
        cli,
        format!(
            "external precision {} recall {}; internal precision {} recall {}",
            f(report.external.precision),
            f(report.external.recall),
            f(report.internal.precision),
            f(report.internal.recall)
        ),
    );
    emit(&report, a.out.as_deref())
}

fn serve_cmd(cli: &Cli, a: &ServeArgs) -> Result<(), CliError> {
    let corpus = a.corpus.as_deref().map(load_corpus).transpose()?.map(Arc::new);
    let config = fabseg_service::ServiceConfig {
        corpus,
        persist_dir: a.persist.clone(),
        idle_expiry: Duration::from_secs_f64(a.idle_hours * 3600.0),
        cors_origin: a.cors_origin.clone(),
        workers: cli.threads.map_or_else(|| rayon::current_num_threads(), usize::from),
        segment: SegmentParams::with_seed(cli.seed),
        ..fabseg_service::ServiceConfig::default()
    };
    let state = fabseg_service::AppState::new(config).map_err(|e| CliError::data(format!("session store: {e}")))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new(ErrorKind::Internal, e.to_string()))?;
    runtime.block_on(async {
        let addr = format!("{}:{}", a.host, a.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::data(format!("bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::data(e.to_string()))?;
        note(cli, format!("listening on http://{local}"));
        fabseg_service::serve(listener, state)
            .await
            .map_err(|e| CliError::new(ErrorKind::Internal, e.to_string()))
    })
}
