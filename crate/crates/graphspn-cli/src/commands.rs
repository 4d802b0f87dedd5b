//! Implementations of the CLI verbs. Every verb is reproducible from
//! (config, master seed): all randomness is drawn from seeds derived per
//! artifact, and rows are emitted in a fixed sort order.

use crate::config::{ExperimentConfig, ModelKind};
use crate::metrics::{mean_std, roc_curve, RocCurve};
use crate::CliError;
use graphspn::data::{
    apply_noise, generate_synthetic_floor, load_graph, noise_stats, save_graph, PlaceCategory,
    SynthFloorParams, TopoGraph,
};
use graphspn::model::{
    classify_marginal, groundtruth_labels, infer_placeholders, normalized_log_likelihood,
    train_templates, GraphSpnModel, InstanceSpn, InstantiationConfig,
};
use graphspn::mrf::{build_mrf, estimate_potentials, loopy_bp, mean_log_factor_score, BpConfig,
    PotentialTable};
use graphspn::seed::derive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

// Seed-derivation namespaces.
const TAG_FLOOR: u64 = 1;
const TAG_NOISE: u64 = 2;
const TAG_DEMOTE: u64 = 3;
const TAG_PH_NOISE: u64 = 4;
const TAG_TRAIN: u64 = 10;
const TAG_INSTANCE: u64 = 20;
const TAG_BP: u64 = 21;

pub fn dataset_dir(out: &Path) -> PathBuf {
    out.join("dataset")
}

pub fn models_dir(out: &Path, test_building: &str) -> PathBuf {
    out.join("models").join(test_building)
}

pub fn results_dir(out: &Path, test_building: &str) -> PathBuf {
    out.join("results").join(test_building)
}

fn floor_file(floor: usize) -> String {
    format!("floor_{floor:02}.json")
}

fn noisy_file(floor: usize, level: u8, eset: usize) -> String {
    format!("floor_{floor:02}_nl{level}_e{eset}.json")
}

fn ph_file(floor: usize, level: u8, eset: usize) -> String {
    format!("floor_{floor:02}_ph_nl{level}_e{eset}.json")
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn fmt_float(x: f64, decimals: usize) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.decimals$}")
    }
}

// ---------------------------------------------------------------------------
// Manifests

#[derive(Serialize, Deserialize)]
struct DatasetManifest {
    format: String,
    seed: u64,
    config_digest: String,
    buildings: Vec<String>,
    floors_per_building: usize,
    noise_levels: Vec<u8>,
    evidence_sets_per_graph: usize,
    placeholder_fraction: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelsManifest {
    format: String,
    seed: u64,
    config_digest: String,
    train_buildings: Vec<String>,
    test_building: String,
    models: Vec<String>,
}

fn read_dataset_manifest(out: &Path, config: &ExperimentConfig) -> Result<DatasetManifest, CliError> {
    let path = dataset_dir(out).join("manifest.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}; run `gen` first", path.display())))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if manifest.config_digest != config.dataset_digest() {
        return Err(CliError::Data(
            "dataset was generated with a different configuration; re-run `gen`".into(),
        ));
    }
    Ok(manifest)
}

fn read_models_manifest(out: &Path, config: &ExperimentConfig) -> Result<ModelsManifest, CliError> {
    let path = models_dir(out, &config.test_building).join("manifest.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}; run `train` first", path.display())))?;
    let manifest: ModelsManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if manifest.config_digest != config.training_digest() {
        return Err(CliError::Data(
            "models were trained with a different configuration; re-run `train`".into(),
        ));
    }
    // The split must stay clean: evaluation refuses models whose training
    // set touched the test building.
    if manifest.train_buildings.contains(&config.test_building) {
        return Err(CliError::Data(format!(
            "test building {:?} appears in the training set {:?}",
            config.test_building, manifest.train_buildings
        )));
    }
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// gen

pub struct GenSummary {
    pub graphs_written: usize,
    pub files_written: usize,
}

/// Generates the synthetic dataset: per building and floor, one clean graph
/// plus noisy-evidence variants and placeholder-demoted noisy variants for
/// every configured noise level and evidence set. Also writes the realized
/// noise statistics per level.
pub fn cmd_gen(config: &ExperimentConfig, seed: u64, out: &Path) -> Result<GenSummary, CliError> {
    config.validate()?;
    let root = dataset_dir(out);
    std::fs::create_dir_all(&root)?;
    let mut graphs_written = 0usize;
    let mut files_written = 0usize;
    let mut per_level: BTreeMap<u8, Vec<TopoGraph>> = BTreeMap::new();

    for (b, building) in config.buildings.iter().enumerate() {
        let dir = root.join(building);
        std::fs::create_dir_all(&dir)?;
        for floor in 0..config.floors_per_building {
            let floor_seed = derive(seed, &[TAG_FLOOR, b as u64, floor as u64]);
            let mut floor_rng = ChaCha8Rng::seed_from_u64(floor_seed);
            let (clo, chi) = config.corridor_length_range;
            let (rlo, rhi) = config.rooms_per_corridor_range;
            let params = SynthFloorParams {
                id: format!("{building}_f{floor:02}"),
                building: building.clone(),
                corridor_length: floor_rng.gen_range(clo..=chi),
                rooms_per_corridor: floor_rng.gen_range(rlo..=rhi),
                room_size_range: config.room_size_range,
                category_priors: config.category_priors.clone(),
                rng_seed: floor_rng.gen(),
            };
            let clean = generate_synthetic_floor(&params)?;
            save_graph(&clean, &dir.join(floor_file(floor)))?;
            graphs_written += 1;
            files_written += 1;

            // Placeholder demotion is fixed per floor so every noise level
            // hides the same nodes. Placeholders model an exploration
            // frontier, so a connected blob is demoted rather than isolated
            // interior nodes.
            let n = clean.num_nodes();
            let ph_count =
                (((config.placeholder_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize).min(n);
            let mut demote_rng =
                ChaCha8Rng::seed_from_u64(derive(seed, &[TAG_DEMOTE, b as u64, floor as u64]));
            let blob = frontier_blob(&clean, ph_count, &mut demote_rng);
            let demoted = clean.demote_to_placeholders(&blob)?;

            for level in &config.noise_levels {
                for eset in 0..config.evidence_sets_per_graph {
                    let noise_seed = derive(
                        seed,
                        &[TAG_NOISE, b as u64, floor as u64, level.level as u64, eset as u64],
                    );
                    let noisy = apply_noise(&clean, level, noise_seed)?;
                    save_graph(&noisy, &dir.join(noisy_file(floor, level.level, eset)))?;
                    files_written += 1;
                    per_level.entry(level.level).or_default().push(noisy);

                    let ph_seed = derive(
                        seed,
                        &[TAG_PH_NOISE, b as u64, floor as u64, level.level as u64, eset as u64],
                    );
                    let ph_noisy = apply_noise(&demoted, level, ph_seed)?;
                    save_graph(&ph_noisy, &dir.join(ph_file(floor, level.level, eset)))?;
                    files_written += 1;
                }
            }
        }
    }

    // Realized evidence-gap statistics per level.
    let mut csv = String::from(
        "level,nodes,incorrect,mean_d_groundtruth,std_d_groundtruth,mean_d_incorrect,std_d_incorrect\n",
    );
    for (level, graphs) in &per_level {
        let refs: Vec<&TopoGraph> = graphs.iter().collect();
        let stats = noise_stats(&refs)?;
        writeln!(
            csv,
            "{level},{},{},{},{},{},{}",
            stats.nodes,
            stats.incorrect,
            fmt_float(stats.mean_d_groundtruth, 6),
            fmt_float(stats.std_d_groundtruth, 6),
            fmt_float(stats.mean_d_incorrect, 6),
            fmt_float(stats.std_d_incorrect, 6)
        )
        .expect("write to string");
    }
    write_text(&root.join("noise_stats.csv"), &csv)?;

    let manifest = DatasetManifest {
        format: "graphspn-dataset".into(),
        seed,
        config_digest: config.dataset_digest(),
        buildings: config.buildings.clone(),
        floors_per_building: config.floors_per_building,
        noise_levels: config.noise_levels.iter().map(|l| l.level).collect(),
        evidence_sets_per_graph: config.evidence_sets_per_graph,
        placeholder_fraction: config.placeholder_fraction,
    };
    write_text(
        &root.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    files_written += 2;
    Ok(GenSummary { graphs_written, files_written })
}

/// A connected set of `count` nodes grown breadth-first from a random start,
/// approximating an unexplored frontier of the map.
fn frontier_blob(graph: &TopoGraph, count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let ids = graph.node_ids();
    if count == 0 || ids.is_empty() {
        return Vec::new();
    }
    let start = ids[rng.gen_range(0..ids.len())];
    let mut blob = vec![start];
    let mut frontier = vec![start];
    while blob.len() < count {
        let mut candidates: Vec<usize> = frontier
            .iter()
            .flat_map(|&id| graph.neighbors(id).iter().copied())
            .filter(|id| !blob.contains(id))
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        if candidates.is_empty() {
            break;
        }
        let pick = candidates[rng.gen_range(0..candidates.len())];
        blob.push(pick);
        frontier.push(pick);
    }
    blob
}

// ---------------------------------------------------------------------------
// train

fn load_training_graphs(
    config: &ExperimentConfig,
    out: &Path,
) -> Result<Vec<TopoGraph>, CliError> {
    let root = dataset_dir(out);
    let mut graphs = Vec::new();
    for building in config.train_buildings() {
        for floor in 0..config.floors_per_building {
            let path = root.join(&building).join(floor_file(floor));
            graphs.push(load_graph(&path).map_err(|e| {
                CliError::Data(format!("cannot load {}: {e}", path.display()))
            })?);
        }
    }
    Ok(graphs)
}

/// Trains the requested models on the training buildings and writes the
/// bundles plus a manifest recording the split.
pub fn cmd_train(
    config: &ExperimentConfig,
    seed: u64,
    out: &Path,
    models: &[ModelKind],
) -> Result<(), CliError> {
    config.validate()?;
    read_dataset_manifest(out, config)?;
    let graphs = load_training_graphs(config, out)?;
    let dir = models_dir(out, &config.test_building);
    std::fs::create_dir_all(&dir)?;

    let meta = serde_json::json!({
        "seed": seed,
        "config_digest": config.training_digest(),
        "train_buildings": config.train_buildings(),
        "test_building": config.test_building,
    });

    for model in models {
        match model {
            ModelKind::GraphSpn => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, &[TAG_TRAIN]));
                let trained = train_templates(
                    &graphs,
                    &config.templates,
                    &config.structure_params,
                    &config.train_config,
                    config.decomposition_repetitions,
                    &mut rng,
                )?;
                trained.save_bundle(&dir.join("graphspn"), meta.clone())?;
            }
            ModelKind::Mrf2 => {
                estimate_potentials(&graphs, 2, config.mrf_smoothing)?
                    .save(&dir.join("mrf2.json"))?;
            }
            ModelKind::Mrf3 => {
                estimate_potentials(&graphs, 3, config.mrf_smoothing)?
                    .save(&dir.join("mrf3.json"))?;
            }
        }
    }

    let manifest = ModelsManifest {
        format: "graphspn-models".into(),
        seed,
        config_digest: config.training_digest(),
        train_buildings: config.train_buildings(),
        test_building: config.test_building.clone(),
        models: models.iter().map(|m| m.name().to_string()).collect(),
    };
    write_text(
        &dir.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluation plumbing

struct LoadedModels {
    graphspn: Option<GraphSpnModel>,
    mrf2: Option<PotentialTable>,
    mrf3: Option<PotentialTable>,
}

fn load_models(
    config: &ExperimentConfig,
    out: &Path,
    wanted: &[ModelKind],
) -> Result<LoadedModels, CliError> {
    let dir = models_dir(out, &config.test_building);
    let mut loaded = LoadedModels { graphspn: None, mrf2: None, mrf3: None };
    for model in wanted {
        match model {
            ModelKind::GraphSpn => {
                let (m, _) = GraphSpnModel::load_bundle(&dir.join("graphspn"))
                    .map_err(|e| CliError::Data(format!("graphspn bundle: {e}")))?;
                loaded.graphspn = Some(m);
            }
            ModelKind::Mrf2 => {
                loaded.mrf2 = Some(PotentialTable::load(&dir.join("mrf2.json"))?);
            }
            ModelKind::Mrf3 => {
                loaded.mrf3 = Some(PotentialTable::load(&dir.join("mrf3.json"))?);
            }
        }
    }
    Ok(loaded)
}

/// One evaluated (model, graph, level, evidence set) cell.
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub model: ModelKind,
    pub level: u8,
    pub building: String,
    pub graph: String,
    pub evidence_set: usize,
    /// Number of scored nodes (placeholders only, for the placeholder task).
    pub nodes: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
    pub status: String,
}

fn accuracy_over(
    predictions: &BTreeMap<usize, usize>,
    graph: &TopoGraph,
    placeholders_only: bool,
) -> (usize, usize) {
    let mut scored = 0;
    let mut correct = 0;
    for node in graph.nodes() {
        if placeholders_only != node.is_placeholder {
            continue;
        }
        let Some(gt) = node.groundtruth else { continue };
        scored += 1;
        if predictions.get(&node.id) == Some(&gt.index()) {
            correct += 1;
        }
    }
    (scored, correct)
}

fn mrf_predictions(
    graph: &TopoGraph,
    potentials: &PotentialTable,
    bp: &BpConfig,
) -> Result<(BTreeMap<usize, usize>, bool), CliError> {
    let fg = build_mrf(graph, potentials)?;
    let result = loopy_bp(&fg, bp);
    let mut predictions = BTreeMap::new();
    for (pos, &(node_id, _)) in fg.variables().iter().enumerate() {
        let row = &result.marginals[pos];
        let mut best = 0;
        for (k, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = k;
            }
        }
        predictions.insert(node_id, best);
    }
    Ok((predictions, result.converged))
}

fn write_per_graph_csv(path: &Path, rows: &[EvalRow]) -> Result<(), CliError> {
    let mut csv =
        String::from("model,level,building,graph,evidence_set,nodes,correct,accuracy,status\n");
    for r in rows {
        let accuracy = r.accuracy.map(|a| fmt_float(a, 6)).unwrap_or_default();
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.model, r.level, r.building, r.graph, r.evidence_set, r.nodes, r.correct, accuracy,
            r.status
        )
        .expect("write to string");
    }
    write_text(path, &csv)?;
    Ok(())
}

fn write_summary_csv(path: &Path, rows: &[EvalRow]) -> Result<(), CliError> {
    let mut groups: BTreeMap<(ModelKind, u8, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        if let Some(a) = r.accuracy {
            groups
                .entry((r.model, r.level, r.building.clone()))
                .or_default()
                .push(a);
        }
    }
    let mut csv = String::from("model,level,building,graphs,mean_accuracy,std_accuracy\n");
    for ((model, level, building), accs) in &groups {
        let (mean, std) = mean_std(accs);
        writeln!(
            csv,
            "{model},{level},{building},{},{},{}",
            accs.len(),
            fmt_float(mean, 6),
            fmt_float(std, 6)
        )
        .expect("write to string");
    }
    write_text(path, &csv)?;
    Ok(())
}

/// Mean accuracy per (model, level) over rows that produced a score.
pub fn summarize(rows: &[EvalRow]) -> BTreeMap<(ModelKind, u8), f64> {
    let mut groups: BTreeMap<(ModelKind, u8), Vec<f64>> = BTreeMap::new();
    for r in rows {
        if let Some(a) = r.accuracy {
            groups.entry((r.model, r.level)).or_default().push(a);
        }
    }
    groups.into_iter().map(|(k, v)| (k, mean_std(&v).0)).collect()
}

fn eval_graphs(
    config: &ExperimentConfig,
    seed: u64,
    out: &Path,
    models: &[ModelKind],
    levels: &[u8],
    placeholders: bool,
) -> Result<Vec<EvalRow>, CliError> {
    config.validate()?;
    read_dataset_manifest(out, config)?;
    read_models_manifest(out, config)?;
    let loaded = load_models(config, out, models)?;
    let building = &config.test_building;
    let dir = dataset_dir(out).join(building);
    let results = results_dir(out, building);
    std::fs::create_dir_all(&results)?;

    let mut rows = Vec::new();
    for floor in 0..config.floors_per_building {
        // The instance depends only on the topology, which all evidence
        // variants of a floor share.
        let clean = load_graph(&dir.join(floor_file(floor)))?;
        let instance: Option<InstanceSpn> = match &loaded.graphspn {
            Some(model) => Some(
                model.instantiate(
                    &clean,
                    &InstantiationConfig {
                        rng_seed: derive(seed, &[TAG_INSTANCE, floor as u64]),
                        ..config.instantiation.clone()
                    },
                )?,
            ),
            None => None,
        };

        for &level in levels {
            config.noise_level(level)?;
            for eset in 0..config.evidence_sets_per_graph {
                let file = if placeholders {
                    ph_file(floor, level, eset)
                } else {
                    noisy_file(floor, level, eset)
                };
                let graph = load_graph(&dir.join(&file))?;
                if placeholders && graph.nodes().iter().all(|n| !n.is_placeholder) {
                    log::info!("{file}: no placeholders, skipped");
                    continue;
                }
                for (m_idx, model) in models.iter().enumerate() {
                    let row_base = EvalRow {
                        model: *model,
                        level,
                        building: building.clone(),
                        graph: graph.id.clone(),
                        evidence_set: eset,
                        nodes: 0,
                        correct: 0,
                        accuracy: None,
                        status: String::new(),
                    };
                    let row = match model {
                        ModelKind::GraphSpn => {
                            let model_ref = loaded.graphspn.as_ref().expect("loaded");
                            let instance = instance.as_ref().expect("instantiated");
                            match graphspn_predictions(model_ref, instance, &graph, placeholders)
                            {
                                Ok(predictions) => {
                                    let (nodes, correct) =
                                        accuracy_over(&predictions, &graph, placeholders);
                                    if placeholders {
                                        dump_placeholder_marginals(
                                            &results, &graph, level, eset, model_ref, instance,
                                        )?;
                                    }
                                    EvalRow {
                                        nodes,
                                        correct,
                                        accuracy: Some(correct as f64 / nodes.max(1) as f64),
                                        status: "ok".into(),
                                        ..row_base
                                    }
                                }
                                Err(e) => {
                                    log::warn!("{file}: graphspn inference failed: {e}");
                                    EvalRow { status: format!("error: {e}"), ..row_base }
                                }
                            }
                        }
                        ModelKind::Mrf2 | ModelKind::Mrf3 => {
                            let table = match model {
                                ModelKind::Mrf2 => loaded.mrf2.as_ref().expect("loaded"),
                                _ => loaded.mrf3.as_ref().expect("loaded"),
                            };
                            let bp = BpConfig {
                                rng_seed: derive(
                                    seed,
                                    &[
                                        TAG_BP,
                                        floor as u64,
                                        level as u64,
                                        eset as u64,
                                        m_idx as u64,
                                        placeholders as u64,
                                    ],
                                ),
                                ..config.bp_config.clone()
                            };
                            match mrf_predictions(&graph, table, &bp) {
                                Ok((predictions, converged)) => {
                                    let (nodes, correct) =
                                        accuracy_over(&predictions, &graph, placeholders);
                                    EvalRow {
                                        nodes,
                                        correct,
                                        accuracy: Some(correct as f64 / nodes.max(1) as f64),
                                        status: if converged {
                                            "ok".into()
                                        } else {
                                            "bp-not-converged".into()
                                        },
                                        ..row_base
                                    }
                                }
                                Err(e) => {
                                    log::warn!("{file}: {model} inference failed: {e}");
                                    EvalRow { status: format!("error: {e}"), ..row_base }
                                }
                            }
                        }
                    };
                    rows.push(row);
                }
            }
        }
    }

    rows.sort_by(|a, b| {
        (a.model, a.level, &a.graph, a.evidence_set).cmp(&(b.model, b.level, &b.graph, b.evidence_set))
    });
    let prefix = if placeholders { "placeholders" } else { "classification" };
    write_per_graph_csv(&results.join(format!("{prefix}_per_graph.csv")), &rows)?;
    write_summary_csv(&results.join(format!("{prefix}_summary.csv")), &rows)?;
    Ok(rows)
}

fn graphspn_predictions(
    model: &GraphSpnModel,
    instance: &InstanceSpn,
    graph: &TopoGraph,
    placeholders: bool,
) -> Result<BTreeMap<usize, usize>, graphspn::model::ModelError> {
    if placeholders {
        let marginals = infer_placeholders(model, instance, graph)?;
        Ok(marginals
            .into_iter()
            .map(|(id, row)| {
                let mut best = 0;
                for (k, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = k;
                    }
                }
                (id, best)
            })
            .collect())
    } else {
        Ok(classify_marginal(model, instance, graph)?.argmax)
    }
}

fn dump_placeholder_marginals(
    results: &Path,
    graph: &TopoGraph,
    level: u8,
    eset: usize,
    model: &GraphSpnModel,
    instance: &InstanceSpn,
) -> Result<(), CliError> {
    let marginals = infer_placeholders(model, instance, graph)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let path = results
        .join("placeholder_marginals")
        .join(format!("{}_nl{level}_e{eset}.json", graph.id));
    write_text(
        &path,
        &serde_json::to_string_pretty(&marginals).expect("marginals serialize"),
    )?;
    Ok(())
}

/// Noisy-evidence classification accuracy on the test building, excluding
/// placeholders from the denominator.
pub fn cmd_eval_classification(
    config: &ExperimentConfig,
    seed: u64,
    out: &Path,
    models: &[ModelKind],
    levels: &[u8],
) -> Result<Vec<EvalRow>, CliError> {
    eval_graphs(config, seed, out, models, levels, false)
}

/// Placeholder-inference accuracy (scored over placeholder nodes only),
/// plus a JSON dump of the full placeholder marginals per graph.
pub fn cmd_eval_placeholders(
    config: &ExperimentConfig,
    seed: u64,
    out: &Path,
    models: &[ModelKind],
    levels: &[u8],
) -> Result<Vec<EvalRow>, CliError> {
    eval_graphs(config, seed, out, models, levels, true)
}

// ---------------------------------------------------------------------------
// novelty

#[derive(Debug, Clone)]
pub struct NoveltyRow {
    pub model: ModelKind,
    pub graph: String,
    pub variant: &'static str,
    pub is_novel: bool,
    pub score: f64,
}

pub struct NoveltyReport {
    pub rows: Vec<NoveltyRow>,
    pub curves: BTreeMap<ModelKind, RocCurve>,
}

/// Novelty detection: certain label assignments are scored by normalized
/// log-likelihood (or the mean unnormalized log factor score for the MRFs).
/// Corridor/doorway and corridor/office swaps are the novel class; the
/// originals and office/office swaps are the familiar class.
pub fn cmd_eval_novelty(
    config: &ExperimentConfig,
    seed: u64,
    out: &Path,
    models: &[ModelKind],
) -> Result<NoveltyReport, CliError> {
    config.validate()?;
    read_dataset_manifest(out, config)?;
    read_models_manifest(out, config)?;
    let loaded = load_models(config, out, models)?;
    let building = &config.test_building;
    let dir = dataset_dir(out).join(building);
    let results = results_dir(out, building);
    std::fs::create_dir_all(&results)?;

    use PlaceCategory::{Corridor, Doorway, OnePersonOffice, TwoPersonOffice};
    let mut rows = Vec::new();
    for floor in 0..config.floors_per_building {
        let clean = load_graph(&dir.join(floor_file(floor)))?;
        let variants: [(&'static str, TopoGraph, bool); 4] = [
            ("original", clean.clone(), false),
            ("swap_1po_2po", clean.swap_labels(OnePersonOffice, TwoPersonOffice), false),
            ("swap_cr_dw", clean.swap_labels(Corridor, Doorway), true),
            ("swap_cr_1po", clean.swap_labels(Corridor, OnePersonOffice), true),
        ];
        let instance: Option<InstanceSpn> = match &loaded.graphspn {
            Some(model) => Some(model.instantiate(
                &clean,
                &InstantiationConfig {
                    rng_seed: derive(seed, &[TAG_INSTANCE, floor as u64]),
                    ..config.instantiation.clone()
                },
            )?),
            None => None,
        };
        for (variant, graph, is_novel) in &variants {
            let labels = groundtruth_labels(graph)?;
            for model in models {
                let score = match model {
                    ModelKind::GraphSpn => normalized_log_likelihood(
                        loaded.graphspn.as_ref().expect("loaded"),
                        instance.as_ref().expect("instantiated"),
                        &labels,
                    )?,
                    ModelKind::Mrf2 => mean_log_factor_score(
                        graph,
                        loaded.mrf2.as_ref().expect("loaded"),
                        &labels,
                    )?,
                    ModelKind::Mrf3 => mean_log_factor_score(
                        graph,
                        loaded.mrf3.as_ref().expect("loaded"),
                        &labels,
                    )?,
                };
                rows.push(NoveltyRow {
                    model: *model,
                    graph: graph.id.clone(),
                    variant,
                    is_novel: *is_novel,
                    score,
                });
            }
        }
    }
    rows.sort_by(|a, b| (a.model, &a.graph, a.variant).cmp(&(b.model, &b.graph, b.variant)));

    let mut csv = String::from("model,graph,variant,class,score\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            r.model,
            r.graph,
            r.variant,
            if r.is_novel { "novel" } else { "familiar" },
            fmt_float(r.score, 9)
        )
        .expect("write to string");
    }
    write_text(&results.join("novelty_scores.csv"), &csv)?;

    let mut curves = BTreeMap::new();
    let mut auc_csv = String::from("model,auc,positives,negatives\n");
    for model in models {
        let positives: Vec<f64> = rows
            .iter()
            .filter(|r| r.model == *model && r.is_novel)
            .map(|r| r.score)
            .collect();
        let negatives: Vec<f64> = rows
            .iter()
            .filter(|r| r.model == *model && !r.is_novel)
            .map(|r| r.score)
            .collect();
        let curve = roc_curve(&positives, &negatives);
        let mut roc_csv = String::from("threshold,false_positive_rate,true_positive_rate\n");
        for p in &curve.points {
            writeln!(
                roc_csv,
                "{},{},{}",
                fmt_float(p.threshold, 9),
                fmt_float(p.false_positive_rate, 6),
                fmt_float(p.true_positive_rate, 6)
            )
            .expect("write to string");
        }
        write_text(&results.join(format!("novelty_roc_{model}.csv")), &roc_csv)?;
        writeln!(
            auc_csv,
            "{model},{},{},{}",
            fmt_float(curve.auc, 6),
            positives.len(),
            negatives.len()
        )
        .expect("write to string");
        curves.insert(*model, curve);
    }
    write_text(&results.join("novelty_auc.csv"), &auc_csv)?;
    Ok(NoveltyReport { rows, curves })
}

// ---------------------------------------------------------------------------
// export-dot

/// Renders a graph file (and optional posterior JSON) as DOT text.
pub fn cmd_export_dot(
    graph_path: &Path,
    posteriors_path: Option<&Path>,
) -> Result<String, CliError> {
    let graph = load_graph(graph_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", graph_path.display())))?;
    let posteriors: Option<BTreeMap<usize, Vec<f64>>> = match posteriors_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            Some(
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
            )
        }
        None => None,
    };
    Ok(crate::dot::export_dot(&graph, posteriors.as_ref()))
}
