use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::eval::{
    evaluate, merge_reports, Construction, EvalOptions, ExperimentReport, LocalSearch,
};
use super::submission::{ModelSubmission, ResolvedSubmission};
use crate::error::{Error, Result};
use crate::exact::{brute_force, held_karp, Provenance, ReferenceSolution, SOURCE_MULTI_START_LK};
use crate::oracle::OracleConfig;
use crate::rod::{compute_rod, GapAggregation, RodCase, RodOptions, RodReport};
use crate::search::{multi_start_lk, LkParams};
use crate::seed::derive_seed;
use crate::tsp::TspProcess;

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Keeps names usable as file names.
fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GenArgs {
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub overwrite: bool,
}

pub fn cmd_gen(args: &GenArgs) -> Result<Dataset> {
    let mut ds = Dataset::generate(args.n, args.count, args.seed)?;
    ds.write(&args.out, args.overwrite)?;
    log::info!(
        "wrote {} instances of n = {} to {}",
        ds.len(),
        ds.n(),
        args.out.display()
    );
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveMethod {
    HeldKarp,
    Brute,
    Import(PathBuf),
    /// Best of several LK runs; yields best-known rather than exact
    /// references.
    Lk {
        starts: usize,
        seed: u64,
    },
}

/// Computes or imports references for every instance and writes them to the
/// dataset's reference file.
pub fn cmd_solve(dataset_dir: &Path, method: &SolveMethod) -> Result<Vec<ReferenceSolution>> {
    let ds = Dataset::load(dataset_dir)?;
    let ids: Vec<&str> = ds.ids().collect();
    let refs = match method {
        SolveMethod::Import(path) => ds.import(path)?,
        _ => ds
            .instances
            .par_iter()
            .enumerate()
            .map(|(i, inst)| {
                let r = match method {
                    SolveMethod::HeldKarp => held_karp(inst)?.0,
                    SolveMethod::Brute => brute_force(inst)?,
                    SolveMethod::Lk { starts, seed } => {
                        let params = LkParams {
                            seed: derive_seed(*seed, &[i as u64]),
                            ..LkParams::default()
                        };
                        let best = multi_start_lk(inst, *starts, params)?.tour;
                        ReferenceSolution {
                            id: String::new(),
                            cost: best.cost(),
                            order: Some(best.into_order()),
                            source: SOURCE_MULTI_START_LK.into(),
                            provenance: Provenance::BestKnown,
                            validated: true,
                        }
                    }
                    SolveMethod::Import(_) => unreachable!(),
                };
                Ok(r.with_id(ids[i]))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    ds.write_references(&refs)?;
    log::info!(
        "wrote {} references to {}",
        refs.len(),
        ds.references_path()?.display()
    );
    Ok(refs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RodArgs {
    pub k: f64,
    pub rollouts: usize,
    pub seed: u64,
    pub aggregation: GapAggregation,
}

impl Default for RodArgs {
    fn default() -> Self {
        Self {
            k: RodOptions::default().k,
            rollouts: 1,
            seed: 0,
            aggregation: GapAggregation::RatioOfSums,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub dataset: PathBuf,
    pub model_file: Option<PathBuf>,
    /// Falls back to the construction declared in the submission.
    pub construction: Option<String>,
    pub iterations: usize,
    pub width: usize,
    /// Comma-separated local searches, e.g. `none,2opt`.
    pub local_search: String,
    pub lk_depth: usize,
    pub lk_neighbors: usize,
    pub seed: u64,
    /// Also compute the ROD of every row.
    pub rod: Option<RodArgs>,
    /// Output path prefix; defaults to `<dataset>/eval-<model>-<construction>`.
    pub out: Option<PathBuf>,
}

impl EvalArgs {
    pub fn new(dataset: impl Into<PathBuf>) -> Self {
        Self {
            dataset: dataset.into(),
            model_file: None,
            construction: None,
            iterations: 16,
            width: 16,
            local_search: "none".into(),
            lk_depth: 5,
            lk_neighbors: 5,
            seed: 0,
            rod: None,
            out: None,
        }
    }
}

fn load_submission(path: &Path, ds: &Dataset) -> Result<ResolvedSubmission> {
    let base = path.parent().unwrap_or(Path::new("."));
    ModelSubmission::load(path)?.resolve(ds, base)
}

fn pick_construction(
    flag: Option<&str>,
    submission: Option<&ResolvedSubmission>,
    iterations: usize,
    width: usize,
) -> Result<Construction> {
    let name = flag
        .or_else(|| submission.and_then(|s| s.construction.as_deref()))
        .ok_or_else(|| {
            Error::Usage("--construction is required unless the submission declares one".into())
        })?;
    Construction::parse(name, iterations, width)
}

/// Builds the oracle cases of a dataset: one completion table per instance.
pub fn rod_cases(
    ds: &Dataset,
    references: &[ReferenceSolution],
) -> Result<Vec<RodCase<TspProcess>>> {
    ds.instances
        .par_iter()
        .zip(references)
        .map(|(inst, r)| {
            Ok(RodCase {
                id: r.id.clone(),
                process: TspProcess::new(inst)?,
                reference_cost: Some(r.cost),
            })
        })
        .collect()
}

fn rod_for(
    ds: &Dataset,
    cases: &[RodCase<TspProcess>],
    costs: &[f64],
    args: &RodArgs,
) -> Result<RodReport> {
    let config = OracleConfig {
        rollouts_per_instance: args.rollouts,
        seed: args.seed,
        ..OracleConfig::default()
    };
    let options = RodOptions {
        k: args.k,
        aggregation: args.aggregation,
    };
    let mut report = compute_rod(cases, costs, &config, &options)?;
    report.dataset_id = ds.id().to_string();
    Ok(report)
}

/// Paths written by a command.
#[derive(Debug, Clone, Default)]
pub struct Written {
    pub files: Vec<PathBuf>,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(ExperimentReport, Written)> {
    let ds = Dataset::load(&args.dataset)?;
    let references = ds.load_references()?;
    let submission = args
        .model_file
        .as_deref()
        .map(|p| load_submission(p, &ds))
        .transpose()?;
    let construction = pick_construction(
        args.construction.as_deref(),
        submission.as_ref(),
        args.iterations,
        args.width,
    )?;
    let submission = match (construction, submission) {
        (Construction::Nn, Some(s)) => {
            log::warn!(
                "nearest neighbour ignores the submission of model {}",
                s.model
            );
            None
        }
        (_, s) => s,
    };
    let model = match (&submission, construction) {
        (Some(s), _) => s.model.clone(),
        (None, Construction::Nn) => "nn".to_string(),
        (None, _) => "inverse-distance".to_string(),
    };
    let options = EvalOptions {
        construction,
        local_searches: LocalSearch::parse_list(
            &args.local_search,
            args.lk_depth,
            args.lk_neighbors,
        )?,
        seed: args.seed,
    };
    let mut report = evaluate(&ds, &references, &model, submission.as_ref(), &options)?;
    if let Some(rod) = &args.rod {
        let cases = rod_cases(&ds, &references)?;
        for row in &mut report.rows {
            row.rod = Some(rod_for(&ds, &cases, &row.costs, rod)?.alpha);
        }
    }

    let prefix = args.out.clone().unwrap_or_else(|| {
        args.dataset.join(format!(
            "eval-{}-{}",
            file_safe(&model),
            construction.label()
        ))
    });
    let written = write_report(&report, &prefix, true)?;
    Ok((report, written))
}

fn write_report(report: &ExperimentReport, prefix: &Path, timing: bool) -> Result<Written> {
    let mut files = vec![
        (with_suffix(prefix, ".csv"), report.to_csv()?),
        (with_suffix(prefix, ".json"), report.to_json()?),
        (with_suffix(prefix, ".md"), report.to_markdown()),
    ];
    if timing {
        files.push((with_suffix(prefix, ".timing.csv"), report.timing_csv()));
    }
    for (path, text) in &files {
        write(path, text)?;
    }
    Ok(Written {
        files: files.into_iter().map(|(p, _)| p).collect(),
    })
}

/// Where `rod` takes model costs from.
#[derive(Debug, Clone, PartialEq)]
pub enum CostSource {
    /// A submission, decoded with the given construction flags, or an eval
    /// report, or a JSON-lines file of `{"id", "cost"}` records.
    File(PathBuf),
    /// Nearest neighbour, needs no file.
    NearestNeighbour,
}

#[derive(Debug, Clone)]
pub struct RodCmdArgs {
    pub dataset: PathBuf,
    pub source: CostSource,
    /// Row label `model/construction/local_search` when reading an eval
    /// report with several rows.
    pub row: Option<String>,
    pub construction: Option<String>,
    pub iterations: usize,
    pub width: usize,
    pub local_search: String,
    pub lk_depth: usize,
    pub lk_neighbors: usize,
    pub rod: RodArgs,
    /// Output path prefix; defaults to `<dataset>/rod-<model>`.
    pub out: Option<PathBuf>,
}

impl RodCmdArgs {
    pub fn new(dataset: impl Into<PathBuf>, source: CostSource) -> Self {
        Self {
            dataset: dataset.into(),
            source,
            row: None,
            construction: None,
            iterations: 16,
            width: 16,
            local_search: "none".into(),
            lk_depth: 5,
            lk_neighbors: 5,
            rod: RodArgs::default(),
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RodResult {
    pub model: String,
    #[serde(flatten)]
    pub report: RodReport,
}

#[derive(Deserialize)]
struct CostRecord {
    id: String,
    cost: f64,
}

fn costs_from_lines(path: &Path, text: &str, ds: &Dataset) -> Result<Vec<f64>> {
    let mut costs = vec![None; ds.len()];
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let r: CostRecord = serde_json::from_str(line).map_err(|e| Error::json(path, e))?;
        let i = ds
            .position(&r.id)
            .ok_or_else(|| Error::Dataset(format!("cost record for unknown instance {}", r.id)))?;
        if costs[i].replace(r.cost).is_some() {
            return Err(Error::Dataset(format!(
                "duplicate cost record for {}",
                r.id
            )));
        }
    }
    let missing: Vec<&str> = costs
        .iter()
        .zip(ds.ids())
        .filter(|(c, _)| c.is_none())
        .map(|(_, id)| id)
        .collect();
    if !missing.is_empty() {
        return Err(Error::Dataset(format!(
            "no cost for {}",
            missing.join(", ")
        )));
    }
    Ok(costs.into_iter().map(Option::unwrap).collect())
}

fn costs_from_report(
    report: ExperimentReport,
    row: Option<&str>,
    ds: &Dataset,
) -> Result<(String, Vec<f64>)> {
    if report.dataset_id != ds.id() || !report.instance_ids.iter().map(String::as_str).eq(ds.ids())
    {
        return Err(Error::Report(format!(
            "report is on dataset {}, not {}",
            report.dataset_id,
            ds.id()
        )));
    }
    let row = match row {
        Some(label) => report
            .row(label)
            .ok_or_else(|| Error::Usage(format!("report has no row {label}")))?,
        None if report.rows.len() == 1 => &report.rows[0],
        None => {
            let labels: Vec<String> = report.rows.iter().map(|r| r.label()).collect();
            return Err(Error::Usage(format!(
                "report has {} rows; choose one with --row ({})",
                labels.len(),
                labels.join(", ")
            )));
        }
    };
    Ok((row.label(), row.costs.clone()))
}

pub fn cmd_rod(args: &RodCmdArgs) -> Result<(RodResult, Written)> {
    let ds = Dataset::load(&args.dataset)?;
    let references = ds.load_references()?;

    let eval_costs = |submission: Option<ResolvedSubmission>, construction: Construction| {
        let model = submission
            .as_ref()
            .map_or("nn".to_string(), |s| s.model.clone());
        let options = EvalOptions {
            construction,
            local_searches: vec![LocalSearch::parse(
                &args.local_search,
                args.lk_depth,
                args.lk_neighbors,
            )?],
            seed: args.rod.seed,
        };
        let report = evaluate(&ds, &references, &model, submission.as_ref(), &options)?;
        let row = report.rows.into_iter().next().unwrap();
        Ok::<_, Error>((row.label(), row.costs))
    };

    let (model, costs) = match &args.source {
        CostSource::NearestNeighbour => eval_costs(None, Construction::Nn)?,
        CostSource::File(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let value: Option<serde_json::Value> = serde_json::from_str(&text).ok();
            let has = |key: &str| value.as_ref().is_some_and(|v| v.get(key).is_some());
            if has("entries") {
                let submission = load_submission(path, &ds)?;
                let construction = pick_construction(
                    args.construction.as_deref(),
                    Some(&submission),
                    args.iterations,
                    args.width,
                )?;
                eval_costs(Some(submission), construction)?
            } else if has("rows") {
                costs_from_report(
                    ExperimentReport::from_json(&text)?,
                    args.row.as_deref(),
                    &ds,
                )?
            } else {
                let stem = path
                    .file_stem()
                    .map_or("model".into(), |s| s.to_string_lossy().into_owned());
                (stem, costs_from_lines(path, &text, &ds)?)
            }
        }
    };

    let cases = rod_cases(&ds, &references)?;
    let report = rod_for(&ds, &cases, &costs, &args.rod)?;
    let result = RodResult { model, report };

    let prefix = args.out.clone().unwrap_or_else(|| {
        args.dataset
            .join(format!("rod-{}", file_safe(&result.model)))
    });
    let json_path = with_suffix(&prefix, ".json");
    let mut json = serde_json::to_string_pretty(&result).map_err(|e| Error::json(&json_path, e))?;
    json.push('\n');
    let curve_path = with_suffix(&prefix, ".curve.csv");
    write(&json_path, &json)?;
    write(&curve_path, &result.report.curve_csv())?;
    Ok((
        result,
        Written {
            files: vec![json_path, curve_path],
        },
    ))
}

/// Merges eval reports. Writes CSV, JSON and markdown when `out` is given.
pub fn cmd_report(inputs: &[PathBuf], out: Option<&Path>) -> Result<(ExperimentReport, Written)> {
    let reports = inputs
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            ExperimentReport::from_json(&text)
                .map_err(|e| Error::Report(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let merged = merge_reports(reports)?;
    let written = match out {
        Some(prefix) => write_report(&merged, prefix, false)?,
        None => Written::default(),
    };
    Ok((merged, written))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_names_are_sanitized() {
        assert_eq!(file_safe("nn/2opt x"), "nn_2opt_x");
        assert_eq!(
            with_suffix(Path::new("a/b"), ".csv"),
            PathBuf::from("a/b.csv")
        );
    }

    #[test]
    fn brute_force_refuses_large_datasets() {
        let tmp = tempfile::tempdir().unwrap();
        let args = GenArgs {
            n: 12,
            count: 2,
            seed: 0,
            out: tmp.path().join("d"),
            overwrite: false,
        };
        cmd_gen(&args).unwrap();
        let err = cmd_solve(&args.out, &SolveMethod::Brute).unwrap_err();
        assert!(matches!(err, Error::TooLarge { .. }), "{err}");
    }

    #[test]
    fn import_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let args = GenArgs {
            n: 7,
            count: 4,
            seed: 2,
            out: tmp.path().join("d"),
            overwrite: false,
        };
        cmd_gen(&args).unwrap();
        let refs = cmd_solve(&args.out, &SolveMethod::HeldKarp).unwrap();
        let exported = tmp.path().join("refs.jsonl");
        fs::copy(args.out.join("references.jsonl"), &exported).unwrap();
        let imported = cmd_solve(&args.out, &SolveMethod::Import(exported)).unwrap();
        assert_eq!(refs, imported);
    }
}
