use std::fmt::Write as _;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::submission::{ModelOutput, ResolvedSubmission};
use crate::error::{Error, Result};
use crate::exact::ReferenceSolution;
use crate::rod::{aggregate_gap_with, ReferenceCheck};
use crate::search::{
    beam_search, greedy_decode, lin_kernighan, nearest_neighbour, sampling_decode, three_opt,
    two_opt, Heatmap, LkParams, SearchResult,
};
use crate::seed::derive_seed;
use crate::tsp::{validate_permutation, Tour, TspInstance};

/// Tour construction procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    Nn,
    Greedy,
    Sample {
        iterations: usize,
    },
    Beam {
        width: usize,
    },
    /// Beam search keeping the shortest completed tour.
    BeamSt {
        width: usize,
    },
    /// Use the submitted tours as they are.
    Tour,
}

impl Construction {
    pub const NAMES: [&'static str; 6] = ["nn", "greedy", "sample", "beam", "beam-st", "tour"];

    pub fn parse(name: &str, iterations: usize, width: usize) -> Result<Self> {
        Ok(match name {
            "nn" => Self::Nn,
            "greedy" => Self::Greedy,
            "sample" => Self::Sample { iterations },
            "beam" => Self::Beam { width },
            "beam-st" => Self::BeamSt { width },
            "tour" => Self::Tour,
            other => {
                return Err(Error::Usage(format!(
                    "unknown construction {other:?}; expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    /// Row label, e.g. `beam-16`.
    pub fn label(&self) -> String {
        match self {
            Self::Nn => "nn".into(),
            Self::Greedy => "greedy".into(),
            Self::Sample { iterations } => format!("sample-{iterations}"),
            Self::Beam { width } => format!("beam-{width}"),
            Self::BeamSt { width } => format!("beam-st-{width}"),
            Self::Tour => "tour".into(),
        }
    }

    pub fn needs_heatmap(&self) -> bool {
        matches!(
            self,
            Self::Greedy | Self::Sample { .. } | Self::Beam { .. } | Self::BeamSt { .. }
        )
    }

    /// Builds a tour for instance `index` of a dataset.
    pub fn run(
        &self,
        instance: &TspInstance,
        output: Option<&ModelOutput>,
        seed: u64,
        index: usize,
    ) -> Result<SearchResult> {
        let baseline;
        let heatmap = match output {
            Some(ModelOutput::Heatmap(h)) => Some(h),
            Some(ModelOutput::Tour(_)) if self.needs_heatmap() => {
                return Err(Error::Dataset(format!(
                    "construction {} needs heatmaps but the submission provides tours",
                    self.label()
                )))
            }
            _ if self.needs_heatmap() => {
                baseline = Heatmap::inverse_distance(instance);
                Some(&baseline)
            }
            _ => None,
        };
        match *self {
            Self::Nn => nearest_neighbour(instance, 0),
            Self::Greedy => greedy_decode(instance, heatmap.unwrap(), 0),
            Self::Sample { iterations } => sampling_decode(
                instance,
                heatmap.unwrap(),
                iterations,
                derive_seed(seed, &[index as u64, 0]),
                0,
            ),
            Self::Beam { width } => beam_search(instance, heatmap.unwrap(), width, false, 0),
            Self::BeamSt { width } => beam_search(instance, heatmap.unwrap(), width, true, 0),
            Self::Tour => match output {
                Some(ModelOutput::Tour(order)) => Ok(SearchResult::new(
                    Tour::new(instance, order.clone())?,
                    "tour",
                    0,
                    Duration::ZERO,
                )),
                _ => Err(Error::Usage(
                    "construction tour needs a submission with tours".into(),
                )),
            },
        }
    }
}

/// Improvement applied after construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalSearch {
    None,
    TwoOpt,
    ThreeOpt,
    /// Depth limit and neighbour-list size; the seed comes from the run.
    Lk {
        depth: usize,
        neighbors: usize,
    },
}

impl LocalSearch {
    pub fn parse(name: &str, lk_depth: usize, lk_neighbors: usize) -> Result<Self> {
        Ok(match name {
            "none" => Self::None,
            "2opt" => Self::TwoOpt,
            "3opt" => Self::ThreeOpt,
            "lk" => Self::Lk {
                depth: lk_depth,
                neighbors: lk_neighbors,
            },
            other => {
                return Err(Error::Usage(format!(
                    "unknown local search {other:?}; expected none, 2opt, 3opt or lk"
                )))
            }
        })
    }

    /// Parses a comma-separated list such as `none,2opt,lk`.
    pub fn parse_list(list: &str, lk_depth: usize, lk_neighbors: usize) -> Result<Vec<Self>> {
        let parsed = list
            .split(',')
            .map(|s| Self::parse(s.trim(), lk_depth, lk_neighbors))
            .collect::<Result<Vec<_>>>()?;
        for (i, a) in parsed.iter().enumerate() {
            if parsed[..i].contains(a) {
                return Err(Error::Usage(format!(
                    "local search {} listed twice",
                    a.tag()
                )));
            }
        }
        Ok(parsed)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::TwoOpt => "2opt",
            Self::ThreeOpt => "3opt",
            Self::Lk { .. } => "lk",
        }
    }

    pub fn run(
        &self,
        instance: &TspInstance,
        tour: &Tour,
        seed: u64,
        index: usize,
    ) -> Result<SearchResult> {
        Ok(match *self {
            Self::None => SearchResult::new(tour.clone(), "none", 0, Duration::ZERO),
            Self::TwoOpt => two_opt(instance, tour),
            Self::ThreeOpt => three_opt(instance, tour),
            Self::Lk { depth, neighbors } => lin_kernighan(
                instance,
                tour,
                LkParams {
                    depth,
                    neighbors,
                    seed: derive_seed(seed, &[index as u64, 1]),
                },
            )?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub construction: Construction,
    pub local_searches: Vec<LocalSearch>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub construction: String,
    pub local_search: String,
    /// `1 - Σc*/Σc`, as a fraction.
    pub gap: f64,
    /// `(Σc - Σc*)/Σc*`, as a fraction.
    pub classical_gap: f64,
    /// `gap` of the same construction without local search.
    pub gap_without_search: f64,
    /// `gap - gap_without_search`.
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rod: Option<f64>,
    /// Per-instance tour costs, in manifest order.
    pub costs: Vec<f64>,
    /// Mean construction plus search time per instance. Machine-relative and
    /// kept out of the serialized report.
    #[serde(skip)]
    pub mean_time: Duration,
}

impl ReportRow {
    pub fn key(&self) -> (&str, &str, &str) {
        (&self.model, &self.construction, &self.local_search)
    }

    /// `model/construction/local_search`.
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.model, self.construction, self.local_search)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset_id: String,
    /// `"exact"` when every reference is a proven optimum, else `"best-known"`.
    pub references: String,
    pub instance_ids: Vec<String>,
    pub reference_costs: Vec<f64>,
    pub rows: Vec<ReportRow>,
}

fn reference_check(references: &[ReferenceSolution]) -> (ReferenceCheck, &'static str) {
    if references.iter().all(|r| r.provenance.is_exact()) {
        (ReferenceCheck::Strict, "exact")
    } else {
        (ReferenceCheck::BestKnown, "best-known")
    }
}

fn checked(id: &str, instance: &TspInstance, result: SearchResult) -> Result<SearchResult> {
    validate_permutation(instance.n(), result.tour.order()).map_err(|e| Error::InvalidTour {
        id: id.to_string(),
        procedure: result.procedure.clone(),
        reason: e.to_string(),
    })?;
    Ok(result)
}

/// Runs the construction on every instance, then each local search from the
/// constructed tour, and reports gaps against `references`. Without a
/// submission, heatmap constructions decode the inverse-distance heatmap.
pub fn evaluate(
    dataset: &Dataset,
    references: &[ReferenceSolution],
    model: &str,
    submission: Option<&ResolvedSubmission>,
    options: &EvalOptions,
) -> Result<ExperimentReport> {
    if references.len() != dataset.len() {
        return Err(Error::LengthMismatch {
            model: dataset.len(),
            reference: references.len(),
        });
    }
    if options.local_searches.is_empty() {
        return Err(Error::Usage(
            "at least one local search (or none) is required".into(),
        ));
    }
    if options.construction == Construction::Tour && submission.is_none() {
        return Err(Error::Usage(
            "construction tour needs a --model-file".into(),
        ));
    }
    let ids: Vec<String> = dataset.ids().map(String::from).collect();
    let searches = &options.local_searches;

    // Per instance: the constructed tour, then one tour per local search.
    let runs = dataset
        .instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let output = submission.map(|s| &s.outputs[i]);
            let id = &ids[i];
            let base = options
                .construction
                .run(inst, output, options.seed, i)
                .map_err(|e| match e {
                    Error::InvalidTour { .. } | Error::Usage(_) => e,
                    Error::RepeatedVertex { .. }
                    | Error::MissingVertex { .. }
                    | Error::VertexOutOfRange { .. } => Error::InvalidTour {
                        id: id.clone(),
                        procedure: options.construction.label(),
                        reason: e.to_string(),
                    },
                    other => Error::Dataset(format!("{id}: {other}")),
                })?;
            let base = checked(id, inst, base)?;
            let improved = searches
                .iter()
                .map(|ls| {
                    let r = ls.run(inst, &base.tour, options.seed, i)?;
                    checked(id, inst, r).map(|r| (r.tour.cost(), r.elapsed))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((base.tour.cost(), base.elapsed, improved))
        })
        .collect::<Result<Vec<_>>>()?;

    let reference_costs: Vec<f64> = references.iter().map(|r| r.cost).collect();
    let (check, kind) = reference_check(references);
    let base_costs: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let without = aggregate_gap_with(&base_costs, &reference_costs, check)?.gap;
    let count = runs.len() as u32;

    let rows = searches
        .iter()
        .enumerate()
        .map(|(s, ls)| {
            let costs: Vec<f64> = runs.iter().map(|r| r.2[s].0).collect();
            let total: Duration = runs.iter().map(|r| r.1 + r.2[s].1).sum();
            let gaps = aggregate_gap_with(&costs, &reference_costs, check)?;
            Ok(ReportRow {
                model: model.to_string(),
                construction: options.construction.label(),
                local_search: ls.tag().to_string(),
                gap: gaps.gap,
                classical_gap: gaps.classical_gap,
                gap_without_search: without,
                delta: gaps.gap - without,
                rod: None,
                costs,
                mean_time: total / count,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ExperimentReport {
        dataset_id: dataset.id().to_string(),
        references: kind.to_string(),
        instance_ids: ids,
        reference_costs,
        rows,
    })
}

/// A fraction as a percentage in hundredths, the unit tables are printed in.
fn hundredths(fraction: f64) -> i64 {
    (fraction * 1e4).round() as i64
}

fn render_hundredths(h: i64) -> String {
    let sign = if h < 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", h.abs() / 100, h.abs() % 100)
}

/// A fraction rendered as a percentage with two decimals, e.g. `0.9231` as
/// `92.31`.
pub fn percent(fraction: f64) -> String {
    render_hundredths(hundredths(fraction))
}

impl ExperimentReport {
    pub fn row(&self, label: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.label() == label)
    }

    /// Printed cells of a row. Δ is the difference of the two printed gaps,
    /// so the table is consistent with itself after rounding.
    fn cells(row: &ReportRow) -> [String; 8] {
        let delta = hundredths(row.gap) - hundredths(row.gap_without_search);
        [
            row.model.clone(),
            row.construction.clone(),
            row.local_search.clone(),
            percent(row.gap),
            percent(row.classical_gap),
            percent(row.gap_without_search),
            render_hundredths(delta),
            row.rod.map(percent).unwrap_or_default(),
        ]
    }

    pub const CSV_HEADER: [&'static str; 8] = [
        "model",
        "construction",
        "local_search",
        "gap_pct",
        "classical_gap_pct",
        "gap_without_search_pct",
        "delta_pct",
        "rod_pct",
    ];

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Report(format!("CSV encoding: {e}"));
        w.write_record(Self::CSV_HEADER).map_err(err)?;
        for row in &self.rows {
            w.write_record(Self::cells(row)).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Report(e.to_string()))
    }

    pub fn to_markdown(&self) -> String {
        let header = [
            "Model",
            "Construction",
            "Local search",
            "Gap (%)",
            "Classical gap (%)",
            "Gap w/o search (%)",
            "Δ (%)",
            "ROD (%)",
        ];
        let body: Vec<[String; 8]> = self.rows.iter().map(Self::cells).collect();
        let widths: Vec<usize> = (0..8)
            .map(|c| {
                body.iter()
                    .map(|r| r[c].chars().count())
                    .chain([header[c].chars().count(), 3])
                    .max()
                    .unwrap()
            })
            .collect();
        let pad = |s: &str, w: usize, right: bool| {
            let fill = " ".repeat(w - s.chars().count());
            if right {
                format!("{fill}{s}")
            } else {
                format!("{s}{fill}")
            }
        };
        let mut out = format!(
            "Dataset `{}`, {} instances, {} references.\n\n",
            self.dataset_id,
            self.instance_ids.len(),
            self.references
        );
        let line = |cells: Vec<String>| format!("| {} |\n", cells.join(" | "));
        out += &line((0..8).map(|c| pad(header[c], widths[c], c >= 3)).collect());
        out += &line(
            (0..8)
                .map(|c| {
                    let dashes = "-".repeat(widths[c] - 1);
                    if c >= 3 {
                        format!("{dashes}:")
                    } else {
                        format!("{dashes}-")
                    }
                })
                .collect(),
        );
        for r in &body {
            out += &line((0..8).map(|c| pad(&r[c], widths[c], c >= 3)).collect());
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| Error::Report(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Report(format!("malformed report: {e}")))
    }

    /// Mean time per instance for each row. Machine-relative.
    pub fn timing_csv(&self) -> String {
        let mut out = String::from("model,construction,local_search,mean_time_s\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:.6}",
                r.model,
                r.construction,
                r.local_search,
                r.mean_time.as_secs_f64()
            )
            .unwrap();
        }
        out
    }
}

/// Concatenates the rows of reports on the same dataset. Rows keep their
/// input order; a repeated (model, construction, local search) is an error.
pub fn merge_reports(reports: Vec<ExperimentReport>) -> Result<ExperimentReport> {
    let mut iter = reports.into_iter();
    let Some(mut merged) = iter.next() else {
        return Err(Error::Usage("report needs at least one input file".into()));
    };
    for r in iter {
        if r.dataset_id != merged.dataset_id || r.instance_ids != merged.instance_ids {
            return Err(Error::Report(format!(
                "cannot merge reports on different datasets: {} and {}",
                merged.dataset_id, r.dataset_id
            )));
        }
        if r.references != merged.references || r.reference_costs != merged.reference_costs {
            return Err(Error::Report(format!(
                "reports on {} use different references",
                r.dataset_id
            )));
        }
        merged.rows.extend(r.rows);
    }
    for (i, row) in merged.rows.iter().enumerate() {
        if merged.rows[..i].iter().any(|o| o.key() == row.key()) {
            return Err(Error::Report(format!("duplicate row {}", row.label())));
        }
    }
    Ok(merged)
}
