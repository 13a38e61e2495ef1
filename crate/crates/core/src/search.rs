//! Staged search for baselines and variable thresholds.
//!
//! Stages run in this order, each reading the ranked output of the ones
//! before it from `stage_<name>.csv` in the output directory:
//!
//! | stage          | candidates                                   |
//! |----------------|----------------------------------------------|
//! | `ss_sweep`     | single rates                                 |
//! | `sd_grid`      | static `(eta_c, eta_i)` pairs                |
//! | `one_variable` | schedules with exactly one variable rate     |
//! | `combine`      | top η_C-variable × top η_I-variable schedules |
//! | `directions`   | top combinations under all four directions   |
//! | `finals`       | best baselines plus the top schedules        |
//!
//! A plan file is the experiment config format with a `stage=` key and one
//! `candidate=` line per candidate:
//!
//! ```
//! use dvlr::search::{SearchPlan, Stage};
//!
//! let plan = SearchPlan::parse(
//!     "stage=sd_grid\nmodel=cifar_cnn\ncandidate=0.05,0.01\ncandidate=0.04,0.02\n",
//! )
//! .unwrap();
//! assert_eq!(plan.stage, Stage::SdGrid);
//! assert_eq!(plan.trials(), 3);
//! ```
//!
//! Stages that build on earlier ones (`combine`, `directions`, `finals`) may
//! also list candidates; those are then used in place of the upstream file,
//! as if already ranked in declaration order.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::{
    self, parse_key_values, run_trial, DataPair, ExperimentResult, ExperimentSpec, DEFAULT_FINAL_TRIALS,
    DEFAULT_SEARCH_TRIALS,
};
use crate::schedule::{
    format_schedule_spec, parse_schedule_spec, Direction, DualRateConfig, RateMode, RateSchedule,
    DEFAULT_DELTA_PERCENT,
};

pub const STAGE_HEADER: [&str; 2] = ["method", "test_avg"];
pub const DEFAULT_TOP_CORRECT: usize = 3;
pub const DEFAULT_TOP_INCORRECT: usize = 8;
pub const DEFAULT_TOP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    SsSweep,
    SdGrid,
    OneVariable,
    Combine,
    Directions,
    Finals,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::SsSweep,
        Stage::SdGrid,
        Stage::OneVariable,
        Stage::Combine,
        Stage::Directions,
        Stage::Finals,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::SsSweep => "ss_sweep",
            Stage::SdGrid => "sd_grid",
            Stage::OneVariable => "one_variable",
            Stage::Combine => "combine",
            Stage::Directions => "directions",
            Stage::Finals => "finals",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Stage::Finals => DEFAULT_FINAL_TRIALS,
            _ => DEFAULT_SEARCH_TRIALS,
        }
    }

    pub fn csv_name(self) -> String {
        format!("stage_{}.csv", self.name())
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// One stage to run.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchPlan {
    pub stage: Stage,
    /// Model, data and training settings shared by every candidate. Its
    /// schedule is ignored.
    pub base: ExperimentSpec,
    /// Explicit candidates in declaration order.
    pub candidates: Vec<DualRateConfig>,
    /// Overrides the stage's default trial count.
    pub trials: Option<usize>,
    /// η_C-variable schedules entering `combine`.
    pub top_correct: usize,
    /// η_I-variable schedules entering `combine`.
    pub top_incorrect: usize,
    /// Combinations entering `directions` and schedules entering `finals`.
    pub top: usize,
}

const PLAN_KEYS: [&str; 6] = ["stage", "candidate", "top_c", "top_i", "top", "schedule"];

impl SearchPlan {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_for_stage(text, None)
    }

    /// Like [`SearchPlan::parse`], with the stage supplied from outside. The
    /// plan's own `stage=` line, if any, must agree.
    pub fn parse_for_stage(text: &str, stage: Option<Stage>) -> Result<Self> {
        let entries = parse_key_values(text)?;
        let declared = match entries.iter().rev().find(|e| e.key == "stage") {
            Some(e) => Some(e.value.parse::<Stage>()?),
            None => None,
        };
        let stage = match (declared, stage) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("plan is for stage {a}, not {b}")));
            }
            (Some(s), _) | (None, Some(s)) => s,
            (None, None) => return Err(Error::Config("plan is missing `stage`".into())),
        };
        let trials_given = entries.iter().any(|e| e.key == "trials");
        let base = ExperimentSpec::from_entries(&entries, &PLAN_KEYS)?;
        let mut plan = SearchPlan {
            stage,
            trials: trials_given.then_some(base.trials),
            base,
            candidates: Vec::new(),
            top_correct: DEFAULT_TOP_CORRECT,
            top_incorrect: DEFAULT_TOP_INCORRECT,
            top: DEFAULT_TOP,
        };
        for e in &entries {
            let count = || {
                e.value
                    .parse::<usize>()
                    .ok()
                    .filter(|&k| k > 0)
                    .ok_or_else(|| Error::Config(format!("line {}: {} must be a positive integer", e.line, e.key)))
            };
            match e.key.as_str() {
                "candidate" => plan.candidates.push(
                    parse_candidate(stage, &e.value)
                        .map_err(|err| Error::Config(format!("line {}: candidate: {err}", e.line)))?,
                ),
                "top_c" => plan.top_correct = count()?,
                "top_i" => plan.top_incorrect = count()?,
                "top" => plan.top = count()?,
                _ => {}
            }
        }
        if plan.candidates.is_empty() && matches!(stage, Stage::SsSweep | Stage::SdGrid | Stage::OneVariable) {
            return Err(Error::Config(format!("stage {stage} needs at least one candidate")));
        }
        Ok(plan)
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(self.stage.default_trials())
    }

    /// The schedules this stage will run, in declaration order. Upstream
    /// stages are read from `out`.
    pub fn resolve_candidates(&self, out: &Path) -> Result<Vec<DualRateConfig>> {
        let resolved = match self.stage {
            Stage::SsSweep | Stage::SdGrid | Stage::OneVariable => self.candidates.clone(),
            Stage::Combine => {
                let pool = self.pool(out, &[Stage::OneVariable])?;
                combine(&pool, self.top_correct, self.top_incorrect)
            }
            Stage::Directions => {
                let pool = self.pool(out, &[Stage::Combine])?;
                all_directions(&pool[..pool.len().min(self.top)])
            }
            Stage::Finals if !self.candidates.is_empty() => self.candidates.clone(),
            Stage::Finals => {
                let mut finals = Vec::new();
                for baseline in [Stage::SsSweep, Stage::SdGrid] {
                    if let Some(best) = read_stage_if_present(out, baseline)?.and_then(|r| r.ranked().first().cloned()) {
                        finals.push(best.config);
                    }
                }
                let pool = self.pool(out, &[Stage::Directions, Stage::Combine, Stage::OneVariable])?;
                finals.extend(pool.into_iter().take(self.top));
                dedup(finals)
            }
        };
        if resolved.is_empty() {
            return Err(Error::Config(format!("stage {} has no candidates to run", self.stage)));
        }
        Ok(resolved)
    }

    /// Explicit candidates, else the ranked output of the first upstream
    /// stage found on disk.
    fn pool(&self, out: &Path, upstream: &[Stage]) -> Result<Vec<DualRateConfig>> {
        if !self.candidates.is_empty() {
            return Ok(self.candidates.clone());
        }
        for &stage in upstream {
            if let Some(result) = read_stage_if_present(out, stage)? {
                return Ok(result.ranked().into_iter().map(|e| e.config).collect());
            }
        }
        let names: Vec<String> = upstream.iter().map(|s| s.csv_name()).collect();
        Err(Error::Config(format!(
            "stage {} needs upstream results ({}) in {}",
            self.stage,
            names.join(" or "),
            out.display()
        )))
    }

    /// Spec for the `index`-th candidate.
    pub fn candidate_spec(&self, index: usize, schedule: DualRateConfig) -> ExperimentSpec {
        let mut spec = self.base.clone();
        spec.name = format!("{}_{}", self.stage, index);
        spec.schedule = schedule;
        spec.trials = self.trials();
        spec
    }
}

fn parse_candidate(stage: Stage, text: &str) -> Result<DualRateConfig> {
    let config = match stage {
        Stage::SsSweep => match text.parse::<f64>() {
            Ok(eta) => DualRateConfig::single(eta),
            Err(_) => parse_schedule_spec(text)?,
        },
        Stage::SdGrid => match text.split_once(',').map(|(c, i)| (c.trim().parse::<f64>(), i.trim().parse::<f64>())) {
            Some((Ok(c), Ok(i))) => DualRateConfig::new(RateSchedule::fixed(c), RateSchedule::fixed(i)),
            _ => parse_schedule_spec(text)?,
        },
        _ => parse_schedule_spec(text)?,
    };
    config.validate()?;
    let kind_ok = match stage {
        Stage::SsSweep => config.is_single_rate(),
        Stage::SdGrid => config.is_static(),
        Stage::OneVariable => config.correct.is_static() != config.incorrect.is_static(),
        Stage::Combine | Stage::Directions | Stage::Finals => true,
    };
    if !kind_ok {
        return Err(Error::Config(format!(
            "`{text}` is not a valid {stage} candidate"
        )));
    }
    if stage != Stage::Finals {
        for s in [config.correct, config.incorrect] {
            if let RateMode::Variable(vt) = s.mode {
                if vt.delta_percent != DEFAULT_DELTA_PERCENT {
                    return Err(Error::Config(format!(
                        "search stages use a {DEFAULT_DELTA_PERCENT}% rate change, `{text}` has {}%",
                        vt.delta_percent
                    )));
                }
            }
        }
    }
    Ok(config)
}

/// Cross product of the best η_C-variable and best η_I-variable schedules,
/// η_C-major.
pub fn combine(ranked: &[DualRateConfig], top_correct: usize, top_incorrect: usize) -> Vec<DualRateConfig> {
    let correct: Vec<RateSchedule> = ranked
        .iter()
        .filter(|c| !c.correct.is_static())
        .map(|c| c.correct)
        .take(top_correct)
        .collect();
    let incorrect: Vec<RateSchedule> = ranked
        .iter()
        .filter(|c| !c.incorrect.is_static())
        .map(|c| c.incorrect)
        .take(top_incorrect)
        .collect();
    correct
        .iter()
        .flat_map(|&c| incorrect.iter().map(move |&i| DualRateConfig::new(c, i)))
        .collect()
}

/// Each config under inc/inc, inc/dec, dec/inc and dec/dec. Static rates
/// have no direction, so duplicates are dropped.
pub fn all_directions(configs: &[DualRateConfig]) -> Vec<DualRateConfig> {
    let with = |s: RateSchedule, d: Direction| match s.mode {
        RateMode::Variable(mut vt) => {
            vt.direction = d;
            RateSchedule {
                mode: RateMode::Variable(vt),
                ..s
            }
        }
        RateMode::Static => s,
    };
    let mut out = Vec::new();
    for cfg in configs {
        for dc in [Direction::Increase, Direction::Decrease] {
            for di in [Direction::Increase, Direction::Decrease] {
                out.push(DualRateConfig {
                    correct: with(cfg.correct, dc),
                    incorrect: with(cfg.incorrect, di),
                    ..*cfg
                });
            }
        }
    }
    dedup(out)
}

fn dedup(configs: Vec<DualRateConfig>) -> Vec<DualRateConfig> {
    let mut seen = Vec::new();
    configs
        .into_iter()
        .filter(|c| {
            let key = format_schedule_spec(c);
            let fresh = !seen.contains(&key);
            seen.push(key);
            fresh
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageEntry {
    pub method: String,
    pub config: DualRateConfig,
    pub test_avg: f64,
}

/// Mean test accuracy per candidate, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub stage: Stage,
    pub entries: Vec<StageEntry>,
}

impl SearchResult {
    /// Descending by mean test accuracy; ties keep declaration order.
    pub fn ranked(&self) -> Vec<StageEntry> {
        let mut ranked = self.entries.clone();
        ranked.sort_by(|a, b| b.test_avg.total_cmp(&a.test_avg));
        ranked
    }

    pub fn top(&self, k: usize) -> Vec<StageEntry> {
        self.ranked().into_iter().take(k).collect()
    }
}

/// Runs every candidate for the plan's trial count, at most `jobs` trials at
/// a time. Returns the stage result and the per-candidate experiments.
pub fn run_stage(
    plan: &SearchPlan,
    data: &DataPair,
    out: &Path,
    jobs: usize,
) -> Result<(SearchResult, Vec<ExperimentResult>)> {
    let configs = plan.resolve_candidates(out)?;
    let specs: Vec<ExperimentSpec> = configs
        .iter()
        .enumerate()
        .map(|(i, &c)| plan.candidate_spec(i, c))
        .collect();
    for spec in &specs {
        spec.validate()?;
    }
    let jobs_list: Vec<(usize, usize)> = specs
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.trials).map(move |t| (i, t)))
        .collect();
    let trials = harness::with_pool(jobs, || {
        jobs_list
            .par_iter()
            .map(|&(i, t)| run_trial(&specs[i], data, t))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut trials = trials.into_iter();
    let experiments: Vec<ExperimentResult> = specs
        .iter()
        .map(|s| ExperimentResult {
            name: s.name.clone(),
            method: s.method(),
            trials: trials.by_ref().take(s.trials).collect(),
        })
        .collect();
    let result = SearchResult {
        stage: plan.stage,
        entries: experiments
            .iter()
            .zip(&configs)
            .map(|(e, &config)| StageEntry {
                method: e.method.clone(),
                config,
                test_avg: e.mean_test(),
            })
            .collect(),
    };
    Ok((result, experiments))
}

/// Writes `stage_<name>.csv` into `out` for each result.
pub fn emit_search_report(results: &[SearchResult], out: &Path) -> Result<()> {
    if results.is_empty() {
        return Err(Error::Config("no completed stage to report".into()));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for r in results {
        let path = out.join(r.stage.csv_name());
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)?;
        w.write_record(STAGE_HEADER)?;
        for e in &r.entries {
            w.write_record([e.method.clone(), e.test_avg.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Reads a stage CSV back, keeping row order.
pub fn read_stage_csv(path: &Path, stage: Stage) -> Result<SearchResult> {
    let mut reader = csv::Reader::from_path(path)?;
    if reader.headers()?.iter().ne(STAGE_HEADER) {
        return Err(Error::Data(format!(
            "{}: expected header `{}`",
            path.display(),
            STAGE_HEADER.join(",")
        )));
    }
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record?;
        let config = parse_schedule_spec(&record[0])
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let test_avg = record[1]
            .parse()
            .map_err(|_| Error::Data(format!("{}: `{}` is not a number", path.display(), &record[1])))?;
        entries.push(StageEntry {
            method: record[0].to_string(),
            config,
            test_avg,
        });
    }
    Ok(SearchResult { stage, entries })
}

fn read_stage_if_present(out: &Path, stage: Stage) -> Result<Option<SearchResult>> {
    let path = out.join(stage.csv_name());
    if path.exists() {
        read_stage_csv(&path, stage).map(Some)
    } else {
        Ok(None)
    }
}
