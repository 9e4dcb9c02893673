//! JSON run configuration.
//!
//! All state and block indices are 0-based. Relative paths resolve against
//! the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use ajc_core::{
    presets, rate_sequence_from_protocol, sqra_generator, ActivityOptions, GridPotential, RateMatrixSequence,
    SpaceTimeIndexer, SpaceTimeSet, SpatialVector, TailPolicy, TimeGrid,
};
use serde::Deserialize;

use crate::error::{CliError, Result};
use crate::mtx::{self, JumpMatrixPaths};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    /// Load a previously assembled jump matrix instead of assembling.
    #[serde(default)]
    pub jump_matrix: Option<JumpMatrixFiles>,
    #[serde(default)]
    pub activity: ActivityConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub propagate: PropagateConfig,
    #[serde(default)]
    pub koopman: KoopmanConfig,
    #[serde(default)]
    pub committor: Option<CommittorConfig>,
    #[serde(default)]
    pub coherence: Option<CoherenceConfig>,
    #[serde(default)]
    pub convergence: ConvergenceConfig,

    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    TwoState,
    TripleWell,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    Preset(Preset),
    Sqra(SqraConfig),
    Files(FilesConfig),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqraConfig {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    #[serde(default)]
    pub origin: (f64, f64),
    pub potential: PotentialConfig,
    /// Piecewise-constant β; each cell takes the value at its midpoint.
    pub beta: Vec<BetaSegment>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PotentialConfig {
    /// Named potential evaluated at grid nodes: `"triple-well"`.
    Named(String),
    /// Row-major node values, state = row·nx + col.
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSegment {
    /// Segment applies while `t < until`; omit on the last segment.
    #[serde(default)]
    pub until: Option<f64>,
    pub beta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilesConfig {
    /// One MatrixMarket generator per time cell.
    pub matrices: Vec<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GridConfig {
    Uniform { start: f64, end: f64, cells: usize },
    Edges { edges: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpMatrixFiles {
    pub matrix: PathBuf,
    pub header: PathBuf,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub n_max: Option<usize>,
}

fn default_tol() -> f64 {
    ActivityOptions::default().tol
}

impl Default for ActivityConfig {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            n_max: None,
        }
    }
}

impl ActivityConfig {
    pub fn options(&self) -> Result<ActivityOptions> {
        if !(self.tol > 0.0) {
            return Err(CliError::Config("activity.tol must be positive".into()));
        }
        Ok(ActivityOptions {
            tol: self.tol,
            n_max: self.n_max,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    #[serde(default)]
    pub start_state: usize,
    /// Defaults to the grid start.
    #[serde(default)]
    pub start_time: Option<f64>,
    /// Defaults to the grid end.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
}

fn default_trajectories() -> usize {
    1000
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            start_state: 0,
            start_time: None,
            horizon: None,
            trajectories: default_trajectories(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityConfig {
    Uniform,
    Delta(usize),
    Values(Vec<f64>),
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig::Delta(0)
    }
}

impl DensityConfig {
    pub fn build(&self, n: usize) -> Result<SpatialVector> {
        match self {
            DensityConfig::Uniform => Ok(SpatialVector::constant(n, 1.0 / n as f64)),
            DensityConfig::Delta(s) if *s < n => Ok(SpatialVector::delta(n, *s)),
            DensityConfig::Delta(s) => Err(CliError::Config(format!("initial state {s} out of range for {n} states"))),
            DensityConfig::Values(v) => vector_of_len(v, n, "initial density").map(SpatialVector),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateConfig {
    #[serde(default)]
    pub initial: DensityConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObservableConfig {
    #[default]
    Ones,
    Indicator(Vec<usize>),
    Values(Vec<f64>),
}

impl ObservableConfig {
    pub fn build(&self, n: usize) -> Result<SpatialVector> {
        match self {
            ObservableConfig::Ones => Ok(SpatialVector::constant(n, 1.0)),
            ObservableConfig::Indicator(states) => {
                let mut g = vec![0.0; n];
                for &s in states {
                    *g.get_mut(s)
                        .ok_or_else(|| CliError::Config(format!("observable state {s} out of range for {n} states")))? = 1.0;
                }
                Ok(SpatialVector(g))
            }
            ObservableConfig::Values(v) => vector_of_len(v, n, "observable").map(SpatialVector),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KoopmanConfig {
    #[serde(default)]
    pub observable: ObservableConfig,
    /// Target block `l`; defaults to the last block.
    #[serde(default)]
    pub block: Option<usize>,
    /// Also solve for these columns `δ_y` of the transition kernel.
    #[serde(default)]
    pub columns: Vec<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetConfig {
    #[serde(default)]
    pub cells: Vec<(usize, usize)>,
    #[serde(default)]
    pub rects: Vec<RectConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectConfig {
    pub states: Vec<usize>,
    /// Inclusive block range `[lo, hi]`.
    pub blocks: (usize, usize),
}

impl SetConfig {
    pub fn build(&self, indexer: SpaceTimeIndexer, name: &str) -> Result<SpaceTimeSet> {
        let wrap = |e: ajc_core::Error| CliError::Config(format!("set {name}: {e}"));
        let mut set = SpaceTimeSet::from_cells(indexer, self.cells.iter().copied()).map_err(wrap)?;
        for r in &self.rects {
            set.insert_rect(&r.states, r.blocks).map_err(wrap)?;
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum TailConfig {
    #[default]
    AbsorbToB,
    AbsorbToA,
    Value(f64),
}

impl TailConfig {
    pub fn policy(self) -> TailPolicy {
        match self {
            TailConfig::AbsorbToB => TailPolicy::AbsorbToB,
            TailConfig::AbsorbToA => TailPolicy::AbsorbToA,
            TailConfig::Value(v) => TailPolicy::Value(v),
        }
    }

    /// Parses the `--tail` flag: `absorb-to-b`, `absorb-to-a`, or a number in `[0, 1]`.
    pub fn parse_flag(s: &str) -> std::result::Result<Self, String> {
        match s {
            "absorb-to-b" => Ok(TailConfig::AbsorbToB),
            "absorb-to-a" => Ok(TailConfig::AbsorbToA),
            other => match other.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => Ok(TailConfig::Value(v)),
                _ => Err(format!("expected absorb-to-b, absorb-to-a or a value in [0, 1], got `{other}`")),
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommittorConfig {
    pub a: SetConfig,
    #[serde(default)]
    pub b: SetConfig,
    #[serde(default)]
    pub tail: TailConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceConfig {
    pub set: SetConfig,
    #[serde(default)]
    pub count_survival: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Strictly decreasing step sizes; defaults to 1, 1/2, ..., 1/32.
    #[serde(default)]
    pub dt: Vec<f64>,
}

fn vector_of_len(v: &[f64], n: usize, what: &str) -> Result<Vec<f64>> {
    if v.len() != n {
        return Err(CliError::Config(format!("{what} has {} values, expected {n}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Config(format!("{what} has non-finite values")));
    }
    Ok(v.to_vec())
}

impl RunConfig {
    /// Reads and parses a config file. An empty file is a usage error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        if text.trim().is_empty() {
            return Err(CliError::Usage(format!("config file {} is empty", path.display())));
        }
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_preset(preset: Preset) -> Self {
        RunConfig {
            problem: ProblemConfig::Preset(preset),
            grid: None,
            jump_matrix: None,
            activity: ActivityConfig::default(),
            seed: None,
            sample: SampleConfig::default(),
            propagate: PropagateConfig::default(),
            koopman: KoopmanConfig::default(),
            committor: None,
            coherence: None,
            convergence: ConvergenceConfig::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn grid_override(&self) -> Result<Option<TimeGrid>> {
        let grid = match &self.grid {
            None => return Ok(None),
            Some(GridConfig::Uniform { start, end, cells }) => TimeGrid::uniform(*start, *end, *cells),
            Some(GridConfig::Edges { edges }) => TimeGrid::new(edges.clone()),
        };
        grid.map(Some).map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    /// Protocol on the configured grid, or the preset's own grid.
    pub fn rate_sequence(&self) -> Result<RateMatrixSequence> {
        let grid = self.grid_override()?;
        match &self.problem {
            ProblemConfig::Preset(p) => match grid {
                None => Ok(match p {
                    Preset::TwoState => presets::two_state(),
                    Preset::TripleWell => presets::triple_well(),
                }),
                Some(g) => self.rate_sequence_on(g),
            },
            ProblemConfig::Sqra(_) | ProblemConfig::Files(_) => {
                let g = grid.ok_or_else(|| CliError::Config("`grid` is required for sqra and files problems".into()))?;
                self.rate_sequence_on(g)
            }
        }
    }

    /// Protocol re-discretized on `grid`.
    pub fn rate_sequence_on(&self, grid: TimeGrid) -> Result<RateMatrixSequence> {
        let built = match &self.problem {
            ProblemConfig::Preset(Preset::TwoState) => presets::two_state_on(grid),
            ProblemConfig::Preset(Preset::TripleWell) => presets::triple_well_on(grid),
            ProblemConfig::Sqra(s) => return self.sqra_sequence(s, grid),
            ProblemConfig::Files(f) => return self.file_sequence(f, grid),
        };
        built.map_err(|e| CliError::Config(format!("problem: {e}")))
    }

    fn sqra_sequence(&self, s: &SqraConfig, grid: TimeGrid) -> Result<RateMatrixSequence> {
        let bad = |e: ajc_core::Error| CliError::Config(format!("sqra: {e}"));
        let potential = match &s.potential {
            PotentialConfig::Named(name) if name == "triple-well" => {
                GridPotential::from_fn(s.nx, s.ny, s.h, s.origin, presets::triple_well_potential).map_err(bad)?
            }
            PotentialConfig::Named(name) => {
                return Err(CliError::Config(format!("sqra: unknown potential `{name}`")));
            }
            PotentialConfig::Table { values } => GridPotential::new(s.nx, s.ny, s.h, values.clone()).map_err(bad)?,
        };
        validate_schedule(&s.beta)?;
        rate_sequence_from_protocol(grid, |_, lo, hi| sqra_generator(&potential, beta_at(&s.beta, 0.5 * (lo + hi))))
            .map_err(bad)
    }

    fn file_sequence(&self, f: &FilesConfig, grid: TimeGrid) -> Result<RateMatrixSequence> {
        if f.matrices.len() != grid.len() {
            return Err(CliError::Config(format!(
                "files: {} matrices for {} grid cells",
                f.matrices.len(),
                grid.len()
            )));
        }
        let qs = f
            .matrices
            .iter()
            .map(|p| mtx::read_rate_matrix(&self.resolve(p)))
            .collect::<Result<Vec<_>>>()?;
        RateMatrixSequence::new(grid, qs).map_err(|e| CliError::Config(format!("files: {e}")))
    }

    /// Times at which the protocol switches; a convergence grid must contain them.
    pub fn switch_times(&self) -> Result<Vec<f64>> {
        match &self.problem {
            ProblemConfig::Preset(Preset::TwoState) => Ok(vec![presets::TWO_STATE_SWITCH]),
            ProblemConfig::Preset(Preset::TripleWell) => Ok(vec![presets::TRIPLE_WELL_SWITCH]),
            ProblemConfig::Sqra(s) => Ok(s.beta.iter().filter_map(|b| b.until).collect()),
            ProblemConfig::Files(_) => Err(CliError::Config(
                "convergence needs a re-discretizable protocol (preset or sqra), not fixed files".into(),
            )),
        }
    }

    pub fn jump_matrix_paths(&self) -> Option<JumpMatrixPaths> {
        self.jump_matrix.as_ref().map(|f| JumpMatrixPaths {
            matrix: self.resolve(&f.matrix),
            header: self.resolve(&f.header),
        })
    }
}

fn validate_schedule(schedule: &[BetaSegment]) -> Result<()> {
    let err = |m: &str| Err(CliError::Config(format!("sqra.beta: {m}")));
    if schedule.is_empty() {
        return err("need at least one segment");
    }
    if schedule.iter().any(|b| !(b.beta > 0.0) || !b.beta.is_finite()) {
        return err("β must be positive and finite");
    }
    if schedule[..schedule.len() - 1].iter().any(|b| b.until.is_none()) {
        return err("every segment but the last needs `until`");
    }
    let untils: Vec<f64> = schedule.iter().filter_map(|b| b.until).collect();
    if untils.windows(2).any(|w| !(w[0] < w[1])) {
        return err("`until` values must increase");
    }
    Ok(())
}

fn beta_at(schedule: &[BetaSegment], t: f64) -> f64 {
    schedule
        .iter()
        .find(|b| b.until.is_none_or(|u| t < u))
        .unwrap_or_else(|| schedule.last().expect("validated non-empty"))
        .beta
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> RunConfig {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn sqra_config_reproduces_the_preset() {
        let cfg = parse(
            r#"{
                "problem": {"sqra": {"nx": 9, "ny": 7, "h": 0.5, "origin": [-2, -1],
                    "potential": "triple-well",
                    "beta": [{"until": 1.0, "beta": 1.0}, {"beta": 10.0}]}},
                "grid": {"start": 0, "end": 2, "cells": 6}
            }"#,
        );
        assert_eq!(cfg.rate_sequence().unwrap(), presets::triple_well());
        assert_eq!(cfg.switch_times().unwrap(), vec![1.0]);
    }

    #[test]
    fn sets_and_tails_parse() {
        let cfg = parse(
            r#"{
                "problem": {"preset": "two-state"},
                "committor": {"a": {"rects": [{"states": [1], "blocks": [0, 7]}]},
                              "b": {"cells": [[0, 7]]},
                              "tail": {"value": 0.25}}
            }"#,
        );
        let c = cfg.committor.unwrap();
        let idx = SpaceTimeIndexer::new(2, 8);
        assert_eq!(c.a.build(idx, "A").unwrap().len(), 8);
        assert!(c.b.build(idx, "B").unwrap().contains(0, 7));
        assert_eq!(c.tail, TailConfig::Value(0.25));
        assert!(SetConfig { cells: vec![(2, 0)], rects: vec![] }.build(idx, "A").is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"problem": {"preset": "two-state"}, "grdi": {}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"problem": {"preset": "three-state"}}"#).is_err());
    }

    #[test]
    fn tail_flag() {
        assert_eq!(TailConfig::parse_flag("absorb-to-a"), Ok(TailConfig::AbsorbToA));
        assert_eq!(TailConfig::parse_flag("0.5"), Ok(TailConfig::Value(0.5)));
        assert!(TailConfig::parse_flag("2").is_err());
    }

    #[test]
    fn beta_schedule_lookup() {
        let s = [
            BetaSegment { until: Some(1.0), beta: 1.0 },
            BetaSegment { until: Some(2.0), beta: 3.0 },
            BetaSegment { until: None, beta: 5.0 },
        ];
        assert_eq!(beta_at(&s, 0.5), 1.0);
        assert_eq!(beta_at(&s, 1.0), 3.0);
        assert_eq!(beta_at(&s, 7.0), 5.0);
        assert!(validate_schedule(&s).is_ok());
        assert!(validate_schedule(&s[..0]).is_err());
    }
}
