//! One function per CLI subcommand. Each writes its CSV/MatrixMarket outputs
//! into the output directory and returns a short text report for stdout.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ajc_core::oracle::{convergence_study_with, exact_propagator, norm_error, ConvergenceTable, DenseMatrix};
use ajc_core::operators::reconstruct_propagator_all;
use ajc_core::{
    coherence_defect, committor::forward_coherence, committor_solve, koopman_matrix_column, koopman_solve,
    reconstruct_propagator, sample_trajectory, JumpMatrix, RateMatrixSequence, SpaceTimePoint, SpaceTimeVector,
    SpatialVector, SurvivalCounting,
};
use log::{debug, info};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, TailConfig};
use crate::error::{CliError, Result};
use crate::mtx::{self, JumpMatrixPaths};
use crate::parallel;

/// Default step sizes for `convergence`.
pub const DEFAULT_DT: [f64; 6] = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125];

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides the config seed.
    pub seed: Option<u64>,
    pub threads: usize,
    /// Overrides the committor tail policy.
    pub tail: Option<TailConfig>,
    /// Forces survival counting in `coherence`.
    pub count_survival: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("."),
            seed: None,
            threads: 1,
            tail: None,
            count_survival: false,
        }
    }
}

struct Csv {
    path: PathBuf,
    w: BufWriter<fs::File>,
}

impl Csv {
    fn create(dir: &Path, name: &str, header: &str) -> Result<Self> {
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(CliError::io(&path))?;
        let mut csv = Csv {
            w: BufWriter::new(file),
            path,
        };
        csv.line(format_args!("{header}"))?;
        Ok(csv)
    }

    fn line(&mut self, args: std::fmt::Arguments<'_>) -> Result<()> {
        writeln!(self.w, "{args}").map_err(CliError::io(&self.path))
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.w.flush().map_err(CliError::io(&self.path))?;
        Ok(self.path)
    }
}

fn prepare_out(opts: &RunOptions) -> Result<&Path> {
    fs::create_dir_all(&opts.out_dir).map_err(CliError::io(&opts.out_dir))?;
    Ok(&opts.out_dir)
}

fn jump_matrix(cfg: &RunConfig, threads: usize) -> Result<(JumpMatrix, Option<RateMatrixSequence>)> {
    if let Some(paths) = cfg.jump_matrix_paths() {
        info!("loading jump matrix from {}", paths.matrix.display());
        return Ok((mtx::read_jump_matrix(&paths)?, None));
    }
    let seq = cfg.rate_sequence()?;
    let j = parallel::assemble(&seq, threads);
    debug!("assembled {} x {} jump matrix, nnz {}", j.indexer().len(), j.indexer().len(), j.nnz());
    Ok((j, Some(seq)))
}

fn write_space_time(dir: &Path, name: &str, column: &str, v: &SpaceTimeVector) -> Result<PathBuf> {
    let mut csv = Csv::create(dir, name, &format!("state,block,{column}"))?;
    let idx = v.indexer();
    for k in 0..idx.num_blocks() {
        for i in 0..idx.num_states() {
            csv.line(format_args!("{i},{k},{}", v.get(i, k)))?;
        }
    }
    csv.finish()
}

pub fn assemble(cfg: &RunConfig, opts: &RunOptions) -> Result<String> {
    let dir = prepare_out(opts)?;
    let (j, _) = jump_matrix(cfg, opts.threads)?;
    let idx = j.indexer();
    mtx::write_jump_matrix(&JumpMatrixPaths::in_dir(dir, "jump_matrix"), &j)?;

    let m = idx.num_blocks();
    let mut mass = vec![0.0; m * m];
    for (r, c, v) in j.matrix().triplets() {
        mass[idx.cell(r).1 * m + idx.cell(c).1] += v;
    }
    let mut csv = Csv::create(dir, "block_mass.csv", "from_block,to_block,mass")?;
    for k in 0..m {
        for l in k..m {
            csv.line(format_args!("{k},{l},{}", mass[k * m + l]))?;
        }
    }
    csv.finish()?;

    let dim = idx.len();
    let ratio = j.nnz() as f64 / (dim as f64 * dim as f64);
    Ok(format!(
        "states {}\nblocks {}\ndimension {dim}\nnnz {}\nsparsity {:.4}%\n",
        idx.num_states(),
        m,
        j.nnz(),
        100.0 * ratio
    ))
}

pub fn sample(cfg: &RunConfig, opts: &RunOptions) -> Result<String> {
    let dir = prepare_out(opts)?;
    let seq = cfg.rate_sequence()?;
    let s = &cfg.sample;
    let n = seq.num_states();
    if s.start_state >= n {
        return Err(CliError::Config(format!("sample.start_state {} out of range for {n} states", s.start_state)));
    }
    let grid = seq.grid();
    let start = SpaceTimePoint::new(s.start_state, s.start_time.unwrap_or(grid.start()));
    let horizon = s.horizon.unwrap_or(grid.end());
    let seed = opts.seed.or(cfg.seed).unwrap_or(0);

    // One ChaCha stream per trajectory, so output is independent of --threads.
    let ids: Vec<u64> = (0..s.trajectories as u64).collect();
    let trajectories = parallel::map(&ids, opts.threads, |&t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t);
        sample_trajectory(&seq, start, horizon, &mut rng)
    })
    .into_iter()
    .collect::<std::result::Result<Vec<_>, _>>()
    .map_err(CliError::solver("sample"))?;

    let mut csv = Csv::create(dir, "trajectories.csv", "trajectory,state,jump_time")?;
    let mut hist = vec![0usize; n * grid.len()];
    let mut jumps = 0usize;
    for (t, traj) in trajectories.iter().enumerate() {
        for (p_idx, p) in traj.points.iter().enumerate() {
            csv.line(format_args!("{t},{},{}", p.state, p.time))?;
            if p_idx > 0 {
                let k = grid.cell_of(p.time).expect("jump inside grid");
                hist[k * n + p.state] += 1;
                jumps += 1;
            }
        }
    }
    csv.finish()?;
    let mut csv = Csv::create(dir, "histogram.csv", "state,block,count")?;
    for k in 0..grid.len() {
        for i in 0..n {
            csv.line(format_args!("{i},{k},{}", hist[k * n + i]))?;
        }
    }
    csv.finish()?;
    Ok(format!(
        "trajectories {}\nseed {seed}\nmean_jumps {}\n",
        s.trajectories,
        jumps as f64 / s.trajectories.max(1) as f64
    ))
}

pub fn propagate(cfg: &RunConfig, opts: &RunOptions) -> Result<String> {
    let dir = prepare_out(opts)?;
    let (j, _) = jump_matrix(cfg, opts.threads)?;
    let f = cfg.propagate.initial.build(j.num_states())?;
    let aopts = cfg.activity.options()?;
    let (activity, densities) = reconstruct_propagator_all(&j, &f, &aopts).map_err(CliError::solver("propagate"))?;
    write_space_time(dir, "activity.csv", "activity", &activity.activity)?;
    let mut csv = Csv::create(dir, "density.csv", "block,time,state,density")?;
    let mut report = format!("series_terms {}\nresidual {:e}\n", activity.terms, activity.residual);
    for (l, d) in densities.iter().enumerate() {
        let t = j.grid().upper(l);
        for (i, v) in d.values().iter().enumerate() {
            csv.line(format_args!("{l},{t},{i},{v}"))?;
        }
        writeln!(report, "block {l} t={t} mass={}", d.sum()).unwrap();
    }
    csv.finish()?;
    Ok(report)
}

pub fn koopman(cfg: &RunConfig, opts: &RunOptions) -> Result<String> {
    let dir = prepare_out(opts)?;
    let (j, _) = jump_matrix(cfg, opts.threads)?;
    let n = j.num_states();
    let l = cfg.koopman.block.unwrap_or(j.num_blocks() - 1);
    if l >= j.num_blocks() {
        return Err(CliError::Config(format!("koopman.block {l} out of range for {} blocks", j.num_blocks())));
    }
    let g = cfg.koopman.observable.build(n)?;
    let k = koopman_solve(&j, &g, l).map_err(CliError::solver("koopman"))?;
    write_space_time(dir, "koopman.csv", "value", &k)?;

    let columns = &cfg.koopman.columns;
    if let Some(&y) = columns.iter().find(|&&y| y >= n) {
        return Err(CliError::Config(format!("koopman column {y} out of range for {n} states")));
    }
    if !columns.is_empty() {
        let solved = parallel::map(columns, opts.threads, |&y| koopman_matrix_column(&j, y, l))
            .into_iter()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(CliError::solver("koopman"))?;
        let mut csv = Csv::create(dir, "koopman_columns.csv", "column,state,block,value")?;
        for (y, col) in columns.iter().zip(&solved) {
            for k in 0..j.num_blocks() {
                for i in 0..n {
                    csv.line(format_args!("{y},{i},{k},{}", col.get(i, k)))?;
                }
            }
        }
        csv.finish()?;
    }
    let first = SpatialVector(k.block(0).to_vec());
    Ok(format!(
        "target_block {l}\nblock0_min {}\nblock0_max {}\n",
        first.values().iter().copied().fold(f64::INFINITY, f64::min),
        first.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    ))
}

pub fn committor(cfg: &RunConfig, opts: &RunOptions) -> Result<String> {
    let dir = prepare_out(opts)?;
    let c = cfg
        .committor
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `committor` section".into()))?;
    let (j, _) = jump_matrix(cfg, opts.threads)?;
    let idx = j.indexer();
    let a = c.a.build(idx, "a")?;
    let b = c.b.build(idx, "b")?;
    let tail = opts.tail.unwrap_or(c.tail).policy();
    let v = committor_solve(&j, &a, &b, tail).map_err(CliError::solver("committor"))?;
    let mut csv = Csv::create(dir, "committor.csv", "state,block,value,in_a,in_b")?;
    for k in 0..idx.num_blocks() {
        for i in 0..idx.num_states() {
            csv.line(format_args!(
                "{i},{k},{},{},{}",
                v.get(i, k),
                u8::from(a.contains(i, k)),
                u8::from(b.contains(i, k))
            ))?;
        }
    }
    csv.finish()?;
    Ok(format!("tail {:?}\ncells_a {}\ncells_b {}\n", tail, a.len(), b.len()))
}

pub fn coherence(cfg: &RunConfig, opts: &RunOptions) -> Result<String> {
    let dir = prepare_out(opts)?;
    let c = cfg
        .coherence
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `coherence` section".into()))?;
    let (j, _) = jump_matrix(cfg, opts.threads)?;
    let set = c.set.build(j.indexer(), "set")?;
    let counting = if c.count_survival || opts.count_survival {
        SurvivalCounting::Count
    } else {
        SurvivalCounting::Ignore
    };
    let d = coherence_defect(&j, &set, counting).map_err(CliError::solver("coherence"))?;
    let h = forward_coherence(&j, &set, counting).map_err(CliError::solver("coherence"))?;
    let idx = j.indexer();
    let mut csv = Csv::create(dir, "coherence.csv", "state,block,in_set,forward_mass")?;
    for k in 0..idx.num_blocks() {
        for i in 0..idx.num_states() {
            csv.line(format_args!("{i},{k},{},{}", u8::from(set.contains(i, k)), h.get(i, k)))?;
        }
    }
    csv.finish()?;
    Ok(format!(
        "count_survival {}\nmin_slack {:e}\nviolation_mass {:e}\ncoherent {}\n",
        counting == SurvivalCounting::Count,
        d.min_slack,
        d.violation_mass,
        d.min_slack >= 0.0
    ))
}

/// Reconstructed-vs-exact propagator error at the horizon, rows solved in parallel.
pub fn horizon_error(seq: &RateMatrixSequence, threads: usize, aopts: &ajc_core::ActivityOptions) -> ajc_core::Result<ajc_core::NormError> {
    let j = parallel::assemble(seq, threads);
    let n = j.num_states();
    let last = j.num_blocks() - 1;
    let exact = exact_propagator(seq, j.grid().start(), j.grid().end())?;
    let states: Vec<usize> = (0..n).collect();
    let rows = parallel::map(&states, threads, |&i| {
        reconstruct_propagator(&j, &SpatialVector::delta(n, i), last, aopts).map(|v| v.0)
    })
    .into_iter()
    .collect::<ajc_core::Result<Vec<_>>>()?;
    norm_error(&DenseMatrix::from_rows(&rows), &exact)
}

pub fn convergence_table(cfg: &RunConfig, opts: &RunOptions) -> Result<ConvergenceTable> {
    let base = cfg.rate_sequence()?;
    let switches = cfg.switch_times()?;
    let dts: Vec<f64> = if cfg.convergence.dt.is_empty() {
        DEFAULT_DT.to_vec()
    } else {
        cfg.convergence.dt.clone()
    };
    let aopts = cfg.activity.options()?;
    let (start, end) = (base.grid().start(), base.grid().end());
    // The builder can fail for CLI reasons (config, file IO); keep the real
    // error and hand the core a placeholder to abort the study.
    let mut build_error = None;
    let table = convergence_study_with(
        start,
        end,
        &switches,
        &dts,
        |grid| {
            cfg.rate_sequence_on(grid).map_err(|e| {
                build_error = Some(e);
                ajc_core::Error::InvalidParameter {
                    name: "problem",
                    reason: "protocol could not be rebuilt",
                }
            })
        },
        |seq| {
            info!("convergence grid with {} cells", seq.num_cells());
            horizon_error(seq, opts.threads, &aopts)
        },
    );
    if let Some(e) = build_error {
        return Err(e);
    }
    table.map_err(|e| match e {
        ajc_core::Error::MisalignedStep { .. } | ajc_core::Error::InvalidParameter { .. } => {
            CliError::Config(format!("convergence: {e}"))
        }
        other => CliError::Solver {
            command: "convergence",
            source: other,
        },
    })
}

pub fn convergence(cfg: &RunConfig, opts: &RunOptions) -> Result<String> {
    let dir = prepare_out(opts)?;
    let table = convergence_table(cfg, opts)?;
    let mut csv = Csv::create(dir, "convergence.csv", "dt,epsilon_2norm,epsilon_frobenius")?;
    let mut report = String::new();
    for r in &table.rows {
        csv.line(format_args!("{},{},{}", r.dt, r.error.two_norm, r.error.frobenius))?;
        writeln!(report, "dt {} epsilon {:e}", r.dt, r.error.two_norm).unwrap();
    }
    match table.slope {
        Some(s) => {
            csv.line(format_args!("# slope={s}"))?;
            writeln!(report, "slope {s}").unwrap();
        }
        None => {
            csv.line(format_args!("# slope=none"))?;
            writeln!(report, "slope none").unwrap();
        }
    }
    csv.finish()?;
    writeln!(report, "monotone {}", table.is_monotone_decreasing()).unwrap();
    Ok(report)
}
