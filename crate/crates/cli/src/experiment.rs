use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gridgame::ceg::{run_controller_thm1, run_controller_thm2, run_controller_thm4, run_flood_thm3, ControlTrace};
use gridgame::constrained::{macc_cooperation, macc_defection, MaccSummary};
use gridgame::oracle::{build_support_graph, certify_as_convergence, classify_terminals, verify_thm3_basin};
use gridgame::seg::random_initial;
use gridgame::{FixedSet, RngStream, RunRecord, SegEngine, Strategy, StrategyGrid, TorusDims};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, InitKind, Point};
use crate::output::{median, write_csv, ControlRow, ControlSummaryRow, RunRow, SnapshotSink, SweepRow};
use crate::ConfigError;

/// Runs `f` on a pool of `workers` threads (0 means one per core).
fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, ConfigError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ConfigError::Invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Initial state for one seed; consumes the seed's stream before the dynamics do.
pub fn initial_state(
    init: InitKind,
    dims: TorusDims,
    fixed: Option<&FixedSet>,
    rng: &mut RngStream,
) -> Result<StrategyGrid, ConfigError> {
    let mut g = match init {
        InitKind::Random => random_initial(dims, rng),
        InitKind::AllD => StrategyGrid::all_d(dims),
        InitKind::CSquare => {
            let mut g = random_initial(dims, rng);
            for (di, dj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                g.set_at(dims.offset(0, di, dj), Strategy::C);
            }
            g
        }
    };
    if let Some(f) = fixed {
        f.impose(&mut g)?;
    }
    Ok(g)
}

fn run_seed(
    cfg: &ExperimentConfig,
    point: &Point,
    dims: TorusDims,
    fixed: Option<&FixedSet>,
    seed: u64,
    snap_dir: Option<&Path>,
) -> Result<RunRecord, ConfigError> {
    let mut engine = SegEngine::new(dims, &point.matrix, &point.rule)?;
    if let Some(f) = fixed {
        engine = engine.with_frozen(f.mask(dims)?)?;
    }
    let mut rng = RngStream::new(seed);
    let init = initial_state(cfg.init, dims, fixed, &mut rng)?;
    let (Some(every), Some(dir)) = (cfg.snapshots.map(|s| s.every), snap_dir) else {
        return Ok(engine.run_quiet(init, &mut rng, point.max_steps));
    };
    let dir = dir.join(&point.label);
    let mut sink = SnapshotSink::new(&dir, seed);
    let mut err = None;
    let mut last = init.clone();
    let rec = engine.run(init, &mut rng, point.max_steps, |t, g| {
        if t % every == 0 && err.is_none() {
            err = sink.record(t, g).err();
        }
        last.clone_from(g);
    });
    if let Some(e) = err {
        return Err(e);
    }
    sink.record(rec.steps_run, &last)?;
    sink.finish()?;
    Ok(rec)
}

fn run_row(hash: &str, cfg: &ExperimentConfig, point: &Point, rec: &RunRecord) -> RunRow {
    RunRow {
        config_hash: hash.to_string(),
        point: point.label.clone(),
        rows: cfg.rows,
        cols: cfg.cols,
        rule: point.rule.kind().to_string(),
        seed: rec.seed,
        max_steps: point.max_steps,
        converged: rec.converged(),
        steps: rec.steps,
        terminal: rec.terminal.to_string(),
        n_c_final: rec.n_c_final,
        initial_digest: format!("{:016x}", rec.initial_hash),
    }
}

/// Every (point, seed) pair, in config order.
pub fn run_all(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    workers: usize,
) -> Result<Vec<(Point, Vec<RunRecord>)>, ConfigError> {
    cfg.validate()?;
    let dims = cfg.dims()?;
    let fixed = cfg.fixed_set()?;
    let points = cfg.points()?;
    let seeds = cfg.seeds.seeds();
    let snap_dir = out.map(|o| o.join("snapshots"));
    let jobs: Vec<(usize, u64)> = (0..points.len()).flat_map(|p| seeds.iter().map(move |&s| (p, s))).collect();
    let results: Vec<Result<RunRecord, ConfigError>> = with_pool(workers, || {
        jobs.par_iter()
            .map(|&(p, s)| run_seed(cfg, &points[p], dims, fixed.as_ref(), s, snap_dir.as_deref()))
            .collect()
    })?;
    let mut it = results.into_iter();
    points
        .into_iter()
        .map(|p| {
            let recs = it.by_ref().take(seeds.len()).collect::<Result<Vec<_>, _>>()?;
            Ok((p, recs))
        })
        .collect()
}

/// `runs.csv` plus scheduled snapshots.
pub fn run(cfg: &ExperimentConfig, out: &Path, workers: usize) -> Result<Vec<RunRow>, ConfigError> {
    let hash = cfg.hash();
    let rows: Vec<RunRow> = run_all(cfg, Some(out), workers)?
        .iter()
        .flat_map(|(p, recs)| recs.iter().map(|r| run_row(&hash, cfg, p, r)).collect::<Vec<_>>())
        .collect();
    write_csv(&out.join("runs.csv"), &rows)?;
    Ok(rows)
}

/// `sweep.csv` (one row per parameter) next to the per-run `runs.csv`.
pub fn sweep(cfg: &ExperimentConfig, out: &Path, workers: usize) -> Result<Vec<SweepRow>, ConfigError> {
    let spec = cfg.sweep_spec()?;
    let hash = cfg.hash();
    let results = run_all(cfg, Some(out), workers)?;
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    for (p, recs) in &results {
        runs.extend(recs.iter().map(|r| run_row(&hash, cfg, p, r)));
        let steps: Vec<usize> = recs.iter().filter_map(|r| r.steps).collect();
        rows.push(SweepRow {
            config_hash: hash.clone(),
            point: p.label.clone(),
            param: p.param.clone().unwrap_or_default(),
            replications: spec.replications,
            max_steps: p.max_steps,
            converged: steps.len(),
            fraction: steps.len() as f64 / recs.len() as f64,
            median_steps: median(&steps),
        });
    }
    write_csv(&out.join("runs.csv"), &runs)?;
    write_csv(&out.join("sweep.csv"), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub point: String,
    pub states: usize,
    pub absorbing: usize,
    pub converges: bool,
    pub all_c_terminal: bool,
    pub all_d_terminal: bool,
    pub mixed_terminals: usize,
    /// Only for matrices meeting the cooperative-square conditions.
    pub square_basin: Option<bool>,
    pub witness: Vec<u64>,
}

impl VerifyReport {
    pub fn verdict_line(&self) -> String {
        let mut s = format!(
            "{}: {} ({} states, {} absorbing, terminals all-C={} all-D={} mixed={}",
            self.point,
            if self.converges { "converges" } else { "does not converge" },
            self.states,
            self.absorbing,
            self.all_c_terminal,
            self.all_d_terminal,
            self.mixed_terminals
        );
        if let Some(b) = self.square_basin {
            let _ = write!(s, ", square basin {}", if b { "holds" } else { "fails" });
        }
        s.push(')');
        s
    }
}

/// Exhaustive support-graph certificate per point; `verify.txt` holds the
/// verdict lines and any witness grids.
pub fn verify(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<VerifyReport>, ConfigError> {
    cfg.validate()?;
    let dims = cfg.dims()?;
    let fixed = cfg.fixed_set()?;
    let mut reports = Vec::new();
    let mut text = String::new();
    for p in cfg.points()? {
        let g = build_support_graph(dims, &p.matrix, &p.rule, fixed.as_ref())?;
        let cert = certify_as_convergence(&g);
        let terms = classify_terminals(&g);
        let square_basin = (fixed.is_none() && p.matrix.check_conditions().thm3_ok).then(|| verify_thm3_basin(&g));
        let r = VerifyReport {
            point: p.label.clone(),
            states: g.domain().count(),
            absorbing: g.absorbing_states().len(),
            converges: cert.converges,
            all_c_terminal: !terms.all_c.is_empty(),
            all_d_terminal: !terms.all_d.is_empty(),
            mixed_terminals: terms.mixed.len(),
            square_basin,
            witness: cert.witness.map(|w| w.states).unwrap_or_default(),
        };
        text.push_str(&r.verdict_line());
        text.push('\n');
        if let Some(&x) = r.witness.first() {
            let _ = writeln!(text, "witness class of {} states, first:", r.witness.len());
            text.push_str(&g.grid(x).to_ascii());
        }
        reports.push(r);
    }
    if let Some(o) = out {
        fs::create_dir_all(o).map_err(|e| ConfigError::Io(o.display().to_string(), e))?;
        let p = o.join("verify.txt");
        fs::write(&p, text).map_err(|e| ConfigError::Io(p.display().to_string(), e))?;
    }
    Ok(reports)
}

/// Which constructive controller to drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Controller {
    Dilemma,
    Snowdrift,
    Flood,
    Rect,
}

impl Controller {
    /// Picks a controller from the fixed set, the initial condition and the matrix.
    pub fn infer(cfg: &ExperimentConfig, point: &Point) -> Result<Self, ConfigError> {
        let r = point.matrix.check_conditions();
        if cfg.fixed_rect()?.is_some() {
            Ok(Controller::Rect)
        } else if cfg.init == InitKind::CSquare && r.thm3_ok {
            Ok(Controller::Flood)
        } else if r.thm1_ok {
            Ok(Controller::Dilemma)
        } else if r.thm2_ok {
            Ok(Controller::Snowdrift)
        } else {
            Err(ConfigError::Invalid(format!("no controller applies to {}", point.label)))
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Controller::Dilemma => "dilemma",
            Controller::Snowdrift => "snowdrift",
            Controller::Flood => "flood",
            Controller::Rect => "rect",
        }
    }
}

fn control_bound(c: Controller, cfg: &ExperimentConfig) -> Result<usize, ConfigError> {
    let (n, m) = (cfg.rows, cfg.cols);
    Ok(match c {
        Controller::Dilemma | Controller::Snowdrift => 2 * (n * m - 1),
        Controller::Flood => n.div_ceil(2) + m.div_ceil(2) + 2,
        Controller::Rect => {
            let r = cfg.fixed_rect()?.ok_or_else(|| ConfigError::Invalid("rect controller needs a fixed rect".into()))?;
            2 * (n * m - r.len() - 1) + (n - r.rows()).div_ceil(2) + (m - r.cols()).div_ceil(2)
        }
    })
}

fn drive(
    c: Controller,
    cfg: &ExperimentConfig,
    point: &Point,
    init: &StrategyGrid,
) -> Result<ControlTrace, ConfigError> {
    let m = &point.matrix;
    let trace = match c {
        Controller::Dilemma => run_controller_thm1(init, m),
        Controller::Snowdrift => run_controller_thm2(init, m),
        Controller::Flood => run_flood_thm3(init, m),
        Controller::Rect => {
            let rect = cfg.fixed_rect()?.ok_or_else(|| ConfigError::Invalid("rect controller needs a fixed rect".into()))?;
            run_controller_thm4(init, m, &rect)
        }
    };
    trace.map_err(|e| ConfigError::Control(e.to_string()))
}

/// Controlled traces per seed: `control.csv` (one row per step) and
/// `control_summary.csv`. Integrity errors become rows with `ok = false`.
pub fn control(
    cfg: &ExperimentConfig,
    controller: Option<Controller>,
    out: &Path,
    workers: usize,
) -> Result<Vec<ControlSummaryRow>, ConfigError> {
    cfg.validate()?;
    let dims = cfg.dims()?;
    let hash = cfg.hash();
    let fixed = cfg.fixed_set()?;
    let seeds = cfg.seeds.seeds();
    let mut steps = Vec::new();
    let mut summary = Vec::new();
    for p in cfg.points()? {
        let c = match controller {
            Some(c) => c,
            None => Controller::infer(cfg, &p)?,
        };
        let bound = control_bound(c, cfg)?;
        let traces: Vec<Result<(u64, Result<ControlTrace, ConfigError>), ConfigError>> = with_pool(workers, || {
            seeds
                .par_iter()
                .map(|&s| {
                    let init = initial_state(cfg.init, dims, fixed.as_ref(), &mut RngStream::new(s))?;
                    Ok((s, drive(c, cfg, &p, &init)))
                })
                .collect()
        })?;
        for t in traces {
            let (seed, trace) = t?;
            let row = |ok, n, terminal: String, stops: String, error: String| ControlSummaryRow {
                config_hash: hash.clone(),
                point: p.label.clone(),
                seed,
                controller: c.name().to_string(),
                ok,
                steps: n,
                bound,
                terminal,
                stop_times: stops,
                error,
            };
            match trace {
                Ok(tr) => {
                    steps.extend(tr.steps.iter().map(|s| ControlRow {
                        config_hash: hash.clone(),
                        point: p.label.clone(),
                        seed,
                        step: s.step,
                        phase: s.phase.to_string(),
                        n_c: s.n_c,
                    }));
                    let f = tr.final_state();
                    let terminal = if f.is_all(Strategy::C) {
                        "all-c"
                    } else if f.is_all(Strategy::D) {
                        "all-d"
                    } else {
                        "mixed"
                    };
                    let stops: Vec<String> = tr.stop_times.iter().map(|s| format!("T{}={}", s.index, s.time)).collect();
                    let verified = tr.verify(&p.matrix);
                    let ok = verified.is_ok() && tr.len() <= bound;
                    summary.push(row(ok, tr.len(), terminal.into(), stops.join(" "), verified.err().unwrap_or_default()));
                }
                Err(e) => summary.push(row(false, 0, String::new(), String::new(), e.to_string())),
            }
        }
    }
    write_csv(&out.join("control.csv"), &steps)?;
    write_csv(&out.join("control_summary.csv"), &summary)?;
    Ok(summary)
}

/// Pinning experiments: fixed defectors under the consensus conditions, or a
/// fixed cooperating rectangle under the rectangle-control conditions.
pub fn macc(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<(Point, MaccSummary)>, ConfigError> {
    cfg.validate()?;
    if cfg.init != InitKind::Random {
        return Err(ConfigError::Invalid("macc runs start from random free nodes".into()));
    }
    let dims = cfg.dims()?;
    let hash = cfg.hash();
    let seeds = cfg.seeds.seeds();
    let fixed = cfg.fixed_set()?.ok_or_else(|| ConfigError::Invalid("macc needs a fixed set".into()))?;
    let mut res = Vec::new();
    let mut rows = Vec::new();
    for p in cfg.points()? {
        let s = match (fixed.strategy(), cfg.fixed_rect()?) {
            (Strategy::D, _) => macc_defection(dims, &p.matrix, &p.rule, &seeds, p.max_steps, &fixed)?,
            (Strategy::C, Some(rect)) => macc_cooperation(dims, &p.matrix, &p.rule, &seeds, p.max_steps, &rect)?,
            (Strategy::C, None) => return Err(ConfigError::Invalid("fixed cooperators must form a rect".into())),
        };
        rows.extend(s.records.iter().map(|r| run_row(&hash, cfg, &p, r)));
        res.push((p, s));
    }
    write_csv(&out.join("macc.csv"), &rows)?;
    Ok(res)
}
