use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::artifact::{RunArtifact, RunStatus, RunSummary, SampleTable};
use super::config::{ExperimentConfig, ReferenceConfig};
use crate::control::{ChebyshevControl, ControlFunction, MapKind};
use crate::error::{Error, Result};
use crate::flow_jac::solve_trajectory;
use crate::picard::{control_energy, endpoint_error, run_picard, PicardOutcome, Termination, METRIC_GRID};
use crate::systems::{make_benchmark, BenchmarkParams, SteeringProblem};

/// Stable seed for the `index`-th draw of a named stream under `master`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    // FNV-1a of the label, then a splitmix64 finalizer
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = master ^ h ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn benchmark_params(cfg: &ExperimentConfig) -> BenchmarkParams {
    let mut p = cfg.params.clone();
    if cfg.system == "mindy_like" && p.seed.is_none() {
        p.seed = Some(cfg.seed);
    }
    p
}

fn fill_from_outcome(art: &mut RunArtifact, out: &PicardOutcome, samples: usize) -> Result<()> {
    art.telemetry = out.records.clone();
    art.summary = RunSummary {
        certificate: out.certificate,
        initial_condition: Some(out.initial_condition.min(f64::MAX)),
        singular_start: out.singular_start,
        ..RunSummary::from_records(&out.records)
    };
    art.control = SampleTable::of_control(&out.control, samples)?;
    art.trajectory = SampleTable::of_trajectory(&out.trajectory, samples)?;
    art.status = RunStatus::finished(out.termination);
    Ok(())
}

/// Run Picard on the configured benchmark and write its artifact.
///
/// Configuration errors are returned; run errors are recorded in the
/// artifact status.
pub fn cmd_synthesize(cfg: &ExperimentConfig) -> Result<RunArtifact> {
    cfg.validate()?;
    let (_, problem) = make_benchmark(&cfg.system, &benchmark_params(cfg))?;
    let mut art = RunArtifact::new("synthesize", cfg);
    match run_picard(&problem, &cfg.synthesis) {
        Ok(out) => {
            if let Err(e) = fill_from_outcome(&mut art, &out, cfg.output.samples) {
                art.status = RunStatus::failed(&e);
            }
        }
        Err(e) => art.status = RunStatus::failed(&e),
    }
    art.write_dir(&cfg.output.dir)?;
    Ok(art)
}

/// Outcome of one scaling trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleTrial {
    pub dim: usize,
    pub trial: usize,
    pub seed: u64,
    pub iterations: usize,
    /// Mean wall time of one Picard pass.
    pub iteration_time: f64,
    pub err_end: f64,
    pub termination: Option<Termination>,
    pub error: Option<String>,
}

impl ScaleTrial {
    pub fn succeeded(&self) -> bool {
        self.termination.is_some_and(Termination::is_success)
    }
}

/// Per-dimension statistics over the successful trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub dim: usize,
    pub samples: usize,
    pub failures: usize,
    pub mean_iteration_time: f64,
    pub std_iteration_time: f64,
    pub mean_err_end: f64,
    pub std_err_end: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `mindy_like(d, d)` from the equilibrium `x0 = 0` to a target drawn from the
/// trial seed.
pub fn scale_problem(cfg: &ExperimentConfig, dim: usize, trial_seed: u64) -> Result<SteeringProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let (lo, hi) = (cfg.scale.target_low, cfg.scale.target_high);
    let x1: Vec<f64> = (0..dim).map(|_| rng.gen_range(lo..hi)).collect();
    let params = BenchmarkParams {
        dim: Some(dim),
        inputs: Some(dim),
        seed: Some(cfg.params.seed.unwrap_or(cfg.seed)),
        x0: Some(vec![0.0; dim]),
        x1: Some(x1),
        ..cfg.params.clone()
    };
    Ok(make_benchmark("mindy_like", &params)?.1)
}

fn run_scale_trial(cfg: &ExperimentConfig, dim: usize, trial: usize, dir: &Path) -> ScaleTrial {
    let seed = derive_seed(cfg.seed, "scale", (dim as u64) << 32 | trial as u64);
    let mut row = ScaleTrial {
        dim,
        trial,
        seed,
        iterations: 0,
        iteration_time: f64::NAN,
        err_end: f64::NAN,
        termination: None,
        error: None,
    };
    let synthesis = crate::picard::SynthesisConfig { map_kind: MapKind::General, ..cfg.synthesis.clone() };
    let mut art = RunArtifact::new("scale", cfg);
    art.system = "mindy_like".into();
    art.seed = seed;
    let result = scale_problem(cfg, dim, seed).and_then(|p| run_picard(&p, &synthesis));
    match result {
        Ok(out) => {
            row.iterations = out.records.len();
            row.iteration_time = out.records.iter().map(|r| r.wall_time).sum::<f64>() / out.records.len() as f64;
            row.err_end = out.final_record().err_end;
            row.termination = Some(out.termination);
            art.telemetry = out.records.clone();
            art.summary = RunSummary { certificate: out.certificate, ..RunSummary::from_records(&out.records) };
            art.status = RunStatus::finished(out.termination);
        }
        Err(e) => {
            row.error = Some(e.to_string());
            art.status = RunStatus::failed(&e);
        }
    }
    if let Err(e) = art.write_dir(&dir.join(format!("d{dim}_trial{trial}"))) {
        row.error.get_or_insert(e.to_string());
    }
    row
}

/// Scaling sweep; per-trial artifacts go under `<out>/scale/`, the summary
/// table to `<out>/scale.csv` and every trial to `<out>/scale_trials.csv`.
pub fn cmd_scale(cfg: &ExperimentConfig) -> Result<(Vec<ScaleRow>, Vec<ScaleTrial>)> {
    cfg.validate()?;
    let dir = cfg.output.dir.join("scale");
    std::fs::create_dir_all(&dir)?;
    let jobs: Vec<(usize, usize)> =
        cfg.scale.dims.iter().flat_map(|d| (0..cfg.scale.trials).map(move |t| (*d, t))).collect();
    let trials: Vec<ScaleTrial> = if cfg.scale.concurrent_trials {
        jobs.par_iter().map(|(d, t)| run_scale_trial(cfg, *d, *t, &dir)).collect()
    } else {
        jobs.iter().map(|(d, t)| run_scale_trial(cfg, *d, *t, &dir)).collect()
    };

    let rows: Vec<ScaleRow> = cfg
        .scale
        .dims
        .iter()
        .map(|d| {
            let ok: Vec<&ScaleTrial> = trials.iter().filter(|t| t.dim == *d && t.succeeded()).collect();
            let times: Vec<f64> = ok.iter().map(|t| t.iteration_time).collect();
            let errs: Vec<f64> = ok.iter().map(|t| t.err_end).collect();
            let (mean_iteration_time, std_iteration_time) = mean_std(&times);
            let (mean_err_end, std_err_end) = mean_std(&errs);
            ScaleRow {
                dim: *d,
                samples: ok.len(),
                failures: cfg.scale.trials - ok.len(),
                mean_iteration_time,
                std_iteration_time,
                mean_err_end,
                std_err_end,
            }
        })
        .collect();

    let mut w = csv::Writer::from_path(cfg.output.dir.join("scale.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(cfg.output.dir.join("scale_trials.csv"))?;
    for t in &trials {
        w.serialize(t)?;
    }
    w.flush()?;
    Ok((rows, trials))
}

/// Feedback linearization along the straight line from `x0` to `x1`:
/// `u = B(x_ref)^-1 (x_ref' - N_t(x_ref))`. Returns the control and its energy.
pub fn feedback_linearization_baseline(problem: &SteeringProblem) -> Result<(ControlFunction, f64)> {
    let sys = problem.system.clone();
    let (d, k) = (sys.state_dim(), sys.input_dim());
    if k != d {
        return Err(Error::NotFullyActuated(format!("{} has {k} inputs for {d} states", sys.name())));
    }
    let (t0, t1) = (problem.t0, problem.t_final);
    let x0 = problem.x0.clone();
    let rate = (&problem.x1 - &problem.x0) / (t1 - t0);
    let law = move |t: f64| -> Option<DVector<f64>> {
        let x = &x0 + &rate * (t - t0);
        let mut n = vec![0.0; d];
        sys.drift(t, x.as_slice(), &mut n);
        let mut b = DMatrix::zeros(d, d);
        sys.input_matrix(t, x.as_slice(), &mut b);
        b.lu().solve(&(&rate - DVector::from_vec(n)))
    };
    for t in crate::control::uniform_grid(t0, t1, METRIC_GRID) {
        if law(t).is_none() {
            return Err(Error::NotFullyActuated(format!("input matrix is singular at t = {t}")));
        }
    }
    let u = ControlFunction::closed_form(k, t0, t1, move |t, out| match law(t) {
        Some(v) => out.copy_from_slice(v.as_slice()),
        None => out.fill(f64::NAN),
    });
    let energy = control_energy(&u)?;
    Ok((u, energy))
}

/// Degree-`degree` Chebyshev control on `[t0, t1]`, one series per channel.
pub fn reference_control(spec: &ReferenceConfig, k: usize, t0: f64, t1: f64, seed: u64) -> Result<ControlFunction> {
    let n = spec.degree + 1;
    let coefficients = match &spec.coefficients {
        Some(rows) => {
            if rows.len() != k || rows.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidConfig(format!("reference coefficients must be {k} x {n}")));
            }
            DMatrix::from_row_iterator(k, n, rows.iter().flatten().copied())
        }
        None => {
            let dist = Normal::new(0.0, spec.std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            DMatrix::from_row_iterator(k, n, (0..k * n).map(|_| dist.sample(&mut rng)))
        }
    };
    Ok(ChebyshevControl { coefficients, t0, t1 }.into_control())
}

fn reference_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.reference.seed.unwrap_or_else(|| derive_seed(cfg.seed, "reference", 0))
}

/// Straight-line feedback-linearization control for the configured system.
pub fn cmd_baseline(cfg: &ExperimentConfig) -> Result<RunArtifact> {
    cfg.validate()?;
    let (_, problem) = make_benchmark(&cfg.system, &benchmark_params(cfg))?;
    let mut art = RunArtifact::new("baseline", cfg);
    let run = |art: &mut RunArtifact| -> Result<()> {
        let (u, energy) = feedback_linearization_baseline(&problem)?;
        let u = Arc::new(u);
        let traj = solve_trajectory(&problem, u.clone(), &cfg.synthesis.solver)?;
        let err_end = endpoint_error(&traj, &problem.x1);
        art.summary = RunSummary {
            err_end,
            energy,
            energy_sq_norm: 2.0 * energy,
            l2_norm: (2.0 * energy).sqrt(),
            ..RunSummary::default()
        };
        art.metrics.insert("baseline_energy".into(), energy);
        art.control = SampleTable::of_control(&u, cfg.output.samples)?;
        art.trajectory = SampleTable::of_trajectory(&traj, cfg.output.samples)?;
        Ok(())
    };
    if let Err(e) = run(&mut art) {
        art.status = RunStatus::failed(&e);
    }
    art.write_dir(&cfg.output.dir)?;
    Ok(art)
}

/// Sample a reference control and simulate it from the configured `x0`.
pub fn cmd_reference(cfg: &ExperimentConfig) -> Result<RunArtifact> {
    cfg.validate()?;
    let (_, problem) = make_benchmark(&cfg.system, &benchmark_params(cfg))?;
    let seed = reference_seed(cfg);
    let mut art = RunArtifact::new("reference", cfg);
    art.metrics.insert("reference_seed".into(), seed as f64);
    let u = Arc::new(reference_control(&cfg.reference, problem.input_dim(), problem.t0, problem.t_final, seed)?);
    let run = |art: &mut RunArtifact| -> Result<()> {
        let traj = solve_trajectory(&problem, u.clone(), &cfg.synthesis.solver)?;
        let energy = control_energy(&u)?;
        art.summary = RunSummary {
            err_end: endpoint_error(&traj, &problem.x1),
            energy,
            energy_sq_norm: 2.0 * energy,
            l2_norm: (2.0 * energy).sqrt(),
            ..RunSummary::default()
        };
        art.control = SampleTable::of_control(&u, cfg.output.samples)?;
        art.trajectory = SampleTable::of_trajectory(&traj, cfg.output.samples)?;
        Ok(())
    };
    if let Err(e) = run(&mut art) {
        art.status = RunStatus::failed(&e);
    }
    art.write_dir(&cfg.output.dir)?;
    Ok(art)
}

#[derive(Debug)]
pub struct UnderactuatedReport {
    pub artifact: RunArtifact,
    pub reference_energy: f64,
    pub synthesized_energy: f64,
    pub energy_reduced: bool,
    /// `err_end` never grows by more than 2x from one pass to the next.
    pub monotone_decay: bool,
}

/// Minimum-energy steering of `mindy_like(dim, inputs)` to the endpoint of a
/// random Chebyshev control, started from `x0 ~ N(0, I)`.
pub fn cmd_underactuated_demo(cfg: &ExperimentConfig) -> Result<UnderactuatedReport> {
    cfg.validate()?;
    let ua = &cfg.underactuated;
    let state_seed = ua.state_seed.unwrap_or_else(|| derive_seed(cfg.seed, "state", 0));
    let mut rng = ChaCha8Rng::seed_from_u64(state_seed);
    let x0: Vec<f64> = (0..ua.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let params = BenchmarkParams {
        dim: Some(ua.dim),
        inputs: Some(ua.inputs),
        seed: Some(cfg.params.seed.unwrap_or(cfg.seed)),
        t0: Some(0.0),
        t_final: Some(ua.t_final),
        x0: Some(x0.clone()),
        x1: Some(x0),
        ..cfg.params.clone()
    };
    let (_, problem) = make_benchmark("mindy_like", &params)?;
    let seed = reference_seed(cfg);
    let reference = Arc::new(reference_control(&cfg.reference, ua.inputs, 0.0, ua.t_final, seed)?);
    let solver = &cfg.synthesis.solver;
    let target = solve_trajectory(&problem, reference.clone(), solver)?.endpoint;
    let problem = problem.with_target(target);
    let reference_energy = control_energy(&reference)?;

    let synthesis = crate::picard::SynthesisConfig {
        map_kind: MapKind::MinimumEnergy,
        max_iterations: ua.max_iterations,
        ..cfg.synthesis.clone()
    };
    let mut art = RunArtifact::new("underactuated", cfg);
    art.system = "mindy_like".into();
    art.metrics.insert("reference_energy".into(), reference_energy);
    let mut report_energy = f64::NAN;
    let (mut energy_reduced, mut monotone_decay) = (false, false);
    match run_picard(&problem, &synthesis) {
        Ok(out) => {
            fill_from_outcome(&mut art, &out, cfg.output.samples)?;
            report_energy = out.final_record().energy;
            energy_reduced = report_energy < reference_energy;
            monotone_decay = out.records.windows(2).all(|w| w[1].err_end <= 2.0 * w[0].err_end);
            art.metrics.insert("synthesized_energy".into(), report_energy);
            art.metrics.insert("energy_reduced".into(), f64::from(u8::from(energy_reduced)));
            art.metrics.insert("monotone_decay".into(), f64::from(u8::from(monotone_decay)));
            if !energy_reduced {
                art.status.success = false;
                art.status.error = Some("synthesized energy is not below the reference energy".into());
            }
        }
        Err(e) => art.status = RunStatus::failed(&e),
    }
    art.write_dir(&cfg.output.dir)?;
    SampleTable::of_control(&reference, cfg.output.samples)?
        .write_csv(&cfg.output.dir.join("reference_control.csv"), "u")?;
    Ok(UnderactuatedReport {
        artifact: art,
        reference_energy,
        synthesized_energy: report_energy,
        energy_reduced,
        monotone_decay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_label_and_index() {
        let a = derive_seed(7, "scale", 0);
        assert_eq!(a, derive_seed(7, "scale", 0));
        assert_ne!(a, derive_seed(7, "scale", 1));
        assert_ne!(a, derive_seed(7, "state", 0));
        assert_ne!(a, derive_seed(8, "scale", 0));
    }

    #[test]
    fn chebyshev_reference_examples() {
        let zero = ReferenceConfig { coefficients: Some(vec![vec![0.0; 6]; 2]), ..Default::default() };
        let u = reference_control(&zero, 2, 0.0, 4.0, 1).unwrap();
        assert_eq!(u.eval(1.3).unwrap().as_slice(), &[0.0, 0.0]);

        let one = ReferenceConfig { coefficients: Some(vec![vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]]), ..Default::default() };
        let u = reference_control(&one, 1, 0.0, 4.0, 1).unwrap();
        for t in [0.0, 0.7, 4.0] {
            assert_eq!(u.eval(t).unwrap()[0], 1.0);
        }

        let spec = ReferenceConfig::default();
        let a = reference_control(&spec, 3, 0.0, 4.0, 11).unwrap();
        let b = reference_control(&spec, 3, 0.0, 4.0, 11).unwrap();
        for t in [0.0, 1.1, 2.9] {
            assert_eq!(a.eval(t).unwrap(), b.eval(t).unwrap());
        }
        assert!(reference_control(&zero, 3, 0.0, 4.0, 1).is_err());
    }

    #[test]
    fn mean_std_basics() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }
}
