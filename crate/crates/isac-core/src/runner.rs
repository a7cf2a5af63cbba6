//! Full cyclic optimization loop, per-iteration tracing, and sweeps.
//!
//! One outer iteration refreshes the quadratic caches, then updates the gain
//! pair (skipped for a passive surface), the phase pair, and the precoder
//! pair, evaluates both SNRs in trace form, and tests |ΔSNR_T| against the
//! threshold. The weighted SNR is not monotone along the iterations; only
//! the delta criterion stops the loop.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::irs_solver::{
    build_gain_step, build_phase_step, update_gain, update_phase_quantized, IrsState,
};
use crate::linalg::CMatrix;
use crate::metrics::{
    build_snr_cache, comm_channel, evaluate_snr, mask_quadratic, radar_quadratic, radar_response,
    weighted_quadratic, SnrBreakdown,
};
use crate::precoder_solver::{
    build_loaded_weight, build_penalized_quad, build_precoder_step, build_snr_weight,
    update_precoder, PrecoderState,
};
use crate::scene::{
    build_scenario, ChannelSet, ConfigError, IrsMode, Quantization, ScenarioConfig, UpdateOrder,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("non-finite value produced by the {stage} stage at outer iteration {iteration}")]
    NonFinite { stage: &'static str, iteration: usize },
}

/// One row of the convergence trace. dB fields are 10·log₁₀ of the linear
/// SNRs; `delta` and the track gaps are linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub snr_r_db: f64,
    pub snr_c_db: f64,
    pub snr_t_db: f64,
    pub delta: f64,
    pub track_gap_b: f64,
    pub track_gap_u: f64,
    pub track_gap_p: f64,
}

/// Completed run: the trace, the final solver states (phases hard-quantized
/// in quantized mode), and the SNR of the returned design.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: Vec<IterationRecord>,
    pub irs: IrsState,
    pub precoder: PrecoderState,
    pub converged: bool,
    pub iterations_used: usize,
    /// SNR of the final (feasible) design, evaluated after requantization.
    pub final_snr: SnrBreakdown,
    pub config: ScenarioConfig,
}

pub fn db_from_linear(linear: f64) -> f64 {
    if linear <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * linear.log10()
    }
}

fn record(iter: usize, snr: &SnrBreakdown, delta: f64, irs: &IrsState, precoder: &PrecoderState) -> IterationRecord {
    IterationRecord {
        iter,
        snr_r_db: db_from_linear(snr.snr_r),
        snr_c_db: db_from_linear(snr.snr_c),
        snr_t_db: db_from_linear(snr.snr_t),
        delta,
        track_gap_b: irs.gain_gap(),
        track_gap_u: irs.phase_gap(),
        track_gap_p: precoder.track_gap(),
    }
}

fn ensure_finite(ok: bool, stage: &'static str, iteration: usize) -> Result<(), RunError> {
    if ok {
        Ok(())
    } else {
        Err(RunError::NonFinite { stage, iteration })
    }
}

/// Power budgets hold at every recorded step; a violation is a solver bug.
fn audit_budgets(state: &Loop, config: &ScenarioConfig, iteration: usize) {
    match config.mode {
        IrsMode::Active => {
            let defect = state.irs.gain_budget_defect(config.p_irs());
            assert!(
                defect <= 1e-10,
                "gain budget violated at iteration {iteration}: relative defect {defect:e}"
            );
        }
        IrsMode::Passive => {
            assert!(
                state.irs.gains.iter().all(|g| g.iter().all(|&x| x == 1.0)),
                "passive gains drifted from all-ones at iteration {iteration}"
            );
        }
    }
    let defect = state.precoder.budget_defect(config.p_t());
    assert!(
        defect <= 1e-10,
        "precoder budget violated at iteration {iteration}: relative defect {defect:e}"
    );
}

struct Loop<'a> {
    config: &'a ScenarioConfig,
    channels: ChannelSet,
    irs: IrsState,
    precoder: PrecoderState,
}

impl Loop<'_> {
    fn gain_pair(&mut self, cache: &crate::metrics::SnrCache, iteration: usize) -> Result<(), RunError> {
        let config = self.config;
        let phase_bar = self.irs.phases[0].append_ones(1);
        let p_matrix = self.precoder.precoder_matrix(0);
        let snapshot = match config.update_order {
            UpdateOrder::Jacobi => Some(self.irs.gains.clone()),
            UpdateOrder::GaussSeidel => None,
        };
        let mut staged: [Option<Vec<f64>>; 2] = [None, None];
        for j in 0..2 {
            let i = 1 - j;
            // Jacobi reads the pair-start snapshot; Gauss-Seidel sees the
            // opposite track's fresh value.
            let source_gain = match &snapshot {
                Some(snap) => CMatrix::column(
                    snap[i].iter().map(|&g| num_complex::Complex64::new(g, 0.0)).collect(),
                ),
                None => self.irs.gain_column(i),
            };
            let reflection = crate::linalg::hadamard(&source_gain, &self.irs.phases[0]);
            let radar_quad = radar_quadratic(
                &reflection,
                &cache.cascade,
                &p_matrix,
                self.channels.rcs,
                config.sigma_r_sq(),
            );
            let weighted = weighted_quadratic(config.beta, &radar_quad, &cache.comm_quad);
            let masked = mask_quadratic(&weighted, &phase_bar);
            ensure_finite(masked.all_finite(), "gain objective", iteration)?;
            let gain_bar = source_gain.append_ones(1);
            let step = build_gain_step(&masked, &gain_bar, config.tau_gain, config.p_irs(), config.seed);
            ensure_finite(step.matrix.all_finite(), "gain loading", iteration)?;
            let (next, _degenerate) = update_gain(&self.irs, &step, config.p_irs(), j);
            ensure_finite(next.iter().all(|x| x.is_finite()), "gain update", iteration)?;
            match config.update_order {
                UpdateOrder::GaussSeidel => self.irs.gains[j] = next,
                UpdateOrder::Jacobi => staged[j] = Some(next),
            }
        }
        if let [Some(a), Some(b)] = staged {
            self.irs.gains = [a, b];
        }
        Ok(())
    }

    fn phase_pair(&mut self, cache: &crate::metrics::SnrCache, t: usize, iteration: usize) -> Result<(), RunError> {
        let config = self.config;
        let gain_bar = self.irs.gain_column(0).append_ones(1);
        let p_matrix = self.precoder.precoder_matrix(0);
        let snapshot = match config.update_order {
            UpdateOrder::Jacobi => Some(self.irs.phases.clone()),
            UpdateOrder::GaussSeidel => None,
        };
        let mut staged: [Option<CMatrix>; 2] = [None, None];
        for j in 0..2 {
            let i = 1 - j;
            let source_phase = match &snapshot {
                Some(snap) => snap[i].clone(),
                None => self.irs.phases[i].clone(),
            };
            let reflection = crate::linalg::hadamard(&self.irs.gain_column(0), &source_phase);
            let radar_quad = radar_quadratic(
                &reflection,
                &cache.cascade,
                &p_matrix,
                self.channels.rcs,
                config.sigma_r_sq(),
            );
            let weighted = weighted_quadratic(config.beta, &radar_quad, &cache.comm_quad);
            let masked = mask_quadratic(&weighted, &gain_bar);
            ensure_finite(masked.all_finite(), "phase objective", iteration)?;
            let phase_bar_i = source_phase.append_ones(1);
            let step = build_phase_step(
                &masked,
                &phase_bar_i,
                config.tau_phase,
                self.irs.elements(),
                config.seed,
            );
            ensure_finite(step.matrix.all_finite(), "phase loading", iteration)?;
            let (next, _frozen) = update_phase_quantized(
                &self.irs,
                &step,
                config.quantization,
                config.nu1,
                config.nu2,
                t,
                j,
            );
            ensure_finite(next.all_finite(), "phase update", iteration)?;
            match config.update_order {
                UpdateOrder::GaussSeidel => self.irs.phases[j] = next,
                UpdateOrder::Jacobi => staged[j] = Some(next),
            }
        }
        if let [Some(a), Some(b)] = staged {
            self.irs.phases = [a, b];
        }
        Ok(())
    }

    fn precoder_pair(&mut self, iteration: usize) -> Result<(), RunError> {
        let config = self.config;
        let phi = CMatrix::diag(&self.irs.reflection());
        let comm = comm_channel(&self.channels, &phi);
        let radar = radar_response(&self.channels, &phi);
        let weight = build_snr_weight(
            &radar,
            &comm,
            config.beta,
            config.sigma_r_sq(),
            config.sigma_c_sq(),
        );
        ensure_finite(weight.all_finite(), "precoder weight", iteration)?;
        let (loaded, _lambda) = build_loaded_weight(&weight, config.users, config.seed);
        let snapshot = match config.update_order {
            UpdateOrder::Jacobi => Some(self.precoder.tracks.clone()),
            UpdateOrder::GaussSeidel => None,
        };
        let mut staged: [Option<CMatrix>; 2] = [None, None];
        for j in 0..2 {
            let i = 1 - j;
            let source = match &snapshot {
                Some(snap) => snap[i].clone(),
                None => self.precoder.tracks[i].clone(),
            };
            let penalized = build_penalized_quad(
                &source,
                &loaded,
                config.gamma_cov,
                &self.precoder.desired_cov,
                config.tx_antennas,
                config.users,
            );
            ensure_finite(penalized.all_finite(), "precoder objective", iteration)?;
            let step = build_precoder_step(&source, &penalized, config.tau_precoder, config.p_t(), config.seed);
            ensure_finite(step.matrix.all_finite(), "precoder loading", iteration)?;
            let (next, _degenerate) = update_precoder(&self.precoder, &step, config.p_t(), j);
            ensure_finite(next.all_finite(), "precoder update", iteration)?;
            match config.update_order {
                UpdateOrder::GaussSeidel => self.precoder.tracks[j] = next,
                UpdateOrder::Jacobi => staged[j] = Some(next),
            }
        }
        if let [Some(a), Some(b)] = staged {
            self.precoder.tracks = [a, b];
        }
        Ok(())
    }
}

/// Execute the full cyclic design loop for one configuration.
pub fn run(config: &ScenarioConfig) -> Result<RunResult, RunError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let channels = build_scenario(config, &mut rng)?;
    let irs = IrsState::init(config, &mut rng);
    let precoder = PrecoderState::init(config, &mut rng);
    let mut state = Loop {
        config,
        channels,
        irs,
        precoder,
    };

    let evaluate = |state: &Loop| -> SnrBreakdown {
        evaluate_snr(
            &state.channels,
            &state.irs.reflection(),
            &state.precoder.precoder_matrix(0),
            config.beta,
            config.sigma_c_sq(),
            config.sigma_r_sq(),
        )
    };

    let initial = evaluate(&state);
    ensure_finite(initial.snr_t.is_finite(), "initial evaluation", 0)?;
    let mut trace = vec![record(0, &initial, f64::INFINITY, &state.irs, &state.precoder)];
    let mut previous_snr_t = initial.snr_t;
    let mut converged = false;
    let mut iterations_used = 0;

    for outer in 0..config.max_outer_iter {
        let iteration = outer + 1;
        let p_matrix = state.precoder.precoder_matrix(0);
        let cache = build_snr_cache(&state.channels, &p_matrix, config.sigma_c_sq());
        ensure_finite(cache.comm_quad.all_finite(), "cache rebuild", iteration)?;

        for _ in 0..config.inner_iters {
            if state.config.mode == IrsMode::Active {
                state.gain_pair(&cache, iteration)?;
            }
            // The relaxation schedules share the 1-based outer counter.
            state.phase_pair(&cache, iteration, iteration)?;
        }
        for _ in 0..config.inner_iters {
            state.precoder_pair(iteration)?;
        }

        let snr = evaluate(&state);
        ensure_finite(snr.snr_t.is_finite(), "snr evaluation", iteration)?;
        audit_budgets(&state, config, iteration);
        let delta = (snr.snr_t - previous_snr_t).abs();
        trace.push(record(iteration, &snr, delta, &state.irs, &state.precoder));
        iterations_used = iteration;
        previous_snr_t = snr.snr_t;
        if delta <= config.epsilon {
            converged = true;
            break;
        }
    }

    let Loop {
        mut irs,
        precoder,
        channels,
        ..
    } = state;
    if let Quantization::Levels(m) = config.quantization {
        irs.requantize(m);
    }
    let final_snr = evaluate_snr(
        &channels,
        &irs.reflection(),
        &precoder.precoder_matrix(0),
        config.beta,
        config.sigma_c_sq(),
        config.sigma_r_sq(),
    );

    Ok(RunResult {
        trace,
        irs,
        precoder,
        converged,
        iterations_used,
        final_snr,
        config: config.clone(),
    })
}

fn channels_for(config: &ScenarioConfig) -> Result<ChannelSet, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(build_scenario(config, &mut rng)?)
}

/// Pure evaluation entry point: rebuild the seeded channels and score an
/// externally supplied surface state and precoder.
pub fn evaluate_only(
    config: &ScenarioConfig,
    irs: &IrsState,
    precoder_matrix: &CMatrix,
) -> Result<SnrBreakdown, RunError> {
    config.validate()?;
    assert_eq!(
        (precoder_matrix.rows(), precoder_matrix.cols()),
        (config.tx_antennas, config.users),
        "evaluate_only: precoder shape mismatch"
    );
    assert_eq!(irs.elements(), config.irs_elements(), "evaluate_only: surface size mismatch");
    let channels = channels_for(config)?;
    Ok(evaluate_snr(
        &channels,
        &irs.reflection(),
        precoder_matrix,
        config.beta,
        config.sigma_c_sq(),
        config.sigma_r_sq(),
    ))
}

/// Per-quantization aggregate over a shared seed list.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub quantization: Quantization,
    /// Final weighted SNR (linear) per seed, in seed order.
    pub final_snr_t: Vec<f64>,
    pub converged_runs: usize,
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
}

/// Median of a sorted slice.
fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Median and Tukey-hinge quartiles (halves exclude the middle element for
/// odd lengths).
fn summarize(values: &[f64]) -> (f64, f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sweep value"));
    let n = sorted.len();
    let median = median_sorted(&sorted);
    if n == 1 {
        return (median, sorted[0], sorted[0]);
    }
    let half = n / 2;
    let lower = median_sorted(&sorted[..half]);
    let upper = median_sorted(&sorted[n - half..]);
    (median, lower, upper)
}

/// Run every (quantization, seed) pair and aggregate final SNR_T per level.
/// Runs are independent and execute concurrently; results are merged in
/// (level, seed) order so the summary is deterministic.
pub fn sweep_quantization(
    config: &ScenarioConfig,
    levels: &[Quantization],
    seeds: &[u64],
) -> Result<SweepSummary, RunError> {
    assert!(!levels.is_empty() && !seeds.is_empty(), "sweep needs levels and seeds");
    let jobs: Vec<(usize, Quantization, u64)> = levels
        .iter()
        .enumerate()
        .flat_map(|(mi, &m)| seeds.iter().map(move |&s| (mi, m, s)))
        .collect();
    let results: Vec<Mutex<Option<Result<RunResult, RunError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(4, |p| p.get()).min(jobs.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = cursor.fetch_add(1, Ordering::Relaxed);
                if index >= jobs.len() {
                    break;
                }
                let (_, quantization, seed) = jobs[index];
                let job_config = ScenarioConfig {
                    quantization,
                    seed,
                    ..config.clone()
                };
                let outcome = run(&job_config);
                *results[index].lock().expect("sweep result lock") = Some(outcome);
            });
        }
    });

    let mut per_level: Vec<(Vec<f64>, usize)> = vec![(Vec::new(), 0); levels.len()];
    for (slot, (mi, _, _)) in results.into_iter().zip(&jobs) {
        let outcome = slot.into_inner().expect("sweep result lock").expect("sweep job not run")?;
        per_level[*mi].0.push(outcome.final_snr.snr_t);
        if outcome.converged {
            per_level[*mi].1 += 1;
        }
    }

    let rows = levels
        .iter()
        .zip(per_level)
        .map(|(&quantization, (finals, converged_runs))| {
            let (median, lower_quartile, upper_quartile) = summarize(&finals);
            SweepRow {
                quantization,
                final_snr_t: finals,
                converged_runs,
                median,
                lower_quartile,
                upper_quartile,
            }
        })
        .collect();

    Ok(SweepSummary {
        seeds: seeds.to_vec(),
        rows,
    })
}
