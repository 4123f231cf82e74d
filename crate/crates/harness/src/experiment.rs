// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

//! Runs experiments and turns traces into result rows.

use std::collections::HashMap;
use std::sync::Arc;

use btlab_core::corruption::{
    calibrate_epsilon, corrupt_oracle, harvest_error_inducing_prefixes, Calibration, CorruptionSpec,
    CorruptionTrigger,
};
use btlab_core::dyck::{self, DyckOracle, DyckParams};
use btlab_core::exec::{try_map_indexed, with_workers, Execution};
use btlab_core::metrics::{
    diversity_k, empirical_pmf, restricted_pmf, run_episodes, tokenwise_pmf, total_variation, MeanEstimate,
};
use btlab_core::model::{derive_seed, DecodedOracle, FnVerifier};
use btlab_core::samplers::{
    backtracking_sample, backtracking_sample_no_argmax, block_best_of_n, greedy_sample, rejection_sample,
    tokenwise_rejection_sample, BacktrackConfig, EraseScope, SampleError, SampleTrace, Sampler, TraceStatus,
};
use btlab_core::tasks::{
    all_zeros_completable, gen_knapsack_instance, has_zero_completable, knapsack_membership, parity_membership,
    sequential_secret_search, KnapsackSolver, ParityOracle, ParityOracleSpec, UniformOracle,
};
use btlab_core::verifiers::{
    dyck_process_verifier, membership_verifier, noisy_verifier, perfect_process_verifier, BlockScorer,
    BlockSplitter, NoisyVerifierSpec,
};
use btlab_core::{Oracle, OracleHandle, RandomStream, TokenId, TokenString, VerifierHandle};
use log::info;

use crate::config::{
    ConfigDocument, CorruptionConfig, ExperimentConfig, OracleSource, PromptSource, SamplerConfig, SamplerKind,
    TargetSet, TaskConfig, VerifierConfig,
};
use crate::external::connect;
use crate::output::ResultRow;
use crate::HarnessError;

// seed-derivation tags
const TAG_EPISODES: u64 = 1;
const TAG_PROMPTS: u64 = 2;
const TAG_CORRUPTION: u64 = 3;
const TAG_CALIBRATION: u64 = 4;
const TAG_HARVEST: u64 = 5;
const TAG_INSTANCES: u64 = 6;
const TAG_VERIFIER: u64 = 7;

const CALIBRATION_TOLERANCE: f64 = 0.005;
const CALIBRATION_PROBES: usize = 20;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub exec: Execution,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
}

/// Calibrations and harvested corpora shared between grid points.
#[derive(Default)]
pub struct RunCache {
    calibrations: HashMap<String, Calibration>,
    harvests: HashMap<String, Vec<TokenString>>,
}

/// Runs every grid point of a document, in grid order.
pub fn run_document(doc: &ConfigDocument, opts: RunOptions) -> Result<Vec<ResultRow>, HarnessError> {
    let mut cache = RunCache::default();
    let mut rows = Vec::new();
    for (index, cfg) in doc.grid.iter().enumerate() {
        info!("grid point {}/{}", index + 1, doc.grid.len());
        rows.extend(run_with_cache(cfg, index, opts, &mut cache)?);
    }
    Ok(rows)
}

/// Runs a single config as grid point 0.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Vec<ResultRow>, HarnessError> {
    run_with_cache(cfg, 0, opts, &mut RunCache::default())
}

pub fn run_with_cache(
    cfg: &ExperimentConfig,
    grid_index: usize,
    opts: RunOptions,
    cache: &mut RunCache,
) -> Result<Vec<ResultRow>, HarnessError> {
    cfg.validate()?;
    let exec = if cfg.oracle.is_external() { Execution::Sequential } else { opts.exec };
    let outcome = with_workers(opts.workers, || run_task(cfg, exec, cache))?;
    Ok(assemble(cfg, grid_index, outcome))
}

type Metric = (String, f64, Option<f64>);

#[derive(Default)]
struct Outcome {
    per_rep: Vec<Vec<Metric>>,
    extra: Vec<Metric>,
}

fn assemble(cfg: &ExperimentConfig, grid_index: usize, outcome: Outcome) -> Vec<ResultRow> {
    let echo = cfg.echo();
    let row = |repetition, (metric, value, std_err): Metric| ResultRow {
        experiment: cfg.name.clone(),
        grid_index,
        repetition,
        metric,
        value,
        std_err,
        config: echo.clone(),
    };
    let mut rows = Vec::new();
    for (rep, metrics) in outcome.per_rep.iter().enumerate() {
        rows.extend(metrics.iter().cloned().map(|m| row(Some(rep), m)));
    }
    if let Some(first) = outcome.per_rep.first() {
        for (k, (name, _, own_se)) in first.iter().enumerate() {
            let values: Vec<f64> = outcome.per_rep.iter().map(|m| m[k].1).collect();
            let est = MeanEstimate::from_values(&values);
            let std_err = if values.len() > 1 { Some(est.std_err) } else { *own_se };
            rows.push(row(None, (name.clone(), est.mean, std_err)));
        }
    }
    rows.extend(outcome.extra.into_iter().map(|m| row(None, m)));
    rows
}

fn metric(name: impl Into<String>, value: f64, std_err: Option<f64>) -> Metric {
    (name.into(), value, std_err)
}

fn episode_seed(cfg: &ExperimentConfig, rep: usize) -> u64 {
    derive_seed(cfg.seed, &[TAG_EPISODES, rep as u64])
}

fn run_task(cfg: &ExperimentConfig, exec: Execution, cache: &mut RunCache) -> Result<Outcome, HarnessError> {
    match &cfg.task {
        TaskConfig::UniformTarget { d, target, distribution } => run_uniform(cfg, *d, *target, *distribution, exec),
        TaskConfig::Parity { d } => run_parity(cfg, *d, exec),
        TaskConfig::Knapsack { .. } => run_knapsack(cfg, exec),
        TaskConfig::Dyck { .. } => run_dyck(cfg, exec, cache),
    }
}

/// The task's generator: builtin, or an external process speaking the
/// line protocol, then the configured decoding transform.
fn base_oracle(cfg: &ExperimentConfig, builtin: OracleHandle) -> Result<OracleHandle, HarnessError> {
    match &cfg.oracle {
        OracleSource::Builtin => Ok(builtin),
        source => Ok(connect(source, builtin.vocab_size())?),
    }
}

fn decoded(cfg: &SamplerConfig, oracle: OracleHandle) -> Result<OracleHandle, HarnessError> {
    let transform = cfg.decoding();
    if transform.is_identity() {
        return Ok(oracle);
    }
    let wrapped = DecodedOracle::new(oracle, transform)
        .map_err(|e| HarnessError::validation("sampler.top_p/temperature", e.to_string()))?;
    Ok(OracleHandle::new(wrapped))
}

fn with_noise(cfg: &ExperimentConfig, verifier: VerifierHandle) -> Result<VerifierHandle, HarnessError> {
    match cfg.verifier {
        VerifierConfig::Noisy { false_reject_rate, false_accept_rate, depth_bias } => {
            let mut spec = NoisyVerifierSpec::new(
                verifier,
                false_reject_rate,
                false_accept_rate,
                derive_seed(cfg.seed, &[TAG_VERIFIER]),
            );
            spec.depth_bias = depth_bias;
            noisy_verifier(spec).map_err(|e| HarnessError::validation("verifier", e.to_string()))
        }
        _ => Ok(verifier),
    }
}

/// A configured sampler over one generator and its verifiers. `d` is the
/// total output length; prompts count towards it.
struct Runner {
    cfg: SamplerConfig,
    oracle: OracleHandle,
    process: VerifierHandle,
    member: VerifierHandle,
    scorer: BlockScorer,
    d: usize,
}

impl Runner {
    fn new(cfg: &SamplerConfig, oracle: OracleHandle, process: VerifierHandle, member: VerifierHandle, d: usize) -> Self {
        let scorer = BlockScorer::from_verifier(BlockSplitter::FixedWidth(cfg.block_width), process.clone());
        Self { cfg: cfg.clone(), oracle, process, member, scorer, d }
    }
}

impl Sampler for Runner {
    fn sample(&self, prompt: &[TokenId], rng: &mut RandomStream) -> Result<SampleTrace, SampleError> {
        let remaining = self.d.saturating_sub(prompt.len());
        let s = &self.cfg;
        match s.kind {
            SamplerKind::Rejection => rejection_sample(prompt, &self.oracle, &self.member, remaining, s.caps(), rng),
            SamplerKind::Tokenwise => {
                tokenwise_rejection_sample(prompt, &self.oracle, &self.process, remaining, s.caps(), rng)
            }
            SamplerKind::Backtrack | SamplerKind::BacktrackNoArgmax => {
                let max_len = match s.scope {
                    EraseScope::Completion => remaining.max(1),
                    EraseScope::Sequence => self.d,
                };
                let bc = BacktrackConfig::new(max_len, s.quota, s.stride)?.with_scope(s.scope);
                if s.kind == SamplerKind::Backtrack {
                    backtracking_sample(prompt, &self.oracle, &self.process, &bc, s.caps(), rng)
                } else {
                    backtracking_sample_no_argmax(prompt, &self.oracle, &self.process, &bc, s.caps(), rng)
                }
            }
            SamplerKind::BlockBon => block_best_of_n(prompt, &self.oracle, &self.scorer, s.n, remaining, rng),
            SamplerKind::Greedy => greedy_sample(prompt, &self.oracle, remaining),
            SamplerKind::SecretSearch => Err(SampleError::InvalidConfig {
                name: "sampler.kind",
                detail: "secret-search is not a sampler".into(),
            }),
        }
    }
}

fn mean_se(values: &[f64]) -> (f64, Option<f64>) {
    let est = MeanEstimate::from_values(values);
    (est.mean, Some(est.std_err))
}

fn proportion(hits: usize, n: usize) -> (f64, Option<f64>) {
    let p = hits as f64 / n.max(1) as f64;
    (p, Some((p * (1.0 - p) / n.max(1) as f64).sqrt()))
}

/// Call, status and success metrics shared by the full-length tasks.
fn trace_metrics(traces: &[SampleTrace], is_member: impl Fn(&[TokenId]) -> bool) -> Vec<Metric> {
    let n = traces.len();
    let calls: Vec<f64> = traces.iter().map(|t| t.oracle_calls as f64).collect();
    let attempts: Vec<f64> = traces.iter().map(|t| t.attempts as f64).collect();
    let capped = traces.iter().filter(|t| t.status == TraceStatus::CapExhausted).count();
    let successes = traces.iter().filter(|t| t.is_success() && is_member(&t.output)).count();
    let (mc, mc_se) = mean_se(&calls);
    let (ma, ma_se) = mean_se(&attempts);
    let (sr, sr_se) = proportion(successes, n);
    let (cf, cf_se) = proportion(capped, n);
    vec![
        metric("mean_calls", mc, mc_se),
        metric("mean_attempts", ma, ma_se),
        metric("success_rate", sr, sr_se),
        metric("cap_exhausted_fraction", cf, cf_se),
    ]
}

fn run_uniform(
    cfg: &ExperimentConfig,
    d: usize,
    target: TargetSet,
    distribution: bool,
    exec: Execution,
) -> Result<Outcome, HarnessError> {
    let oracle = decoded(&cfg.sampler, base_oracle(cfg, OracleHandle::new(UniformOracle::binary()))?)?;
    let membership: fn(&[TokenId]) -> bool = match target {
        TargetSet::AllZeros => |s| s.iter().all(|&t| t == 0),
        TargetSet::HasZero => |s| s.contains(&0),
    };
    let completable: fn(&[TokenId], usize) -> bool = match target {
        TargetSet::AllZeros => all_zeros_completable,
        TargetSet::HasZero => has_zero_completable,
    };
    let process = with_noise(cfg, perfect_process_verifier(format!("{target:?}"), move |s| completable(s, d)))?;
    let member = with_noise(cfg, membership_verifier(format!("{target:?}"), d, membership))?;
    let runner = Runner::new(&cfg.sampler, oracle.clone(), process.clone(), member, d);

    let references = if distribution {
        let clean_process = perfect_process_verifier("exact", move |s| completable(s, d));
        Some((restricted_pmf(&oracle, |s| s.len() == d && membership(s), d), tokenwise_pmf(&oracle, &clean_process, d)))
    } else {
        None
    };

    let mut outcome = Outcome::default();
    for rep in 0..cfg.repetitions {
        let traces = run_episodes(cfg.episodes, episode_seed(cfg, rep), exec, |_, rng| runner.sample(&[], rng))?;
        let mut metrics = trace_metrics(&traces, |s| s.len() == d && membership(s));
        if let Some((restricted, tokenwise)) = &references {
            let empirical = empirical_pmf(traces.iter().filter(|t| t.is_success()).map(|t| &t.output));
            metrics.push(metric("tv_restricted", total_variation(&empirical, restricted), None));
            metrics.push(metric("tv_tokenwise_law", total_variation(&empirical, tokenwise), None));
        }
        outcome.per_rep.push(metrics);
    }
    Ok(outcome)
}

fn run_parity(cfg: &ExperimentConfig, d: usize, exec: Execution) -> Result<Outcome, HarnessError> {
    let mut outcome = Outcome::default();
    for rep in 0..cfg.repetitions {
        let seed = episode_seed(cfg, rep);
        let metrics = if cfg.sampler.kind == SamplerKind::SecretSearch {
            let found = try_map_indexed(exec, cfg.episodes, |i| -> Result<(f64, bool), HarnessError> {
                let spec = ParityOracleSpec::random(d, &mut RandomStream::new(seed, i as u64));
                let search = sequential_secret_search(&ParityOracle { spec: spec.clone() }, d)?;
                Ok((search.probes as f64, search.secret.as_ref() == Some(&spec.secret)))
            })?;
            let probes: Vec<f64> = found.iter().map(|f| f.0).collect();
            let (mp, mp_se) = mean_se(&probes);
            let (sr, sr_se) = proportion(found.iter().filter(|f| f.1).count(), found.len());
            vec![metric("mean_probes", mp, mp_se), metric("success_rate", sr, sr_se)]
        } else {
            let traces = run_episodes(cfg.episodes, seed, exec, |_, rng| {
                let spec = ParityOracleSpec::random(d, rng);
                let secret = spec.secret.clone();
                let oracle = decoded(&cfg.sampler, OracleHandle::new(ParityOracle { spec }))
                    .map_err(|e| SampleError::InvalidConfig { name: "sampler", detail: e.to_string() })?;
                let process = VerifierHandle::new(FnVerifier::new("parity-completable", move |s: &[TokenId]| {
                    if s.len() < d {
                        s.len() <= secret.len() && secret.starts_with(s)
                    } else {
                        parity_membership(s, d)
                    }
                }));
                let process = with_noise(cfg, process)
                    .map_err(|e| SampleError::InvalidConfig { name: "verifier", detail: e.to_string() })?;
                let member = with_noise(cfg, membership_verifier("even-parity", d, move |s| parity_membership(s, d)))
                    .map_err(|e| SampleError::InvalidConfig { name: "verifier", detail: e.to_string() })?;
                Runner::new(&cfg.sampler, oracle, process, member, d).sample(&[], rng)
            })?;
            trace_metrics(&traces, |s| parity_membership(s, d))
        };
        outcome.per_rep.push(metrics);
    }
    Ok(outcome)
}

fn run_knapsack(cfg: &ExperimentConfig, exec: Execution) -> Result<Outcome, HarnessError> {
    let TaskConfig::Knapsack { d, weight_mode, max_weight, instances } = cfg.task else {
        unreachable!("knapsack task")
    };
    let oracle = decoded(&cfg.sampler, base_oracle(cfg, OracleHandle::new(UniformOracle::binary()))?)?;
    let mut runners = Vec::with_capacity(instances);
    for k in 0..instances {
        let mut rng = RandomStream::new(derive_seed(cfg.seed, &[TAG_INSTANCES]), k as u64);
        let inst = gen_knapsack_instance(d, weight_mode, max_weight, &mut rng)?;
        let solver = Arc::new(KnapsackSolver::new(inst.clone()));
        let process = with_noise(cfg, perfect_process_verifier("knapsack-dp", move |s| solver.completable(s)))?;
        let check = inst.clone();
        let member = with_noise(cfg, membership_verifier("knapsack", d, move |s| knapsack_membership(s, &check)))?;
        runners.push((inst, Runner::new(&cfg.sampler, oracle.clone(), process, member, d)));
    }

    let mut outcome = Outcome::default();
    for rep in 0..cfg.repetitions {
        let mut all = Vec::with_capacity(instances * cfg.episodes);
        let mut per_instance = Vec::new();
        for (k, (inst, runner)) in runners.iter().enumerate() {
            let seed = derive_seed(episode_seed(cfg, rep), &[k as u64]);
            let traces = run_episodes(cfg.episodes, seed, exec, |_, rng| runner.sample(&[], rng))?;
            let calls: Vec<f64> = traces.iter().map(|t| t.oracle_calls as f64).collect();
            let (mc, mc_se) = mean_se(&calls);
            let ok = traces.iter().filter(|t| t.is_success() && knapsack_membership(&t.output, inst)).count();
            let (sr, sr_se) = proportion(ok, traces.len());
            per_instance.push(metric(format!("instance/{k:03}/mean_calls"), mc, mc_se));
            per_instance.push(metric(format!("instance/{k:03}/success_rate"), sr, sr_se));
            all.extend(traces.into_iter().map(|t| (k, t)));
        }
        let traces: Vec<SampleTrace> = all.iter().map(|(_, t)| t.clone()).collect();
        let mut metrics = trace_metrics(&traces, |_| true);
        // success must be judged against each trace's own instance
        let ok = all.iter().filter(|(k, t)| t.is_success() && knapsack_membership(&t.output, &runners[*k].0)).count();
        let (sr, sr_se) = proportion(ok, all.len());
        metrics[2] = metric("success_rate", sr, sr_se);
        let solved = (0..instances)
            .filter(|&k| all.iter().filter(|(j, _)| *j == k).all(|(_, t)| t.is_success() && knapsack_membership(&t.output, &runners[k].0)))
            .count();
        metrics.push(metric("instances_always_solved", solved as f64, None));
        metrics.extend(per_instance);
        outcome.per_rep.push(metrics);
    }
    Ok(outcome)
}

struct DyckSetup {
    params: DyckParams,
    clean: OracleHandle,
    generator: OracleHandle,
    prompts: Vec<TokenString>,
    extra: Vec<Metric>,
}

fn ood_prompts(
    n: usize,
    d: usize,
    q: f64,
    (p, lo, hi): (f64, usize, usize),
    seed: u64,
) -> Result<Vec<TokenString>, HarnessError> {
    let params = DyckParams::new(d, p, q)?;
    Ok(dyck::dyck_ood_prompts(n, &params, lo..=hi, &mut RandomStream::new(seed, 0))?)
}

fn prompt_shape(prompts: &PromptSource) -> (f64, usize, usize) {
    match *prompts {
        PromptSource::Ood { p, min_len, max_len } | PromptSource::Harvest { p, min_len, max_len, .. } => {
            (p, min_len, max_len)
        }
        PromptSource::Empty => (0.8, 25, 31),
    }
}

fn corruption_builder(
    clean: &OracleHandle,
    c: &CorruptionConfig,
    seed: u64,
) -> impl Fn(f64) -> Result<OracleHandle, btlab_core::corruption::CorruptionError> {
    let base = clean.clone();
    let mode = c.mode;
    let trigger = c.depth_threshold.map_or(CorruptionTrigger::Always, CorruptionTrigger::DepthAbove);
    let seed = derive_seed(seed, &[TAG_CORRUPTION]);
    move |epsilon| corrupt_oracle(CorruptionSpec { base: base.fresh_counter(), epsilon, mode, trigger, seed })
}

fn dyck_setup(cfg: &ExperimentConfig, exec: Execution, cache: &mut RunCache) -> Result<DyckSetup, HarnessError> {
    let TaskConfig::Dyck { d, p, q, prompts, corruption, .. } = &cfg.task else { unreachable!("dyck task") };
    let (d, q) = (*d, *q);
    let params = DyckParams::new(d, *p, q)?;
    let clean = base_oracle(cfg, OracleHandle::new(DyckOracle::new(params)))?;
    let shape = prompt_shape(prompts);
    let mut extra = Vec::new();

    let generator = match corruption {
        None => clean.clone(),
        Some(c) => {
            let build = corruption_builder(&clean, c, cfg.seed);
            let epsilon = match (c.epsilon, c.calibrate_to) {
                (Some(eps), _) => eps,
                (None, Some(target)) => {
                    let key = serde_json::json!(["cal", cfg.seed, d, p, q, c, shape.0, shape.1, shape.2, cfg.oracle])
                        .to_string();
                    if !cache.calibrations.contains_key(&key) {
                        let seed = derive_seed(cfg.seed, &[TAG_CALIBRATION]);
                        let cal_prompts = ood_prompts(c.calibration_prompts, d, q, shape, seed)?;
                        let cal = calibrate_epsilon(
                            &build,
                            &cal_prompts,
                            d,
                            target,
                            CALIBRATION_TOLERANCE,
                            CALIBRATION_PROBES,
                            derive_seed(seed, &[1]),
                            exec,
                        )?;
                        info!("calibrated epsilon {:.6} (validity {:.4})", cal.epsilon, cal.validity);
                        cache.calibrations.insert(key.clone(), cal);
                    }
                    let cal = cache.calibrations[&key];
                    extra.push(metric("calibrated_epsilon", cal.epsilon, None));
                    extra.push(metric("calibrated_validity", cal.validity, None));
                    cal.epsilon
                }
                (None, None) => unreachable!("validated"),
            };
            build(epsilon)?
        }
    };

    let prompt_seed = derive_seed(cfg.seed, &[TAG_PROMPTS]);
    let prompt_list = match prompts {
        PromptSource::Empty => vec![TokenString::default(); cfg.episodes],
        PromptSource::Ood { .. } => ood_prompts(cfg.episodes, d, q, shape, prompt_seed)?,
        PromptSource::Harvest { pool, budget, .. } => {
            let key = serde_json::json!(["harvest", cfg.seed, d, p, q, corruption, prompts, cfg.episodes, cfg.oracle])
                .to_string();
            if !cache.harvests.contains_key(&key) {
                let pool = ood_prompts(*pool, d, q, shape, prompt_seed)?;
                let seed = derive_seed(cfg.seed, &[TAG_HARVEST]);
                let found = harvest_error_inducing_prefixes(&generator, &pool, d, cfg.episodes, *budget, seed, exec)?;
                cache.harvests.insert(key.clone(), found.into_iter().map(|h| h.prefix).collect());
            }
            cache.harvests[&key].clone()
        }
    };
    Ok(DyckSetup { params, clean, generator, prompts: prompt_list, extra })
}

fn run_dyck(cfg: &ExperimentConfig, exec: Execution, cache: &mut RunCache) -> Result<Outcome, HarnessError> {
    let TaskConfig::Dyck { diversity_k: k, .. } = cfg.task else { unreachable!("dyck task") };
    let setup = dyck_setup(cfg, exec, cache)?;
    let d = setup.params.d;
    let process = match cfg.verifier {
        VerifierConfig::Threshold { threshold } => {
            let clean = setup.clean.fresh_counter();
            VerifierHandle::new(FnVerifier::new(format!("dyck-threshold({threshold})"), move |s: &[TokenId]| {
                match s.split_last() {
                    None => true,
                    Some((&last, head)) => {
                        clean.query(head).map(|dist| dist.prob(last as usize)).unwrap_or(0.0) >= threshold
                    }
                }
            }))
        }
        _ => with_noise(cfg, dyck_process_verifier(d))?,
    };
    let member = with_noise(cfg, membership_verifier("dyck", d, move |s| dyck::dyck_is_member(s, d)))?;
    let oracle = decoded(&cfg.sampler, setup.generator.fresh_counter())?;
    let runner = Runner::new(&cfg.sampler, oracle, process, member, d);
    let prompts = &setup.prompts;

    let mut outcome = Outcome::default();
    for rep in 0..cfg.repetitions {
        let seed = episode_seed(cfg, rep);
        let metrics = match k {
            Some(k) => {
                let counts = try_map_indexed(exec, prompts.len(), |i| {
                    diversity_k(&runner, &prompts[i], k, &mut RandomStream::new(seed, i as u64))
                })?;
                let counts: Vec<f64> = counts.into_iter().map(|c| c as f64).collect();
                let (m, se) = mean_se(&counts);
                vec![metric("diversity", m, se)]
            }
            None => dyck_accuracy_metrics(&runner, prompts, d, seed, exec)?,
        };
        outcome.per_rep.push(metrics);
    }
    outcome.extra = setup.extra;
    outcome.extra.push(metric("prompts", prompts.len() as f64, None));
    Ok(outcome)
}

fn dyck_accuracy_metrics(
    runner: &Runner,
    prompts: &[TokenString],
    d: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Metric>, HarnessError> {
    let traces = try_map_indexed(exec, prompts.len(), |i| runner.sample(&prompts[i], &mut RandomStream::new(seed, i as u64)))?;
    let n = traces.len();
    let kinds: Vec<Option<dyck::DyckErrorKind>> = traces.iter().map(|t| dyck::classify_error(&t.output, d)).collect();
    let errors = kinds.iter().filter(|k| k.is_some()).count();
    let (acc, acc_se) = proportion(n - errors, n);
    let calls: Vec<f64> = traces.iter().map(|t| t.oracle_calls as f64).collect();
    let backtracks: Vec<f64> = traces.iter().map(|t| f64::from(t.backtracks_used)).collect();
    let (mc, mc_se) = mean_se(&calls);
    let (mb, mb_se) = mean_se(&backtracks);
    let mut metrics = vec![
        metric("errors", errors as f64, acc_se.map(|se| se * n as f64)),
        metric("accuracy", acc, acc_se),
        metric("mean_oracle_calls", mc, mc_se),
        metric("mean_backtracks", mb, mb_se),
    ];
    for kind in [
        dyck::DyckErrorKind::MismatchedClose,
        dyck::DyckErrorKind::UnmatchedClose,
        dyck::DyckErrorKind::Overflow,
        dyck::DyckErrorKind::TooLong,
        dyck::DyckErrorKind::TooShort,
    ] {
        let count = kinds.iter().filter(|k| **k == Some(kind)).count();
        metrics.push(metric(format!("errors.{}", kind.name()), count as f64, None));
    }
    Ok(metrics)
}
