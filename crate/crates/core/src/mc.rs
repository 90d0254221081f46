//! Monte Carlo harness for the random-effects model and the split-sample
//! Studentized statistic `T = sqrt(n) Xbar_n / S_m`, with
//! `S_m^2 = (1/2m) sum (Y_{2k-1} - Y_{2k})^2`.
//!
//! Every block of trials draws from its own ChaCha8 stream keyed by
//! `(seed, block index)`, and block results are reduced in index order, so
//! estimates are bit-identical for any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::ldp::{legendre, CgfModel, Family};
use crate::numerics::EULER_GAMMA;

/// Nulls per replicate batch in [`simulate_pfdr`].
pub const BATCH_SIZE: usize = 10_000;

/// Trials per RNG stream in [`tail_ratio_mc`] and [`calibrate_threshold`].
pub const TRIAL_BLOCK: u64 = 1 << 16;

/// Minimum hit count for either event of a tail ratio.
pub const MIN_HITS: u64 = 100;

/// Stream offset for pilot runs, keeping them disjoint from production streams.
const PILOT_STREAM: u64 = 1 << 62;

/// Growth of the rejection threshold with the total sample size `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Fixed,
    /// `z_N = z0 ln(1 + ln(1 + N))`.
    LogLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdSchedule {
    kind: ScheduleKind,
    z0: f64,
}

impl ThresholdSchedule {
    pub fn new(kind: ScheduleKind, z0: f64) -> Result<Self> {
        if !(z0 > 0.0 && z0.is_finite()) {
            return Err(invalid(format!("threshold z0 must be positive, got {z0}")));
        }
        Ok(Self { kind, z0 })
    }

    pub fn fixed(z0: f64) -> Result<Self> {
        Self::new(ScheduleKind::Fixed, z0)
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    /// Growth factor multiplying `z0` at total size `N`.
    pub fn factor(kind: ScheduleKind, total: u64) -> f64 {
        match kind {
            ScheduleKind::Fixed => 1.0,
            ScheduleKind::LogLog => (1.0 + (1.0 + total as f64).ln()).ln(),
        }
    }

    pub fn z(&self, total: u64) -> f64 {
        self.z0 * Self::factor(self.kind, total)
    }
}

/// A simulation scenario. `effect` is the shift `d` for observation families
/// and the parameter `theta` for score families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimScenario {
    pub family: Family,
    pub effect: f64,
    pub pi: f64,
    pub n: u64,
    pub m: u64,
    pub schedule: ThresholdSchedule,
    pub trials: u64,
    pub seed: u64,
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.m < 1 {
            return Err(invalid(format!("n and m must be at least 1, got n={}, m={}", self.n, self.m)));
        }
        if self.trials < 1 {
            return Err(invalid("trials must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(invalid(format!("pi must lie in [0, 1], got {}", self.pi)));
        }
        if !(self.effect >= 0.0 && self.effect.is_finite()) {
            return Err(invalid(format!("effect must be nonnegative, got {}", self.effect)));
        }
        if self.family.is_score() && self.effect > 1.0 {
            return Err(invalid("score-family parameter theta must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.n + self.m
    }

    pub fn threshold(&self) -> f64 {
        self.schedule.z(self.total())
    }
}

fn block_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One observation of the family under effect `e`.
fn draw(family: &Family, e: f64, rng: &mut ChaCha8Rng) -> f64 {
    match *family {
        Family::Normal { sigma } => e + sigma * rng.sample::<f64, _>(StandardNormal),
        Family::Uniform { width } => e + width * (rng.random::<f64>() - 0.5),
        Family::CenteredGamma { shape, scale } => {
            e + Gamma::new(shape, scale).expect("validated gamma").sample(rng) - shape * scale
        }
        Family::NormalScore { sigma } => {
            let omega = e + sigma * rng.sample::<f64, _>(StandardNormal);
            omega / (sigma * sigma)
        }
        Family::CauchyScore => {
            let omega = e + (std::f64::consts::PI * (rng.random::<f64>() - 0.5)).tan();
            2.0 * omega / (1.0 + omega * omega)
        }
        Family::GammaScore => {
            let omega: f64 = Gamma::new(1.0 + e, 1.0).expect("validated gamma").sample(rng);
            omega.ln() + EULER_GAMMA
        }
    }
}

/// `(Xbar_n, S_m)` under effect `e`; the shift families add `e` after drawing,
/// so paired calls on equal streams see common random numbers.
fn draw_stats(family: &Family, e: f64, n: u64, m: u64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    match *family {
        Family::Normal { sigma } => {
            let z: f64 = rng.sample(StandardNormal);
            let chi2 = ChiSquared::new(m as f64).expect("m >= 1").sample(rng);
            (e + sigma * z / (n as f64).sqrt(), sigma * (chi2 / m as f64).sqrt())
        }
        Family::NormalScore { sigma } => {
            let z: f64 = rng.sample(StandardNormal);
            let chi2 = ChiSquared::new(m as f64).expect("m >= 1").sample(rng);
            (e / (sigma * sigma) + z / (sigma * (n as f64).sqrt()), (chi2 / m as f64).sqrt() / sigma)
        }
        Family::Uniform { .. } | Family::CenteredGamma { .. } => {
            let (xbar, s) = draw_stats_raw(family, 0.0, n, m, rng);
            (xbar + e, s)
        }
        _ => draw_stats_raw(family, e, n, m, rng),
    }
}

fn draw_stats_raw(family: &Family, e: f64, n: u64, m: u64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let mut sum = 0.0;
    for _ in 0..n {
        sum += draw(family, e, rng);
    }
    let mut ss = 0.0;
    for _ in 0..m {
        let diff = draw(family, e, rng) - draw(family, e, rng);
        ss += diff * diff;
    }
    (sum / n as f64, (ss / (2.0 * m as f64)).sqrt())
}

/// Sum of `xs` by recursive halving, in index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// pFDR estimate from replicate batches of [`BATCH_SIZE`] nulls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PfdrEstimate {
    pub pfdr_hat: f64,
    pub stderr: f64,
    pub rejections: u64,
    pub false_rejections: u64,
    /// Batches with at least one rejection; only these enter the estimate.
    pub batches_used: u64,
    pub batches: u64,
    pub threshold: f64,
}

/// Estimates `E[V/R | R > 0]` for the scenario, with `trials` batches.
pub fn simulate_pfdr(scn: &SimScenario) -> Result<PfdrEstimate> {
    scn.validate()?;
    let z = scn.threshold();
    let per_batch: Vec<(u64, u64)> = (0..scn.trials)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(scn.seed, b);
            let (mut v, mut r) = (0u64, 0u64);
            for _ in 0..BATCH_SIZE {
                let false_null = rng.random::<f64>() < scn.pi;
                let e = if false_null { scn.effect } else { 0.0 };
                let (xbar, s) = draw_stats(&scn.family, e, scn.n, scn.m, &mut rng);
                if xbar >= z * s {
                    r += 1;
                    if !false_null {
                        v += 1;
                    }
                }
            }
            (v, r)
        })
        .collect();
    let ratios: Vec<f64> = per_batch.iter().filter(|b| b.1 > 0).map(|&(v, r)| v as f64 / r as f64).collect();
    let rejections: u64 = per_batch.iter().map(|b| b.1).sum();
    let false_rejections: u64 = per_batch.iter().map(|b| b.0).sum();
    if ratios.is_empty() {
        return Err(Error::DegenerateScenario {
            rejection_prob: rejections as f64 / (scn.trials as f64 * BATCH_SIZE as f64),
        });
    }
    let k = ratios.len() as f64;
    let mean = pairwise_sum(&ratios) / k;
    let dev: Vec<f64> = ratios.iter().map(|x| (x - mean) * (x - mean)).collect();
    let stderr = if ratios.len() > 1 { (pairwise_sum(&dev) / (k - 1.0) / k).sqrt() } else { f64::INFINITY };
    Ok(PfdrEstimate {
        pfdr_hat: mean,
        stderr,
        rejections,
        false_rejections,
        batches_used: ratios.len() as u64,
        batches: scn.trials,
        threshold: z,
    })
}

/// Tail-probability ratio on common random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRatio {
    pub ratio_hat: f64,
    pub stderr: f64,
    pub numerator_hits: u64,
    pub denominator_hits: u64,
    pub trials: u64,
    /// Effect `T/N` applied in the numerator.
    pub effect: f64,
    pub threshold: f64,
}

impl TailRatio {
    pub fn denominator_prob(&self) -> f64 {
        self.denominator_hits as f64 / self.trials as f64
    }
}

#[derive(Default, Clone, Copy)]
struct PairCounts {
    both: u64,
    num_only: u64,
    den_only: u64,
}

/// Estimates `P_{T/N}(Xbar >= z S) / P_0(Xbar >= z S)`; the scenario's own
/// `effect` and `pi` are ignored.
pub fn tail_ratio_mc(scn: &SimScenario, t_target: f64) -> Result<TailRatio> {
    scn.validate()?;
    if !(t_target >= 0.0 && t_target.is_finite()) {
        return Err(invalid(format!("T must be nonnegative, got {t_target}")));
    }
    let effect = t_target / scn.total() as f64;
    if scn.family.is_score() && effect > 1.0 {
        return Err(invalid("T/N exceeds the score-family parameter range [0, 1]"));
    }
    let z = scn.threshold();
    let blocks = scn.trials.div_ceil(TRIAL_BLOCK);
    let per_block: Vec<PairCounts> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let len = TRIAL_BLOCK.min(scn.trials - b * TRIAL_BLOCK);
            let mut null_rng = block_rng(scn.seed, b);
            let mut alt_rng = block_rng(scn.seed, b);
            let mut c = PairCounts::default();
            for _ in 0..len {
                let (x0, s0) = draw_stats(&scn.family, 0.0, scn.n, scn.m, &mut null_rng);
                let (x1, s1) = draw_stats(&scn.family, effect, scn.n, scn.m, &mut alt_rng);
                match (x1 >= z * s1, x0 >= z * s0) {
                    (true, true) => c.both += 1,
                    (true, false) => c.num_only += 1,
                    (false, true) => c.den_only += 1,
                    (false, false) => {}
                }
            }
            c
        })
        .collect();
    let mut c = PairCounts::default();
    for p in &per_block {
        c.both += p.both;
        c.num_only += p.num_only;
        c.den_only += p.den_only;
    }
    let numerator = c.both + c.num_only;
    let denominator = c.both + c.den_only;
    if numerator < MIN_HITS || denominator < MIN_HITS {
        return Err(Error::InsufficientHits { numerator, denominator, required: MIN_HITS });
    }
    let ratio = numerator as f64 / denominator as f64;
    // delta method: Var(a/b) ~ Var(a_i - R b_i) / (N bbar^2)
    let nt = scn.trials as f64;
    let ssq = c.both as f64 * (1.0 - ratio).powi(2) + c.num_only as f64 + c.den_only as f64 * ratio * ratio;
    let var_i = ssq / nt;
    let bbar = denominator as f64 / nt;
    let stderr = (var_i / nt).sqrt() / bbar;
    Ok(TailRatio {
        ratio_hat: ratio,
        stderr,
        numerator_hits: numerator,
        denominator_hits: denominator,
        trials: scn.trials,
        effect,
        threshold: z,
    })
}

/// Picks `z0` so that the null rejection probability `P_0(Xbar >= z_N S)` is
/// about `target_prob`, from the empirical quantile of `Xbar/S` over
/// `pilot_trials` null draws.
pub fn calibrate_threshold(
    family: &Family,
    n: u64,
    m: u64,
    kind: ScheduleKind,
    target_prob: f64,
    pilot_trials: u64,
    seed: u64,
) -> Result<ThresholdSchedule> {
    if !(target_prob > 0.0 && target_prob < 0.5) {
        return Err(invalid(format!("target rejection probability must lie in (0, 0.5), got {target_prob}")));
    }
    let expected_hits = target_prob * pilot_trials as f64;
    if expected_hits < MIN_HITS as f64 {
        return Err(invalid(format!(
            "{pilot_trials} pilot trials give about {expected_hits:.1} exceedances; need {MIN_HITS}"
        )));
    }
    if n < 1 || m < 1 {
        return Err(invalid("n and m must be at least 1"));
    }
    let blocks = pilot_trials.div_ceil(TRIAL_BLOCK);
    let mut stats: Vec<f64> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let len = TRIAL_BLOCK.min(pilot_trials - b * TRIAL_BLOCK);
            let mut rng = block_rng(seed, PILOT_STREAM + b);
            (0..len)
                .map(|_| {
                    let (x, s) = draw_stats(family, 0.0, n, m, &mut rng);
                    x / s
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let k = ((1.0 - target_prob) * stats.len() as f64).floor() as usize;
    let k = k.min(stats.len() - 1);
    let (_, q, _) = stats.select_nth_unstable_by(k, f64::total_cmp);
    let q = *q;
    if !(q > 0.0) {
        return Err(invalid(format!("calibrated threshold {q} is not positive")));
    }
    ThresholdSchedule::new(kind, q / ThresholdSchedule::factor(kind, n + m))
}

/// Bahadur–Rao approximation `exp(-n Lambda*(u)) / (eta sqrt(2 pi n Lambda''(eta)))`
/// to `P(Xbar_n >= u)`.
///
/// Fails with a range error when `eta sqrt(n Lambda''(eta)) < 1`, where the
/// prefactor is meaningless.
pub fn bahadur_rao_tail(cgf: &dyn CgfModel, u: f64, n: u64) -> Result<f64> {
    if !(u > 0.0) || n < 1 {
        return Err(Error::Range { target: u });
    }
    let (rate, eta) = legendre(cgf, u)?;
    let scale = eta * (n as f64 * cgf.d2(eta)).sqrt();
    if !(scale >= 1.0) {
        return Err(Error::Range { target: u });
    }
    Ok((-(n as f64) * rate).exp() / (scale * (2.0 * std::f64::consts::PI).sqrt()))
}
