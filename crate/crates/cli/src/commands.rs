//! Typed requests built from a [`RunConfig`], and their execution.

use std::path::PathBuf;

use pfdr_sizer::f_test::{plan_f, FEffect};
use pfdr_sizer::ldp::{
    empirical_cgf, legendre, n_star_general, n_star_score, optimal_split, pfdr_floor_limit, solve_t0, split_objective,
    CgfModel, EmpiricalCgf, Family, KfMode, PsiModel, SplitOptimum, SplitSpec, TailIndex, ZetaKind,
};
use pfdr_sizer::mc::{
    calibrate_threshold, simulate_pfdr, tail_ratio_mc, ScheduleKind, SimScenario, ThresholdSchedule,
};
use pfdr_sizer::normal_t::{plan_t, plan_t_mixture, SnrEffect, SnrMixture};
use pfdr_sizer::{Error, PfdrTarget, PlanReport};
use serde_json::{json, Map, Value};

use crate::config::{usage, Command, RunConfig, UsageError};
use crate::report::{num, Report, Status};

/// A distribution family as given on the command line.
#[derive(Debug, Clone)]
pub enum FamilySpec {
    Builtin(Family),
    Empirical { path: PathBuf, grid: Vec<f64>, tail_lambda: f64 },
}

#[derive(Debug, Clone)]
pub enum Request {
    PlanT { target: PfdrTarget, snr: SnrEffect, n_max: u64 },
    PlanTMixture { target: PfdrTarget, mixture: SnrMixture, n_max: u64 },
    PlanF { target: PfdrTarget, effect: FEffect, n_max: u64 },
    PlanGeneral { target: PfdrTarget, family: FamilySpec, split: SplitSpec, d: f64 },
    PlanScore { target: PfdrTarget, family: Family, split: SplitSpec, theta: f64 },
    OptimizeSplit { family: FamilySpec },
    LdpInfo { family: FamilySpec, split: SplitSpec, u: Option<f64> },
    Simulate(SimRequest),
}

#[derive(Debug, Clone, Copy)]
pub enum SimMode {
    Pfdr,
    TailRatio { t_target: f64 },
}

#[derive(Debug, Clone)]
pub struct SimRequest {
    pub family: Family,
    pub mode: SimMode,
    pub pi: f64,
    pub effect: f64,
    pub n: u64,
    pub m: u64,
    pub kind: ScheduleKind,
    pub z0: Option<f64>,
    pub trials: u64,
    pub target_prob: f64,
    pub pilot_trials: u64,
}

fn core_usage(key: &str) -> impl Fn(Error) -> UsageError + '_ {
    move |e| usage(format!("invalid '{key}': {e}"))
}

fn target(cfg: &RunConfig) -> Result<PfdrTarget, UsageError> {
    let alpha = cfg.f64("alpha")?;
    let pi = cfg.f64("pi")?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(usage(format!("key 'alpha' must lie in (0, 1), got {alpha}")));
    }
    if !(pi > 0.0 && pi < 1.0) {
        return Err(usage(format!("key 'pi' must lie in (0, 1), got {pi}")));
    }
    PfdrTarget::new(alpha, pi).map_err(core_usage("alpha"))
}

fn split(cfg: &RunConfig) -> Result<SplitSpec, UsageError> {
    SplitSpec::new(cfg.f64("rho")?).map_err(core_usage("rho"))
}

fn positive(cfg: &RunConfig, key: &str) -> Result<f64, UsageError> {
    let v = cfg.f64(key)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(usage(format!("key '{key}' must be positive, got {v}")))
    }
}

fn builtin(cfg: &RunConfig) -> Result<Option<Family>, UsageError> {
    let name = cfg.required("family")?;
    let f = match name {
        "normal" => Family::normal(cfg.f64("sigma")?).map_err(core_usage("sigma"))?,
        "uniform" => Family::uniform(cfg.f64("width")?).map_err(core_usage("width"))?,
        "gamma" => Family::centered_gamma(cfg.f64("shape")?, cfg.f64("scale")?).map_err(core_usage("shape"))?,
        "normal-score" => Family::normal_score(cfg.f64("sigma")?).map_err(core_usage("sigma"))?,
        "cauchy-score" => Family::CauchyScore,
        "gamma-score" => Family::GammaScore,
        "empirical" => return Ok(None),
        other => return Err(usage(format!("unknown family '{other}'"))),
    };
    Ok(Some(f))
}

fn family_spec(cfg: &RunConfig) -> Result<FamilySpec, UsageError> {
    if let Some(f) = builtin(cfg)? {
        return Ok(FamilySpec::Builtin(f));
    }
    let path = PathBuf::from(cfg.required("sample")?);
    let (lo, hi) = (cfg.f64("t_min")?, cfg.f64("t_max")?);
    let points = cfg.u64("t_points")?;
    if !(lo < 0.0 && hi > 0.0) {
        return Err(usage("the empirical grid needs t_min < 0 < t_max"));
    }
    if points < 3 {
        return Err(usage("key 't_points' must be at least 3"));
    }
    let grid = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let tail_lambda = cfg.f64("tail_lambda")?;
    TailIndex::new(tail_lambda, ZetaKind::Constant, None).map_err(core_usage("tail_lambda"))?;
    Ok(FamilySpec::Empirical { path, grid, tail_lambda })
}

fn parse_atoms(text: &str) -> Result<Vec<(f64, f64)>, UsageError> {
    text.split(',')
        .map(|pair| {
            let (r, w) = pair
                .split_once(':')
                .ok_or_else(|| usage(format!("snr_atoms entries must be r:w, got '{pair}'")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| usage(format!("snr_atoms entry '{pair}' is not numeric")))
            };
            Ok((parse(r)?, parse(w)?))
        })
        .collect()
}

impl Request {
    /// Checks every key for presence, type and range.
    pub fn from_config(cfg: &RunConfig) -> Result<Request, UsageError> {
        Ok(match cfg.command {
            Command::PlanT => Request::PlanT {
                target: target(cfg)?,
                snr: SnrEffect::new(cfg.f64("snr")?).map_err(core_usage("snr"))?,
                n_max: cfg.u64("n_max")?,
            },
            Command::PlanTMixture => {
                let scale = positive(cfg, "scale")?;
                let mixture = match cfg.required("mixture")? {
                    "gamma" => {
                        let atoms = cfg.u64("atoms")? as usize;
                        SnrMixture::gamma(cfg.f64("shape")?, cfg.f64("rate")?, atoms, scale)
                            .map_err(core_usage("mixture"))?
                    }
                    _ => SnrMixture::discrete(parse_atoms(cfg.required("snr_atoms")?)?, scale)
                        .map_err(core_usage("snr_atoms"))?,
                };
                Request::PlanTMixture { target: target(cfg)?, mixture, n_max: cfg.u64("n_max")? }
            }
            Command::PlanF => {
                let p = cfg.u64("p")?;
                Request::PlanF {
                    target: target(cfg)?,
                    effect: FEffect::new(cfg.f64("delta")?, p).map_err(core_usage("delta"))?,
                    n_max: cfg.u64("n_max")?,
                }
            }
            Command::PlanGeneral => Request::PlanGeneral {
                target: target(cfg)?,
                family: family_spec(cfg)?,
                split: split(cfg)?,
                d: positive(cfg, "d")?,
            },
            Command::PlanScore => Request::PlanScore {
                target: target(cfg)?,
                family: builtin(cfg)?.expect("score families are built in"),
                split: split(cfg)?,
                theta: positive(cfg, "theta")?,
            },
            Command::OptimizeSplit => Request::OptimizeSplit { family: family_spec(cfg)? },
            Command::LdpInfo => {
                let u = cfg.opt_f64("u")?;
                if let Some(u) = u {
                    if u <= 0.0 {
                        return Err(usage(format!("key 'u' must be positive, got {u}")));
                    }
                }
                Request::LdpInfo { family: family_spec(cfg)?, split: split(cfg)?, u }
            }
            Command::Simulate => Request::Simulate(sim_request(cfg)?),
        })
    }
}

fn sim_request(cfg: &RunConfig) -> Result<SimRequest, UsageError> {
    let family = builtin(cfg)?.expect("simulate admits built-in families only");
    let mode = match cfg.required("mode")? {
        "pfdr" => SimMode::Pfdr,
        _ => {
            let t_target = cfg.f64("t_target")?;
            if t_target < 0.0 {
                return Err(usage(format!("key 't_target' must be nonnegative, got {t_target}")));
            }
            SimMode::TailRatio { t_target }
        }
    };
    let (pi, effect) = match mode {
        SimMode::Pfdr => (cfg.f64("pi")?, cfg.f64("effect")?),
        SimMode::TailRatio { .. } => (0.0, 0.0),
    };
    let kind = match cfg.required("schedule")? {
        "fixed" => ScheduleKind::Fixed,
        "log-log" => ScheduleKind::LogLog,
        other => return Err(usage(format!("schedule must be fixed or log-log, got '{other}'"))),
    };
    let z0 = cfg.opt_f64("z0")?;
    if let Some(z) = z0 {
        ThresholdSchedule::new(kind, z).map_err(core_usage("z0"))?;
    }
    let target_prob = cfg.f64("target_prob")?;
    if !(target_prob > 0.0 && target_prob < 0.5) {
        return Err(usage(format!("key 'target_prob' must lie in (0, 0.5), got {target_prob}")));
    }
    let req = SimRequest {
        family,
        mode,
        pi,
        effect,
        n: cfg.u64("n")?,
        m: cfg.u64("m")?,
        kind,
        z0,
        trials: cfg.u64("trials")?,
        target_prob,
        pilot_trials: cfg.u64("pilot_trials")?,
    };
    if req.trials == 0 {
        return Err(usage("key 'trials' must be at least 1"));
    }
    if req.n == 0 || req.m == 0 {
        return Err(usage("keys 'n' and 'm' must be at least 1"));
    }
    if !(0.0..=1.0).contains(&pi) {
        return Err(usage(format!("key 'pi' must lie in [0, 1], got {pi}")));
    }
    if effect < 0.0 || (family.is_score() && effect > 1.0) {
        return Err(usage(format!("key 'effect' is out of range: {effect}")));
    }
    if z0.is_none() && (target_prob * req.pilot_trials as f64) < 100.0 {
        return Err(usage("pilot_trials * target_prob must reach 100 exceedances to calibrate z0"));
    }
    Ok(req)
}

enum Model {
    Builtin(Family),
    Empirical(EmpiricalCgf, f64),
}

impl Model {
    fn cgf(&self) -> &dyn CgfModel {
        match self {
            Model::Builtin(f) => f,
            Model::Empirical(e, _) => e,
        }
    }

    fn tail(&self) -> TailIndex {
        match self {
            Model::Builtin(f) => f.tail_index(),
            Model::Empirical(_, lambda) => TailIndex::new(*lambda, ZetaKind::Constant, None).expect("validated"),
        }
    }
}

fn load(spec: &FamilySpec) -> Result<Model, Failure> {
    match spec {
        FamilySpec::Builtin(f) => Ok(Model::Builtin(*f)),
        FamilySpec::Empirical { path, grid, tail_lambda } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(usage(format!("cannot read sample {}: {e}", path.display()))))?;
            let mut sample = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let x = line.parse::<f64>().map_err(|_| {
                    Failure::Usage(usage(format!("sample {} line {}: '{line}' is not a number", path.display(), i + 1)))
                })?;
                sample.push(x);
            }
            let cgf = empirical_cgf(&sample, grid).map_err(|e| Failure::Usage(usage(format!("sample: {e}"))))?;
            Ok(Model::Empirical(cgf, *tail_lambda))
        }
    }
}

/// Why a run did not produce an `ok` report.
pub enum Failure {
    Usage(UsageError),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn plan_outputs(report: &PlanReport) -> (Map<String, Value>, Map<String, Value>) {
    let mut out = Map::new();
    out.insert("n_exact".into(), report.n_exact.map_or(Value::Null, Value::from));
    out.insert("n_asymptotic".into(), num(report.n_asymptotic));
    out.insert("regime".into(), report.regime.as_str().into());
    out.insert("q_value".into(), num(report.q_value));
    out.insert("notes".into(), json!(report.notes));
    let diag = report.diagnostics.iter().map(|(k, v)| (k.clone(), num(*v))).collect();
    (out, diag)
}

fn family_label(spec: &FamilySpec) -> String {
    match spec {
        FamilySpec::Builtin(f) => f.name().to_string(),
        FamilySpec::Empirical { .. } => "empirical".into(),
    }
}

/// Runs the request; core failures become non-`ok` reports.
pub fn execute(cfg: &RunConfig) -> Result<Report, UsageError> {
    let request = Request::from_config(cfg)?;
    let mut report = Report::new(cfg);
    match run_request(&request, cfg, &mut report) {
        Ok(()) => {}
        Err(Failure::Usage(u)) => return Err(u),
        Err(Failure::Core(e)) => report.fail(&e),
    }
    Ok(report)
}

fn run_request(request: &Request, cfg: &RunConfig, report: &mut Report) -> Result<(), Failure> {
    match request {
        Request::PlanT { target, snr, n_max } => {
            let (o, d) = plan_outputs(&plan_t(target, *snr, *n_max)?);
            report.outputs = o;
            report.diagnostics = d;
        }
        Request::PlanTMixture { target, mixture, n_max } => {
            let (o, d) = plan_outputs(&plan_t_mixture(target, mixture, *n_max)?);
            report.outputs = o;
            report.diagnostics = d;
        }
        Request::PlanF { target, effect, n_max } => {
            let (o, d) = plan_outputs(&plan_f(target, *effect, *n_max)?);
            report.outputs = o;
            report.diagnostics = d;
        }
        Request::PlanGeneral { target, family, split, d } => {
            let model = load(family)?;
            let (o, diag) = plan_outputs(&n_star_general(target, model.cgf(), &model.tail(), *split, *d)?);
            report.outputs = o;
            report.diagnostics = diag;
        }
        Request::PlanScore { target, family, split, theta } => {
            let model = family.score_model()?;
            let (o, d) = plan_outputs(&n_star_score(target, &model, *split, *theta)?);
            report.outputs = o;
            report.diagnostics = d;
        }
        Request::OptimizeSplit { family } => {
            let model = load(family)?;
            let opt = optimal_split(model.cgf(), &model.tail())?;
            let o = &mut report.outputs;
            match opt {
                SplitOptimum::Interior { rho_star, objective } => {
                    o.insert("outcome".into(), "interior".into());
                    o.insert("rho_star".into(), num(rho_star));
                    o.insert("objective".into(), num(objective));
                }
                SplitOptimum::Boundary { rho, objective, upper } => {
                    o.insert("outcome".into(), "boundary".into());
                    o.insert("rho_star".into(), Value::Null);
                    o.insert("boundary_rho".into(), num(rho));
                    o.insert("boundary_side".into(), if upper { "upper" } else { "lower" }.into());
                    o.insert("objective".into(), num(objective));
                }
            }
            report.diagnostics.insert("family".into(), family_label(family).into());
            report.diagnostics.insert("tail_lambda".into(), num(model.tail().lambda));
        }
        Request::LdpInfo { family, split, u } => ldp_info(family, *split, *u, report)?,
        Request::Simulate(sim) => simulate(sim, cfg, report)?,
    }
    Ok(())
}

fn ldp_info(spec: &FamilySpec, split: SplitSpec, u: Option<f64>, report: &mut Report) -> Result<(), Failure> {
    let model = load(spec)?;
    let cgf = model.cgf();
    let tail = model.tail();
    let (lo, hi) = cgf.domain();
    let o = &mut report.outputs;
    o.insert("family".into(), family_label(spec).into());
    o.insert("family_tag".into(), cgf.family_tag().into());
    o.insert("domain_inf".into(), num(lo));
    o.insert("domain_sup".into(), num(hi));
    o.insert("variance".into(), num(cgf.d2(0.0)));
    o.insert("tail_lambda".into(), num(tail.lambda));
    o.insert(
        "zeta_kind".into(),
        match tail.zeta_kind {
            ZetaKind::Constant => "constant",
            ZetaKind::Logarithmic => "logarithmic",
        }
        .into(),
    );
    o.insert("tail_c".into(), tail.c_const.map_or(Value::Null, num));
    let t0 = solve_t0(cgf, &tail, split)?;
    o.insert("rho".into(), num(split.rho()));
    o.insert("t0".into(), num(t0));
    o.insert("lambda_d1_at_t0".into(), num(cgf.d1(t0)));
    o.insert("split_objective".into(), num(split_objective(cgf, &tail, split.rho())?));
    if let Some(u) = u {
        let (rate, eta) = legendre(cgf, u)?;
        o.insert("u".into(), num(u));
        o.insert("legendre".into(), num(rate));
        o.insert("eta".into(), num(eta));
    }
    if let FamilySpec::Builtin(f) = spec {
        if f.is_score() {
            let sm = f.score_model()?;
            o.insert("k_f".into(), num(sm.k_f()));
            o.insert(
                "k_f_mode".into(),
                match sm.k_f_mode() {
                    KfMode::SymmetricBounded => "symmetric_bounded",
                    KfMode::DensityWeighted => "density_weighted",
                }
                .into(),
            );
        }
        if let Ok(psi) = PsiModel::new(*f) {
            o.insert("psi_sigma2".into(), num(psi.sigma2()));
            o.insert("psi_domain_sup".into(), num(psi.domain_sup()));
        }
    }
    Ok(())
}

/// Tail-ratio limit rate per unit `T` for the family, if the theory covers it.
fn limit_rate(family: &Family, rho: f64) -> Option<f64> {
    let split = SplitSpec::new(rho).ok()?;
    if family.is_score() {
        let model = family.score_model().ok()?;
        let t0 = solve_t0(model.cgf(), model.tail(), split).ok()?;
        Some((1.0 - rho) * model.cgf().d1(t0) + 2.0 * rho * model.k_f())
    } else {
        let t0 = solve_t0(family, &family.tail_index(), split).ok()?;
        Some((1.0 - rho) * t0)
    }
}

fn simulate(sim: &SimRequest, cfg: &RunConfig, report: &mut Report) -> Result<(), Failure> {
    let seed = cfg.seed.unwrap_or(0);
    report.seed = Some(seed);
    let schedule = match sim.z0 {
        Some(z0) => ThresholdSchedule::new(sim.kind, z0)?,
        None => {
            let s = calibrate_threshold(&sim.family, sim.n, sim.m, sim.kind, sim.target_prob, sim.pilot_trials, seed)?;
            report.diagnostics.insert("z0_calibrated".into(), num(s.z0()));
            s
        }
    };
    let scn = SimScenario {
        family: sim.family,
        effect: sim.effect,
        pi: sim.pi,
        n: sim.n,
        m: sim.m,
        schedule,
        trials: sim.trials,
        seed,
    };
    let total = scn.total() as f64;
    let rho = sim.m as f64 / total;
    let rate = limit_rate(&sim.family, rho);
    let d = &mut report.diagnostics;
    d.insert("z0".into(), num(schedule.z0()));
    d.insert("threshold".into(), num(scn.threshold()));
    d.insert("n_total".into(), num(total));
    d.insert("rho".into(), num(rho));
    let o = &mut report.outputs;
    match sim.mode {
        SimMode::Pfdr => {
            let est = simulate_pfdr(&scn)?;
            o.insert("pfdr_hat".into(), num(est.pfdr_hat));
            o.insert("stderr".into(), num(est.stderr));
            o.insert("rejections".into(), est.rejections.into());
            o.insert("false_rejections".into(), est.false_rejections.into());
            o.insert("batches_used".into(), est.batches_used.into());
            o.insert("batches".into(), est.batches.into());
            if let Some(rate) = rate {
                // the floor written with the rate in place of (1 - rho) t0
                let t = sim.effect * total;
                let floor = if sim.family.is_score() {
                    (1.0 - sim.pi) / (1.0 - sim.pi + sim.pi * (rate * t).exp())
                } else {
                    let split = SplitSpec::new(rho).expect("0 < rho < 1");
                    pfdr_floor_limit(sim.pi, t, split, rate / (1.0 - rho))
                };
                report.diagnostics.insert("pfdr_floor_limit".into(), num(floor));
            }
        }
        SimMode::TailRatio { t_target } => {
            let r = tail_ratio_mc(&scn, t_target)?;
            o.insert("ratio_hat".into(), num(r.ratio_hat));
            o.insert("stderr".into(), num(r.stderr));
            o.insert("numerator_hits".into(), r.numerator_hits.into());
            o.insert("denominator_hits".into(), r.denominator_hits.into());
            o.insert("trials".into(), r.trials.into());
            o.insert("effect".into(), num(r.effect));
            report.diagnostics.insert("denominator_prob".into(), num(r.denominator_prob()));
            if let Some(rate) = rate {
                report.diagnostics.insert("ratio_limit".into(), num((rate * t_target).exp()));
            }
        }
    }
    Ok(())
}

/// `Status` for a core error.
pub fn status_of(e: &Error) -> Status {
    match e {
        Error::NotAttainable { .. } => Status::Unattainable,
        Error::InsufficientHits { .. } => Status::InsufficientHits,
        Error::DegenerateScenario { .. } => Status::DegenerateScenario,
        _ => Status::Error,
    }
}
