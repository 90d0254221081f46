//! Run configuration: `key = value` files and `--key value` flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

/// A usage error; the process exits with status 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    PlanT,
    PlanTMixture,
    PlanF,
    PlanGeneral,
    PlanScore,
    OptimizeSplit,
    Simulate,
    LdpInfo,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::PlanT,
        Command::PlanTMixture,
        Command::PlanF,
        Command::PlanGeneral,
        Command::PlanScore,
        Command::OptimizeSplit,
        Command::Simulate,
        Command::LdpInfo,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Command::PlanT => "plan-t",
            Command::PlanTMixture => "plan-t-mixture",
            Command::PlanF => "plan-f",
            Command::PlanGeneral => "plan-general",
            Command::PlanScore => "plan-score",
            Command::OptimizeSplit => "optimize-split",
            Command::Simulate => "simulate",
            Command::LdpInfo => "ldp-info",
        }
    }
}

impl FromStr for Command {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| usage(format!("unknown command '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn as_str(&self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

impl FromStr for Format {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(usage(format!("format must be json or csv, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub command: Command,
    /// Resolved parameters, defaults included.
    pub parameters: BTreeMap<String, String>,
    pub output_format: Format,
    pub output_path: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// What the command line asked for.
#[derive(Debug)]
pub enum Invocation {
    Run(RunConfig),
    PrintConfig(RunConfig),
    Help,
}

const TARGET: &[&str] = &["alpha", "pi"];
const FAMILY: &[&str] = &["family", "sigma", "width", "shape", "scale", "sample", "t_min", "t_max", "t_points", "tail_lambda"];

/// Keys a command accepts, before family or mode filtering.
fn accepted(cmd: Command) -> Vec<&'static str> {
    let mut keys: Vec<&'static str> = Vec::new();
    match cmd {
        Command::PlanT => keys.extend(TARGET.iter().chain(&["snr", "n_max"])),
        Command::PlanTMixture => keys.extend(
            TARGET.iter().chain(&["mixture", "shape", "rate", "atoms", "snr_atoms", "scale", "n_max"]),
        ),
        Command::PlanF => keys.extend(TARGET.iter().chain(&["delta", "p", "n_max"])),
        Command::PlanGeneral => keys.extend(TARGET.iter().chain(FAMILY).chain(&["rho", "d"])),
        Command::PlanScore => keys.extend(TARGET.iter().chain(&["family", "sigma", "rho", "theta"])),
        Command::OptimizeSplit => keys.extend(FAMILY),
        Command::LdpInfo => keys.extend(FAMILY.iter().chain(&["rho", "u"])),
        Command::Simulate => keys.extend(
            ["family", "sigma", "width", "shape", "scale"].iter().chain(&[
                "mode", "pi", "effect", "n", "m", "z0", "schedule", "trials", "target_prob", "pilot_trials", "t_target",
            ]),
        ),
    }
    keys
}

/// Keys that belong to one family only, with their defaults.
fn family_keys(family: &str) -> Option<&'static [(&'static str, Option<&'static str>)]> {
    Some(match family {
        "normal" | "normal-score" => &[("sigma", Some("1"))],
        "uniform" => &[("width", Some("1"))],
        "gamma" => &[("shape", Some("1")), ("scale", Some("1"))],
        "cauchy-score" | "gamma-score" => &[],
        "empirical" => &[
            ("sample", None),
            ("t_min", Some("-1")),
            ("t_max", Some("1")),
            ("t_points", Some("201")),
            ("tail_lambda", Some("0")),
        ],
        _ => return None,
    })
}

const FAMILY_SPECIFIC: &[&str] = &["sigma", "width", "shape", "scale", "sample", "t_min", "t_max", "t_points", "tail_lambda"];

fn families_for(cmd: Command) -> &'static [&'static str] {
    match cmd {
        Command::PlanScore => &["normal-score", "cauchy-score", "gamma-score"],
        Command::Simulate => &["normal", "uniform", "gamma", "normal-score", "cauchy-score", "gamma-score"],
        _ => &["normal", "uniform", "gamma", "normal-score", "cauchy-score", "gamma-score", "empirical"],
    }
}

/// Fills defaults and rejects keys that do not apply to the chosen family or mode.
fn resolve(cmd: Command, params: &mut BTreeMap<String, String>) -> Result<(), UsageError> {
    let accepted = accepted(cmd);
    if let Some(key) = params.keys().find(|k| !accepted.contains(&k.as_str())) {
        return Err(usage(format!("unknown key '{key}' for command {}", cmd.as_str())));
    }
    let mut defaults: Vec<(&str, &str)> = Vec::new();
    match cmd {
        Command::PlanT | Command::PlanF => defaults.push(("n_max", "10000000")),
        Command::PlanTMixture => {
            defaults.push(("n_max", "10000000"));
            defaults.push(("scale", "1"));
            let kind = params.get("mixture").map(String::as_str).unwrap_or("");
            let other: &[&str] = match kind {
                "gamma" => {
                    defaults.push(("atoms", "64"));
                    &["snr_atoms"]
                }
                "discrete" => &["shape", "rate", "atoms"],
                "" => return Err(usage("missing required key 'mixture' (gamma or discrete)")),
                other => return Err(usage(format!("mixture must be gamma or discrete, got '{other}'"))),
            };
            if let Some(k) = other.iter().find(|k| params.contains_key(**k)) {
                return Err(usage(format!("key '{k}' does not apply to mixture {kind}")));
            }
        }
        Command::PlanGeneral | Command::PlanScore | Command::LdpInfo => defaults.push(("rho", "0.5")),
        Command::OptimizeSplit => {}
        Command::Simulate => {
            let mode = params.entry("mode".into()).or_insert_with(|| "pfdr".into()).clone();
            defaults.push(("schedule", "fixed"));
            defaults.push(("target_prob", "0.001"));
            defaults.push(("pilot_trials", "1000000"));
            let other: &[&str] = match mode.as_str() {
                "pfdr" => {
                    defaults.push(("trials", "200"));
                    defaults.push(("effect", "0"));
                    &["t_target"]
                }
                "tail-ratio" => {
                    defaults.push(("trials", "1000000"));
                    defaults.push(("t_target", "1"));
                    &["pi", "effect"]
                }
                m => return Err(usage(format!("mode must be pfdr or tail-ratio, got '{m}'"))),
            };
            if let Some(k) = other.iter().find(|k| params.contains_key(**k)) {
                return Err(usage(format!("key '{k}' does not apply to simulate mode {mode}")));
            }
        }
    }
    if accepted.contains(&"family") {
        let family = params.get("family").cloned().ok_or_else(|| usage("missing required key 'family'"))?;
        let allowed = families_for(cmd);
        if !allowed.contains(&family.as_str()) {
            return Err(usage(format!(
                "family '{family}' is not available for {}; choose one of {}",
                cmd.as_str(),
                allowed.join(", ")
            )));
        }
        let own = family_keys(&family).expect("listed families have keys");
        for key in FAMILY_SPECIFIC {
            if params.contains_key(*key) && !own.iter().any(|(k, _)| k == key) {
                return Err(usage(format!("key '{key}' does not apply to family {family}")));
            }
        }
        for (k, d) in own {
            if let Some(d) = d {
                defaults.push((k, d));
            }
        }
    }
    for (k, v) in defaults {
        params.entry(k.to_string()).or_insert_with(|| v.to_string());
    }
    Ok(())
}

fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, UsageError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key = value, got '{}'", i + 1, raw.trim())))?;
        let key = normalize_key(k);
        if key.is_empty() {
            return Err(usage(format!("config line {}: empty key", i + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Builds the configuration from `argv` (without the program name).
pub fn parse_args(args: &[String]) -> Result<Invocation, UsageError> {
    let mut positional: Option<String> = None;
    let mut flags: Vec<(String, String)> = Vec::new();
    let mut config_path: Option<String> = None;
    let mut print = false;
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        if arg == "--help" || arg == "-h" {
            return Ok(Invocation::Help);
        }
        if arg == "--print-effective-config" {
            print = true;
            continue;
        }
        let Some(flag) = arg.strip_prefix("--") else {
            if positional.is_some() {
                return Err(usage(format!("unexpected argument '{arg}'")));
            }
            positional = Some(arg.clone());
            continue;
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (normalize_key(k), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| usage(format!("flag --{flag} needs a value")))?;
                (normalize_key(flag), v.clone())
            }
        };
        if key == "config" {
            config_path = Some(value);
        } else {
            flags.push((key, value));
        }
    }

    let mut entries = Vec::new();
    if let Some(path) = &config_path {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config file {path}: {e}")))?;
        entries.extend(parse_config_text(&text)?);
    }
    // flags come last so they override the file
    entries.extend(flags);
    if let Some(cmd) = positional {
        entries.push(("command".into(), cmd));
    }
    let cfg = build(entries)?;
    Ok(if print { Invocation::PrintConfig(cfg) } else { Invocation::Run(cfg) })
}

/// Later entries override earlier ones.
pub fn build(entries: Vec<(String, String)>) -> Result<RunConfig, UsageError> {
    let mut command = None;
    let mut format = Format::Json;
    let mut output_path = None;
    let mut seed = None;
    let mut parameters = BTreeMap::new();
    for (key, value) in entries {
        match key.as_str() {
            "command" => command = Some(value.parse::<Command>()?),
            "format" => format = value.parse()?,
            "output" => output_path = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            "seed" => {
                seed = Some(value.parse::<u64>().map_err(|_| usage(format!("seed must be a nonnegative integer, got '{value}'")))?)
            }
            "config" => return Err(usage("key 'config' is only valid as a command-line flag")),
            _ => {
                parameters.insert(key, value);
            }
        }
    }
    let command = command.ok_or_else(|| usage("no command given"))?;
    resolve(command, &mut parameters)?;
    let cfg = RunConfig { command, parameters, output_format: format, output_path, seed };
    crate::commands::Request::from_config(&cfg)?;
    Ok(cfg)
}

impl RunConfig {
    /// The configuration as config-file text; parsing it back yields `self`.
    pub fn effective_text(&self) -> String {
        let mut s = format!("command = {}\nformat = {}\n", self.command.as_str(), self.output_format.as_str());
        if let Some(p) = &self.output_path {
            s += &format!("output = {}\n", p.display());
        }
        if let Some(seed) = self.seed {
            s += &format!("seed = {seed}\n");
        }
        for (k, v) in &self.parameters {
            s += &format!("{k} = {v}\n");
        }
        s
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.parameters.get(key).map(String::as_str)
    }

    pub fn required(&self, key: &str) -> Result<&str, UsageError> {
        self.get(key).ok_or_else(|| usage(format!("missing required key '{key}'")))
    }

    pub fn f64(&self, key: &str) -> Result<f64, UsageError> {
        let v = self.required(key)?;
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| usage(format!("key '{key}' must be a finite number, got '{v}'")))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, UsageError> {
        self.get(key).map(|_| self.f64(key)).transpose()
    }

    pub fn u64(&self, key: &str) -> Result<u64, UsageError> {
        let v = self.required(key)?;
        // accept 1e6-style integers
        if let Ok(n) = v.parse::<u64>() {
            return Ok(n);
        }
        match v.parse::<f64>() {
            Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Ok(x as u64),
            _ => Err(usage(format!("key '{key}' must be a nonnegative integer, got '{v}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn run_cfg(s: &str) -> RunConfig {
        match parse_args(&args(s)).unwrap() {
            Invocation::Run(c) | Invocation::PrintConfig(c) => c,
            Invocation::Help => panic!("help"),
        }
    }

    fn err(s: &str) -> String {
        parse_args(&args(s)).unwrap_err().0
    }

    #[test]
    fn plan_t_flags() {
        let c = run_cfg("plan-t --alpha 0.05 --pi 0.1 --snr 0.01");
        assert_eq!(c.command, Command::PlanT);
        assert_eq!(c.get("snr"), Some("0.01"));
        assert_eq!(c.get("n_max"), Some("10000000"));
        assert_eq!(c.output_format, Format::Json);
        let c = run_cfg("plan-t --alpha=0.05 --pi=0.1 --snr=0.01 --n-max=100 --format csv");
        assert_eq!(c.get("n_max"), Some("100"));
        assert_eq!(c.output_format, Format::Csv);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# planning run\ncommand = plan-t\nalpha = 0.05\npi = 0.1  # prior\nsnr = 0.01\n").unwrap();
        let c = run_cfg(&format!("--config {} --alpha 0.01", path.display()));
        assert_eq!(c.get("alpha"), Some("0.01"));
        assert_eq!(c.command, Command::PlanT);
    }

    #[test]
    fn positional_command_overrides_file_command() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "command = plan-t\nalpha = 0.05\npi = 0.1\ndelta = 1\np = 3\n").unwrap();
        let c = run_cfg(&format!("plan-f --config {}", path.display()));
        assert_eq!(c.command, Command::PlanF);
    }

    #[test]
    fn usage_errors_name_the_key() {
        assert!(err("plan-t --alpha 0.05 --pi 0.1 --snr 0.01 --bogus 3").contains("'bogus'"));
        assert!(err("plan-f --alpha 1.5 --pi 0.1 --delta 1 --p 3").contains("alpha"));
        assert!(err("plan-t --alpha 0.05 --pi 0.1").contains("'snr'"));
        assert!(err("plan-t --alpha x --pi 0.1 --snr 1").contains("'alpha'"));
        assert!(err("simulate --family normal --n 10 --m 10 --pi 0.5 --z0 1 --trials 0").contains("trials"));
        assert!(err("plan-general --alpha 0.05 --pi 0.1 --family normal --width 2 --d 1").contains("'width'"));
        assert!(err("simulate --family normal --mode tail-ratio --pi 0.3 --n 5 --m 5").contains("'pi'"));
        assert!(err("plan-score --alpha 0.05 --pi 0.1 --family normal --theta 1").contains("family"));
        assert!(err("frobnicate").contains("frobnicate"));
        assert!(err("plan-t --alpha").contains("--alpha"));
        assert!(err("").contains("no command"));
    }

    #[test]
    fn effective_config_round_trips() {
        let cases = [
            "plan-t --alpha 0.05 --pi 0.1 --snr 0.01",
            "plan-t-mixture --alpha 0.05 --pi 0.1 --mixture gamma --shape 4 --rate 4 --scale 0.001",
            "plan-t-mixture --alpha 0.05 --pi 0.1 --mixture discrete --snr-atoms 0.1:0.5,0.2:0.5",
            "plan-f --alpha 0.05 --pi 0.1 --delta 1 --p 10000 --format csv --output /tmp/x.csv",
            "plan-general --alpha 0.05 --pi 0.1 --family gamma --shape 0.3 --d 0.1",
            "plan-score --alpha 0.05 --pi 0.1 --family gamma-score --theta 0.1 --rho 0.3",
            "optimize-split --family uniform --width 2",
            "ldp-info --family cauchy-score --u 0.2",
            "simulate --family normal --pi 0.1 --effect 0.01 --n 20 --m 20 --seed 9",
            "simulate --family uniform --mode tail-ratio --n 20 --m 20 --z0 0.5 --schedule log-log",
        ];
        for case in cases {
            let c = run_cfg(case);
            let text = c.effective_text();
            let back = build(parse_config_text(&text).unwrap()).unwrap();
            assert_eq!(c, back, "{case}\n{text}");
            assert_eq!(back.effective_text(), text);
        }
        assert!(matches!(
            parse_args(&args("plan-t --alpha 0.05 --pi 0.1 --snr 1 --print-effective-config")).unwrap(),
            Invocation::PrintConfig(_)
        ));
    }

    #[test]
    fn config_text_errors() {
        assert!(parse_config_text("alpha 0.05").is_err());
        assert!(parse_config_text(" = 3").is_err());
        assert_eq!(parse_config_text("\n# only a comment\n").unwrap(), vec![]);
        assert!(build(vec![("command".into(), "plan-t".into()), ("config".into(), "x".into())]).is_err());
    }

    #[test]
    fn integers_accept_exponent_form() {
        let c = run_cfg("simulate --family normal --mode tail-ratio --n 20 --m 20 --z0 1 --trials 1e6");
        assert_eq!(c.u64("trials").unwrap(), 1_000_000);
        assert!(err("simulate --family normal --mode tail-ratio --n 2.5 --m 20 --z0 1").contains("'n'"));
    }
}
