//! `pfdr-sizer`: sample-size planning for pFDR control from the command line.
//!
//! ```text
//! pfdr-sizer <command> [--config FILE] [--key value]... [--format json|csv]
//!            [--output PATH] [--seed N] [--print-effective-config]
//! ```
//!
//! Exit status: 0 on success, 1 when the run completes without a usable answer
//! (unattainable target, too few Monte Carlo hits, numerical failure; the
//! report is still written), 2 on usage errors.

mod commands;
mod config;
mod report;

use std::io::Write;

use config::{usage, Invocation, UsageError};

const USAGE: &str = "\
usage: pfdr-sizer <command> [--config FILE] [--key value]... [--format json|csv]
                  [--output PATH] [--seed N] [--print-effective-config]

commands:
  plan-t           alpha pi snr [n_max]
  plan-t-mixture   alpha pi mixture=gamma shape rate [atoms] [scale] | mixture=discrete snr_atoms=r:w,... [scale]
  plan-f           alpha pi delta p [n_max]
  plan-general     alpha pi family d [rho] [family parameters]
  plan-score       alpha pi family theta [rho] [sigma]
  optimize-split   family [family parameters]
  ldp-info         family [rho] [u] [family parameters]
  simulate         family n m [mode=pfdr pi effect | mode=tail-ratio t_target]
                   [z0 | target_prob pilot_trials] [schedule=fixed|log-log] [trials]

families: normal sigma | uniform width | gamma shape scale | normal-score sigma |
          cauchy-score | gamma-score | empirical sample [t_min t_max t_points tail_lambda]

environment: PFDR_SIZER_THREADS caps simulation threads
";

fn configure_threads() -> Result<(), UsageError> {
    let Ok(v) = std::env::var("PFDR_SIZER_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("PFDR_SIZER_THREADS must be a positive integer, got '{v}'")))?;
    // a second call in the same process is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs one invocation and returns the exit status.
fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = (|| -> Result<i32, UsageError> {
        configure_threads()?;
        let cfg = match config::parse_args(args)? {
            Invocation::Help => {
                let _ = out.write_all(USAGE.as_bytes());
                return Ok(0);
            }
            Invocation::PrintConfig(cfg) => {
                let _ = out.write_all(cfg.effective_text().as_bytes());
                return Ok(0);
            }
            Invocation::Run(cfg) => cfg,
        };
        let report = commands::execute(&cfg)?;
        let text = report.render(cfg.output_format);
        match &cfg.output_path {
            Some(path) => std::fs::write(path, &text)
                .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?,
            None => {
                let _ = out.write_all(text.as_bytes());
            }
        }
        Ok(report.status.exit_code())
    })();
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "pfdr-sizer: {e}");
            let _ = writeln!(err, "run 'pfdr-sizer --help' for usage");
            2
        }
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let code = run(&args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
