use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use fracle::io::{parse_config, Command, RunConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sub {
    Solve,
    Sweep,
    Hls,
    Kernels,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Command {
        match s {
            Sub::Solve => Command::Solve,
            Sub::Sweep => Command::Sweep,
            Sub::Hls => Command::Hls,
            Sub::Kernels => Command::Kernels,
        }
    }
}

/// Ground states and blow-up sweeps for the fractional Lane-Emden system.
#[derive(Debug, Parser)]
#[command(name = "fracle", version)]
struct Args {
    #[arg(value_enum)]
    command: Sub,
    /// Run configuration (`key = value` with [section] headers). Defaults
    /// are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    ExitCode::from(execute(&Args::parse()))
}

/// Config text and parsed config for the requested subcommand.
fn prepare(args: &Args) -> Result<(RunConfig, String), String> {
    let command: Command = args.command.into();
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?,
        None => RunConfig::defaults(command, 2).to_text(),
    };
    let cfg = parse_config(&text).map_err(|e| e.to_string())?;
    if cfg.command != command {
        return Err(format!(
            "the config is for '{}' but '{}' was requested",
            cfg.command.name(),
            command.name()
        ));
    }
    Ok((cfg, text))
}

fn execute(args: &Args) -> u8 {
    let (cfg, text) = match prepare(args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match fracle_cli::run(&cfg, &text, &args.out) {
        Ok(rep) => {
            for (name, c) in &rep.checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                match c.value {
                    Some(v) => println!("{status} {name}: {v:.6e} ({})", c.limit),
                    None => println!("{status} {name}"),
                }
            }
            if rep.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use fracle::io::{load_field, read_table};
    use fracle_cli::sha256_hex;
    use serde_json::Value;

    use super::*;

    fn args(list: &[&str]) -> Args {
        Args::try_parse_from(std::iter::once("fracle").chain(list.iter().copied())).unwrap()
    }

    fn report(dir: &Path) -> Value {
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
    }

    fn write_config(dir: &Path, cfg: &RunConfig) -> String {
        let path = dir.join("run.cfg");
        std::fs::write(&path, cfg.to_text()).unwrap();
        path.to_str().unwrap().to_string()
    }

    #[test]
    fn kernels_with_defaults_pass_and_report() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("k");
        assert_eq!(execute(&args(&["kernels", "--out", out.to_str().unwrap()])), 0);
        let rep = report(&out);
        assert_eq!(rep["command"], "kernels");
        assert_eq!(rep["passed"], true);
        let text = rep["config"].as_str().unwrap();
        assert_eq!(rep["config_sha256"].as_str().unwrap(), sha256_hex(text));
        assert_eq!(parse_config(text).unwrap(), RunConfig::defaults(Command::Kernels, 2));
        for f in rep["outputs"].as_array().unwrap() {
            assert!(out.join(f.as_str().unwrap()).exists(), "{f}");
        }
        let t = read_table(&out.join("kernels.csv")).unwrap();
        assert!(!t.rows.is_empty());
        let g = t.column("green").unwrap();
        let gs = t.column("green_swapped").unwrap();
        assert!(g.iter().zip(&gs).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn small_solve_from_a_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::defaults(Command::Solve, 2);
        cfg.cutoff = vec![16, 16];
        cfg.points = vec![32, 32];
        let path = write_config(dir.path(), &cfg);
        let out = dir.path().join("s");
        let code = execute(&args(&["solve", "--config", &path, "--out", out.to_str().unwrap()]));
        let rep = report(&out);
        assert_eq!(code, if rep["passed"] == true { 0 } else { 1 });
        assert_eq!(rep["checks"]["identities"]["passed"], true);
        assert_eq!(rep["checks"]["positive"]["passed"], true);
        let u = load_field(&out.join("u.bin")).unwrap().into_grid_function().unwrap();
        let top = u.values().iter().fold(0.0f64, |m, &x| m.max(x));
        assert!(u.values().iter().all(|&x| x >= -1e-3 * top));
        assert!(!read_table(&out.join("theta_history.csv")).unwrap().rows.is_empty());
    }

    #[test]
    fn mismatched_or_broken_configs_exit_with_two() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x");
        let out = out.to_str().unwrap();
        let path = write_config(dir.path(), &RunConfig::defaults(Command::Kernels, 2));
        let a = args(&["hls", "--config", &path, "--out", out]);
        assert!(prepare(&a).unwrap_err().contains("kernels"));
        assert_eq!(execute(&a), 2);

        let bad = dir.path().join("bad.cfg");
        std::fs::write(&bad, "[run]\ncommand = hls\nsurprise = 1\n").unwrap();
        let a = args(&["hls", "--config", bad.to_str().unwrap(), "--out", out]);
        assert!(prepare(&a).unwrap_err().contains("line 3"));
        assert_eq!(execute(&a), 2);

        let missing = dir.path().join("missing.cfg");
        assert_eq!(execute(&args(&["hls", "--config", missing.to_str().unwrap(), "--out", out])), 2);
        assert!(!dir.path().join("x").exists());
    }

    #[test]
    fn hls_study_passes() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(execute(&args(&["hls", "--out", dir.path().to_str().unwrap()])), 0);
        let rep = report(dir.path());
        assert!(rep["checks"]["finest_rel_error"]["value"].as_f64().unwrap() < 0.01);
        let t = read_table(&dir.path().join("hls.csv")).unwrap();
        assert_eq!(t.rows.len(), RunConfig::defaults(Command::Hls, 2).bubble_half_widths.len());
    }

    #[test]
    fn coarse_sweep_exit_code_follows_the_checks() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::defaults(Command::Sweep, 2);
        cfg.epsilon = vec![0.06, 0.05, 0.04];
        cfg.cutoff = vec![32, 32];
        cfg.points = vec![64, 64];
        cfg.max_points = 64;
        cfg.limit = false;
        cfg.write_fields = false;
        let path = write_config(dir.path(), &cfg);
        let out = dir.path().join("w");
        let code = execute(&args(&["sweep", "--config", &path, "--out", out.to_str().unwrap()]));
        let rep = report(&out);
        let checks = rep["checks"].as_object().unwrap();
        let all = checks.values().all(|c| c["passed"] == true);
        assert_eq!(rep["passed"], all);
        assert_eq!(code, if all { 0 } else { 1 });
        assert_eq!(checks["lambda_increasing"]["passed"], true);
        assert_eq!(read_table(&out.join("sweep.csv")).unwrap().rows.len(), 3);
        assert!(out.join("sweep_result.json").exists());
    }
}
