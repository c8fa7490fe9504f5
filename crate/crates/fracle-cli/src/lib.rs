//! Runs one configured command and writes its tables, dumps and report.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fracle::blowup::{boundary_bound_check, covering_window, locate_peak, rescale_solution, run_sweep, SweepResult};
use fracle::fractional::{free_kernel, green_many, HeatKernel};
use fracle::hls::{bubble_pair_amplitude, bubble_quotient_oracle, bubble_refinement, BubbleLevel, Regime};
use fracle::io::{
    dump_field, green_table, radial_profile_table, sweep_table, write_table, Command, FieldRef, RunConfig, Table,
};
use fracle::lane_emden::{identity_report, solve_ground_state, ExponentPair};
use fracle::{build_basis, Error, Grid, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub passed: bool,
    pub value: Option<f64>,
    pub limit: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RunReport {
    pub program: String,
    pub version: String,
    pub command: String,
    pub config: String,
    pub config_sha256: String,
    pub passed: bool,
    pub checks: BTreeMap<String, Check>,
    pub outputs: Vec<String>,
    pub diagnostics: Value,
}

impl RunReport {
    fn flag(&mut self, name: &str, passed: bool) {
        self.checks.insert(
            name.into(),
            Check {
                passed,
                value: None,
                limit: String::new(),
            },
        );
    }

    fn bound(&mut self, name: &str, value: f64, limit: impl Into<String>, passed: bool) {
        self.checks.insert(
            name.into(),
            Check {
                passed,
                value: Some(value),
                limit: limit.into(),
            },
        );
    }
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

struct Out {
    dir: PathBuf,
    files: Vec<String>,
    csv: bool,
    json: bool,
}

impl Out {
    fn table(&mut self, name: &str, t: &Table, meta: Value) -> Result<()> {
        if !self.csv {
            return Ok(());
        }
        let path = self.dir.join(format!("{name}.csv"));
        write_table(t, &path, &meta)?;
        self.files.push(format!("{name}.csv"));
        self.files.push(format!("{name}.json"));
        Ok(())
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        if !self.json {
            return Ok(());
        }
        let text = serde_json::to_string_pretty(v).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(self.dir.join(name), text + "\n")?;
        self.files.push(name.into());
        Ok(())
    }

    fn field(&mut self, name: &str, f: FieldRef) -> Result<()> {
        dump_field(f, &self.dir.join(name))?;
        self.files.push(name.into());
        self.files.push(format!("{name}.txt"));
        Ok(())
    }
}

/// Runs `cfg`, writes everything under `out`, and returns the report that
/// was written to `out/report.json`.
pub fn run(cfg: &RunConfig, config_text: &str, out: &Path) -> Result<RunReport> {
    fs::create_dir_all(out)?;
    let mut o = Out {
        dir: out.to_path_buf(),
        files: Vec::new(),
        csv: cfg.write_csv,
        json: cfg.write_json,
    };
    let mut rep = RunReport {
        program: "fracle".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cfg.command.name().into(),
        config: cfg.to_text(),
        config_sha256: sha256_hex(config_text),
        ..RunReport::default()
    };
    match cfg.command {
        Command::Solve => solve(cfg, &mut o, &mut rep)?,
        Command::Sweep => sweep(cfg, &mut o, &mut rep)?,
        Command::Hls => hls(cfg, &mut o, &mut rep)?,
        Command::Kernels => kernels(cfg, &mut o, &mut rep)?,
    }
    rep.passed = rep.checks.values().all(|c| c.passed);
    o.files.push("report.json".into());
    rep.outputs = o.files.clone();
    let text = serde_json::to_string_pretty(&rep).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(out.join("report.json"), text + "\n")?;
    Ok(rep)
}

fn solve(cfg: &RunConfig, o: &mut Out, rep: &mut RunReport) -> Result<()> {
    let d = cfg.domain()?;
    let e = ExponentPair::from_epsilon(cfg.p, cfg.n, cfg.s, cfg.epsilon[0])?;
    let basis = build_basis(&d, &cfg.cutoff)?;
    let grid = Grid::new(&d, &cfg.points)?;
    let (pair, report) = solve_ground_state(&e, &basis, &grid, None, &cfg.solver_options())?;
    let ids = identity_report(&pair, &basis)?;
    let (lambda, x_c) = locate_peak(&pair)?;
    let collar = boundary_bound_check(&pair, cfg.collar * d.min_side())?;
    let ascent = report.theta_history.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    rep.bound("identities", ids.worst(), "< 1e-6 relative", ids.worst() < 1e-6);
    rep.flag("theta_nondecreasing", ascent);
    rep.bound("equation_residual", report.equation_residual, "< 1e-6", report.equation_residual < 1e-6);
    rep.flag("positive", pair.u.min() >= 0.0 && pair.v.min() >= 0.0);
    rep.diagnostics = json!({
        "exponents": e,
        "solve": report,
        "identities": ids,
        "lambda": lambda,
        "x_c": x_c,
        "collar": collar,
    });
    let mut hist = Table::new(&["iteration", "theta"]);
    for (i, t) in report.theta_history.iter().enumerate() {
        hist.push(vec![i as f64, *t])?;
    }
    o.table("theta_history", &hist, json!({ "epsilon": cfg.epsilon[0], "p": cfg.p, "q": e.q }))?;
    o.json("solve.json", &rep.diagnostics)?;
    if cfg.write_fields {
        o.field("u.bin", FieldRef::Grid(&pair.u))?;
        o.field("v.bin", FieldRef::Grid(&pair.v))?;
        o.field("w.bin", FieldRef::Grid(&pair.w))?;
        let (half, pts) = covering_window(&grid, lambda, &x_c, cfg.field_points);
        let r = rescale_solution(&pair, lambda, &x_c, half, pts)?;
        o.table("u_tilde_profile", &radial_profile_table(&r.u), json!({ "lambda": lambda }))?;
        o.table("v_tilde_profile", &radial_profile_table(&r.v), json!({ "lambda": lambda }))?;
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, o: &mut Out, rep: &mut RunReport) -> Result<()> {
    let sc = cfg.sweep_config()?;
    let res: SweepResult = run_sweep(&sc)?;
    let c = &res.checks;
    rep.flag("lambda_increasing", c.lambda_increasing);
    rep.flag("lam_dist_increasing", c.lam_dist_increasing);
    let le: Vec<f64> = res.rows.iter().map(|r| r.lam_pow_eps).collect();
    let worst_le = le.iter().fold(1.0f64, |m, &x| if (x - 1.0).abs() > (m - 1.0).abs() { x } else { m });
    rep.bound("lam_pow_eps_band", worst_le, "in (0.9, 1.1) on every row", c.lam_pow_eps_band);
    rep.flag("lam_pow_eps_converging", c.lam_pow_eps_converging);
    rep.flag("green_nonincreasing", c.green_nonincreasing);
    rep.flag("green_decreasing", c.green_decreasing);
    let last = res.rows.last().expect("nonempty schedule");
    rep.bound("green_deviation_at_min", last.max_green_dev, "< 0.15", last.max_green_dev < 0.15);
    rep.flag("c1_stabilizing", c.c1_stabilizing);
    rep.flag("collar_bounded", c.collar_bounded);
    rep.bound(
        "identities",
        res.rows.iter().map(|r| r.identity_worst).fold(0.0, f64::max),
        "< 1e-6 relative",
        c.identities,
    );
    rep.flag("core_resolved", c.resolved);
    if let Some(x) = &res.extrapolation {
        rep.flag("theta_bound", x.bound_ok);
        let gap = x.energy_gap_at_min();
        rep.bound("energy_limit", gap, "< 0.1 relative", gap < 0.1);
    }
    if let Some(a) = &res.limit {
        let dv = (a.v_fit.slope - a.v_slope_target).abs();
        rep.bound("v_decay_slope", a.v_fit.slope, format!("{} +- 0.1", a.v_slope_target), dv <= 0.1);
        let slope = a.u_log_fit.as_ref().unwrap_or(&a.u_fit).slope;
        let target = a.u_slope_target;
        rep.bound("u_decay_slope", slope, format!("{target} +- 0.15"), (slope - target).abs() <= 0.15);
        if let Some(g) = &a.u_log_growth {
            rep.bound("u_log_growth", g.slope, "> 0", g.slope > 0.0);
        }
        rep.bound("sharp_decay", a.sharp.fraction, format!("no violations at delta = {}", cfg.sharp_delta), a.sharp.pass);
        if let Some(sl) = &a.serrin {
            rep.bound("serrin_log_integral", sl.rel_error, "< 0.2 relative", sl.rel_error < 0.2);
        }
        if let Some(g) = a.hls_gap {
            rep.bound("hls_quotient", g, "within 0.05 of the extrapolated S", g < 0.05);
        }
    }
    let n = cfg.n;
    let meta = json!({
        "p": cfg.p,
        "n": n,
        "s": cfg.s,
        "regime": res.regime,
        "extrapolation_model": "linear in epsilon (heuristic)",
        "green_tolerances": "engineering choices; the limits carry no rates",
    });
    o.table("sweep", &sweep_table(&res.rows, n), meta.clone())?;
    o.table("green", &green_table(&res.rows), json!({ "points": res.targets.points, "x0": res.targets.x0 }))?;
    o.json("sweep_result.json", &res)?;
    if cfg.write_fields {
        if let Some(pair) = &res.last {
            let (lambda, x_c) = (last.lambda, last.x_c.clone());
            let (half, pts) = covering_window(pair.u.grid(), lambda, &x_c, cfg.field_points);
            let r = rescale_solution(pair, lambda, &x_c, half, pts)?;
            o.field("u_tilde.bin", FieldRef::Free(&r.u))?;
            o.field("v_tilde.bin", FieldRef::Free(&r.v))?;
            o.field("w_tilde.bin", FieldRef::Free(&r.w))?;
            o.table("u_tilde_profile", &radial_profile_table(&r.u), json!({ "lambda": lambda, "eps": last.eps }))?;
            o.table("v_tilde_profile", &radial_profile_table(&r.v), json!({ "lambda": lambda, "eps": last.eps }))?;
        }
    }
    rep.diagnostics = json!({
        "regime": res.regime,
        "constants": res.constants,
        "extrapolation": res.extrapolation,
        "limit": res.limit,
    });
    Ok(())
}

/// Refinement study of the diagonal bubble's HLS quotient and the residual
/// of the bubble pair in the limit system.
fn hls(cfg: &RunConfig, o: &mut Out, rep: &mut RunReport) -> Result<()> {
    let (n, s) = (cfg.n, cfg.s);
    let oracle = bubble_quotient_oracle(n, s)?;
    let levels = bubble_refinement(n, s, &cfg.bubble_half_widths, &cfg.bubble_points)?;
    let mut t = Table::new(&[
        "half_width",
        "points",
        "spacing",
        "quotient",
        "rel_error",
        "exterior_fraction",
        "residual_u",
        "residual_v",
        "budget_u",
        "budget_v",
    ]);
    for l in &levels {
        let r = &l.residual;
        t.push(vec![
            l.half_width,
            l.points as f64,
            l.spacing,
            l.quotient,
            l.rel_error,
            l.exterior_fraction,
            r.u,
            r.v,
            r.u_budget,
            r.v_budget,
        ])?;
    }
    let study = BubbleStudy::new(&levels);
    rep.flag("monotone_approach", study.monotone);
    rep.flag("approach_from_above", study.from_above);
    rep.bound("finest_rel_error", study.finest, "< 0.01", study.finest < 0.01);
    rep.flag("pair_residual_within_budget", study.within_budget);
    rep.diagnostics = json!({ "oracle": oracle, "pair_amplitude": bubble_pair_amplitude(n, s)? });
    o.table("hls", &t, json!({ "n": n, "s": s, "oracle": oracle }))?;
    Ok(())
}

/// Pass/fail summary of a bubble refinement sequence.
pub struct BubbleStudy {
    pub monotone: bool,
    pub from_above: bool,
    pub finest: f64,
    pub within_budget: bool,
}

impl BubbleStudy {
    pub fn new(levels: &[BubbleLevel]) -> BubbleStudy {
        let errs: Vec<f64> = levels.iter().map(|l| l.rel_error.abs()).collect();
        BubbleStudy {
            monotone: errs.windows(2).all(|w| w[1] < w[0]),
            from_above: levels.iter().all(|l| l.rel_error >= -1e-12),
            finest: errs.last().copied().unwrap_or(f64::INFINITY),
            within_budget: levels
                .iter()
                .all(|l| l.residual.u <= l.residual.u_budget && l.residual.v <= l.residual.v_budget),
        }
    }
}

/// Random interior pairs: 0 < G < free kernel + bound and exact symmetry.
fn kernels(cfg: &RunConfig, o: &mut Out, rep: &mut RunReport) -> Result<()> {
    let d = cfg.domain()?;
    let n = d.dim();
    let kernel = HeatKernel::new(&d, cfg.s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.kernel_seed);
    let mut pairs = Vec::with_capacity(cfg.kernel_pairs);
    while pairs.len() < cfg.kernel_pairs {
        let mut pick = || -> Vec<f64> { d.lengths().iter().map(|&l| rng.gen_range(0.01 * l..0.99 * l)).collect() };
        let x = pick();
        let y = pick();
        let dist = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if dist >= cfg.min_separation {
            pairs.push((x, y));
        }
    }
    let swapped: Vec<(Vec<f64>, Vec<f64>)> = pairs.iter().map(|(x, y)| (y.clone(), x.clone())).collect();
    let g = green_many(&kernel, &pairs);
    let gs = green_many(&kernel, &swapped);
    let mut cols: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    cols.extend((0..n).map(|i| format!("y{i}")));
    cols.extend(["green", "green_swapped", "free", "bound"].iter().map(|c| c.to_string()));
    let mut t = Table {
        columns: cols,
        rows: Vec::new(),
    };
    let (mut positive, mut below, mut symmetric) = (true, true, true);
    let mut worst_margin = f64::INFINITY;
    for (((x, y), a), b) in pairs.iter().zip(g).zip(gs) {
        let (a, b) = (a?, b?);
        let free = free_kernel(x, y, n, cfg.s)?;
        positive &= a.value > 0.0;
        below &= a.value < free + a.truncation_bound;
        symmetric &= a.value.to_bits() == b.value.to_bits();
        worst_margin = worst_margin.min((free + a.truncation_bound - a.value) / free);
        let mut row = x.clone();
        row.extend(y);
        row.extend([a.value, b.value, free, a.truncation_bound]);
        t.push(row)?;
    }
    rep.flag("green_positive", positive);
    rep.bound("green_below_free", worst_margin, "> 0 (relative margin)", below);
    rep.flag("green_symmetric", symmetric);
    o.table("kernels", &t, json!({ "n": n, "s": cfg.s, "seed": cfg.kernel_seed }))?;
    rep.diagnostics = json!({ "pairs": cfg.kernel_pairs, "regime_at_p": Regime::of(cfg.p, n, cfg.s) });
    Ok(())
}
