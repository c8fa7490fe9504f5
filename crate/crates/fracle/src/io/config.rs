//! Flat `key = value` run configuration with `[section]` headers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::blowup::{LimitOptions, SweepConfig};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::lane_emden::{ExponentPair, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Sweep,
    Hls,
    Kernels,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Hls => "hls",
            Command::Kernels => "kernels",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        match s {
            "solve" => Some(Command::Solve),
            "sweep" => Some(Command::Sweep),
            "hls" => Some(Command::Hls),
            "kernels" => Some(Command::Kernels),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub n: usize,
    pub lengths: Vec<f64>,
    pub s: f64,
    pub p: f64,
    /// One value for `solve`, the schedule for `sweep`.
    pub epsilon: Vec<f64>,
    pub cutoff: Vec<usize>,
    pub points: Vec<usize>,
    pub max_points: usize,
    pub min_core_cells: f64,
    pub theta_tol: f64,
    pub residual_tol: f64,
    pub max_iter: usize,
    pub symmetry_probe: usize,
    pub positivity_limit: f64,
    /// Ring radius and exclusion distance as fractions of the shortest side.
    pub ring_radius: f64,
    pub exclusion: f64,
    pub collar: f64,
    pub warm_start: bool,
    pub limit: bool,
    pub inner_radius: f64,
    pub outer_fraction: f64,
    pub sharp_delta: f64,
    pub field_points: usize,
    pub hls_half_width: f64,
    pub hls_points: usize,
    /// Refinement levels of the bubble study: box half widths and points.
    pub bubble_half_widths: Vec<f64>,
    pub bubble_points: Vec<usize>,
    pub kernel_pairs: usize,
    pub kernel_seed: u64,
    pub min_separation: f64,
    pub write_csv: bool,
    pub write_json: bool,
    pub write_fields: bool,
}

impl RunConfig {
    /// Defaults for `command` in dimension `n` on the unit box, s = 1/2.
    pub fn defaults(command: Command, n: usize) -> RunConfig {
        let (k, m, cap) = match n {
            1 => (256, 512, 8192),
            2 => (64, 128, 2048),
            _ => (24, 48, 96),
        };
        RunConfig {
            command,
            n,
            lengths: vec![1.0; n],
            s: 0.5,
            p: 2.5,
            epsilon: match command {
                Command::Solve => vec![0.06],
                _ => vec![0.06, 0.04, 0.025, 0.015],
            },
            cutoff: vec![k; n],
            points: vec![m; n],
            max_points: cap,
            min_core_cells: 8.0,
            theta_tol: 1e-9,
            residual_tol: 1e-7,
            max_iter: 2000,
            symmetry_probe: 60,
            positivity_limit: 1e-3,
            ring_radius: 0.3,
            exclusion: 0.15,
            collar: 0.1,
            warm_start: true,
            limit: true,
            inner_radius: 2.0,
            outer_fraction: 0.1,
            sharp_delta: 0.25,
            field_points: 1025,
            hls_half_width: 16.0,
            hls_points: 257,
            bubble_half_widths: vec![4.0, 8.0, 16.0, 32.0],
            bubble_points: vec![33, 65, 129, 257],
            kernel_pairs: 200,
            kernel_seed: 1,
            min_separation: 0.1,
            write_csv: true,
            write_json: true,
            write_fields: true,
        }
    }

    pub fn domain(&self) -> Result<BoxDomain> {
        BoxDomain::new(self.lengths.clone(), self.s)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            theta_tol: self.theta_tol,
            residual_tol: self.residual_tol,
            max_iter: self.max_iter,
            positivity_limit: self.positivity_limit,
            symmetry_probe: self.symmetry_probe,
            ..SolverOptions::default()
        }
    }

    pub fn limit_options(&self) -> LimitOptions {
        LimitOptions {
            inner_radius: self.inner_radius,
            outer_fraction: self.outer_fraction,
            sharp_delta: self.sharp_delta,
            max_points: self.field_points,
            hls_half_width: self.hls_half_width,
            hls_points: self.hls_points,
            ..LimitOptions::default()
        }
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let d = self.domain()?;
        let min_side = d.min_side();
        let mut c = SweepConfig::new(d, self.p, self.epsilon.clone());
        c.cutoff = self.cutoff.clone();
        c.points = self.points.clone();
        c.max_points = self.max_points;
        c.min_core_cells = self.min_core_cells;
        c.solver = self.solver_options();
        c.ring = crate::blowup::ring_points(&c.domain, self.ring_radius * min_side);
        c.exclusion = self.exclusion * min_side;
        c.collar = self.collar * min_side;
        c.warm_start = self.warm_start;
        c.limit = self.limit.then(|| self.limit_options());
        Ok(c)
    }

    /// Canonical text; `parse_config(c.to_text())` returns `c`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for (key, value) in self.entries() {
            let (sec, name) = key.split_once('.').expect("keys are sectioned");
            if sec != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{sec}]");
                section = sec;
            }
            let _ = writeln!(out, "{name} = {value}");
        }
        out
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        fn list<T: ToString>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        }
        vec![
            ("run.command", self.command.name().to_string()),
            ("domain.n", self.n.to_string()),
            ("domain.lengths", list(&self.lengths)),
            ("domain.s", self.s.to_string()),
            ("exponents.p", self.p.to_string()),
            ("exponents.epsilon", list(&self.epsilon)),
            ("discretization.cutoff", list(&self.cutoff)),
            ("discretization.points", list(&self.points)),
            ("discretization.max_points", self.max_points.to_string()),
            ("discretization.min_core_cells", self.min_core_cells.to_string()),
            ("solver.theta_tol", self.theta_tol.to_string()),
            ("solver.residual_tol", self.residual_tol.to_string()),
            ("solver.max_iter", self.max_iter.to_string()),
            ("solver.symmetry_probe", self.symmetry_probe.to_string()),
            ("solver.positivity_limit", self.positivity_limit.to_string()),
            ("sweep.ring_radius", self.ring_radius.to_string()),
            ("sweep.exclusion", self.exclusion.to_string()),
            ("sweep.collar", self.collar.to_string()),
            ("sweep.warm_start", self.warm_start.to_string()),
            ("limit.enabled", self.limit.to_string()),
            ("limit.inner_radius", self.inner_radius.to_string()),
            ("limit.outer_fraction", self.outer_fraction.to_string()),
            ("limit.sharp_delta", self.sharp_delta.to_string()),
            ("limit.field_points", self.field_points.to_string()),
            ("limit.hls_half_width", self.hls_half_width.to_string()),
            ("limit.hls_points", self.hls_points.to_string()),
            ("hls.half_widths", list(&self.bubble_half_widths)),
            ("hls.points", list(&self.bubble_points)),
            ("kernels.pairs", self.kernel_pairs.to_string()),
            ("kernels.seed", self.kernel_seed.to_string()),
            ("kernels.min_separation", self.min_separation.to_string()),
            ("output.csv", self.write_csv.to_string()),
            ("output.json", self.write_json.to_string()),
            ("output.fields", self.write_fields.to_string()),
        ]
    }

    /// Constraint violations of a syntactically valid config.
    pub fn violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if self.n == 0 || self.n > 3 {
            bad.push(format!("domain.n = {} must be 1, 2 or 3", self.n));
        }
        if self.lengths.len() != self.n {
            bad.push(format!("domain.lengths needs {} entries, got {}", self.n, self.lengths.len()));
        }
        if let Err(e) = BoxDomain::new(self.lengths.clone(), self.s) {
            bad.push(format!("domain: {e}"));
        }
        if !(self.s > 0.0 && self.s <= 1.0 && (self.n as f64) > 2.0 * self.s) {
            bad.push(format!("domain.s = {} needs 0 < s <= 1 and n > 2s", self.s));
        }
        if self.epsilon.is_empty() {
            bad.push("exponents.epsilon is empty".into());
        }
        if self.command == Command::Solve && self.epsilon.len() != 1 {
            bad.push(format!("solve takes one epsilon, got {}", self.epsilon.len()));
        }
        if self.command == Command::Sweep {
            for w in self.epsilon.windows(2) {
                if !(w[1] < w[0]) {
                    bad.push(format!("exponents.epsilon must be strictly decreasing ({} then {})", w[0], w[1]));
                }
            }
        }
        if matches!(self.command, Command::Solve | Command::Sweep) {
            for &eps in &self.epsilon {
                match ExponentPair::from_epsilon(self.p, self.n, self.s, eps) {
                    Ok(e) if e.is_critical() => bad.push(format!(
                        "exponents.epsilon = {eps}: the critical pair has no maximizer on a bounded domain"
                    )),
                    Ok(_) => {}
                    Err(e) => bad.push(format!("exponents.epsilon = {eps}: {e}")),
                }
            }
        }
        if self.cutoff.len() != self.n || self.points.len() != self.n {
            bad.push(format!("discretization.cutoff and discretization.points need {} entries", self.n));
        }
        for (&k, &m) in self.cutoff.iter().zip(&self.points) {
            if k == 0 || m < k {
                bad.push(format!("discretization: {m} points cannot resolve cutoff {k}"));
            }
        }
        if self.points.iter().any(|&m| m > self.max_points) {
            bad.push("discretization.points exceeds max_points".into());
        }
        for (name, v) in [
            ("solver.theta_tol", self.theta_tol),
            ("solver.residual_tol", self.residual_tol),
            ("solver.positivity_limit", self.positivity_limit),
            ("discretization.min_core_cells", self.min_core_cells),
            ("limit.inner_radius", self.inner_radius),
            ("limit.outer_fraction", self.outer_fraction),
            ("limit.sharp_delta", self.sharp_delta),
            ("limit.hls_half_width", self.hls_half_width),
            ("kernels.min_separation", self.min_separation),
        ] {
            if !(v.is_finite() && v > 0.0) {
                bad.push(format!("{name} = {v} must be positive"));
            }
        }
        if self.max_iter == 0 {
            bad.push("solver.max_iter must be positive".into());
        }
        if !(self.ring_radius > 0.0 && self.ring_radius < 0.5) {
            bad.push(format!("sweep.ring_radius = {} must lie in (0, 0.5)", self.ring_radius));
        }
        if !(self.exclusion > 0.0 && self.exclusion <= self.ring_radius && self.exclusion <= 0.5 - self.ring_radius) {
            bad.push(format!(
                "sweep.exclusion = {} must keep the ring that far from the center and the boundary",
                self.exclusion
            ));
        }
        if !(self.collar > 0.0 && self.collar < 0.5) {
            bad.push(format!("sweep.collar = {} must lie in (0, 0.5)", self.collar));
        }
        for (name, m) in [("limit.field_points", self.field_points), ("limit.hls_points", self.hls_points)] {
            if m % 2 == 0 || m < 3 {
                bad.push(format!("{name} = {m} must be odd and at least 3"));
            }
        }
        if self.bubble_half_widths.len() != self.bubble_points.len() || self.bubble_points.is_empty() {
            bad.push("hls.half_widths and hls.points need the same nonzero length".into());
        }
        if self.bubble_points.iter().any(|&m| m % 2 == 0) {
            bad.push("hls.points must be odd".into());
        }
        if self.bubble_half_widths.iter().any(|&r| !(r > 0.0)) {
            bad.push("hls.half_widths must be positive".into());
        }
        if self.kernel_pairs == 0 {
            bad.push("kernels.pairs must be positive".into());
        }
        bad
    }
}

fn parse_list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',')
        .map(|x| x.trim())
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().map_err(|_| format!("malformed value '{x}'")))
        .collect()
}

fn parse_one<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.trim().parse::<T>().map_err(|_| format!("malformed value '{}'", v.trim()))
}

/// Parses and validates; every syntax error and constraint violation is
/// collected into one `Error::Config`.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut bad: Vec<String> = Vec::new();
    let mut section = String::new();
    let mut raw: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let t = line.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) => section = name.trim().to_string(),
                None => bad.push(format!("line {lineno}: malformed section header '{t}'")),
            }
            continue;
        }
        let Some((k, v)) = t.split_once('=') else {
            bad.push(format!("line {lineno}: expected 'key = value', got '{t}'"));
            continue;
        };
        let key = if section.is_empty() {
            k.trim().to_string()
        } else {
            format!("{section}.{}", k.trim())
        };
        if raw.insert(key.clone(), (lineno, v.trim().to_string())).is_some() {
            bad.push(format!("line {lineno}: duplicate key '{key}'"));
        }
    }
    let command = match raw.get("run.command") {
        Some((l, v)) => match Command::parse(v) {
            Some(c) => c,
            None => {
                bad.push(format!("line {l}: unknown command '{v}' (expected solve, sweep, hls or kernels)"));
                Command::Solve
            }
        },
        None => {
            bad.push("missing run.command".into());
            Command::Solve
        }
    };
    let n = match raw.get("domain.n") {
        Some((l, v)) => parse_one::<usize>(v).unwrap_or_else(|e| {
            bad.push(format!("line {l}: domain.n: {e}"));
            2
        }),
        None => 2,
    };
    let mut c = RunConfig::defaults(command, n.clamp(1, 3));
    c.n = n;
    if raw.get("domain.lengths").is_none() {
        c.lengths = vec![1.0; n];
    }
    if raw.get("discretization.cutoff").is_none() && raw.get("discretization.points").is_none() && n > 3 {
        c.cutoff = vec![c.cutoff[0]; n];
        c.points = vec![c.points[0]; n];
    }
    let known: Vec<&'static str> = c.entries().iter().map(|(k, _)| *k).collect();
    for (key, (l, v)) in &raw {
        if !known.contains(&key.as_str()) {
            bad.push(format!("line {l}: unknown key '{key}'"));
            continue;
        }
        let r: std::result::Result<(), String> = (|| {
            match key.as_str() {
                "run.command" | "domain.n" => {}
                "domain.lengths" => c.lengths = parse_list(v)?,
                "domain.s" => c.s = parse_one(v)?,
                "exponents.p" => c.p = parse_one(v)?,
                "exponents.epsilon" => c.epsilon = parse_list(v)?,
                "discretization.cutoff" => c.cutoff = broadcast(parse_list(v)?, n),
                "discretization.points" => c.points = broadcast(parse_list(v)?, n),
                "discretization.max_points" => c.max_points = parse_one(v)?,
                "discretization.min_core_cells" => c.min_core_cells = parse_one(v)?,
                "solver.theta_tol" => c.theta_tol = parse_one(v)?,
                "solver.residual_tol" => c.residual_tol = parse_one(v)?,
                "solver.max_iter" => c.max_iter = parse_one(v)?,
                "solver.symmetry_probe" => c.symmetry_probe = parse_one(v)?,
                "solver.positivity_limit" => c.positivity_limit = parse_one(v)?,
                "sweep.ring_radius" => c.ring_radius = parse_one(v)?,
                "sweep.exclusion" => c.exclusion = parse_one(v)?,
                "sweep.collar" => c.collar = parse_one(v)?,
                "sweep.warm_start" => c.warm_start = parse_one(v)?,
                "limit.enabled" => c.limit = parse_one(v)?,
                "limit.inner_radius" => c.inner_radius = parse_one(v)?,
                "limit.outer_fraction" => c.outer_fraction = parse_one(v)?,
                "limit.sharp_delta" => c.sharp_delta = parse_one(v)?,
                "limit.field_points" => c.field_points = parse_one(v)?,
                "limit.hls_half_width" => c.hls_half_width = parse_one(v)?,
                "limit.hls_points" => c.hls_points = parse_one(v)?,
                "hls.half_widths" => c.bubble_half_widths = parse_list(v)?,
                "hls.points" => c.bubble_points = parse_list(v)?,
                "kernels.pairs" => c.kernel_pairs = parse_one(v)?,
                "kernels.seed" => c.kernel_seed = parse_one(v)?,
                "kernels.min_separation" => c.min_separation = parse_one(v)?,
                "output.csv" => c.write_csv = parse_one(v)?,
                "output.json" => c.write_json = parse_one(v)?,
                "output.fields" => c.write_fields = parse_one(v)?,
                _ => unreachable!("key list and match arms agree"),
            }
            Ok(())
        })();
        if let Err(e) = r {
            bad.push(format!("line {l}: {key}: {e}"));
        }
    }
    if bad.is_empty() {
        bad.extend(c.violations());
    }
    if bad.is_empty() {
        Ok(c)
    } else {
        Err(Error::Config(bad))
    }
}

/// A single value stands for every axis.
fn broadcast(v: Vec<usize>, n: usize) -> Vec<usize> {
    if v.len() == 1 {
        vec![v[0]; n]
    } else {
        v
    }
}
