use std::fs;

use anyhow::{bail, Context, Result};
use log::info;
use mop_core::io;
use mop_core::mop::{
    convergence_point, mop_search, noise_estimate, subspace_grid, AnchorRule, ConvergencePoint, ModelKind,
    MopConfig, MopResult, NoiseEstimate,
};
use mop_core::sampling::{sample_full_factorial, sample_lhs, sample_mcs, SampleSet, VariableDef};
use mop_core::surrogate::Surrogate;
use mop_core::testfuncs::{by_name, AnalyticFunction};
use serde::Serialize;

use crate::config::{usage, RunConfig};

const DEFAULT_RESPONSE: &str = "y";
const DEFAULT_GRID_RESOLUTION: usize = 41;

/// Where generated samples come from: a test function (which also supplies
/// the response) or a bare list of variables.
enum Generator {
    Function(AnalyticFunction),
    Variables(Vec<VariableDef>),
}

impl Generator {
    fn from_config(cfg: &RunConfig) -> Result<Self> {
        if let Some(path) = &cfg.variables {
            if cfg.function.is_some() {
                bail!(usage("--variables and --function are mutually exclusive"));
            }
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let vars: Vec<VariableDef> = serde_json::from_str(&text)
                .map_err(|e| mop_core::error::MopError::Format(format!("{}: {e}", path.display())))?;
            return Ok(Generator::Variables(vars));
        }
        let name = cfg.function.as_deref().unwrap_or("coupled5");
        let f = by_name(
            name,
            cfg.inert.unwrap_or(0),
            cfg.noise.unwrap_or(0.0),
            cfg.noise_seed.unwrap_or(cfg.seed()),
        )?;
        Ok(Generator::Function(f))
    }

    fn variables(&self) -> &[VariableDef] {
        match self {
            Generator::Function(f) => &f.domain,
            Generator::Variables(v) => v,
        }
    }

    fn generate(&self, cfg: &RunConfig, n: usize) -> Result<SampleSet> {
        let vars = self.variables();
        let seed = cfg.seed();
        let set = match cfg.scheme.as_deref().unwrap_or("lhs") {
            "lhs" => sample_lhs(vars, n, seed, None)?,
            "mcs" => sample_mcs(vars, n, seed)?,
            "full-factorial" => {
                let levels = cfg
                    .levels
                    .ok_or_else(|| usage("full-factorial sampling needs --levels"))?;
                sample_full_factorial(vars, levels)?
            }
            other => bail!(usage(format!(
                "unknown scheme '{other}' (expected lhs, mcs or full-factorial)"
            ))),
        };
        Ok(match self {
            Generator::Function(f) => {
                let set = f.attach_response(set, response_name(cfg))?;
                if f.saw_out_of_domain() {
                    log::warn!("{} evaluated outside its domain", f.name);
                }
                set
            }
            Generator::Variables(_) => set,
        })
    }
}

fn response_name(cfg: &RunConfig) -> &str {
    cfg.response.as_deref().unwrap_or(DEFAULT_RESPONSE)
}

fn sample_count(cfg: &RunConfig) -> Result<usize> {
    match cfg.n {
        Some(0) => bail!(usage("--n must be at least 1")),
        Some(n) => Ok(n),
        None if cfg.scheme.as_deref() == Some("full-factorial") => Ok(0),
        None => bail!(usage("--n is required")),
    }
}

pub fn sample(cfg: &RunConfig) -> Result<()> {
    if cfg.input.is_some() {
        bail!(usage("sample generates data; --input is not accepted"));
    }
    let n = sample_count(cfg)?;
    let set = Generator::from_config(cfg)?.generate(cfg, n)?;
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| cfg.out_dir().join("samples.csv"));
    io::write_samples(&set, &out)?;
    println!("wrote {} samples of {} variables to {}", set.len(), set.n_vars(), out.display());
    Ok(())
}

fn mop_config(cfg: &RunConfig) -> Result<MopConfig> {
    let d = MopConfig::default();
    let classes = match &cfg.classes {
        Some(list) => list
            .iter()
            .map(|s| s.trim().parse::<ModelKind>())
            .collect::<mop_core::error::Result<Vec<_>>>()?,
        None => d.classes.clone(),
    };
    Ok(MopConfig {
        folds: cfg.folds.unwrap_or(d.folds),
        fold_seed: cfg.fold_seed.unwrap_or(d.fold_seed),
        classes,
        max_subspace: cfg.max_subspace.unwrap_or(d.max_subspace),
        exhaustive: cfg.exhaustive.unwrap_or(d.exhaustive),
        refine: cfg.refine.unwrap_or(d.refine),
        tie_threshold: cfg.tie_threshold.unwrap_or(d.tie_threshold),
        interaction_threshold: cfg.interaction_threshold.unwrap_or(d.interaction_threshold),
        n_mc: cfg.n_mc.unwrap_or(d.n_mc),
        sobol_seed: cfg.sobol_seed.unwrap_or(d.sobol_seed),
    })
}

/// Loads or generates the data set of `mop`/`convergence`, returning it with
/// the response to analyse.
fn load_data(cfg: &RunConfig, n: usize) -> Result<(SampleSet, String)> {
    cfg.check_source()?;
    match &cfg.input {
        Some(path) => {
            let set = io::read_samples(path, cfg.response.as_deref())?;
            let response = match &cfg.response {
                Some(r) => r.clone(),
                None => match set.response_names().as_slice() {
                    [only] => only.clone(),
                    [] => bail!(usage(format!("{} has no response column", path.display()))),
                    many => bail!(usage(format!(
                        "{} has several responses ({}); pick one with --response",
                        path.display(),
                        many.join(", ")
                    ))),
                },
            };
            Ok((set, response))
        }
        None => {
            let generator = Generator::from_config(cfg)?;
            if let Generator::Variables(_) = generator {
                bail!(usage("--variables alone has no response; use --input or --function"));
            }
            Ok((generator.generate(cfg, n)?, response_name(cfg).to_string()))
        }
    }
}

fn check_folds(cfg: &RunConfig, n: usize) -> Result<()> {
    if let Some(q) = cfg.folds {
        if q < 2 || q > n {
            bail!(usage(format!("--folds must lie in [2, {n}], got {q}")));
        }
    }
    Ok(())
}

fn grid_pairs(cfg: &RunConfig, result: &MopResult) -> Result<Vec<(usize, Option<usize>)>> {
    let index = |name: &str| -> Result<usize> {
        result
            .variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| usage(format!("unknown grid variable '{name}'")).into())
    };
    match &cfg.grids {
        Some(specs) => specs
            .iter()
            .map(|s| {
                let mut parts = s.split(',').map(str::trim);
                let a = index(parts.next().unwrap_or(""))?;
                let b = parts.next().map(index).transpose()?;
                if parts.next().is_some() {
                    bail!(usage(format!("grid '{s}' names more than two variables")));
                }
                Ok((a, b))
            })
            .collect(),
        None => {
            let mut ranked = result.per_variable.clone();
            ranked.sort_by(|a, b| b.cop_xi.total_cmp(&a.cop_xi).then(a.index.cmp(&b.index)));
            Ok(match ranked.as_slice() {
                [] => vec![],
                [only] => vec![(only.index, None)],
                [first, second, ..] => vec![(first.index, Some(second.index))],
            })
        }
    }
}

fn print_sensitivity(result: &MopResult) {
    println!(
        "MOP: {} on [{}], CoP = {:.4}{}",
        result.model_class.kind,
        result.subspace_names.join(", "),
        result.cop_total,
        if result.interaction_flag { " (interactions present)" } else { "" }
    );
    let mut rows = result.cop_by_variable();
    rows.sort_by(|a, b| b.2.total_cmp(&a.2));
    println!("{:<12} {:>10} {:>10}", "variable", "S_T", "CoP(X_i)");
    for (name, s, c) in rows {
        println!("{name:<12} {s:>10.4} {c:>10.4}");
    }
}

pub fn mop(cfg: &RunConfig) -> Result<()> {
    let n = if cfg.input.is_some() { 0 } else { sample_count(cfg)? };
    let (set, response) = load_data(cfg, n)?;
    check_folds(cfg, set.len())?;
    let result = mop_search(&set, &response, &mop_config(cfg)?)?;
    let dir = cfg.out_dir();
    io::write_mop_result(&result, &dir.join("mop_result.json"))?;
    io::write_model(&result.model, &dir.join("model.json"))?;
    io::write_text(&dir.join("candidates.csv"), &io::candidates_csv(&result)?)?;
    io::write_text(&dir.join("sensitivity.csv"), &io::sensitivity_csv(&result)?)?;
    let resolution = cfg.grid_resolution.unwrap_or(DEFAULT_GRID_RESOLUTION);
    for (a, b) in grid_pairs(cfg, &result)? {
        let grid = subspace_grid(&result.model, set.variables(), a, b, &AnchorRule::Medians, resolution)?;
        let mut name = format!("grid_{}", grid.var_a);
        if let Some(vb) = &grid.var_b {
            name.push('_');
            name.push_str(vb);
        }
        io::write_text(&dir.join(format!("{name}.csv")), &io::grid_csv(&grid)?)?;
    }
    info!("reports written to {}", dir.display());
    print_sensitivity(&result);
    Ok(())
}

#[derive(Serialize)]
struct ConvergenceReport<'a> {
    response: &'a str,
    history: &'a [ConvergencePoint],
    noise: NoiseEstimate,
}

pub fn convergence(cfg: &RunConfig) -> Result<()> {
    let ns = cfg.ns.clone().unwrap_or_default();
    if ns.is_empty() {
        bail!(usage("convergence needs a non-empty --ns list"));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) || ns[0] == 0 {
        bail!(usage("--ns must be positive and strictly ascending"));
    }
    let mop_cfg = mop_config(cfg)?;
    let (full, response) = match &cfg.input {
        Some(_) => {
            let (set, r) = load_data(cfg, 0)?;
            if *ns.last().unwrap() > set.len() {
                bail!(usage(format!(
                    "--ns asks for {} samples but the input has {}",
                    ns.last().unwrap(),
                    set.len()
                )));
            }
            (Some(set), r)
        }
        None => (None, response_name(cfg).to_string()),
    };
    let mut points = Vec::with_capacity(ns.len());
    for &n in &ns {
        let set = match &full {
            Some(set) => prefix(set, n)?,
            None => load_data(cfg, n)?.0,
        };
        check_folds(cfg, set.len())?;
        let (point, _) = convergence_point(&set, &response, &mop_cfg)?;
        info!("n = {n}: CoP {:.4}", point.cop_mop);
        points.push(point);
    }
    let history: Vec<(usize, f64)> = points.iter().map(|p| (p.n, p.cop_mop)).collect();
    let noise = noise_estimate(points.last().map_or(0.0, |p| p.cop_mop), &history);
    let dir = cfg.out_dir();
    io::write_text(&dir.join("convergence.csv"), &io::convergence_csv(&points)?)?;
    let report = ConvergenceReport {
        response: &response,
        history: &points,
        noise: noise.clone(),
    };
    io::write_text(
        &dir.join("noise_estimate.json"),
        &mop_core::quality::to_json_rounded(&report)?,
    )?;
    println!("{:>8} {:>10}", "n", "CoP");
    for p in &points {
        println!("{:>8} {:>10.4}", p.n, p.cop_mop);
    }
    println!(
        "noise fraction {:.3}, verdict: {}",
        noise.noise_fraction,
        serde_json::to_value(noise.verdict)?.as_str().unwrap_or("")
    );
    Ok(())
}

fn prefix(set: &SampleSet, n: usize) -> Result<SampleSet> {
    let rows: Vec<usize> = (0..n).collect();
    let mut sub = SampleSet::new(
        set.variables().to_vec(),
        set.inputs().select_rows(&rows),
        set.scheme(),
        set.seed(),
    )?;
    for (name, values) in set.responses() {
        sub = sub.with_response(name.clone(), values[..n].to_vec())?;
    }
    Ok(sub)
}

pub fn predict(cfg: &RunConfig) -> Result<()> {
    let model_path = cfg.model.as_ref().ok_or_else(|| usage("predict needs --model"))?;
    let points_path = cfg.points.as_ref().ok_or_else(|| usage("predict needs --points"))?;
    let model = io::read_model(model_path)?;
    let names = input_names(cfg, model.input_dim())?;
    let points = io::read_points(points_path, &names)?;
    let preds = model.predict_rows(&points)?;
    let mut text = String::new();
    text.push_str(&names.join(","));
    text.push_str(",prediction\n");
    for (i, p) in preds.iter().enumerate() {
        let row: Vec<String> = points.row(i).iter().map(|v| v.to_string()).collect();
        text.push_str(&row.join(","));
        text.push(',');
        text.push_str(&io::format_report_number(*p));
        text.push('\n');
    }
    match &cfg.out {
        Some(out) => io::write_text(out, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Input column names for `predict`: taken from the sample sidecar named by
/// `--input` when given, else `X1..Xk`.
fn input_names(cfg: &RunConfig, dim: usize) -> Result<Vec<String>> {
    if let Some(input) = &cfg.input {
        let side = io::sidecar_path(input);
        let sc: io::SampleSidecar = serde_json::from_str(
            &fs::read_to_string(&side).with_context(|| format!("reading {}", side.display()))?,
        )
        .map_err(|e| mop_core::error::MopError::Format(format!("{}: {e}", side.display())))?;
        if sc.variables.len() != dim {
            bail!(usage(format!(
                "{} lists {} variables, the model expects {dim}",
                side.display(),
                sc.variables.len()
            )));
        }
        return Ok(sc.variables.into_iter().map(|v| v.name).collect());
    }
    Ok((1..=dim).map(|j| format!("X{j}")).collect())
}
