use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use iqo::basin::{
    fit_exponents, phase_boundary, ratio_sweep, sample_ensemble, synthetic_table, write_phase_csv,
    write_sweep_csv, EnergySampler, FitPoint, SweepRow, EPS_GS_LARGE_N,
};
use iqo::classical::{ground_state, simulated_anneal, BasinMap, ENUMERATION_LIMIT};
use iqo::io::{fmt_f64, Metadata};
use iqo::protocol::{
    desk_bz_max, estimate_tau3, iterate, run_cycle, CycleConfig, RunOptions, SeedAnneal, Tau3Rule,
    TunerPolicy,
};
use iqo::quantum::{
    gap_scan, isolate_basins, spectrum as eigen, write_spectrum_csv, FieldPoint, GapOptions, GapSearch,
    ReferenceHamiltonian, SpectrumMode, DENSE_LIMIT,
};
use iqo::rng;
use iqo::sk::{InstanceFile, SkInstance, SpinConfig};

use crate::cli::*;
use crate::config::Config;
use crate::CliError;

type Res<T> = Result<T, CliError>;

const DEFAULT_CHIS: &str = "log:0.5:14.210854715202004:16";
const DEFAULT_EPS_R: &str = "-0.72,-0.68,-0.64,-0.60";

fn usage<T>(msg: impl Into<String>) -> Res<T> {
    Err(CliError::Usage(msg.into()))
}

/// `a,b,c`, `lin:a:b:count` or `log:a:b:count` (endpoints included).
pub fn parse_list(s: &str) -> Res<Vec<f64>> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad number {t:?} in {s:?}")));
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [kind @ ("lin" | "log"), a, b, count] => {
            let (a, b) = (num(a)?, num(b)?);
            let count: usize = count.trim().parse().map_err(|_| CliError::Usage(format!("bad count in {s:?}")))?;
            if count == 0 {
                return usage(format!("empty range {s:?}"));
            }
            if *kind == "log" && !(a > 0.0 && b > 0.0) {
                return usage(format!("log range needs positive endpoints: {s:?}"));
            }
            (0..count)
                .map(|i| {
                    let t = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
                    if *kind == "lin" {
                        a + (b - a) * t
                    } else {
                        (a.ln() + (b.ln() - a.ln()) * t).exp()
                    }
                })
                .collect()
        }
        [_] => s.split(',').map(num).collect::<Res<Vec<f64>>>()?,
        _ => return usage(format!("unrecognized list {s:?}")),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return usage(format!("non-finite value in {s:?}"));
    }
    Ok(values)
}

fn list(cfg: &Config, flag: Option<String>, key: &str, default: &str) -> Res<Vec<f64>> {
    let raw = match cfg.opt::<Value>(flag.map(Value::String), key)? {
        None => default.to_string(),
        Some(Value::String(s)) => s,
        Some(Value::Array(a)) => a.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
        Some(v) => v.to_string(),
    };
    parse_list(&raw)
}

/// A number or the word `auto`.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Auto {
    Auto,
    Value(f64),
}

fn auto_or_number(cfg: &Config, flag: Option<String>, key: &str, default: Auto) -> Res<Auto> {
    let parsed = match cfg.opt::<Value>(flag.map(Value::String), key)? {
        None => return Ok(default),
        Some(Value::Number(x)) => x.as_f64().map(Auto::Value),
        Some(Value::String(s)) if s == "auto" => Some(Auto::Auto),
        Some(Value::String(s)) => s.parse().ok().map(Auto::Value),
        Some(_) => None,
    };
    parsed.ok_or_else(|| CliError::Usage(format!("--{key} takes a number or `auto`")))
}

fn auto_json(a: Auto) -> Value {
    match a {
        Auto::Auto => json!("auto"),
        Auto::Value(x) => json!(x),
    }
}

fn writer(path: Option<&Path>) -> Res<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn io_err(path: Option<&Path>) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path.unwrap_or(Path::new("<stdout>")), e)
}

/// Pretty JSON of `payload` with a `meta` field added.
fn write_json<T: Serialize>(path: Option<&Path>, meta: &Metadata, payload: &T) -> Res<()> {
    let mut v = serde_json::to_value(payload).map_err(|e| CliError::Parse(e.to_string()))?;
    match &mut v {
        Value::Object(m) => {
            m.insert("meta".into(), serde_json::to_value(meta).expect("metadata serializes"));
        }
        other => *other = json!({ "meta": meta, "value": other.clone() }),
    }
    let mut w = writer(path)?;
    let text = serde_json::to_string_pretty(&v).expect("value serializes");
    writeln!(w, "{text}").and_then(|_| w.flush()).map_err(io_err(path))
}

fn load_instance(path: &Path) -> Res<SkInstance> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: InstanceFile =
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    SkInstance::try_from(file).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn hex_config(n: usize, hex: &str, what: &str) -> Res<SpinConfig> {
    SpinConfig::from_hex(n, hex).map_err(|e| CliError::Usage(format!("--{what}: {e}")))
}

/// Reference string from `--ref`: hex, or `anneal` for a simulated-annealing
/// minimum from a random start.
fn reference(inst: &SkInstance, r: RefArgs, cfg: &Config, flags: &mut serde_json::Map<String, Value>) -> Res<SpinConfig> {
    let spec: String = cfg.require(r.reference, "ref")?;
    flags.insert("ref".into(), json!(spec));
    if spec != "anneal" {
        return hex_config(inst.n(), &spec, "ref");
    }
    let seed = cfg.get(r.anneal_seed, "anneal-seed", 0u64)?;
    let sweeps = cfg.get(r.anneal_sweeps, "anneal-sweeps", 200usize)?;
    flags.insert("anneal_seed".into(), json!(seed));
    flags.insert("anneal_sweeps".into(), json!(sweeps));
    let start = SpinConfig::random(inst.n(), &mut rng::stream(seed));
    let j = inst.j_scale();
    Ok(simulated_anneal(inst, &start, sweeps, 3.0 * j, 0.05 * j, rng::derive_seed(seed, 1))?.config)
}

pub fn gen(a: GenArgs, cfg: &Config) -> Res<()> {
    let n: usize = cfg.require(a.n, "n")?;
    if n < 2 {
        return usage("--n must be at least 2");
    }
    let j = cfg.get(a.j, "j", 1.0)?;
    let seed = cfg.get(a.seed, "seed", 0u64)?;
    let out: Option<PathBuf> = cfg.opt(a.out, "out")?;
    let inst = SkInstance::generate(n, j, seed)?;
    let meta = Metadata::new("gen", Some(seed), json!({ "n": n, "j": j }));
    let mut file = inst.to_file();
    file.meta = Some(serde_json::to_value(&meta).expect("metadata serializes"));
    let mut w = writer(out.as_deref())?;
    let text = serde_json::to_string_pretty(&file).expect("instance serializes");
    writeln!(w, "{text}").and_then(|_| w.flush()).map_err(io_err(out.as_deref()))
}

pub fn spectrum(a: SpectrumArgs, cfg: &Config) -> Res<()> {
    let path: PathBuf = cfg.require(a.instance, "instance")?;
    let inst = load_instance(&path)?;
    let mut flags = serde_json::Map::new();
    let r = reference(&inst, a.reference, cfg, &mut flags)?;
    let chi = cfg.get(a.chi, "chi", 1.0)?;
    if !(chi.is_finite() && chi >= 0.0) {
        return usage("--chi must be non-negative");
    }
    let grid = list(cfg, a.bz_grid, "bz-grid", "lin:4:0:81")?;
    if grid.iter().any(|b| *b < 0.0) {
        return usage("--bz-grid values must be non-negative");
    }
    let low_k: Option<usize> = cfg.opt(a.low_k, "low-k")?;
    let isolate = cfg.switch(a.isolate, "isolate")?;
    let gap: Option<String> = cfg.opt(a.gap, "gap")?;
    let search = match gap.as_deref() {
        None => None,
        Some("global") => Some(GapSearch::Global),
        Some("first-dip") => Some(GapSearch::FirstDip),
        Some(other) => return usage(format!("--gap takes `global` or `first-dip`, got {other:?}")),
    };
    let out: Option<PathBuf> = cfg.opt(a.out, "out")?;
    let mode = match low_k {
        Some(0) => return usage("--low-k must be at least 1"),
        Some(k) => SpectrumMode::LowK(k),
        None if inst.n() <= DENSE_LIMIT => SpectrumMode::Dense,
        None => SpectrumMode::LowK(8),
    };
    flags.extend([
        ("instance".into(), json!(path)),
        ("chi".into(), json!(chi)),
        ("bz_grid".into(), json!(grid)),
        ("low_k".into(), json!(low_k)),
        ("isolate".into(), json!(isolate)),
        ("gap".into(), json!(gap)),
    ]);
    let meta = Metadata::new("spectrum", Some(inst.seed()), Value::Object(flags));
    let points: Vec<FieldPoint> = grid.iter().map(|&bz| FieldPoint::on_ray(chi, bz)).collect();
    let h = ReferenceHamiltonian::new(&inst, &r)?;
    let mut w = writer(out.as_deref())?;
    let err = io_err(out.as_deref());
    writeln!(w, "{}", meta.csv_comment()).map_err(&err)?;
    if isolate {
        let basins = BasinMap::build(&inst)?;
        writeln!(w, "bz,bx,basin,minimum,level").map_err(&err)?;
        for f in &points {
            for lvl in isolate_basins(&inst, &r, *f, &basins)? {
                let hex = basins.minima[lvl.id].config.to_hex();
                writeln!(w, "{},{},{},{hex},{}", fmt_f64(f.bz), fmt_f64(f.bx), lvl.id, fmt_f64(lvl.level))
                    .map_err(&err)?;
            }
        }
    } else {
        let slices = points.iter().map(|f| eigen(&h, *f, mode, false)).collect::<iqo::Result<Vec<_>>>()?;
        write_spectrum_csv(&mut w, &slices).map_err(&err)?;
    }
    w.flush().map_err(&err)?;
    if let Some(search) = search {
        let mut desc = grid.clone();
        desc.sort_by(|x, y| y.total_cmp(x));
        desc.dedup();
        let gap_mode = if inst.n() <= DENSE_LIMIT && low_k.is_none() { SpectrumMode::Dense } else { SpectrumMode::LowK(2) };
        let g = gap_scan(&h, chi, &desc, GapOptions { search, refine: true, mode: gap_mode })?;
        let summary = json!({ "gap": g.gap, "bz": g.field.bz, "bx": g.field.bx });
        eprintln!("{summary}");
    }
    Ok(())
}

/// Resolved cycle flags; `auto` fields still need a reference.
struct CycleSpec {
    cfg: CycleConfig,
    bz_max: Auto,
    tau3: Auto,
    tau3_rule: Tau3Rule,
}

impl CycleSpec {
    fn resolve(f: CycleFlags, cfg: &Config) -> Res<Self> {
        let d = CycleConfig::default();
        let c = CycleConfig {
            chi: cfg.get(f.chi, "chi", d.chi)?,
            bz_max: d.bz_max,
            tau1: cfg.get(f.tau1, "tau1", d.tau1)?,
            tau2: cfg.get(f.tau2, "tau2", d.tau2)?,
            tau3: d.tau3,
            dt_max: cfg.get(f.dt, "dt", d.dt_max)?,
            seed: cfg.get(f.seed, "seed", d.seed)?,
        };
        let bz_max = auto_or_number(cfg, f.bz_max, "bz-max", Auto::Auto)?;
        let tau3 = auto_or_number(cfg, f.tau3, "tau3", Auto::Value(d.tau3))?;
        let tau3_rule = Tau3Rule { c: cfg.get(f.tau3_c, "tau3-c", 10.0)?, cap: cfg.get(f.tau3_cap, "tau3-cap", 1000.0)? };
        let mut spec = Self { cfg: c, bz_max, tau3, tau3_rule };
        if let Auto::Value(b) = bz_max {
            spec.cfg.bz_max = b;
        }
        if let Auto::Value(t) = tau3 {
            spec.cfg.tau3 = t;
        }
        Ok(spec)
    }

    fn flags(&self) -> serde_json::Map<String, Value> {
        let c = &self.cfg;
        let v = json!({
            "chi": c.chi,
            "bz_max": auto_json(self.bz_max),
            "tau1": c.tau1,
            "tau2": c.tau2,
            "tau3": auto_json(self.tau3),
            "tau3_c": self.tau3_rule.c,
            "tau3_cap": self.tau3_rule.cap,
            "dt": c.dt_max,
        });
        match v {
            Value::Object(m) => m,
            _ => unreachable!(),
        }
    }
}

fn auto_bz_max(inst: &SkInstance, r: &iqo::sk::LocalMinimum) -> Res<f64> {
    Ok(if inst.n() <= ENUMERATION_LIMIT {
        desk_bz_max(inst, r)?
    } else {
        CycleConfig::default_bz_max(inst.j_scale(), 1.0)
    })
}

#[derive(Serialize)]
struct CycleOutput {
    bz_max: f64,
    tau3: f64,
    #[serde(flatten)]
    result: iqo::protocol::CycleResult,
}

pub fn cycle(a: CycleArgs, cfg: &Config) -> Res<()> {
    let path: PathBuf = cfg.require(a.instance, "instance")?;
    let inst = load_instance(&path)?;
    let spec = CycleSpec::resolve(a.cycle, cfg)?;
    let out: Option<PathBuf> = cfg.opt(a.out, "out")?;
    let mut flags = spec.flags();
    flags.insert("instance".into(), json!(path));
    let r = reference(&inst, a.reference, cfg, &mut flags)?;
    let r = inst.local_minimum(r)?;
    let mut c = spec.cfg;
    if spec.bz_max == Auto::Auto {
        c.bz_max = auto_bz_max(&inst, &r)?;
    }
    if spec.tau3 == Auto::Auto {
        let h = ReferenceHamiltonian::new(&inst, &r.config)?;
        c.tau3 = estimate_tau3(&h, c.chi, c.bz_max, spec.tau3_rule.c, spec.tau3_rule.cap)?.0;
    }
    let (result, _) = run_cycle(&inst, &r, &c)?;
    let meta = Metadata::new("cycle", Some(c.seed), Value::Object(flags));
    write_json(out.as_deref(), &meta, &CycleOutput { bz_max: c.bz_max, tau3: c.tau3, result })
}

#[derive(Serialize)]
struct RunOutput {
    initial_reference: String,
    initial_energy: f64,
    #[serde(flatten)]
    summary: iqo::protocol::RunSummary,
    ground_energy: Option<f64>,
}

pub fn run(a: RunArgs, cfg: &Config) -> Res<()> {
    let path: PathBuf = cfg.require(a.instance, "instance")?;
    let inst = load_instance(&path)?;
    let j = inst.j_scale();
    let budget = cfg.get(a.budget, "budget", 50usize)?;
    if budget == 0 {
        return usage("--budget must be at least 1");
    }
    let spec = CycleSpec::resolve(a.cycle, cfg)?;
    let start_spec: String = cfg.get(a.start, "start", "random".to_string())?;
    let start_seed = cfg.get(a.start_seed, "start-seed", 0u64)?;
    let start = if start_spec == "random" {
        SpinConfig::random(inst.n(), &mut rng::stream(start_seed))
    } else {
        hex_config(inst.n(), &start_spec, "start")?
    };
    let sweeps = cfg.get(a.anneal_sweeps, "anneal-sweeps", 1usize)?;
    if sweeps == 0 {
        return usage("--anneal-sweeps must be at least 1");
    }
    let quench = sweeps == 1;
    let anneal = SeedAnneal {
        sweeps,
        t_hot: cfg.get(a.t_hot, "t-hot", if quench { 0.0 } else { 3.0 * j })?,
        t_cold: cfg.get(a.t_cold, "t-cold", if quench { 0.0 } else { 0.05 * j })?,
    };
    let d = TunerPolicy::default();
    let tuner = TunerPolicy {
        enabled: !cfg.switch(a.no_tuner, "no-tuner")?,
        patience: cfg.get(a.patience, "patience", d.patience)?,
        up: cfg.get(a.tune_up, "tune-up", d.up)?,
        down: cfg.get(a.tune_down, "tune-down", d.down)?,
    };
    let oracle = cfg.switch(a.oracle, "oracle")?;
    let track_gap = cfg.switch(a.track_gap, "track-gap")?;
    let log: Option<PathBuf> = cfg.opt(a.log, "log")?;
    let out: Option<PathBuf> = cfg.opt(a.out, "out")?;
    let ground_energy = if oracle { Some(ground_state(&inst)?.energy) } else { None };
    let opts = RunOptions {
        anneal,
        tuner,
        ground_energy,
        track_gap,
        auto_bz_max: spec.bz_max == Auto::Auto,
        auto_tau3: (spec.tau3 == Auto::Auto).then_some(spec.tau3_rule),
    };
    let mut flags = spec.flags();
    flags.extend([
        ("instance".into(), json!(path)),
        ("start".into(), json!(start_spec)),
        ("start_seed".into(), json!(start_seed)),
        ("budget".into(), json!(budget)),
        ("anneal".into(), json!(anneal)),
        ("tuner".into(), json!(tuner)),
        ("oracle".into(), json!(oracle)),
        ("track_gap".into(), json!(track_gap)),
    ]);
    let meta = Metadata::new("run", Some(spec.cfg.seed), Value::Object(flags));
    let rec = iterate(&inst, &start, &spec.cfg, budget, &opts)?;
    if let Some(p) = log.as_deref() {
        let mut w = writer(Some(p))?;
        let err = io_err(Some(p));
        serde_json::to_writer(&mut w, &json!({ "meta": meta })).map_err(|e| CliError::io(p, e.into()))?;
        writeln!(w).map_err(&err)?;
        rec.write_jsonl(&mut w).and_then(|_| w.flush()).map_err(&err)?;
    }
    let output = RunOutput {
        initial_reference: rec.initial_reference.clone(),
        initial_energy: rec.initial_energy,
        summary: rec.summary(j),
        ground_energy,
    };
    write_json(out.as_deref(), &meta, &output)
}

fn sampler(a: SamplerArgs, cfg: &Config, seed: u64) -> Res<(EnergySampler, Value)> {
    let spec = cfg.get(a.sampler, "sampler", "calibrated".to_string())?;
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| CliError::Usage(format!("bad --sampler {spec:?}")));
    let (s, desc) = match parts.as_slice() {
        ["calibrated"] => {
            let n = cfg.get(a.calib_n, "calib-n", 14usize)?;
            let k = cfg.get(a.calib_instances, "calib-instances", 20usize)?;
            if !(2..=ENUMERATION_LIMIT).contains(&n) {
                return usage(format!("--calib-n must lie in 2..={ENUMERATION_LIMIT}"));
            }
            let s = EnergySampler::calibrate(n, k, 1.0, rng::derive_seed(seed, 0xCA1))?;
            let desc = json!({ "kind": "calibrated", "calib_n": n, "calib_instances": k, "fitted": s });
            (s, desc)
        }
        ["gaussian", m, sd] => {
            let s = EnergySampler::Gaussian { mean: num(m)?, sd: num(sd)? };
            (s.clone(), json!(s))
        }
        ["uniform", lo, hi] => {
            let s = EnergySampler::Uniform { lo: num(lo)?, hi: num(hi)? };
            (s.clone(), json!(s))
        }
        _ => return usage(format!("--sampler takes `calibrated`, `gaussian:M:S` or `uniform:L:H`, got {spec:?}")),
    };
    Ok((s, desc))
}

fn synthetic_spec(s: &str) -> Res<(f64, f64, f64)> {
    let (mut g, mut d, mut c) = (None, None, None);
    for part in s.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(|| CliError::Usage(format!("bad --synthetic {s:?}")))?;
        let v: f64 = v.trim().parse().map_err(|_| CliError::Usage(format!("bad --synthetic {s:?}")))?;
        match k.trim() {
            "gamma" => g = Some(v),
            "delta" => d = Some(v),
            "chi_c" => c = Some(v),
            other => return usage(format!("unknown --synthetic key {other:?}")),
        }
    }
    match (g, d, c) {
        (Some(g), Some(d), Some(c)) => Ok((g, d, c)),
        _ => usage("--synthetic needs gamma, delta and chi_c"),
    }
}

pub fn basin(a: BasinArgs, cfg: &Config) -> Res<()> {
    let n = cfg.get(a.n, "n", 100usize)?;
    let curves = cfg.get(a.curves, "curves", 1000usize)?;
    let chis = list(cfg, a.chis, "chis", DEFAULT_CHIS)?;
    let eps_rs = list(cfg, a.eps_r_list, "eps-r-list", DEFAULT_EPS_R)?;
    let reps = cfg.get(a.reps, "reps", 20usize)?;
    let grid = cfg.get(a.grid, "grid", 1024usize)?;
    let seed = cfg.get(a.seed, "seed", 0u64)?;
    let eps_gs = cfg.get(a.eps_gs, "eps-gs", EPS_GS_LARGE_N)?;
    let synthetic: Option<String> = cfg.opt(a.synthetic, "synthetic")?;
    let noise = cfg.get(a.noise, "noise", 0.0)?;
    let table: Option<PathBuf> = cfg.opt(a.table, "table")?;
    let fit_out: Option<PathBuf> = cfg.opt(a.fit, "fit")?;
    let mut flags = json!({
        "chis": chis,
        "eps_r_list": eps_rs,
        "eps_gs": eps_gs,
    });
    let rows: Vec<SweepRow> = if let Some(s) = &synthetic {
        let (g, d, c) = synthetic_spec(s)?;
        if !(noise >= 0.0) {
            return usage("--noise must be non-negative");
        }
        flags["synthetic"] = json!({ "gamma": g, "delta": d, "chi_c": c, "noise": noise });
        synthetic_table(g, d, c, eps_gs, &chis, &eps_rs, noise, seed)
            .into_iter()
            .map(|p| SweepRow {
                chi: p.chi,
                eps_r: p.eps_r,
                n_above: f64::NAN,
                n_below: f64::NAN,
                ratio: Some(p.ratio),
                stderr: None,
                reps: 0,
                seed,
            })
            .collect()
    } else {
        let (s, desc) = sampler(a.sampler, cfg, seed)?;
        for (k, v) in [("n", json!(n)), ("curves", json!(curves)), ("reps", json!(reps)), ("grid", json!(grid)), ("sampler", desc)] {
            flags[k] = v;
        }
        ratio_sweep(|e, s2| sample_ensemble(n, curves, &s, e, 1.0, s2), &chis, &eps_rs, reps, grid, seed)?
    };
    let meta = Metadata::new("basin", Some(seed), flags);
    if let Some(p) = table.as_deref() {
        let mut w = writer(Some(p))?;
        let err = io_err(Some(p));
        writeln!(w, "{}", meta.csv_comment()).map_err(&err)?;
        write_sweep_csv(&mut w, &rows).and_then(|_| w.flush()).map_err(&err)?;
    }
    let fit = fit_exponents(&FitPoint::from_rows(&rows), eps_gs)?;
    write_json(fit_out.as_deref(), &meta, &fit)
}

/// Fit points from a sweep CSV; `#` lines are skipped, columns are found by
/// header name and rows without a finite positive ratio are dropped.
fn read_table(path: &Path) -> Res<Vec<FitPoint>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |m: String| CliError::Parse(format!("{}: {m}", path.display()));
    let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty table".into()))?.split(',').map(str::trim).collect();
    let col = |name: &str| header.iter().position(|h| *h == name).ok_or_else(|| bad(format!("missing column {name}")));
    let (ci, ei, ri) = (col("chi")?, col("eps_r")?, col("ratio")?);
    let mut pts = Vec::new();
    for (k, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Res<f64> {
            let cell = cells.get(i).ok_or_else(|| bad(format!("row {} is short", k + 1)))?;
            cell.parse().map_err(|_| bad(format!("row {}: bad number {cell:?}", k + 1)))
        };
        let (chi, eps_r, ratio) = (get(ci)?, get(ei)?, get(ri)?);
        if ratio.is_finite() && ratio > 0.0 {
            pts.push(FitPoint { chi, eps_r, ratio });
        }
    }
    Ok(pts)
}

pub fn fit(a: FitArgs, cfg: &Config) -> Res<()> {
    let table: PathBuf = cfg.require(a.table, "table")?;
    let eps_gs = cfg.get(a.eps_gs, "eps-gs", EPS_GS_LARGE_N)?;
    let out: Option<PathBuf> = cfg.opt(a.out, "out")?;
    let pts = read_table(&table)?;
    let meta = Metadata::new("fit", None, json!({ "table": table, "eps_gs": eps_gs }));
    let fit = fit_exponents(&pts, eps_gs)?;
    write_json(out.as_deref(), &meta, &fit)
}

pub fn phase(a: PhaseArgs, cfg: &Config) -> Res<()> {
    let n = cfg.get(a.n, "n", 100usize)?;
    let curves = cfg.get(a.curves, "curves", 1000usize)?;
    let eps_r = cfg.get(a.eps_r, "eps-r", -0.70)?;
    let chis = list(cfg, a.chis, "chis", DEFAULT_CHIS)?;
    if chis.iter().any(|c| *c <= 0.0) {
        return usage("--chis must be positive");
    }
    let seed = cfg.get(a.seed, "seed", 0u64)?;
    let out: Option<PathBuf> = cfg.opt(a.out, "out")?;
    let (s, desc) = sampler(a.sampler, cfg, seed)?;
    let ens = sample_ensemble(n, curves, &s, eps_r, 1.0, seed)?;
    let boundary = phase_boundary(&ens, &chis)?;
    let meta = Metadata::new(
        "phase",
        Some(seed),
        json!({ "n": n, "curves": curves, "eps_r": eps_r, "chis": chis, "sampler": desc }),
    );
    let mut w = writer(out.as_deref())?;
    let err = io_err(out.as_deref());
    writeln!(w, "{}", meta.csv_comment()).map_err(&err)?;
    write_phase_csv(&mut w, &chis, &boundary).and_then(|_| w.flush()).map_err(&err)
}
