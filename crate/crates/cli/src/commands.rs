use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Result};
use canvas_core::fem::{assemble_forms, imex_stochastic_run, uniform_points};
use canvas_core::harness::{
    canvas_error_study, det_space_rate_study, det_time_rate_study, elliptic_rate_study,
    sdr_rate_study, tdr_rate_study, total_error_study, ErrorTable, StudyConfig, StudyKind,
};
use canvas_core::noise::derive_seed;
use canvas_core::oracle::canvas_solution;
use canvas_core::{NoiseMatrix, SplineSpace};
use serde_json::{json, Value};

use crate::config::config_hash;
use crate::output::{csv_header, num, opt_num, RunManifest, Seeds, Writer, VERSION};

pub const TABLE_COLUMNS: [&str; 7] = ["table", "parameter", "param", "error", "method", "provenance", "mc_stderr"];
pub const TOTAL_COLUMNS: [&str; 6] = ["h", "model", "tdr", "sdr", "sdr_stderr", "total"];
pub const PATH_COLUMNS: [&str; 5] = ["step", "tau", "x", "fem", "exact"];
pub const NOISE_COLUMNS: [&str; 3] = ["slab", "mode", "increment"];

fn table_rows(label: &str, t: &ErrorTable) -> Vec<Vec<String>> {
    t.rows
        .iter()
        .map(|r| {
            vec![
                label.to_string(),
                t.parameter.clone(),
                num(r.param),
                num(r.error),
                r.method.clone(),
                r.provenance.to_string(),
                opt_num(r.mc_stderr),
            ]
        })
        .collect()
}

fn fit_json(t: &ErrorTable) -> Value {
    match t.fit {
        Some(f) => json!({
            "slope": f.slope,
            "stderr": f.stderr,
            "ci95": [f.slope - 1.96 * f.stderr, f.slope + 1.96 * f.stderr],
            "points": f.points,
        }),
        None => Value::Null,
    }
}

fn summary(kind: &str, cfg: &StudyConfig, extra: Value) -> Value {
    let mut v = json!({
        "config_sha256": config_hash(cfg),
        "seed": cfg.seed,
        "study": kind,
        "tool_version": VERSION,
        "config": cfg,
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
        m.extend(e);
    }
    v
}

fn manifest(w: &mut Writer, name: &str, command: String, cfg: &StudyConfig, samples: usize, start: Instant) -> Result<()> {
    let outputs = w.written.iter().map(|p| p.display().to_string()).collect();
    let m = RunManifest {
        config_sha256: config_hash(cfg),
        seed: cfg.seed,
        tool_version: VERSION,
        command,
        config: cfg,
        seeds: Seeds::of(cfg, samples),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        outputs,
    };
    w.json(name, &m)?;
    Ok(())
}

pub fn study(kind: StudyKind, cfg: &StudyConfig, out: &Path) -> Result<()> {
    let start = Instant::now();
    let name = kind.name();
    let mut w = Writer::new(out)?;
    let header = csv_header(&format!("study={name}"), cfg);
    let csv = format!("{name}.csv");
    let mut samples = 0;
    let extra = match kind {
        StudyKind::DetTime => {
            let t = det_time_rate_study(cfg)?;
            w.csv(&csv, &header, &TABLE_COLUMNS, &table_rows("time", &t))?;
            json!({ "fitted_rate": t.slope(), "fit": fit_json(&t), "tables": [t] })
        }
        StudyKind::DetSpace => {
            let t = det_space_rate_study(cfg)?;
            let e = elliptic_rate_study(cfg)?;
            let mut rows = table_rows("space", &t);
            rows.extend(table_rows("elliptic", &e));
            w.csv(&csv, &header, &TABLE_COLUMNS, &rows)?;
            json!({
                "fitted_rate": t.slope(),
                "fit": fit_json(&t),
                "elliptic_rate": e.slope(),
                "elliptic_fit": fit_json(&e),
                "tables": [t, e],
            })
        }
        StudyKind::Canvas => {
            let c = canvas_error_study(cfg)?;
            let mut rows = table_rows("modes", &c.modes);
            rows.extend(table_rows("slabs", &c.slabs));
            rows.extend(table_rows("truncated", &c.truncated));
            w.csv(&csv, &header, &TABLE_COLUMNS, &rows)?;
            json!({
                "slope_M": c.modes.slope(),
                "slope_dt": c.slabs.slope(),
                "slope_M_truncated": c.truncated.slope(),
                "fits": {
                    "modes": fit_json(&c.modes),
                    "slabs": fit_json(&c.slabs),
                    "truncated": fit_json(&c.truncated),
                },
                "tables": [c.modes, c.slabs, c.truncated],
            })
        }
        StudyKind::Tdr => {
            let t = tdr_rate_study(cfg)?;
            w.csv(&csv, &header, &TABLE_COLUMNS, &table_rows("tdr", &t))?;
            json!({ "fitted_rate": t.slope(), "fit": fit_json(&t), "tables": [t] })
        }
        StudyKind::Sdr => {
            samples = cfg.samples;
            let t = sdr_rate_study(cfg)?;
            w.csv(&csv, &header, &TABLE_COLUMNS, &table_rows("sdr", &t))?;
            json!({ "fitted_rate": t.slope(), "fit": fit_json(&t), "tables": [t] })
        }
        StudyKind::Total => {
            samples = cfg.samples;
            let t = total_error_study(cfg)?;
            let rows: Vec<Vec<String>> = t
                .rows
                .iter()
                .map(|r| [r.h, r.model, r.tdr, r.sdr, r.sdr_stderr, r.total].map(num).to_vec())
                .collect();
            w.csv(&csv, &header, &TOTAL_COLUMNS, &rows)?;
            json!({
                "steps": t.steps,
                "sdr_rate": t.sdr.slope(),
                "rows": t.rows,
                "tables": [t.sdr],
            })
        }
    };
    w.json(&format!("{name}_summary.json"), &summary(name, cfg, extra))?;
    manifest(&mut w, &format!("{name}_manifest.json"), format!("study {name}"), cfg, samples, start)
}

/// Snapshot selection for a sample path.
#[derive(Debug, Clone, Copy)]
pub struct PathOptions {
    pub elements: usize,
    pub intervals: usize,
    pub every: usize,
}

pub fn sample_path(cfg: &StudyConfig, opts: PathOptions, out: &Path) -> Result<()> {
    let start = Instant::now();
    if opts.every == 0 || opts.intervals == 0 {
        bail!("--every and --points must be positive");
    }
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let noise = NoiseMatrix::sample(grid, derive_seed(cfg.seed, 0));
    let space = SplineSpace::new(opts.elements, cfg.degree)?;
    let forms = assemble_forms(&space);
    let fields = imex_stochastic_run(&forms, &model, &noise, cfg.steps)?;
    let dtau = cfg.t_final / cfg.steps as f64;
    let xs = uniform_points(opts.intervals);
    let mut rows = Vec::new();
    for (m, u) in fields.iter().enumerate() {
        if m % opts.every != 0 && m != cfg.steps {
            continue;
        }
        let tau = if m == cfg.steps { cfg.t_final } else { m as f64 * dtau };
        let exact = canvas_solution(&model, &noise, tau)?;
        for &x in &xs {
            rows.push(vec![m.to_string(), num(tau), num(x), num(u.evaluate(x)?), num(exact.evaluate(x)?)]);
        }
    }
    let mut w = Writer::new(out)?;
    let header = csv_header(&format!("sample-path elements={} noise_seed={}", opts.elements, derive_seed(cfg.seed, 0)), cfg);
    w.csv("sample_path.csv", &header, &PATH_COLUMNS, &rows)?;
    manifest(&mut w, "sample_path_manifest.json", "sample-path".into(), cfg, 1, start)
}

pub fn noise_dump(cfg: &StudyConfig, out: &Path) -> Result<()> {
    let start = Instant::now();
    let grid = cfg.grid()?;
    let noise = NoiseMatrix::sample(grid, derive_seed(cfg.seed, 0));
    let mut w = Writer::new(out)?;
    let mut bin = Vec::new();
    noise.write_dump(&mut bin)?;
    w.bytes("noise.bin", &bin)?;
    let rows: Vec<Vec<String>> = (1..=grid.slabs())
        .flat_map(|n| (1..=grid.modes()).map(move |k| (n, k)))
        .map(|(n, k)| vec![n.to_string(), k.to_string(), num(noise.get(n, k))])
        .collect();
    let header = csv_header(&format!("noise-dump noise_seed={}", derive_seed(cfg.seed, 0)), cfg);
    w.csv("noise.csv", &header, &NOISE_COLUMNS, &rows)?;
    manifest(&mut w, "noise_manifest.json", "noise-dump".into(), cfg, 1, start)
}
