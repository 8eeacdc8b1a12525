use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use linekit::eigenmetrics::{effective_phase, PhaseCurve, Scaling};
use linekit::line_count;
use linekit::mc_sensitivity::{run_mc, McConfig, TERM_NAMES};
use linekit::medium::FrequencyGrid;
use linekit::optimizer::{design_kit, KitRequest};
use linekit::rulers::{design_by_ruler, RulerRequest, CHECK_POINTS};
use linekit::trl_classic::{band_edges, design_trl, BandSpec};
use linekit::LineSet;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::*;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What a command produced: the result document and the files written.
pub struct Report {
    pub config: Value,
    pub result: Value,
    pub outputs: Vec<PathBuf>,
}

struct Out<'a> {
    dir: &'a Path,
    command: &'a str,
    written: Vec<PathBuf>,
}

impl<'a> Out<'a> {
    fn new(dir: &'a Path, command: &'a str) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Out { dir, command, written: Vec::new() })
    }

    fn file(&mut self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }

    fn curve(&mut self, name: &str, curve: &PhaseCurve) -> anyhow::Result<()> {
        let mut w = self.file(name)?;
        curve.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Writes `<command>.json` with version, resolved config and result, and
    /// finishes the report.
    fn finish(mut self, config: &impl Serialize, result: Value) -> anyhow::Result<Report> {
        let config = serde_json::to_value(config)?;
        let doc = json!({
            "version": VERSION,
            "command": self.command,
            "config": config,
            "result": result,
        });
        let mut w = self.file(&format!("{}.json", self.command.replace('-', "_")))?;
        serde_json::to_writer_pretty(&mut w, &doc)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(Report { config, result, outputs: self.written })
    }
}

fn progress(label: &'static str) -> impl FnMut(usize, f64) {
    move |generation, best| {
        if generation % 100 == 0 {
            eprintln!("{label}: generation {generation}, best loss {best:.6}");
        }
    }
}

fn curve_summary(curve: &PhaseCurve, margin_deg: f64) -> Value {
    json!({
        "min_phase_deg": curve.min_phase_deg(),
        "mean_phase_deg": curve.mean_phase_deg(),
        "worst_point": curve.worst_point(),
        "degenerate_points": curve.points.iter().filter(|p| p.degenerate).count(),
        "bands_above_margin_hz": curve.bands_above(margin_deg),
    })
}

pub fn analyze(cfg: AnalyzeConfig, out: &Path) -> anyhow::Result<Report> {
    let model = cfg.medium.model()?;
    let lines = LineSet::new(cfg.lengths.meters())?;
    let grid = FrequencyGrid::linspace(cfg.frequency.f_min_hz, cfg.frequency.f_max_hz, cfg.frequency.points)?;
    let curve = effective_phase(&lines, &model, &grid, cfg.scaling)?;
    if curve.points.iter().all(|p| p.degenerate) {
        return Err(linekit::Error::DegenerateFrequency { lambda: 0.0 }).context("every frequency point has λ = 0");
    }
    let mut o = Out::new(out, "analyze")?;
    o.curve("phase_curve.csv", &curve)?;
    let mut result = curve_summary(&curve, cfg.margin_deg);
    result["n_lines"] = json!(lines.len());
    o.finish(&cfg, result)
}

pub fn design_optimize(cfg: DesignOptimizeConfig, out: &Path) -> anyhow::Result<Report> {
    let req = KitRequest {
        f_min: cfg.band.f_min_hz,
        f_max: cfg.band.f_max_hz,
        model: cfg.medium.model()?,
        margin_deg: cfg.margin_deg,
        l_max: cfg.l_max.map(|l| l.meters()),
        n_lines: cfg.n_lines,
        l_min_gap: cfg.l_min_gap.meters(),
        extra_equalities: cfg.equalities(),
        quantization_step: cfg.quantization_step.map(|l| l.meters()),
        loss: cfg.loss.spec(),
    };
    let kit = design_kit(&req, &cfg.optimizer, &mut progress("design-optimize"))?;
    let mut o = Out::new(out, "design-optimize")?;
    o.curve("phase_curve.csv", &kit.result.phase_curve)?;
    let mut result = serde_json::to_value(&kit)?;
    // the curve lives in the CSV
    if let Some(r) = result.get_mut("result").and_then(Value::as_object_mut) {
        r.remove("phase_curve");
    }
    result["phase"] = curve_summary(&kit.result.phase_curve, cfg.margin_deg);
    o.finish(&cfg, result)
}

pub fn design_ruler(cfg: DesignRulerConfig, out: &Path) -> anyhow::Result<Report> {
    let model = cfg.medium.model()?;
    let d = design_by_ruler(&RulerRequest {
        f_min: cfg.band.f_min_hz,
        f_max: cfg.band.f_max_hz,
        margin_deg: cfg.margin_deg,
        model: model.clone(),
        band_n: cfg.band_n,
        n_lines: cfg.n_lines,
        family: cfg.family,
    })?;
    let grid = FrequencyGrid::linspace(cfg.band.f_min_hz, cfg.band.f_max_hz, CHECK_POINTS)?;
    let curve = effective_phase(&d.lengths, &model, &grid, Scaling::None)?;
    let mut o = Out::new(out, "design-ruler")?;
    o.curve("phase_curve.csv", &curve)?;
    let mut result = serde_json::to_value(&d)?;
    result["phase"] = curve_summary(&curve, cfg.margin_deg);
    o.finish(&cfg, result)
}

pub fn linecount(cfg: LinecountConfig, out: &Path) -> anyhow::Result<Report> {
    let model = cfg.medium.model()?;
    let (f_lo, f_hi, l_max) = (cfg.band.f_min_hz, cfg.band.f_max_hz, cfg.l_max.meters());
    let result = if model.is_lossless() {
        let eps = model.mean_eps_real(f_lo, f_hi, CHECK_POINTS)?;
        json!({
            "method": "closed_form",
            "eps_real_mean": eps,
            "harmonic": line_count::recommend(l_max, f_lo, f_hi, eps, cfg.margin_deg)?,
            "optimized": line_count::recommend_for_band(&model, l_max, f_lo, f_hi, cfg.margin_deg)?,
        })
    } else {
        let req = KitRequest {
            f_min: f_lo,
            f_max: f_hi,
            model,
            margin_deg: cfg.margin_deg,
            l_max: Some(l_max),
            n_lines: None,
            l_min_gap: 0.0,
            extra_equalities: Vec::new(),
            quantization_step: None,
            loss: cfg.loss.spec(),
        };
        let kit = design_kit(&req, &cfg.optimizer, &mut progress("linecount"))?;
        json!({
            "method": "incremented",
            "n_lines": kit.n_lines,
            "meets_margin": kit.meets_margin,
            "min_phase_deg": kit.result.min_phase_deg,
            "lengths_m": kit.result.lengths,
        })
    };
    Out::new(out, "linecount")?.finish(&cfg, result)
}

pub fn trl_band(cfg: TrlBandConfig, out: &Path) -> anyhow::Result<Report> {
    let model = cfg.medium.model()?;
    let eps = model.mean_eps_real(cfg.band.f_min_hz, cfg.band.f_max_hz, CHECK_POINTS)?;
    let spec = BandSpec {
        f_min: cfg.band.f_min_hz,
        f_max: cfg.band.f_max_hz,
        phase_margin_deg: cfg.margin_deg,
        band_index: 0,
    };
    let d = design_trl(&spec, eps)?;
    let (lo, hi) = band_edges(d.length_diff, eps, cfg.margin_deg, d.band_index);
    let mut result = serde_json::to_value(d)?;
    result["eps_real_mean"] = json!(eps);
    result["band_at_requested_margin_hz"] = json!([lo, hi]);
    Out::new(out, "trl-band")?.finish(&cfg, result)
}

pub fn mc_sens(cfg: McSensConfig, out: &Path) -> anyhow::Result<Report> {
    let model = cfg.medium.model()?;
    let lines = LineSet::new(cfg.lengths.meters())?;
    let grid = FrequencyGrid::linspace(cfg.frequency.f_min_hz, cfg.frequency.f_max_hz, cfg.frequency.points)?;
    let mc = McConfig {
        trials: cfg.mc.trials,
        noise_sigma: cfg.mc.noise_sigma,
        length_sigma: cfg.mc.length_sigma.meters(),
        eps_sigma: (cfg.mc.eps_sigma[0], cfg.mc.eps_sigma[1]),
        seed: cfg.mc.seed,
    };
    eprintln!("mc-sens: {} trials over {} frequencies", mc.trials, grid.len());
    let report = run_mc(&lines, &model, &grid, &mc)?;
    if report.excluded.iter().all(|&e| e == report.trials) {
        let lambda = report.lambda.iter().cloned().fold(0.0, f64::max);
        return Err(linekit::Error::DegenerateFrequency { lambda }).context("every trial is degenerate at every frequency");
    }
    let mut o = Out::new(out, "mc-sens")?;
    let mut w = o.file("mae.csv")?;
    report.write_mae_csv(&mut w)?;
    w.flush()?;
    let mut w = o.file("inverse_lambda.csv")?;
    report.write_inverse_lambda_csv(&mut w)?;
    w.flush()?;
    let n = report.frequencies.len().max(1) as f64;
    let per_term: serde_json::Map<String, Value> = TERM_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| (name.to_string(), json!(report.mae.iter().map(|m| m[k]).sum::<f64>() / n)))
        .collect();
    let mean = report.mean_mae();
    let worst = mean.iter().enumerate().fold(0, |b, (i, x)| if *x > mean[b] { i } else { b });
    let result = json!({
        "trials": report.trials,
        "band_mean_mae": per_term,
        "worst_frequency_hz": report.frequencies.get(worst),
        "worst_mean_mae": mean.get(worst),
        "excluded_points": report.excluded.iter().sum::<usize>(),
    });
    o.finish(&cfg, result)
}
