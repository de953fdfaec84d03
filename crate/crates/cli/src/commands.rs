//! Implementations of the five verbs.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{LineWriter, Write};
use std::path::{Path, PathBuf};

use vgbench::agent::{load_checkpoint, save_checkpoint, Agent, MetricsRecord, Trainer};
use vgbench::augment::AugKind;
use vgbench::envcore::DomainId;
use vgbench::evalproto::{
    attention_map, encoder_variance_analysis, factor_sweep, EvalReport, LatentEncoder, TRAIN_COLUMN,
};
use vgbench::visualgen::{gallery, gallery_state, render_sized, sample_visual_spec, PixelObservation};

use crate::config::{RunConfig, RESOLVED_FILE};
use crate::error::{CliError, CliResult};
use crate::plot::{heat_image, line_plot, Series};

const PLOT_SIZE: (u32, u32) = (640, 400);

/// Creates `dir` and stores the resolved configuration in it.
fn prepare_output(cfg: &RunConfig, dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create output directory {}: {e}", dir.display())))?;
    cfg.write_resolved(dir)
}

/// Eval and episode returns collected from a metrics stream.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Curves {
    pub eval: Vec<(u64, f64)>,
    pub episodes: Vec<(u64, f64)>,
}

impl Curves {
    fn observe(&mut self, r: &MetricsRecord) {
        let target = match r.event.as_str() {
            "eval" => &mut self.eval,
            "episode" => &mut self.episodes,
            _ => return,
        };
        if let Some(v) = r.get("return") {
            target.push((r.step, v));
        }
    }

    /// Preferred learning curve: evaluations when present, else episodes.
    fn learning_curve(&self) -> &[(u64, f64)] {
        if self.eval.is_empty() {
            &self.episodes
        } else {
            &self.eval
        }
    }
}

/// Runs one training job, streaming metrics to `dir/metrics.jsonl`.
/// Intermediate checkpoints are written when `checkpoint_interval > 0`.
fn train_into(cfg: &RunConfig, dir: &Path) -> CliResult<(Agent, Curves)> {
    let settings = cfg.env_settings();
    let mut trainer = Trainer::new(settings, cfg.agent.clone())?;
    let mut log = LineWriter::new(File::create(dir.join("metrics.jsonl"))?);
    let mut curves = Curves::default();
    let total = cfg.training_steps();
    while !trainer.is_done() {
        for r in trainer.step()? {
            writeln!(log, "{}", r.to_json_line())?;
            curves.observe(&r);
            if r.event == "eval" {
                eprintln!("step {}/{total}: eval return {:.3}", r.step, r.get("return").unwrap_or(f64::NAN));
            }
        }
        let step = trainer.steps_done();
        if cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval == 0 && step < total {
            save_checkpoint(trainer.agent(), &dir.join(format!("checkpoint_{step:08}.bin")))?;
        }
    }
    log.flush()?;
    Ok((trainer.into_agent(), curves))
}

fn curve_csv(points: &[(u64, f64)]) -> String {
    let mut s = String::from("step,return\n");
    for (step, r) in points {
        let _ = writeln!(s, "{step},{r}");
    }
    s
}

fn to_series(label: &str, points: &[(u64, f64)]) -> Series {
    Series { label: label.into(), points: points.iter().map(|&(s, r)| (s as f64, r)).collect() }
}

pub fn train(cfg: &RunConfig) -> CliResult<()> {
    let dir = &cfg.output_dir;
    prepare_output(cfg, dir)?;
    let (agent, curves) = train_into(cfg, dir)?;
    save_checkpoint(&agent, &dir.join("checkpoint.bin"))?;
    fs::write(dir.join("eval_curve.csv"), curve_csv(&curves.eval))?;
    line_plot(&[to_series(&cfg.method, curves.learning_curve())], PLOT_SIZE.0, PLOT_SIZE.1)
        .save(dir.join("learning_curve.png"))?;
    println!("wrote {}", dir.display());
    Ok(())
}

/// Loads a checkpoint and checks it can act in the configured domain.
fn load_for(cfg: &RunConfig, path: &Path) -> CliResult<Agent> {
    if let Some(trained_on) = sibling_domain(path) {
        if trained_on != cfg.domain {
            return Err(CliError::Config(format!(
                "checkpoint {} was trained on {trained_on}, but the configured domain is {}",
                path.display(),
                cfg.domain
            )));
        }
    }
    let agent = load_checkpoint(path)?;
    if agent.action_dim() != cfg.domain.action_dim() {
        return Err(CliError::Config(format!(
            "checkpoint {} has action width {}, but {} needs {}",
            path.display(),
            agent.action_dim(),
            cfg.domain,
            cfg.domain.action_dim()
        )));
    }
    Ok(agent)
}

/// Domain recorded in the resolved config stored next to a checkpoint.
fn sibling_domain(checkpoint: &Path) -> Option<DomainId> {
    let text = fs::read_to_string(checkpoint.parent()?.join(RESOLVED_FILE)).ok()?;
    text.lines().find_map(|l| l.strip_prefix("domain=")).and_then(|d| d.trim().parse().ok())
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

/// `method,domain,train,test,e_g` with E_G as a fraction.
pub fn table1_csv(report: &EvalReport) -> String {
    let mut s = String::from("method,domain,train,test,e_g\n");
    let (train, test, e_g) = report.table1_row().map_or((None, None, None), |(a, b, c)| (Some(a), Some(b), c));
    let _ = writeln!(s, "{},{},{},{},{}", report.method, report.domain, opt_num(train), opt_num(test), opt_num(e_g));
    s
}

/// One row of mean returns per sweep column, in evaluation order.
pub fn table2_csv(report: &EvalReport) -> String {
    let cols: Vec<_> = report.columns.iter().filter(|c| c.label != TRAIN_COLUMN).collect();
    let mut s = String::from("method,domain");
    for c in &cols {
        s.push(',');
        s.push_str(&c.label);
    }
    let _ = write!(s, "\n{},{}", report.method, report.domain);
    for c in &cols {
        let _ = write!(s, ",{}", c.mean);
    }
    s.push('\n');
    s
}

pub fn eval(cfg: &RunConfig, checkpoint: &Path) -> CliResult<()> {
    let mut agent = load_for(cfg, checkpoint)?;
    let conditions = cfg.eval_conditions(agent.render_size());
    conditions.validate()?;
    let dir = &cfg.output_dir;
    prepare_output(cfg, dir)?;
    let report = factor_sweep(&mut agent, cfg.domain, &cfg.method, &conditions)?;
    report.save(dir)?;
    fs::write(dir.join("table1.csv"), table1_csv(&report))?;
    fs::write(dir.join("table2.csv"), table2_csv(&report))?;
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    println!("wrote {}", dir.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepKind {
    Beta,
    Lambda,
    Augmentation,
}

impl SweepKind {
    fn key(self) -> &'static str {
        match self {
            SweepKind::Beta => "beta",
            SweepKind::Lambda => "lambda",
            SweepKind::Augmentation => "pipeline",
        }
    }

    pub fn default_grid(self) -> Vec<String> {
        match self {
            SweepKind::Beta => ["0", "0.5", "0.9", "1"].map(String::from).to_vec(),
            SweepKind::Lambda => ["0", "1e-5", "1e-3", "1e-1"].map(String::from).to_vec(),
            SweepKind::Augmentation => AugKind::GEOMETRIC.iter().map(|k| k.name().to_string()).collect(),
        }
    }
}

/// Splits a grid flag. Augmentation points may chain kinds with `+`.
pub fn parse_grid(kind: SweepKind, grid: Option<&str>) -> CliResult<Vec<String>> {
    let points: Vec<String> = match grid {
        None => kind.default_grid(),
        Some(g) => g.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| s.replace('+', ",")).collect(),
    };
    if points.is_empty() {
        return Err(CliError::Config("sweep grid is empty".into()));
    }
    Ok(points)
}

pub fn sweep(cfg: &RunConfig, kind: SweepKind, grid: &[String]) -> CliResult<()> {
    if grid.is_empty() {
        return Err(CliError::Config("sweep grid is empty".into()));
    }
    // Resolve every point before training anything so a bad value fails fast.
    let points = grid
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut c = cfg.clone();
            c.set(kind.key(), v)?;
            c.validate()?;
            c.output_dir = cfg.output_dir.join(format!("point_{i:02}"));
            Ok((v.clone(), c))
        })
        .collect::<CliResult<Vec<_>>>()?;
    prepare_output(cfg, &cfg.output_dir)?;

    let mut curves_csv = String::from("point,label,step,return\n");
    let mut final_csv = format!("point,{},final_return\n", kind.key());
    let mut series = Vec::new();
    for (i, (label, c)) in points.iter().enumerate() {
        eprintln!("sweep point {}/{}: {}={label}", i + 1, points.len(), kind.key());
        prepare_output(c, &c.output_dir)?;
        let (agent, curves) = train_into(c, &c.output_dir)?;
        save_checkpoint(&agent, &c.output_dir.join("checkpoint.bin"))?;
        let curve = curves.learning_curve();
        for (step, r) in curve {
            let _ = writeln!(curves_csv, "{i},\"{label}\",{step},{r}");
        }
        let last = curve.last().map_or(f64::NAN, |p| p.1);
        let _ = writeln!(final_csv, "{i},\"{label}\",{last}");
        series.push(to_series(label, curve));
    }
    let dir = &cfg.output_dir;
    fs::write(dir.join("curves.csv"), curves_csv)?;
    fs::write(dir.join("final.csv"), final_csv)?;
    line_plot(&series, PLOT_SIZE.0, PLOT_SIZE.1).save(dir.join("sweep.png"))?;
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn gallery_cmd(cfg: &RunConfig) -> CliResult<()> {
    if cfg.gallery_seeds.is_empty() {
        return Err(CliError::Config("gallery needs at least one seed".into()));
    }
    let dir = &cfg.output_dir;
    prepare_output(cfg, dir)?;
    let (img, manifest) = gallery(cfg.domain, &cfg.gallery_seeds, cfg.toggles, &gallery_state(cfg.domain));
    img.save(dir.join("gallery.png"))?;
    fs::write(dir.join("manifest.txt"), manifest)?;
    println!("wrote {}", dir.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AnalyzeKind {
    Variance,
    Attention,
}

pub fn analyze(cfg: &RunConfig, kind: AnalyzeKind, checkpoints: &[PathBuf]) -> CliResult<()> {
    if checkpoints.is_empty() {
        return Err(CliError::Config("analyze needs at least one --checkpoint".into()));
    }
    let agents = checkpoints.iter().map(|p| load_for(cfg, p)).collect::<CliResult<Vec<_>>>()?;
    let dir = &cfg.output_dir;
    prepare_output(cfg, dir)?;
    let state = gallery_state(cfg.domain);
    match kind {
        AnalyzeKind::Variance => {
            let encoders: Vec<&dyn LatentEncoder> = agents.iter().map(|a| a as &dyn LatentEncoder).collect();
            let curve = encoder_variance_analysis(&encoders, &state, cfg.analysis_factor, cfg.analysis_renderings)?;
            let mut csv = String::from("rank,std\n");
            for (i, v) in curve.iter().enumerate() {
                let _ = writeln!(csv, "{i},{v}");
            }
            fs::write(dir.join("variance.csv"), csv)?;
            let points = curve.iter().enumerate().map(|(i, v)| (i as f64, *v)).collect();
            line_plot(&[Series { label: cfg.analysis_factor.label().into(), points }], PLOT_SIZE.0, PLOT_SIZE.1)
                .save(dir.join("variance.png"))?;
        }
        AnalyzeKind::Attention => {
            let spec = sample_visual_spec(cfg.visual_seed, cfg.toggles, cfg.domain);
            for (i, agent) in agents.iter().enumerate() {
                let obs = PixelObservation::from_first(render_sized(&state, &spec, agent.render_size()));
                let map = attention_map(&agent.nets.encoder, &obs, cfg.attention_layer)?;
                map.overlay.to_image().save(dir.join(format!("attention_{i}.png")))?;
                heat_image(&map.heat, map.size).save(dir.join(format!("heat_{i}.png")))?;
            }
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}
