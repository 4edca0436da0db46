//! nlosrad: simulate scenes, run the pipeline, sweep parameters, dump masks.
//!
//! Exit codes: 0 success, 1 runtime error, 2 configuration error,
//! 3 trial failures above `--max-failure-rate`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nlosrad::classify::build_masks;
use nlosrad::echo::synthesize;
use nlosrad::harness::{run_sweep, run_trial, Metric, PipelineConfig, SweepSpec, TrialRecord};
use nlosrad::io;
use nlosrad::plot::metric_svg;
use nlosrad::ra::compute_ra_map;
use nlosrad::scenario::{randomize_scenario, ScenarioSpec, SceneClass};
use nlosrad::surface::EstimatorId;
use nlosrad::Error;

#[derive(Parser)]
#[command(
    name = "nlosrad",
    version,
    about = "NLOS radar scene simulator and localization pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Scene seed, or master seed for sweeps
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for exported files
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Stage I estimator
    #[arg(long, global = true, value_enum)]
    estimator: Option<Estimator>,
    /// Fixed Stage I peak count; disables sizing from the true surface
    #[arg(long, global = true)]
    k_peaks: Option<usize>,
    /// Guard band around the estimated surface, meters
    #[arg(long, global = true)]
    guard_m: Option<f64>,
    /// Artifacts to write, comma separated
    #[arg(long, global = true, value_enum, value_delimiter = ',')]
    export: Vec<Export>,
    /// Highest tolerated fraction of failed trials
    #[arg(long, global = true, default_value_t = 0.1)]
    max_failure_rate: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Estimator {
    Ls,
    Ransac,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Export {
    Csv,
    Bin,
    Pgm,
    Svg,
}

#[derive(Args)]
struct SceneArgs {
    /// Scene file (TOML); a random scene of `--class` otherwise
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "nlos")]
    class: Class,
}

#[derive(Clone, Copy, ValueEnum)]
enum Class {
    Nlos,
    LosNoSurface,
    LosWithSurfaceNoMp,
    LosWithSurfaceMp,
}

impl From<Class> for SceneClass {
    fn from(c: Class) -> Self {
        match c {
            Class::Nlos => SceneClass::Nlos,
            Class::LosNoSurface => SceneClass::LosNoSurface,
            Class::LosWithSurfaceNoMp => SceneClass::LosWithSurfaceNoMp,
            Class::LosWithSurfaceMp => SceneClass::LosWithSurfaceMp,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one scene and export its echo and map
    Simulate(SceneArgs),
    /// Run the full pipeline on one scene
    Pipeline(SceneArgs),
    /// Run a sweep file and write the aggregate table and plots
    Sweep {
        file: PathBuf,
        /// Override trials per grid point
        #[arg(long)]
        trials: Option<usize>,
        /// Worker threads; all cores by default
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Estimate the surface of one scene and write its masks as PGM
    Masks(SceneArgs),
}

enum Failure {
    Config(String),
    Runtime(String),
    Trials { failed: usize, total: usize },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

// An unreadable input file is a configuration problem.
fn config_file(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(s) => simulate(&cli.common, s),
        Command::Pipeline(s) => pipeline(&cli.common, s),
        Command::Sweep {
            file,
            trials,
            workers,
        } => sweep(&cli.common, file, *trials, *workers),
        Command::Masks(s) => masks(&cli.common, s),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Trials { failed, total }) => {
            eprintln!("error: {failed} of {total} trials failed");
            ExitCode::from(3)
        }
    }
}

impl Common {
    fn wants(&self, e: Export, default: &[Export]) -> bool {
        if self.export.is_empty() {
            default.contains(&e)
        } else {
            self.export.contains(&e)
        }
    }

    fn apply(&self, c: &mut PipelineConfig) -> Outcome {
        if let Some(e) = self.estimator {
            c.estimator = match e {
                Estimator::Ls => EstimatorId::Ls,
                Estimator::Ransac => EstimatorId::Ransac,
            };
        }
        if let Some(k) = self.k_peaks {
            if k == 0 {
                return Err(Failure::Config("--k-peaks must be at least one".into()));
            }
            c.stage_one.k_peaks = k;
            c.truth_k = false;
        }
        if let Some(g) = self.guard_m {
            if !(g >= 0.0) {
                return Err(Failure::Config("--guard-m must be non-negative".into()));
            }
            c.classifier.guard_m = g;
        }
        Ok(())
    }

    fn check_failures(&self, failed: usize, total: usize) -> Outcome {
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return Err(Failure::Config(
                "--max-failure-rate must lie in [0, 1]".into(),
            ));
        }
        if total > 0 && failed as f64 / total as f64 > self.max_failure_rate {
            return Err(Failure::Trials { failed, total });
        }
        Ok(())
    }

    fn out(&self, name: &str) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.out_dir)?;
        Ok(self.out_dir.join(name))
    }
}

fn load_scene(common: &Common, args: &SceneArgs) -> Result<ScenarioSpec, Failure> {
    let mut spec = match &args.scene {
        Some(p) => io::read_scene(p).map_err(config_file)?,
        None => randomize_scenario(args.class.into(), common.seed.unwrap_or(0))?,
    };
    if let (Some(seed), Some(_)) = (common.seed, &args.scene) {
        spec.seed = seed;
    }
    Ok(spec)
}

fn simulate(common: &Common, args: &SceneArgs) -> Outcome {
    let spec = load_scene(common, args)?;
    let echo = synthesize(&spec)?;
    let map = compute_ra_map(&echo)?;
    std::fs::write(common.out("scene.toml")?, io::scene_to_toml(&spec)?)?;
    if common.wants(Export::Bin, &[Export::Bin]) {
        io::write_echo_bin(&common.out("echo.bin")?, &echo)?;
        io::write_echo_metadata(
            &common.out("echo.toml")?,
            &io::EchoMetadata::new(&echo, Some(&spec)),
        )?;
        io::write_map_bin(&common.out("map.bin")?, &map, spec.seed)?;
    }
    if common.wants(Export::Csv, &[]) {
        io::write_map_csv(&common.out("map.csv")?, &map)?;
    }
    println!(
        "class {} seed {} target {:?} noise variance {:.3e}",
        spec.class,
        spec.seed,
        echo.target_status,
        echo.noise_variance()
    );
    Ok(())
}

fn print_record(r: &TrialRecord) {
    println!("class {} seed {} k {}", r.class, r.seed, r.k_peaks);
    match r.estimate.as_ref().and_then(|e| e.fit.as_ref()) {
        Some(f) => println!(
            "surface x {:.3} y {:.3} length {:.3} theta {:.3} inliers {}",
            f.center.x, f.center.y, f.length, f.orientation_deg, f.inlier_count
        ),
        None => println!("surface not detected"),
    }
    if let Some(d) = r.decision {
        println!(
            "decision {} at {:.3} m, {:.3} deg",
            d.hypothesis, d.range_m, d.angle_deg
        );
    }
    if let Some(l) = r.localization {
        println!("target x {:.3} y {:.3}", l.position.x, l.position.y);
    }
    if let (Some(t), Some(d)) = (r.truth_target, r.errors.distance) {
        println!("truth x {:.3} y {:.3} error {:.3} m", t.x, t.y, d);
    }
    let t = &r.timings;
    println!(
        "timings synth {:.4} map {:.4} surface {:.4} decide {:.4} localize {:.4} s",
        t.synthesis, t.map, t.surface, t.decision, t.localization
    );
    if let Some(f) = &r.failure {
        println!("failed: {f}");
    }
}

fn pipeline(common: &Common, args: &SceneArgs) -> Outcome {
    let spec = load_scene(common, args)?;
    let mut config = PipelineConfig::default();
    common.apply(&mut config)?;
    config.keep_products = common.wants(Export::Bin, &[]) || common.wants(Export::Pgm, &[]);
    let rec = run_trial(&spec, &config);
    print_record(&rec);
    if common.wants(Export::Csv, &[Export::Csv]) {
        if let Some(e) = &rec.estimate {
            io::write_rows(
                &common.out("estimate.csv")?,
                &io::ESTIMATE_HEADER,
                [io::estimate_row(e)],
            )?;
        }
        let row = io::result_row(
            rec.localization.as_ref(),
            rec.decision.as_ref(),
            rec.truth_target,
            Some(spec.class),
        );
        io::write_rows(&common.out("result.csv")?, &io::RESULT_HEADER, [row])?;
    }
    if let Some(p) = &rec.products {
        if common.wants(Export::Bin, &[]) {
            io::write_echo_bin(&common.out("echo.bin")?, &p.echo)?;
            io::write_map_bin(&common.out("map.bin")?, &p.map, spec.seed)?;
        }
        if let (true, Some(e)) = (common.wants(Export::Pgm, &[]), &rec.estimate) {
            if e.detected() {
                let masks = build_masks(e, &p.map.axes, config.classifier.guard_m)?;
                io::write_masks_pgm(&common.out("masks.pgm")?, &masks)?;
            }
        }
    }
    common.check_failures(rec.failure.is_some() as usize, 1)
}

fn masks(common: &Common, args: &SceneArgs) -> Outcome {
    let spec = load_scene(common, args)?;
    let mut config = PipelineConfig {
        keep_products: true,
        ..Default::default()
    };
    common.apply(&mut config)?;
    let rec = run_trial(&spec, &config);
    let (Some(est), Some(p)) = (&rec.estimate, &rec.products) else {
        return Err(Failure::Runtime(
            rec.failure.unwrap_or_else(|| "no estimate".into()),
        ));
    };
    if !est.detected() {
        return Err(Failure::Runtime(
            "surface not detected; no masks to write".into(),
        ));
    }
    let masks = build_masks(est, &p.map.axes, config.classifier.guard_m)?;
    let path = common.out("masks.pgm")?;
    io::write_masks_pgm(&path, &masks)?;
    io::write_rows(
        &common.out("estimate.csv")?,
        &io::ESTIMATE_HEADER,
        [io::estimate_row(est)],
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

fn sweep(common: &Common, file: &Path, trials: Option<usize>, workers: Option<usize>) -> Outcome {
    let mut spec: SweepSpec = io::read_sweep(file).map_err(config_file)?;
    if let Some(t) = trials {
        spec.trials_per_point = t;
    }
    if let Some(s) = common.seed {
        spec.master_seed = s;
    }
    common.apply(&mut spec.pipeline)?;
    if workers == Some(0) {
        return Err(Failure::Config("--workers must be at least one".into()));
    }
    let result = run_sweep(&spec, workers)?;
    if common.wants(Export::Csv, &[Export::Csv, Export::Svg]) {
        std::fs::write(
            common.out(&format!("{}.csv", spec.name))?,
            io::sweep_csv(&result)?,
        )?;
        std::fs::write(
            common.out(&format!("{}_trials.csv", spec.name))?,
            io::trials_csv(&result)?,
        )?;
    }
    if common.wants(Export::Svg, &[Export::Csv, Export::Svg]) {
        for m in &spec.metrics {
            std::fs::write(
                common.out(&format!("{}_{}.svg", spec.name, m))?,
                metric_svg(&result, *m),
            )?;
        }
    }
    for p in &result.points {
        let d = p.metric(Metric::RmseD).and_then(|e| e.value);
        println!(
            "{} = {}: {} trials, {} failed{}",
            spec.variable,
            p.value,
            p.trials,
            p.failures,
            d.map(|d| format!(", rmse_d {d:.3} m")).unwrap_or_default()
        );
    }
    common.check_failures(result.failures(), result.trials())
}
