use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rhyde::cube::{cube_to_matrix, matrix_to_cube, BandMatrix, GridShape, HsiCube};
use rhyde::denoise::by_name;
use rhyde::detect::{global_rx, rhyde_scores, roc_curve, write_roc_csv, write_scores_csv};
use rhyde::hsc::{load_covariance, load_hsc, load_mask, read_hsc_header, save_covariance, save_hsc, save_mask};
use rhyde::metrics::{Peak, QualityReport};
use rhyde::noise::NoiseModel;
use rhyde::pipeline::{denoise_image, NoiseSource, PipelineConfig};
use rhyde::simulate::{orthogonal_residual_power_ratio, simulate_semireal, AnomalySpectrum, SimulationSpec};
use rhyde::subspace::estimate_basis;
use rhyde::{Error, Result};

use crate::manifest::Manifest;
use crate::{Cli, Command, DenoiseArgs, DetectArgs, Detector, EvaluateArgs, InspectArgs, SimulateArgs};

pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Context {
        out_dir: cli.out_dir.clone(),
        seed: cli.seed,
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Denoise(a) => denoise(&ctx, a),
        Command::Detect(a) => detect(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Inspect(a) => inspect(&ctx, a),
    }
}

struct Context {
    out_dir: PathBuf,
    seed: u64,
    quiet: bool,
}

impl Context {
    fn prepare(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir).map_err(|source| io_err(&self.out_dir, source))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs `body` against a buffered file.
fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    body(&mut w)?;
    w.flush().map_err(|e| io_err(path, e))
}

fn save_matrix(m: &BandMatrix, shape: GridShape, path: &Path) -> Result<()> {
    save_hsc(&matrix_to_cube(m, shape.rows, shape.cols)?, path)
}

fn load_matrix(path: &Path) -> Result<(BandMatrix, GridShape)> {
    let cube: HsiCube = load_hsc(path)?;
    Ok((cube_to_matrix(&cube), cube.shape()))
}

fn simulate(ctx: &Context, a: &SimulateArgs) -> Result<()> {
    let spec = SimulationSpec {
        rows: a.rows,
        cols: a.cols,
        bands: a.bands,
        p_true: a.p_true,
        implant_rate: a.implant_rate,
        anomaly: AnomalySpectrum::Orthogonal { norm: a.anomaly_norm },
        noise_u: a.noise_u,
        seed: ctx.seed,
    };
    spec.validate()?;
    ctx.prepare()?;
    let sim = simulate_semireal(&spec)?;
    let shape = spec.shape();
    save_matrix(&sim.clean, shape, &ctx.path("clean.hsc"))?;
    save_matrix(&sim.noisy, shape, &ctx.path("noisy.hsc"))?;
    save_mask(&sim.mask, shape, ctx.path("mask.csv"))?;
    let std_path = ctx.path("noise_std.csv");
    write_file(&std_path, |w| {
        writeln!(w, "band,std").map_err(|e| io_err(&std_path, e))?;
        for (b, s) in sim.noise_std.iter().enumerate() {
            writeln!(w, "{b},{s}").map_err(|e| io_err(&std_path, e))?;
        }
        Ok(())
    })?;

    let noise = BandMatrix::new(sim.noise())?;
    let gamma = orthogonal_residual_power_ratio(&sim.clean, &noise, &sim.true_basis())
        .map(|g| g.to_string())
        .unwrap_or_else(|_| "undefined".into());
    let mut m = Manifest::new("simulate", ctx.seed);
    m.set("rows", spec.rows);
    m.set("cols", spec.cols);
    m.set("bands", spec.bands);
    m.set("p_true", spec.p_true);
    m.set("implant_rate", spec.implant_rate);
    m.set("anomaly_norm", a.anomaly_norm);
    m.set("noise_u", spec.noise_u);
    m.set("anomalies", sim.mask.count());
    m.set("gamma", &gamma);
    m.write(&ctx.path("manifest.txt"))?;
    ctx.say(format!(
        "simulated {}x{}x{} with {} anomalies (gamma={gamma}) into {}",
        spec.rows,
        spec.cols,
        spec.bands,
        sim.mask.count(),
        ctx.out_dir.display()
    ));
    Ok(())
}

fn denoise(ctx: &Context, a: &DenoiseArgs) -> Result<()> {
    let mut cfg = PipelineConfig::new(a.p);
    cfg.params.mu1 = a.mu1;
    cfg.params.mu2 = a.mu2;
    cfg.params.mu3 = a.mu3;
    cfg.params.p_value = a.p_value;
    cfg.params.lambda2 = a.lambda2;
    cfg.params.max_iters = a.max_iters;
    cfg.params.rel_tol = a.rel_tol;
    cfg.anscombe = a.anscombe;
    cfg.params.validate()?;
    let denoiser = by_name(a.denoiser.as_str(), &a.denoiser_opts)?;
    if let Some(path) = &a.noise_cov {
        cfg.noise = NoiseSource::Known(NoiseModel::from_covariance(load_covariance(path)?)?);
    }
    let (y, shape) = load_matrix(&a.input)?;
    ctx.prepare()?;

    let out = denoise_image(&y, shape, &cfg, denoiser.as_ref())?;
    let solve = &out.solve;
    save_matrix(&out.denoised, shape, &ctx.path("denoised.hsc"))?;
    save_matrix(&solve.s_hat, shape, &ctx.path("s_hat.hsc"))?;
    save_covariance(out.noise.cov(), ctx.path("noise_cov.bin"))?;
    let conv = ctx.path("convergence.csv");
    write_file(&conv, |w| {
        writeln!(w, "iter,rel_change").map_err(|e| io_err(&conv, e))?;
        for (k, t) in solve.trace.iter().enumerate() {
            writeln!(w, "{},{t}", k + 1).map_err(|e| io_err(&conv, e))?;
        }
        Ok(())
    })?;

    let (s_norm, z_norm) = (solve.s_hat.frobenius_norm(), solve.z_hat.frobenius_norm());
    let ratio = if z_norm > 0.0 { s_norm / z_norm } else { f64::INFINITY };
    let mut m = Manifest::new("denoise", ctx.seed);
    m.set("input", a.input.display());
    m.set("rows", shape.rows);
    m.set("cols", shape.cols);
    m.set("bands", y.bands());
    m.set("p", a.p);
    m.set("mu1", a.mu1);
    m.set("mu2", a.mu2);
    m.set("mu3", a.mu3);
    m.set("p_value", a.p_value);
    m.set("lambda2", solve.lambda2);
    m.set("lambda2_source", if a.lambda2.is_some() { "flag" } else { "p_value" });
    m.set("max_iters", a.max_iters);
    m.set("rel_tol", a.rel_tol);
    m.set("denoiser", denoiser.name());
    let opts: Vec<String> = a.denoiser_opts.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    m.set("denoiser_opts", opts.join(","));
    m.set("anscombe", a.anscombe);
    m.set(
        "noise_cov",
        a.noise_cov.as_ref().map_or("estimated".to_string(), |p| p.display().to_string()),
    );
    m.set("iters_run", solve.iters_run);
    m.set("final_rel_change", solve.trace.last().copied().unwrap_or(f64::NAN));
    m.set("s_hat_norm", s_norm);
    m.set("z_hat_norm", z_norm);
    m.set("s_over_z", ratio);
    m.set("rare_pixels", solve.s_hat.matrix().column_iter().filter(|c| c.norm() > 0.0).count());
    m.write(&ctx.path("manifest.txt"))?;
    ctx.say(format!(
        "denoised in {} iterations (lambda2={:.4}, |S|/|Z|={ratio:.3e})",
        solve.iters_run, solve.lambda2
    ));
    Ok(())
}

fn detect(ctx: &Context, a: &DetectArgs) -> Result<()> {
    let (y, shape) = load_matrix(&a.input)?;
    let mask = a.mask.as_ref().map(|p| load_mask(p, shape)).transpose()?;
    let scores = match a.detector {
        Detector::Rhyde => rhyde_scores(&y),
        Detector::Rx => global_rx(&y)?,
    };
    ctx.prepare()?;
    let path = ctx.path("scores.csv");
    write_file(&path, |w| write_scores_csv(&scores, shape, w))?;

    let mut m = Manifest::new("detect", ctx.seed);
    m.set("input", a.input.display());
    m.set("detector", format!("{:?}", a.detector).to_lowercase());
    if let Some(mask) = mask {
        let roc = roc_curve(&scores, &mask)?;
        let path = ctx.path("roc.csv");
        write_file(&path, |w| write_roc_csv(&roc, w))?;
        m.set("mask", a.mask.as_ref().unwrap().display());
        m.set("auc", roc.auc);
        m.set("min_fa_at_full_det", roc.min_fa_at_full_detection);
        ctx.say(format!("auc={} min_fa_at_full_det={}", roc.auc, roc.min_fa_at_full_detection));
    }
    m.write(&ctx.path("manifest.txt"))
}

fn evaluate(ctx: &Context, a: &EvaluateArgs) -> Result<()> {
    let (clean, shape) = load_matrix(&a.clean)?;
    let (estimate, est_shape) = load_matrix(&a.estimate)?;
    if shape != est_shape || clean.bands() != estimate.bands() {
        return Err(Error::DimensionMismatch(format!(
            "clean is {}x{}x{}, estimate is {}x{}x{}",
            shape.rows,
            shape.cols,
            clean.bands(),
            est_shape.rows,
            est_shape.cols,
            estimate.bands()
        )));
    }
    let peak = a.peak.map_or(Peak::PerBand, Peak::Global);
    let report = QualityReport::compute(&clean, &estimate, shape, peak)?;
    ctx.prepare()?;
    let path = ctx.path("quality.csv");
    write_file(&path, |w| report.write_csv(w))?;
    let mut m = Manifest::new("evaluate", ctx.seed);
    m.set("clean", a.clean.display());
    m.set("estimate", a.estimate.display());
    m.set("peak", a.peak.map_or("per_band".to_string(), |p| p.to_string()));
    m.set("mpsnr", report.mpsnr);
    m.set("psnr3d_db", report.psnr_3d);
    m.set("mssim", report.mssim);
    m.set("msam_deg", report.msam);
    m.write(&ctx.path("manifest.txt"))?;
    ctx.say(format!(
        "mpsnr={} psnr3d_db={} mssim={} msam_deg={}",
        report.mpsnr, report.psnr_3d, report.mssim, report.msam
    ));
    Ok(())
}

fn inspect(ctx: &Context, a: &InspectArgs) -> Result<()> {
    let (rows, cols, bands) = read_hsc_header(&a.input)?;
    // the header is the point of this command, so it prints even when quiet
    println!("file={}\nrows={rows}\ncols={cols}\nbands={bands}\ndtype=f32", a.input.display());
    if !a.singular_values {
        return Ok(());
    }
    let (y, _) = load_matrix(&a.input)?;
    let basis = estimate_basis(&y, 1)?;
    ctx.prepare()?;
    let path = ctx.path("singular_values.csv");
    let energy = basis.energy_fractions();
    write_file(&path, |w| {
        writeln!(w, "index,singular_value,cumulative_energy").map_err(|e| io_err(&path, e))?;
        for (i, (s, e)) in basis.singular_values().iter().zip(&energy).enumerate() {
            writeln!(w, "{},{s},{e}", i + 1).map_err(|e| io_err(&path, e))?;
        }
        Ok(())
    })?;
    for (i, (s, e)) in basis.singular_values().iter().zip(&energy).enumerate().take(10) {
        println!("sv[{}]={s:.6e} cumulative_energy={e:.6}", i + 1);
    }
    Ok(())
}
