use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use thermirror::diff::{gradcheck, FnObjective, GradReport, ParamVector};
use thermirror::geometry::Vec3;
use thermirror::io::{
    ablate_run, keypoint_metric, load_scene, make_synthetic, reflection_iou, write_csv, write_obj, write_pfm,
    write_pgm, LoadedScene, SyntheticKind, Variant,
};
use thermirror::optimize::{fit_human, fit_object, loss_object, silhouette_objective, FitResult};
use thermirror::render::{render_depth_mask, RenderConfig, render_reflection, render_reflection_hard, SoftImage};
use thermirror::sdf::{marching_cubes, SdfShape};

#[derive(Parser)]
#[command(name = "thermirror", version, about = "Reflection rendering and two-stage fitting over SDF mirrors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scene file (TOML).
    #[arg(long)]
    scene: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scene's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Soft reflection image, depth and object masks of the declared scene.
    Render(Common),
    /// Fit every mirror object to the depth and mask observations.
    FitObject(Common),
    /// Fit the emitter to the reflection silhouette with the mirrors frozen.
    FitHuman(Common),
    /// Compare analytic gradients with central differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Finite-difference step. The object loss jumps where a pixel
        /// changes between hit and miss, so larger steps straddle jumps.
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        /// Relative error tolerance.
        #[arg(long, default_value_t = 1e-2)]
        tol: f64,
    },
    /// Fit the emitter once per renderer variant and tabulate joint errors.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// full, no-edge-sampling, sphere-steps-1 or no-smoothing; repeatable,
        /// all four when omitted.
        #[arg(long)]
        variant: Vec<Variant>,
    },
    /// Surface meshes of the objects (marching cubes) and the emitter.
    ExportMesh {
        #[command(flatten)]
        common: Common,
        /// Marching-cubes cells per axis.
        #[arg(long, default_value_t = 64)]
        resolution: usize,
    },
    /// Write a ground-truth scene with its observations.
    MakeSynthetic {
        /// human, bowl or rounded-box.
        #[arg(long)]
        kind: SyntheticKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn set_threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn open(c: &Common) -> Result<LoadedScene> {
    set_threads(c.threads)?;
    let mut l = load_scene(&c.scene).with_context(|| format!("loading {}", c.scene.display()))?;
    if let Some(s) = c.seed {
        l.set_seed(s);
    }
    std::fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    Ok(l)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Render(c) => render(&open(&c)?, &c.out),
        Command::FitObject(c) => fit_objects(&open(&c)?, &c.out),
        Command::FitHuman(c) => fit_emitter(&open(&c)?, &c.out),
        Command::Gradcheck { common, step, tol } => grad(&open(&common)?, &common.out, step, tol),
        Command::Ablate { common, variant } => {
            let l = open(&common)?;
            let variants = if variant.is_empty() { Variant::ALL.to_vec() } else { variant };
            let table = ablate_run(&l, &variants)?;
            let path = common.out.join("ablation.csv");
            std::fs::write(&path, table.to_csv()?).with_context(|| format!("writing {}", path.display()))?;
            print!("{}", table.to_csv()?);
            Ok(())
        }
        Command::ExportMesh { common, resolution } => export(&open(&common)?, &common.out, resolution),
        Command::MakeSynthetic { kind, out, seed, threads } => {
            set_threads(threads)?;
            let path = make_synthetic(kind, seed, &out)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn render(l: &LoadedScene, out: &Path) -> Result<()> {
    let cfg = &l.file.render;
    let img = render_reflection(&l.scene, &l.camera, cfg)?;
    write_pgm(&out.join("reflection.pgm"), &img)?;
    let dm = render_depth_mask(&l.scene.objects, &l.camera, cfg)?;
    write_pfm(&out.join("depth.pfm"), l.camera.width, l.camera.height, &dm.depth)?;
    for o in 0..l.scene.objects.len() {
        let bits: Vec<bool> = dm.object.iter().map(|&v| v == Some(o)).collect();
        write_pgm(
            &out.join(format!("mask{o}.pgm")),
            &SoftImage::from_binary(l.camera.width, l.camera.height, &bits),
        )?;
    }
    let coverage = img.values.iter().filter(|&&v| v >= 0.5).count();
    let mirror = dm.object.iter().filter(|o| o.is_some()).count();
    write_csv(
        &out.join("render.csv"),
        &["width", "height", "mirror_pixels", "reflection_pixels", "reflection_sum"],
        &[vec![
            l.camera.width.to_string(),
            l.camera.height.to_string(),
            mirror.to_string(),
            coverage.to_string(),
            format!("{:.9e}", img.values.iter().sum::<f64>()),
        ]],
    )?;
    println!("mirror pixels {mirror}, reflection pixels {coverage}");
    Ok(())
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.9e}")).collect::<Vec<_>>().join(" ")
}

fn write_fit(out: &Path, stem: &str, res: &FitResult) -> Result<()> {
    let trace = out.join(format!("{stem}_trace.csv"));
    std::fs::write(&trace, res.trace_csv()).with_context(|| format!("writing {}", trace.display()))?;
    let report = out.join(format!("{stem}_report.txt"));
    std::fs::write(&report, res.report()).with_context(|| format!("writing {}", report.display()))?;
    Ok(())
}

fn fit_objects(l: &LoadedScene, out: &Path) -> Result<()> {
    let obs = l.object_observations()?;
    let truth = l.file.truth_objects().ok();
    let mut rows = Vec::new();
    for (i, base) in l.scene.objects.iter().enumerate() {
        let (shape, res) = fit_object(base, &l.object_init[i], &l.camera, &obs[i], &l.file.render, &l.file.fit_object)
            .with_context(|| format!("fitting object {i}"))?;
        write_fit(out, &format!("object{i}"), &res)?;
        let pl = shape.placement();
        let t = pl.translation;
        let r = pl.rotation.to_axis_angle();
        let mut row = vec![
            i.to_string(),
            shape.kind().to_string(),
            fmt_list(&[t.x, t.y, t.z]),
            fmt_list(&[r.x, r.y, r.z]),
            format!("{:.9e}", pl.scale),
            fmt_list(shape.latent()),
            format!("{:.9e}", res.final_total),
        ];
        match truth.as_ref().map(|t| &t[i]) {
            Some(gt) => {
                let terr = (t - gt.placement().translation).norm();
                let serr = (pl.scale / gt.placement().scale - 1.0).abs();
                row.push(format!("{terr:.9e}"));
                row.push(format!("{serr:.9e}"));
                println!("object {i}: translation error {:.2} mm, scale error {:.2}%", terr * 1e3, serr * 100.0);
            }
            None => {
                row.push(String::new());
                row.push(String::new());
                println!("object {i}: final loss {:.4e}", res.final_total);
            }
        }
        rows.push(row);
    }
    write_csv(
        &out.join("objects.csv"),
        &["object", "family", "translation", "rotation", "scale", "latent", "final_loss", "translation_error", "scale_error"],
        &rows,
    )?;
    Ok(())
}

fn fit_emitter(l: &LoadedScene, out: &Path) -> Result<()> {
    let observed = l.silhouette()?;
    let (model, res) = fit_human(&l.scene, &l.emitter_init, &l.camera, observed, &l.file.render, &l.file.fit_human)?;
    write_fit(out, "fit_human", &res)?;
    let joints = model.joint_positions();
    let names: Vec<String> = model.skeleton().joints().iter().map(|j| j.name.clone()).collect();
    let rows: Vec<Vec<String>> = names
        .iter()
        .zip(&joints)
        .map(|(n, p)| vec![n.clone(), format!("{:.9e}", p.x), format!("{:.9e}", p.y), format!("{:.9e}", p.z)])
        .collect();
    write_csv(&out.join("joints.csv"), &["joint", "x", "y", "z"], &rows)?;
    write_obj(&out.join("emitter.obj"), &model.build_mesh(l.scene.segments)?.mesh)?;
    let mut fitted = l.scene.clone();
    fitted.emitter = model;
    let hard = render_reflection_hard(&fitted, &l.camera, &l.file.render)?;
    write_pgm(&out.join("reflection.pgm"), &hard)?;
    let iou = reflection_iou(&fitted, &l.camera, observed, &l.file.render)?;
    let mut line = format!("silhouette IoU {iou:.4}");
    if let Ok(truth) = l.file.truth_joints() {
        let m = keypoint_metric("fit", &joints, &truth)?;
        let _ = write!(line, ", mean normalized joint error {:.4} (diagonal {:.3} m)", m.mean_normalized, m.normalization);
        let rows: Vec<Vec<String>> = names
            .iter()
            .zip(m.normalized())
            .map(|(n, d)| vec![n.clone(), format!("{d:.9e}")])
            .collect();
        write_csv(&out.join("metric.csv"), &["joint", "normalized_error"], &rows)?;
    }
    println!("{line}");
    Ok(())
}

fn write_report(out: &Path, stem: &str, r: &GradReport) -> Result<()> {
    std::fs::write(out.join(format!("{stem}.txt")), r.to_table())?;
    let rows: Vec<Vec<String>> = (0..r.labels.len())
        .map(|k| {
            vec![
                r.labels[k].clone(),
                format!("{:.9e}", r.analytic[k]),
                format!("{:.9e}", r.numeric[k]),
                format!("{:.3e}", r.coord_error[k]),
            ]
        })
        .collect();
    write_csv(&out.join(format!("{stem}.csv")), &["parameter", "analytic", "numeric", "error"], &rows)?;
    Ok(())
}

fn grad(l: &LoadedScene, out: &Path, h: f64, tol: f64) -> Result<()> {
    let mut any = false;
    let mut failed = false;
    if let Some(observed) = &l.silhouette {
        let obj = silhouette_objective(&l.scene, &l.camera, observed, &l.file.render, l.file.fit_human.w_prior_h)?;
        let r = gradcheck(&obj, &obj.origin(), h, tol)?;
        write_report(out, "gradcheck_emitter", &r)?;
        println!("emitter: relative error {:.3e} ({})", r.rel_error, if r.passed() { "pass" } else { "fail" });
        failed |= !r.passed();
        any = true;
    }
    if let Ok(obs) = l.object_observations() {
        // sphere tracing stops anywhere within eps of the surface, which makes
        // the depth term a staircase at that scale; trace tightly so finite
        // differences see the smooth loss
        let tight = RenderConfig {
            eps: l.file.render.eps.min(1e-10),
            max_march: l.file.render.max_march.max(512),
            ..l.file.render.clone()
        };
        for (i, shape) in l.scene.objects.iter().enumerate() {
            let (cam, cfg, w, o) = (&l.camera, &tight, l.file.fit_object.w_prior_obj, &obs[i]);
            let stepped = |x: &ParamVector| -> thermirror::Result<SdfShape> {
                let mut s = shape.clone();
                s.apply_step(x.values())?;
                Ok(s)
            };
            let objective = FnObjective {
                value: |x: &ParamVector| Ok(loss_object(&stepped(x)?, cam, o, cfg, w, false)?.total),
                gradient: |x: &ParamVector| {
                    let l = loss_object(&stepped(x)?, cam, o, cfg, w, true)?;
                    Ok((l.total, l.gradient.expect("requested")))
                },
            };
            let at = ParamVector::new()
                .with("placement", &[0.0; 7])?
                .with("latent", &vec![0.0; shape.latent().len()])?;
            let r = gradcheck(&objective, &at, h, tol)?;
            write_report(out, &format!("gradcheck_object{i}"), &r)?;
            println!("object {i}: relative error {:.3e} ({})", r.rel_error, if r.passed() { "pass" } else { "fail" });
            failed |= !r.passed();
            any = true;
        }
    }
    if !any {
        bail!("scene has neither a silhouette nor depth and masks to differentiate against");
    }
    if failed {
        bail!("gradient check failed; see the reports in {}", out.display());
    }
    Ok(())
}

fn export(l: &LoadedScene, out: &Path, resolution: usize) -> Result<()> {
    for (i, shape) in l.scene.objects.iter().enumerate() {
        let Some((lo, hi)) = shape.world_bounds() else {
            log::warn!("object {i} ({}) is unbounded, no mesh written", shape.kind());
            continue;
        };
        let pad = (hi - lo) * 0.05 + Vec3::splat(1e-6);
        let mesh = marching_cubes(shape, lo - pad, hi + pad, resolution)?;
        write_obj(&out.join(format!("object{i}.obj")), &mesh)?;
        println!("object {i}: {} triangles", mesh.triangles.len());
    }
    let mesh = l.scene.emitter.build_mesh(l.scene.segments)?.mesh;
    write_obj(&out.join("emitter.obj"), &mesh)?;
    println!("emitter: {} triangles", mesh.triangles.len());
    Ok(())
}
