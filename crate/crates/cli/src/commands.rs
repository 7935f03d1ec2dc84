use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use tilesplat::binning::{build_group_entries, GroupConfig};
use tilesplat::projection::project_scene;
use tilesplat::scene::{gen_synthetic_scene, load_camera, load_scene, read_ppm, save_camera, save_scene, write_image};
use tilesplat::{max_abs_diff, metrics, psnr, render as render_scene, Backend, PrecisionMode, RenderOptions};
use tilesplat::{Camera, Gaussian3D};

use crate::{Format, GenArgs, InputArgs, RenderArgs};

type CmdResult = Result<ExitCode, String>;

fn load_inputs(input: &InputArgs) -> Result<(Vec<Gaussian3D>, Camera), String> {
    let scene = load_scene(&input.scene).map_err(|e| e.to_string())?;
    let cam = load_camera(&input.camera).map_err(|e| e.to_string())?;
    Ok((scene, cam))
}

fn write_text(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn render(args: &RenderArgs) -> CmdResult {
    let backend: Backend = args.backend.into();
    if backend == Backend::Scalar && args.group != 1 {
        return Err(format!("scalar backend requires --group 1, got {}", args.group));
    }
    let (scene, cam) = load_inputs(&args.input)?;
    let opts = RenderOptions {
        backend,
        mode: args.precision.into(),
        group: args.group,
        workers: args.workers,
        ..RenderOptions::default()
    };
    let out = render_scene(&scene, &cam, &opts).map_err(|e| e.to_string())?;
    write_image(&out.image, &args.out).map_err(|e| e.to_string())?;
    write_text(&args.out.with_extension("stats"), &out.report.to_kv())?;
    Ok(ExitCode::SUCCESS)
}

pub fn compare(a: &Path, b: &Path) -> CmdResult {
    let ia = read_ppm(a).map_err(|e| e.to_string())?;
    let ib = read_ppm(b).map_err(|e| e.to_string())?;
    let p = psnr(&ia, &ib).map_err(|e| e.to_string())?;
    let d = max_abs_diff(&ia, &ib).map_err(|e| e.to_string())?;
    let exact = ia.bit_identical(&ib);
    println!("psnr_db={p:.4}");
    println!("max_abs_diff={:.6}", d.value);
    println!("max_diff_at={},{},{}", d.x, d.y, d.channel);
    println!("bit_exact={exact}");
    Ok(if exact { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

pub fn stats(input: &InputArgs, groups: &[u32], format: Format) -> CmdResult {
    let (scene, cam) = load_inputs(input)?;
    cam.validate().map_err(|e| e.to_string())?;
    let projection = project_scene(&scene, &cam);
    for &g in groups {
        let cfg = GroupConfig::square(cam.width, cam.height, g).map_err(|e| e.to_string())?;
        let entries = build_group_entries(&projection.splats, &cfg);
        let report = metrics::load_reduction(&entries, &cfg).map_err(|e| e.to_string())?;
        match format {
            Format::Kv => println!("{}", report.to_kv()),
            Format::Jsonl => println!("{}", serde_json::to_string(&report).map_err(|e| e.to_string())?),
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn bench(
    input: &InputArgs,
    repetitions: u32,
    groups: &[u32],
    mode: PrecisionMode,
    workers: usize,
    format: Format,
) -> CmdResult {
    let (scene, cam) = load_inputs(input)?;
    let mut configs = vec![(Backend::Scalar, 1)];
    configs.extend(groups.iter().map(|&g| (Backend::Tensor, g)));
    if format == Format::Kv {
        println!("# CPU wall times. GPU speedup figures are not reproduction targets; compare operation counts.");
    }
    for (backend, group) in configs {
        let opts = RenderOptions {
            backend,
            mode,
            group,
            workers,
            ..RenderOptions::default()
        };
        let mut times = Vec::with_capacity(repetitions as usize);
        let mut report = None;
        for _ in 0..repetitions {
            let start = Instant::now();
            let out = render_scene(&scene, &cam, &opts).map_err(|e| e.to_string())?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
            report = Some(out.report);
        }
        let report = report.expect("at least one repetition");
        times.sort_by(f64::total_cmp);
        let median = if times.len() % 2 == 1 {
            times[times.len() / 2]
        } else {
            0.5 * (times[times.len() / 2 - 1] + times[times.len() / 2])
        };
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        let c = &report.counters;
        match format {
            Format::Kv => println!(
                "backend={backend} group={group} precision={mode} repetitions={repetitions} median_ms={median:.3} \
                 mean_ms={mean:.3} chunk_loads={} gaussian_loads={} fragment_mma={} power_evals={} padding_waste_ratio={:.6}",
                c.chunk_loads, c.gaussian_loads, c.fragment_mma, c.power_evals, report.padding_waste_ratio
            ),
            Format::Jsonl => {
                let mut v = serde_json::to_value(&report).map_err(|e| e.to_string())?;
                v["repetitions"] = repetitions.into();
                v["median_ms"] = median.into();
                v["mean_ms"] = mean.into();
                println!("{v}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn gen_scene(args: &GenArgs) -> CmdResult {
    if !(args.scale_min > 0.0 && args.scale_min <= args.scale_max) {
        return Err(format!(
            "scale range must satisfy 0 < min <= max, got {}..{}",
            args.scale_min, args.scale_max
        ));
    }
    if !(args.extent.is_finite() && args.extent > 0.0) {
        return Err(format!("extent must be positive, got {}", args.extent));
    }
    let scene = gen_synthetic_scene(args.seed, args.count, args.extent, (args.scale_min, args.scale_max));
    save_scene(&scene, &args.out).map_err(|e| e.to_string())?;
    if let Some(path) = &args.camera {
        let cam = Camera::canonical(args.width, args.height);
        cam.validate().map_err(|e| e.to_string())?;
        save_camera(&cam, path).map_err(|e| e.to_string())?;
    }
    Ok(ExitCode::SUCCESS)
}
