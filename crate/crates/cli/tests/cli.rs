use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tilesplat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tilesplat")).args(args).output().expect("spawn tilesplat")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn kv<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no `{key}` in:\n{text}"))
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new(seed: u64, count: usize, scale_max: f32) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let f = Fixture { dir };
        let out = tilesplat(&[
            "gen-scene",
            "--seed",
            &seed.to_string(),
            "--count",
            &count.to_string(),
            "--scale-max",
            &scale_max.to_string(),
            "--width",
            "128",
            "--height",
            "96",
            "--out",
            f.s(&f.scene()),
            "--camera",
            f.s(&f.camera()),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn scene(&self) -> PathBuf {
        self.path("scene.gsb")
    }

    fn camera(&self) -> PathBuf {
        self.path("camera.txt")
    }

    fn s<'a>(&self, p: &'a Path) -> &'a str {
        p.to_str().unwrap()
    }

    fn render(&self, out: &str, extra: &[&str]) -> Output {
        let (scene, camera, out) = (self.scene(), self.camera(), self.path(out));
        let mut args = vec!["render", "--scene", self.s(&scene), "--camera", self.s(&camera), "--out", self.s(&out)];
        args.extend_from_slice(extra);
        tilesplat(&args)
    }
}

#[test]
fn render_writes_image_and_stats() {
    let f = Fixture::new(7, 300, 0.1);
    let out = f.render("a.ppm", &["--backend", "tensor", "--precision", "fp16", "--group", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let img = std::fs::read(f.path("a.ppm")).unwrap();
    assert!(img.starts_with(b"P6\n128 96\n255\n"));
    let stats = std::fs::read_to_string(f.path("a.stats")).unwrap();
    assert_eq!(kv(&stats, "backend"), "tensor");
    assert_eq!(kv(&stats, "precision"), "fp16");
    assert_eq!(kv(&stats, "group"), "2");
    assert!(kv(&stats, "fragment_mma").parse::<u64>().unwrap() > 0);
}

#[test]
fn scalar_with_groups_is_a_usage_error() {
    let f = Fixture::new(7, 50, 0.1);
    let out = f.render("a.ppm", &["--backend", "scalar", "--group", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(!f.path("a.ppm").exists());
}

#[test]
fn repeated_render_is_byte_identical_across_workers() {
    let f = Fixture::new(3, 400, 0.15);
    assert!(f.render("a.ppm", &["--workers", "1"]).status.success());
    assert!(f.render("b.ppm", &["--workers", "4"]).status.success());
    assert_eq!(std::fs::read(f.path("a.ppm")).unwrap(), std::fs::read(f.path("b.ppm")).unwrap());
    assert_eq!(
        std::fs::read(f.path("a.stats")).unwrap(),
        std::fs::read(f.path("b.stats")).unwrap()
    );
}

#[test]
fn compare_exit_codes() {
    let f = Fixture::new(5, 400, 0.1);
    assert!(f.render("full.ppm", &[]).status.success());
    assert!(f.render("half.ppm", &["--precision", "fp16"]).status.success());
    let full = f.path("full.ppm");
    let half = f.path("half.ppm");

    let same = tilesplat(&["compare", f.s(&full), f.s(&full)]);
    assert_eq!(same.status.code(), Some(0));
    assert_eq!(kv(&stdout(&same), "bit_exact"), "true");
    assert_eq!(kv(&stdout(&same), "psnr_db").parse::<f64>().unwrap(), 99.0);

    let diff = tilesplat(&["compare", f.s(&full), f.s(&half)]);
    assert_eq!(diff.status.code(), Some(1));
    assert_eq!(kv(&stdout(&diff), "bit_exact"), "false");
    assert!(kv(&stdout(&diff), "psnr_db").parse::<f64>().unwrap() >= 40.0);
    assert!(kv(&stdout(&diff), "max_abs_diff").parse::<f64>().unwrap() > 0.0);

    let small = f.path("small.ppm");
    let mut bytes = b"P6\n4 4\n255\n".to_vec();
    bytes.extend([0u8; 48]);
    std::fs::write(&small, bytes).unwrap();
    assert_eq!(tilesplat(&["compare", f.s(&full), f.s(&small)]).status.code(), Some(2));

    let junk = f.path("junk.ppm");
    std::fs::write(&junk, b"not an image").unwrap();
    assert_eq!(tilesplat(&["compare", f.s(&junk), f.s(&full)]).status.code(), Some(2));
}

#[test]
fn stats_reports_reduction_per_group() {
    let f = Fixture::new(11, 200, 0.3);
    let (scene, camera) = (f.scene(), f.camera());
    let one = tilesplat(&["stats", "--scene", f.s(&scene), "--camera", f.s(&camera), "--groups", "1"]);
    assert!(one.status.success());
    assert_eq!(kv(&stdout(&one), "load_reduction").parse::<f64>().unwrap(), 0.0);

    let all = tilesplat(&["stats", "--scene", f.s(&scene), "--camera", f.s(&camera), "--format", "jsonl"]);
    assert!(all.status.success());
    let rows: Vec<serde_json::Value> = stdout(&all).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let red: Vec<f64> = rows.iter().map(|r| r["load_reduction"].as_f64().unwrap()).collect();
    assert!(red[0] <= red[1] && red[1] <= red[2], "{red:?}");
    assert!(rows.iter().all(|r| r["n_total"] == rows[0]["n_total"]));

    let bad = tilesplat(&["stats", "--scene", f.s(&scene), "--camera", f.s(&camera), "--groups", "3"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn bench_lists_each_configuration() {
    let f = Fixture::new(13, 200, 0.3);
    let (scene, camera) = (f.scene(), f.camera());
    let out = tilesplat(&["bench", "--scene", f.s(&scene), "--camera", f.s(&camera), "--repetitions", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("not reproduction targets"));
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("backend=")).collect();
    assert_eq!(rows.len(), 4);
    let field = |row: &str, key: &str| -> u64 {
        row.split_whitespace()
            .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert_eq!(field(rows[0], "fragment_mma"), 0);
    assert!(field(rows[1], "fragment_mma") > 0);
    assert!(field(rows[2], "chunk_loads") < field(rows[1], "chunk_loads"));

    let json = tilesplat(&[
        "bench",
        "--scene",
        f.s(&scene),
        "--camera",
        f.s(&camera),
        "--repetitions",
        "1",
        "--format",
        "jsonl",
    ]);
    let first: serde_json::Value = serde_json::from_str(stdout(&json).lines().next().unwrap()).unwrap();
    assert_eq!(first["backend"], "scalar");
    assert!(first["median_ms"].is_number());
}

#[test]
fn gen_scene_is_deterministic_and_validated() {
    let a = Fixture::new(42, 100, 0.1);
    let b = Fixture::new(42, 100, 0.1);
    assert_eq!(std::fs::read(a.scene()).unwrap(), std::fs::read(b.scene()).unwrap());
    let len = std::fs::metadata(a.scene()).unwrap().len();
    assert_eq!(len, 16 + 100 * 56);

    let out = a.path("x.gsb");
    let bad = tilesplat(&["gen-scene", "--seed", "1", "--count", "5", "--scale-min", "0", "--out", a.s(&out)]);
    assert_eq!(bad.status.code(), Some(2));
    let missing = tilesplat(&["render", "--scene", "/nonexistent.gsb", "--camera", "/nonexistent.txt", "--out", a.s(&out)]);
    assert_eq!(missing.status.code(), Some(2));
}
