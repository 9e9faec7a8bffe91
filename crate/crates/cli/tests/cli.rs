use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lfsc_core::eval::{bd_metrics, read_csv};
use lfsc_core::lf::{load_lf, Channel};
use tempfile::TempDir;

fn lfsc() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lfsc"));
    c.env_remove("LFSC_DICT");
    c
}

fn run(args: &[&str]) -> Output {
    lfsc().args(args).output().expect("spawn lfsc")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "lfsc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    let mut all = vec!["--json"];
    all.extend_from_slice(args);
    serde_json::from_str(&ok(&all)).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    /// A small plane scene and the cosine dictionary.
    fn new() -> Fixture {
        let dir = TempDir::new().unwrap();
        let f = Fixture { dir };
        ok(&["synth", "--out", p(&f.lf()), "--width", "32", "--height", "32", "--disparity", "0.6", "--seed", "3"]);
        ok(&["train-dict", "--dct-fallback", "--out", p(&f.dict())]);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn lf(&self) -> PathBuf {
        self.path("lf")
    }

    fn dict(&self) -> PathBuf {
        self.path("cos.lfd")
    }

    fn encode(&self, out: &str, extra: &[&str]) -> serde_json::Value {
        let (lf, out) = (self.lf(), self.path(out));
        let mut args = vec!["encode", "-i", p(&lf), "-o", p(&out)];
        args.extend_from_slice(extra);
        json(&args)
    }
}

#[test]
fn dct_fallback_file_is_stable_and_reports_logical_dims() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.lfd");
    let b = dir.path().join("b.lfd");
    let ra = json(&["train-dict", "--dct-fallback", "--out", p(&a)]);
    json(&["train-dict", "--dct-fallback", "--out", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ra["logical_rows"], 4096);
    assert_eq!(ra["logical_cols"], 8400);
    assert_eq!(ra["atoms"], 400);
    assert_eq!(ra["levels"], 21);
}

#[test]
fn training_twice_on_the_same_corpus_gives_identical_files() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&["synth", "--out", p(&corpus.join("a")), "--views", "3", "--seed", "5"]);
    ok(&["synth", "--out", p(&corpus.join("b")), "--views", "3", "--seed", "6"]);
    let train = |name: &str| {
        let out = dir.path().join(name);
        let r = json(&[
            "train-dict", "--corpus", p(&corpus), "--out", p(&out), "--atoms", "16", "--patches", "80",
            "--iterations", "2", "--sparsity", "3", "--seed", "9",
        ]);
        (std::fs::read(out).unwrap(), r)
    };
    let (a, ra) = train("a.lfd");
    let (b, _) = train("b.lfd");
    assert_eq!(a, b);
    let obj: Vec<f64> = ra["objective"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(obj.len(), 2);
    assert!(obj[1] <= obj[0]);
}

#[test]
fn encoder_report_matches_decoder_measurement() {
    let f = Fixture::new();
    let stats = f.encode("s.scskv", &["--dict", p(&f.dict())]);
    let acc = &stats["accounting"];
    let size = std::fs::metadata(f.path("s.scskv")).unwrap().len();
    assert_eq!(acc["total_bytes"].as_u64().unwrap(), size);
    let parts: u64 = ["header_bytes", "skv_bytes", "disparity_bytes", "residual_bytes", "other_bytes"]
        .iter()
        .map(|k| acc[*k].as_u64().unwrap())
        .sum();
    assert_eq!(parts, size);

    let rows = json(&["eval", "--orig", p(&f.lf()), "--stream", p(&f.path("s.scskv")), "--dict", p(&f.dict())]);
    assert_eq!(rows[0]["psnr_yuv"].as_f64(), stats["psnr_yuv"].as_f64());

    ok(&["decode", "-i", p(&f.path("s.scskv")), "-o", p(&f.path("dec")), "--dict", p(&f.dict())]);
    let recon = json(&["eval", "--orig", p(&f.lf()), "--recon", p(&f.path("dec"))]);
    assert_eq!(recon[0]["psnr_yuv"].as_f64(), stats["psnr_yuv"].as_f64());
}

#[test]
fn thread_count_does_not_change_the_stream() {
    let f = Fixture::new();
    f.encode("one.scskv", &["--dict", p(&f.dict()), "--threads", "1"]);
    f.encode("three.scskv", &["--dict", p(&f.dict()), "--threads", "3"]);
    assert_eq!(std::fs::read(f.path("one.scskv")).unwrap(), std::fs::read(f.path("three.scskv")).unwrap());
}

#[test]
fn gray_light_field_has_a_near_empty_residual_section() {
    let dir = TempDir::new().unwrap();
    let gray = lfsc_core::lf::LightField::uniform(15, 15, 32, 32, [128, 128, 128]);
    lfsc_core::lf::save_lf(&gray, dir.path().join("gray")).unwrap();
    let dict = dir.path().join("cos.lfd");
    ok(&["train-dict", "--dct-fallback", "--out", p(&dict)]);
    let stats = json(&[
        "encode", "-i", p(&dir.path().join("gray")), "-o", p(&dir.path().join("g.scskv")), "--dict", p(&dict),
    ]);
    // Each of the 160 x 3 residual planes is a single byte-aligned flag bit,
    // plus the sequence header.
    assert!(stats["accounting"]["residual_bytes"].as_u64().unwrap() <= 480 + 16);
    assert!(stats["psnr_yuv"].as_f64().is_none(), "identical reconstruction reports +inf");
}

#[test]
fn dictionary_from_environment_and_config() {
    let f = Fixture::new();
    let out = lfsc()
        .env("LFSC_DICT", f.dict())
        .args(["encode", "-i", p(&f.lf()), "-o", p(&f.path("env.scskv"))])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let cfg = f.path("lfsc.toml");
    std::fs::write(&cfg, format!("dict = {:?}\nq_res = 40\n", p(&f.dict()))).unwrap();
    f.encode("cfg.scskv", &["--config", p(&cfg)]);
    f.encode("flag.scskv", &["--config", p(&cfg), "--q-res", "24"]);
    let q_of = |name: &str| {
        let rows = json(&["eval", "--orig", p(&f.lf()), "--stream", p(&f.path(name)), "--dict", p(&f.dict())]);
        rows[0]["q"].as_u64().unwrap()
    };
    assert_eq!(q_of("env.scskv"), 30);
    assert_eq!(q_of("cfg.scskv"), 40);
    assert_eq!(q_of("flag.scskv"), 24);
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let f = Fixture::new();
    f.encode("s.scskv", &["--dict", p(&f.dict())]);
    let stream = f.path("s.scskv");
    let code = |args: &[&str]| run(args).status.code().unwrap();

    // No dictionary at all, and a different one.
    assert_eq!(code(&["decode", "-i", p(&stream), "-o", p(&f.path("x"))]), 5);
    let other = f.path("small.lfd");
    ok(&["train-dict", "--dct-fallback", "--atoms", "100", "--out", p(&other)]);
    assert_eq!(code(&["decode", "-i", p(&stream), "-o", p(&f.path("x")), "--dict", p(&other)]), 5);

    let bytes = std::fs::read(&stream).unwrap();
    std::fs::write(f.path("cut.scskv"), &bytes[..bytes.len() / 2]).unwrap();
    assert_eq!(code(&["decode", "-i", p(&f.path("cut.scskv")), "-o", p(&f.path("x")), "--dict", p(&f.dict())]), 4);

    assert_eq!(code(&["decode", "-i", p(&f.path("absent")), "-o", p(&f.path("x"))]), 3);
    assert_eq!(code(&["encode", "-i", p(&f.lf()), "-o", p(&f.path("x")), "--dict", p(&f.dict()), "--q-res", "0"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["eval", "--orig", p(&f.lf())]), 2);
}

#[test]
fn baseline_streams_need_no_dictionary() {
    let f = Fixture::new();
    f.encode("b.scskv", &["--baseline", "--q-res", "34"]);
    ok(&["decode", "-i", p(&f.path("b.scskv")), "-o", p(&f.path("dec"))]);
    let lf = load_lf(f.path("dec")).unwrap();
    assert_eq!(lf.plane(0, 0, Channel::Y).data.iter().max(), Some(&128));
}

#[test]
fn sweep_emits_one_row_per_q_and_bd_matches_the_library() {
    let f = Fixture::new();
    let base = f.path("base.csv");
    let full = f.path("full.csv");
    ok(&["eval", "--orig", p(&f.lf()), "--sweep", "22,30,38,46", "--baseline", "--csv", p(&base), "--dat", p(&f.path("base.dat"))]);
    ok(&["eval", "--orig", p(&f.lf()), "--sweep", "22,30,38,46", "--dict", p(&f.dict()), "--csv", p(&full)]);
    let anchor = read_csv(&base).unwrap();
    let test = read_csv(&full).unwrap();
    assert_eq!(anchor.len(), 4);
    assert_eq!(test.len(), 4);
    assert!(std::fs::read_to_string(f.path("base.dat")).unwrap().lines().count() >= 4);

    let expected = bd_metrics(&anchor, &test).unwrap();
    let got = json(&["eval", "--bd", p(&base), p(&full)]);
    assert_eq!(got["bd_psnr"].as_f64().unwrap(), expected.bd_psnr);
    assert_eq!(got["bd_rate"].as_f64().unwrap(), expected.bd_rate);
}

#[test]
fn identity_eval_reports_infinity() {
    let f = Fixture::new();
    let csv = f.path("id.csv");
    ok(&["eval", "--orig", p(&f.lf()), "--recon", p(&f.lf()), "--csv", p(&csv)]);
    let rows = read_csv(&csv).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].psnr_yuv, f64::INFINITY);
}

#[test]
fn synth_writes_ground_truth_sidecars() {
    let dir = TempDir::new().unwrap();
    let flat = dir.path().join("flat");
    ok(&["synth", "--out", p(&flat), "--width", "24", "--height", "20", "--views", "5"]);
    let lf = load_lf(&flat).unwrap();
    let c = lf.plane(2, 2, Channel::Y);
    assert!(lf.views().iter().all(|v| &v.planes[0] == c), "zero disparity gives identical views");
    let disp = std::fs::read_to_string(flat.join("disparity.txt")).unwrap();
    assert_eq!(disp.lines().count(), 20);

    let two = dir.path().join("two");
    ok(&["synth", "--out", p(&two), "--width", "32", "--height", "32", "--views", "5", "--front", "1.5"]);
    let labels = std::fs::read(two.join("labels.pgm")).unwrap();
    assert!(labels.starts_with(b"P5"));
    let spec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(two.join("scene.json")).unwrap()).unwrap();
    assert_eq!(spec["planes"].as_array().unwrap().len(), 2);
}

#[test]
fn disparity_dump_writes_both_maps() {
    let f = Fixture::new();
    let out = f.path("maps");
    let r = json(&["disparity", "-i", p(&f.lf()), "-o", p(&out)]);
    assert!(out.join("disparity_levels.pgm").exists());
    assert!(out.join("disparity_confidence.pgm").exists());
    let hist: Vec<u64> = r["histogram"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    // The scene is a plane at 0.6, which is level 12.
    let best = hist.iter().enumerate().max_by_key(|(_, &n)| n).unwrap().0;
    assert_eq!(best, 12);
}
