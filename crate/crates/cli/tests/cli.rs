use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn voxanon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voxanon"))
        .args(args)
        .output()
        .expect("failed to launch voxanon")
}

fn ok(args: &[&str]) -> String {
    let out = voxanon(args);
    assert!(
        out.status.success(),
        "voxanon {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

struct Fixture {
    _dir: TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        ok(&["toy-fixture", "--output-dir", s(&root), "--seed", "1"]);
        Self { _dir: dir, root }
    }

    fn p(&self, name: &str) -> String {
        self.root.join(name).to_string_lossy().into_owned()
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_wav(path: &str) -> Vec<f64> {
    hound::WavReader::open(path)
        .unwrap()
        .samples::<i16>()
        .map(|v| f64::from(v.unwrap()) / 32768.0)
        .collect()
}

#[test]
fn anon_pool_is_deterministic() {
    let f = Fixture::new();
    let run = |out: &str, seed: &str| {
        ok(&[
            "anon-pool",
            "--pool",
            &f.p("pool.embd"),
            "--input",
            &f.p("test.embd"),
            "--output",
            out,
            "--n-far",
            "10",
            "--n-avg",
            "5",
            "--seed",
            seed,
            "--jobs",
            "4",
        ]);
        std::fs::read(out).unwrap()
    };
    let a = run(&f.p("a.embd"), "42");
    let b = run(&f.p("b.embd"), "42");
    let c = run(&f.p("c.embd"), "43");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn per_speaker_policy_shares_pseudo_vectors() {
    let f = Fixture::new();
    let out = f.p("anon.csv");
    ok(&[
        "anon-pool",
        "--pool",
        &f.p("pool.embd"),
        "--input",
        &f.p("test.embd"),
        "--output",
        &out,
        "--n-far",
        "10",
        "--n-avg",
        "5",
        "--policy",
        "per-speaker",
        "--utt2spk",
        &f.p("utt2spk.txt"),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    let vec_of = |id: &str| {
        rows.iter()
            .find(|r| r.starts_with(&format!("{id},")))
            .unwrap()
            .split_once(",female,")
            .map(|x| x.1.to_owned())
    };
    assert_eq!(vec_of("spk0_u0"), vec_of("spk0_u1"));
    assert_ne!(vec_of("spk0_u0"), vec_of("spk2_u0"));
}

fn eval_args<'a>(f: &'a Fixture, scenario: &'a str, extra: &[&'a str]) -> Vec<String> {
    let mut v: Vec<String> = vec![
        "eval".into(),
        "--scenario".into(),
        scenario.into(),
        "--enroll".into(),
        f.p("enroll.embd"),
        "--test".into(),
        f.p("test.embd"),
        "--trials".into(),
        f.p("trials.txt"),
        "--pool".into(),
        f.p("pool.embd"),
        "--n-far".into(),
        "10".into(),
        "--n-avg".into(),
        "5".into(),
    ];
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn ok_vec(args: &[String]) -> String {
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn eval_oo_reports_zero_eer() {
    let f = Fixture::new();
    let json = f.p("oo.json");
    let out = ok_vec(&eval_args(
        &f,
        "OO",
        &[
            "--json",
            &json,
            "--ref",
            &f.p("ref.txt"),
            "--hyp",
            &f.p("hyp.txt"),
        ],
    ));
    assert!(out.lines().any(|l| l == "eer=0.0"), "{out}");
    assert!(out.lines().any(|l| l.starts_with("wer=")), "{out}");
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(json).unwrap()).unwrap();
    assert_eq!(v["scenario"], "OO");
    assert_eq!(v["eer"], 0.0);
}

#[test]
fn eval_or_identity_matches_oo() {
    let f = Fixture::new();
    let oo = ok_vec(&eval_args(&f, "OO", &[]));
    let or = ok_vec(&eval_args(&f, "OR", &[]));
    assert_eq!(oo.replace("scenario=OO", ""), or.replace("scenario=OR", ""));
    let oa = ok_vec(&eval_args(&f, "OA", &[]));
    let eer: f64 = oa
        .lines()
        .find_map(|l| l.strip_prefix("eer="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(eer >= 40.0, "{oa}");
}

#[test]
fn eval_scores_file_matches_trials() {
    let f = Fixture::new();
    let scores = f.p("scores.txt");
    ok_vec(&eval_args(&f, "OO", &["--scores", &scores]));
    let text = std::fs::read_to_string(scores).unwrap();
    let trials = std::fs::read_to_string(f.p("trials.txt")).unwrap();
    assert_eq!(text.lines().count(), trials.lines().count());
    assert!(text.lines().all(|l| l.split_whitespace().count() == 3));
}

#[test]
fn mcadams_alpha_one_is_near_identity() {
    let f = Fixture::new();
    let out = f.p("same.wav");
    ok(&[
        "mcadams",
        "--input",
        &f.p("voice.wav"),
        "--output",
        &out,
        "--alpha",
        "1.0",
    ]);
    let x = read_wav(&f.p("voice.wav"));
    let y = read_wav(&out);
    assert_eq!(x.len(), y.len());
    let err: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(err / norm <= 1e-3, "relative error {}", err / norm);
}

#[test]
fn failures_leave_no_artifacts() {
    let f = Fixture::new();
    let report = f.p("report.txt");
    let mut args = eval_args(&f, "OA", &["--report", &report]);
    let pool_at = args.iter().position(|a| a == "--pool").unwrap();
    args.drain(pool_at..pool_at + 2);
    let out = voxanon(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(out.status.code(), Some(1));
    assert!(!Path::new(&report).exists());

    std::fs::write(f.p("bad.feat"), b"FEAT\x01\x00").unwrap();
    let cent = f.p("cent.feat");
    let out = voxanon(&[
        "kmeans",
        "--features",
        &f.p("feat0.feat"),
        &f.p("bad.feat"),
        "--k",
        "3",
        "--centroids",
        &cent,
        "--units-dir",
        &f.p("units"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!Path::new(&cent).exists());
    assert!(!Path::new(&f.p("units")).exists());

    let wav = f.p("never.wav");
    let out = voxanon(&[
        "mcadams",
        "--input",
        &f.p("voice.wav"),
        "--output",
        &wav,
        "--alpha",
        "-1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!Path::new(&wav).exists());

    let out = voxanon(&[
        "f0",
        "--input",
        &f.p("missing.wav"),
        "--output",
        &f.p("f0.txt"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!Path::new(&f.p("f0.txt")).exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(voxanon(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(
        voxanon(&["config", "--set", "bogus=1"]).status.code(),
        Some(1)
    );
    assert_eq!(voxanon(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_round_trips_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    ok(&[
        "config",
        "--set",
        "anon.n_far=7",
        "--set",
        "anon.n_avg=3",
        "--set",
        "mcadams.alpha=0.3",
        "--seed",
        "5",
        "--output",
        s(&path),
    ]);
    let written = std::fs::read_to_string(&path).unwrap();
    assert!(written.contains("anon.n_far=7\n") && written.contains("seed=5\n"));
    let echoed = ok(&["--config", s(&path), "config"]);
    assert_eq!(echoed, written);
    let overridden = ok(&["--config", s(&path), "--seed", "9", "config"]);
    assert!(overridden.contains("seed=9\n"));
    assert!(overridden.contains("losses.lambda_fm=2.0\n"));
    assert!(overridden.contains("losses.lambda_mel=45.0\n"));
}

fn pipeline(f: &Fixture, tag: &str) -> Vec<Vec<u8>> {
    let o = |name: &str| f.p(&format!("{tag}_{name}"));
    ok(&["f0", "--input", &f.p("voice.wav"), "--output", &o("f0.txt")]);
    let feats = [f.p("feat0.feat"), f.p("feat1.feat"), f.p("feat2.feat")];
    let units_dir = o("units");
    let mut args = vec!["kmeans", "--k", "3", "--centroids"];
    let cent = o("cent.feat");
    args.push(&cent);
    args.extend(["--units-dir", &units_dir, "--features"]);
    args.extend(feats.iter().map(String::as_str));
    ok(&args);
    let units: Vec<String> = (0..3)
        .map(|i| format!("{units_dir}/feat{i}.units"))
        .collect();
    let cb = o("cb.json");
    let mut args = vec![
        "soft-train",
        "--num-units",
        "3",
        "--embed-dim",
        "8",
        "--epochs",
        "5",
        "--output",
        &cb,
        "--features",
    ];
    args.extend(feats.iter().map(String::as_str));
    args.push("--units");
    args.extend(units.iter().map(String::as_str));
    ok(&args);
    let content = o("content.feat");
    ok(&[
        "soft-extract",
        "--codebook",
        &cb,
        "--features",
        &feats[0],
        "--output",
        &content,
    ]);
    let z = o("z.feat");
    ok(&[
        "assemble",
        "--content",
        &content,
        "--f0",
        &o("f0.txt"),
        "--embeddings",
        &f.p("enroll.embd"),
        "--speaker",
        "spk1",
        "--output",
        &z,
    ]);
    let m = o("m.wav");
    ok(&["mcadams", "--input", &f.p("voice.wav"), "--output", &m]);
    let losses = ok(&["losses", "--real", &f.p("voice.wav"), "--fake", &m]);
    [o("f0.txt"), cent, cb, content, z, m]
        .iter()
        .map(|p| std::fs::read(p).unwrap())
        .chain(std::iter::once(losses.into_bytes()))
        .collect()
}

#[test]
fn whole_pipeline_is_deterministic() {
    let f = Fixture::new();
    let a = pipeline(&f, "a");
    let b = pipeline(&f, "b");
    assert_eq!(a, b);
    let z = &a[4];
    assert_eq!(&z[..4], b"FEAT");
    let rows = u32::from_le_bytes(z[4..8].try_into().unwrap());
    let cols = u32::from_le_bytes(z[8..12].try_into().unwrap());
    assert_eq!((rows, cols), (100, 3 + 2 + 32));
}

#[test]
fn fixture_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&["toy-fixture", "--output-dir", s(a.path()), "--seed", "8"]);
    ok(&["toy-fixture", "--output-dir", s(b.path()), "--seed", "8"]);
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        assert_eq!(
            std::fs::read(a.path().join(&n)).unwrap(),
            std::fs::read(b.path().join(&n)).unwrap()
        );
    }
}
