use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn fuselab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fuselab")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

const SMALL_CONFIG: &str = r#"seed = 4
name = "small"
[model]
latent_dim = 4
text = { embed_dim = 4, hidden_dim = 4 }
visual = { kind = "conv", conv_channels = [2, 2] }
fusion = { kind = "gan" }
[data]
synthetic = { task = "unimodal-separable", n = 150, grid_size = 6 }
[train]
epochs = 4
batch_size = 8
"#;

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

/// Metric columns (P, R, F, A) of the single data row of a metrics CSV.
fn metric_columns(path: &Path) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let row = text.lines().nth(1).expect("data row");
    row.split(',').skip(3).take(4).map(|c| c.parse().unwrap()).collect()
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = fuselab(&["train", "--config", "/nonexistent/x.toml", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&fuselab(&["train"])), 2);
    assert_eq!(code(&fuselab(&["frobnicate"])), 2);
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<String> = ["a.jsonl", "b.jsonl", "c.jsonl"]
        .iter()
        .map(|f| dir.path().join(f).to_string_lossy().into_owned())
        .collect();
    for (p, seed) in paths.iter().zip(["42", "42", "43"]) {
        let out = fuselab(&["synth", "--task", "xor-crossmodal", "--n", "50", "--seed", seed, "--out", p]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |p: &String| fs::read(p).unwrap();
    assert_eq!(read(&paths[0]), read(&paths[1]));
    assert_ne!(read(&paths[0]), read(&paths[2]));
}

#[test]
fn normalize_streams_stdin_to_stdout() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_fuselab"))
        .args(["normalize", "--in", "-", "--out", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"@fiery_eyes, this is soooo coool borther! ;) #coolforever\nplain words\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "[user] fiery_eyes [/user] this is so cool brother! [wink] [hashtag] cool forever [/hashtag]\nplain words\n"
    );
}

#[test]
fn gradcheck_passes() {
    let out = fuselab(&["gradcheck"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("end_to_end/gan_fusion"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn gradcheck_fails_with_exit_1_at_an_impossible_tolerance() {
    assert_eq!(code(&fuselab(&["gradcheck", "--tol", "1e-300"])), 1);
    assert_eq!(code(&fuselab(&["gradcheck", "--tol", "0"])), 2);
}

#[test]
fn train_then_eval_reproduces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL_CONFIG);
    let run = dir.path().join("run");
    let out = fuselab(&["train", "--config", &cfg, "--out", run.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["model.bin", "loss.csv", "test.jsonl", "metrics.txt", "metrics.csv"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let loss = fs::read_to_string(run.join("loss.csv")).unwrap();
    assert!(loss.starts_with("step,J_C,J_F,J\n"));

    let out = fuselab(&[
        "eval",
        "--model",
        run.join("model.bin").to_str().unwrap(),
        "--data",
        run.join("test.jsonl").to_str().unwrap(),
        "--threads",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(metric_columns(&run.join("metrics.csv")), metric_columns(&run.join("eval_metrics.csv")));
}

#[test]
fn training_on_an_empty_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let cfg = write_config(
        dir.path(),
        "empty.toml",
        "seed = 1\n[model]\nlatent_dim = 4\n[data]\npath = \"empty.jsonl\"\n",
    );
    let out = fuselab(&["train", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn eval_on_a_different_label_space_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", &SMALL_CONFIG.replace("epochs = 4", "epochs = 1"));
    let run = dir.path().join("run");
    assert_eq!(code(&fuselab(&["train", "--config", &cfg, "--out", run.to_str().unwrap()])), 0);

    let data = dir.path().join("mmhs.jsonl");
    let header = r#"{"labels":{"names":["No Hate","Racist","Sexist","Homophobic","Religion-based","Other Hate"],"mode":"multi"}}"#;
    fs::write(&data, format!("{header}\n{{\"id\":\"a\",\"text\":\"hello there\",\"label\":\"Racist\"}}\n")).unwrap();
    let out = fuselab(&[
        "eval",
        "--model",
        run.join("model.bin").to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(code(&out), 2, "{stderr}");
    assert!(stderr.contains("do not match"), "{stderr}");
}

#[test]
fn unknown_config_keys_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &SMALL_CONFIG.replace("[train]", "[train]\nseed = 3"));
    let out = fuselab(&["train", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}
