use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn wust(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wust")).arg("--out").arg(out).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn only_run(root: &Path) -> PathBuf {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.pop().unwrap()
}

const UST: &str = "mesh = 0.125\n[domain.shape]\nkind = \"disc\"\ncenter = { x = 0.0, y = 0.0 }\nradius = 1.0\n";

#[test]
fn macmahon_prints_twenty() {
    let tmp = tempfile::tempdir().unwrap();
    let o = wust(tmp.path(), &["oracle", "macmahon", "--a", "2", "--b", "2", "--c", "2"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "20\n");
}

#[test]
fn same_seed_gives_identical_tree_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ust.toml", UST);
    let read = |root: &Path| std::fs::read(only_run(root).join("tree.csv")).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for root in [&a, &b] {
        assert!(wust(root, &["--seed", "9", "sample-ust", "--config", cfg.to_str().unwrap()]).status.success());
    }
    assert_eq!(read(&a), read(&b));
    let c = tmp.path().join("c");
    assert!(wust(&c, &["--seed", "10", "sample-ust", "--config", cfg.to_str().unwrap()]).status.success());
    assert_ne!(read(&a), read(&c));
}

#[test]
fn zero_samples_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "rn.toml",
        "mesh = 0.25\nn1 = 10\nn2 = 0\nu_center = { x = 0.0, y = 0.0 }\nu_radius = 0.3\n\
         d1 = { kind = \"disc\", center = { x = 0.0, y = 0.0 }, radius = 1.0 }\n\
         d2 = { kind = \"disc\", center = { x = 0.0, y = 0.0 }, radius = 1.5 }\n",
    );
    let o = wust(tmp.path(), &["rn-report", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("`n2`"));
}

#[test]
fn unknown_keys_are_rejected_with_their_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ust.toml", &UST.replace("[domain.shape]", "[domain]\ncolour = 1\n[domain.shape]"));
    let o = wust(tmp.path(), &["sample-ust", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("domain.colour"));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "beurling.toml",
        "mesh = 0.125\ncenter = { x = 0.0, y = 0.0 }\nr = 0.25\nradii = [0.5, 1.0]\nn = 300\n",
    );
    let run = |root: &Path, t: &str| {
        assert!(wust(root, &["--threads", t, "estimate", "beurling", "--config", cfg.to_str().unwrap()]).status.success());
        std::fs::read(only_run(root).join("beurling.csv")).unwrap()
    };
    assert_eq!(run(&tmp.path().join("one"), "1"), run(&tmp.path().join("four"), "4"));
}

#[test]
fn replay_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ust.toml", UST);
    let root = tmp.path().join("runs");
    assert!(wust(&root, &["--format", "json", "sample-ust", "--config", cfg.to_str().unwrap()]).status.success());
    let run = only_run(&root);
    assert!(wust(&root, &["replay", run.to_str().unwrap()]).status.success());
    let m = run.join("manifest.json");
    let text = std::fs::read_to_string(&m).unwrap().replace("\"seed\": 0", "\"seed\": 1");
    std::fs::write(&m, text).unwrap();
    assert!(!wust(&root, &["replay", run.to_str().unwrap()]).status.success());
}

#[test]
fn render_draws_a_json_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ust.toml", UST);
    let root = tmp.path().join("runs");
    assert!(wust(&root, &["--format", "json", "sample-ust", "--config", cfg.to_str().unwrap()]).status.success());
    let json = only_run(&root).join("tree.json");
    let out = tmp.path().join("render");
    assert!(wust(&out, &["render", json.to_str().unwrap()]).status.success());
    let svg = std::fs::read_to_string(only_run(&out).join("figure.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
}
