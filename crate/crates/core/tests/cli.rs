use std::path::Path;
use std::process::{Command, Output};

use periodic_bnn::data::read_table_path;
use tempfile::TempDir;

fn pbnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbnn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run pbnn")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = pbnn(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn noisy_sine(dir: &Path) {
    // Fixed noisy samples of sin on [-3, 3].
    let noise = [0.05, -0.12, 0.08, 0.0, -0.03, 0.11, -0.07, 0.02, 0.09, -0.1, 0.04, -0.02, 0.06, -0.09, 0.01, 0.07, -0.05, 0.03, -0.08, 0.1];
    let mut text = String::from("x,y\n");
    for (i, e) in noise.iter().enumerate() {
        let x = -3.0 + 6.0 * i as f64 / 19.0;
        text.push_str(&format!("{x},{}\n", f64::sin(x) + e));
    }
    std::fs::write(dir.join("train.csv"), text).unwrap();
}

#[test]
fn closed_form_gram_is_symmetric_with_unit_diagonal() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["gram", "--set", "kernel.family=rbf", "--out", "g.csv"]);
    let path = dir.path().join("g.csv");
    assert!(first_line(&path).starts_with("# pbnn gram "));
    let t = read_table_path(&path).unwrap();
    assert_eq!(t.header.len(), 13);
    assert_eq!(t.header[0], "-3");
    for i in 0..13 {
        assert_eq!(t.rows[i][i], 1.0);
        for j in 0..13 {
            assert_eq!(t.rows[i][j], t.rows[j][i]);
        }
    }
}

#[test]
fn mc_gram_tracks_closed_form() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["gram", "--set", "kernel.family=rbf", "--out", "exact.csv"]);
    ok(
        dir.path(),
        &["gram", "--set", "mode=mc", "--set", "activation=sin", "--set", "prior.family=normal", "--set", "hidden_units=1000", "--seed", "4", "--out", "mc.csv"],
    );
    let exact = read_table_path(&dir.path().join("exact.csv")).unwrap();
    let mc = read_table_path(&dir.path().join("mc.csv")).unwrap();
    for (a, b) in exact.rows.iter().flatten().zip(mc.rows.iter().flatten()) {
        assert!((a - b).abs() <= 0.1, "{a} vs {b}");
    }
}

#[test]
fn locally_stationary_diagonal_decays() {
    let dir = TempDir::new().unwrap();
    let cfg = "kernel.family = ls-matern\nkernel.nu = 1.5\nkernel.sigma_m = 1.5\ngrid.min = 0\ngrid.max = 4\ngrid.n = 9\n";
    std::fs::write(dir.path().join("ls.cfg"), cfg).unwrap();
    ok(dir.path(), &["gram", "--config", "ls.cfg", "--out", "ls.csv"]);
    let t = read_table_path(&dir.path().join("ls.csv")).unwrap();
    let diag: Vec<f64> = (0..9).map(|i| t.rows[i][i]).collect();
    assert!(diag.windows(2).all(|w| w[1] < w[0]), "{diag:?}");
}

#[test]
fn banana_gen_is_deterministic_and_balanced() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["banana-gen", "--seed", "7", "--out", "a.csv"]);
    ok(dir.path(), &["banana-gen", "--seed", "7", "--out", "b.csv"]);
    ok(dir.path(), &["banana-gen", "--seed", "8", "--out", "c.csv"]);
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
    let t = read_table_path(&dir.path().join("a.csv")).unwrap();
    assert_eq!(t.header, ["x1", "x2", "label"]);
    assert_eq!(t.rows.len(), 200);
    assert_eq!(t.rows.iter().filter(|r| r[2] == 1.0).count(), 100);
    assert!(first_line(&dir.path().join("a.csv")).contains("seed=7"));
}

#[test]
fn tabular_outputs_have_the_documented_columns() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["sweep", "--set", "hidden_units=5,50", "--set", "repeats=2", "--out", "s.csv"]);
    assert_eq!(read_table_path(&d.join("s.csv")).unwrap().header, ["K", "mae_mean", "mae_std"]);
    ok(d, &["mc-verify", "--set", "prior.family=cauchy", "--set", "hidden_units=200", "--out", "v.csv"]);
    assert_eq!(
        read_table_path(&d.join("v.csv")).unwrap().header,
        ["r", "kappa_mc", "kappa_closed", "abs_err"]
    );
    ok(d, &["triangle-error", "--set", "grid.n=5", "--out", "t.csv"]);
    assert_eq!(read_table_path(&d.join("t.csv")).unwrap().rows.len(), 5);
}

#[test]
fn gp_fit_and_regress_1d() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    noisy_sine(d);
    ok(d, &["gp-fit", "--set", "data=train.csv", "--set", "noise_var=0.01", "--set", "grid.n=11", "--out", "gp.csv"]);
    let t = read_table_path(&d.join("gp.csv")).unwrap();
    assert_eq!(t.header, ["x", "mean", "var"]);
    assert_eq!(t.rows.len(), 11);

    ok(d, &["regress-1d", "--set", "data=train.csv", "--set", "noise_var=0.01", "--out", "r.csv"]);
    let metrics = std::fs::read_to_string(d.join("r.metrics.csv")).unwrap();
    let gp_row = metrics.lines().find(|l| l.starts_with("gp,")).unwrap();
    let ratio: f64 = gp_row.rsplit(',').next().unwrap().parse().unwrap();
    assert!(ratio >= 0.999, "{ratio}");
    ok(d, &["regress-1d", "--set", "data=train.csv", "--set", "noise_var=0.01", "--out", "r2.csv"]);
    assert_eq!(std::fs::read(d.join("r.csv")).unwrap(), std::fs::read(d.join("r2.csv")).unwrap());
}

#[test]
fn regress_1d_bnn_reverts_far_from_data() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    noisy_sine(d);
    let cfg = "data = train.csv\nnoise_var = 0.01\nmodel = both\nactivation = sin\nprior.family = student-t\nprior.dof = 3\nhidden_units = 30\nchains = 2\nwarmup = 400\niters = 400\nseed = 3\n";
    std::fs::write(d.join("r.cfg"), cfg).unwrap();
    ok(d, &["regress-1d", "--config", "r.cfg", "--out", "r.csv"]);
    let t = read_table_path(&d.join("r.csv")).unwrap();
    assert_eq!(t.header, ["x", "gp_mean", "gp_var", "bnn_mean", "bnn_var"]);
    let metrics = std::fs::read_to_string(d.join("r.metrics.csv")).unwrap();
    let bnn_row = metrics.lines().find(|l| l.starts_with("bnn,")).unwrap();
    let ratio: f64 = bnn_row.rsplit(',').next().unwrap().parse().unwrap();
    assert!(ratio >= 0.8, "{ratio}");
}

#[test]
fn bnn_fit_and_hmc_predict_classification() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["banana-gen", "--set", "n_per_class=20", "--out", "banana.csv"]);
    let common = ["--set", "data=banana.csv", "--set", "task=classification", "--set", "hidden_units=10"];
    let mut args = vec!["bnn-fit"];
    args.extend(common);
    args.extend(["--set", "iters=200", "--out", "map.csv"]);
    ok(d, &args);
    let t = read_table_path(&d.join("map.csv")).unwrap();
    assert_eq!(t.header, ["x1", "x2", "mean", "variance", "entropy"]);
    assert!(t.rows.iter().all(|r| r[3] == 0.0));

    let mut args = vec!["bnn-hmc"];
    args.extend(common);
    args.extend(["--set", "chains=1", "--set", "warmup=150", "--set", "iters=100", "--out", "hmc.csv"]);
    ok(d, &args);
    let t = read_table_path(&d.join("hmc.csv")).unwrap();
    assert_eq!(t.rows.len(), 40);
    assert!(t.rows.iter().all(|r| (0.0..=1.0).contains(&r[2]) && r[4] >= 0.0));
}

#[test]
fn failures_print_one_categorised_line() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    noisy_sine(d);
    let cases: [(&[&str], &str); 5] = [
        (&["gram", "--set", "kernel.family=rbf", "--set", "colour=blue"], "config"),
        (&["gp-fit", "--set", "data=missing.csv", "--set", "noise_var=0.1"], "io"),
        (&["gp-fit", "--set", "data=train.csv"], "config"),
        (&["mc-verify", "--set", "activation=relu"], "invalid-parameter"),
        (&["no-such-command"], "usage"),
    ];
    for (args, category) in cases {
        let out = pbnn(d, args);
        assert!(!out.status.success());
        let stderr = String::from_utf8(out.stderr).unwrap();
        assert_eq!(stderr.lines().count(), 1, "{stderr}");
        assert!(stderr.starts_with(&format!("error[{category}]: ")), "{stderr}");
    }
}
