use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spinbath"));
    c.env_remove("SPINBATH_OUT_DIR");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn data_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn spectrum_writes_files_with_header() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["--seed", "42", "spectrum", "--nuclei", "fs0", "--out-dir", "out"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["spectrum_lines.csv", "spectrum.csv", "spectrum.svg"] {
        assert!(d.path().join("out").join(f).is_file(), "{f}");
    }
    let lines = fs::read_to_string(d.path().join("out/spectrum_lines.csv")).unwrap();
    let header: Vec<&str> = lines.lines().take(4).collect();
    assert_eq!(header[0], format!("# tool: spinbath {}", env!("CARGO_PKG_VERSION")));
    assert_eq!(header[1], "# command: spectrum");
    assert!(header[2].starts_with("# config_hash: sha256:") && header[2].len() == "# config_hash: sha256:".len() + 64);
    assert_eq!(header[3], "# seed: 42");
    let svg = fs::read_to_string(d.path().join("out/spectrum.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("config_hash: sha256:") && svg.contains("seed: 42"));

    // lowest branch (m_s = 0 <-> -1) of one first-shell nucleus: a doublet
    let rows = data_rows(&lines);
    let strong: Vec<f64> = rows.iter().filter(|r| r[0] < 2870.0 && r[1] > 0.1).map(|r| r[0]).collect();
    assert_eq!(strong.len(), 2, "{strong:?}");
    assert!((strong[1] - strong[0] - 130.0).abs() < 10.0);
}

#[test]
fn bare_nv_has_two_lines() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["spectrum", "--nuclei", "none"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = data_rows(&fs::read_to_string(d.path().join("spectrum_lines.csv")).unwrap());
    assert_eq!(rows.len(), 2);
}

#[test]
fn invalid_spec_exits_2() {
    let d = tempfile::tempdir().unwrap();
    for nuclei in ["fs0,fs0,fs0,fs0,fs0,fs0,fs0", "iso:abc", "fs7"] {
        let o = run(d.path(), &["spectrum", "--nuclei", nuclei]);
        assert_eq!(code(&o), 2, "{nuclei}");
        assert!(stderr(&o).starts_with("error:"));
    }
}

#[test]
fn linewidth_grid_and_overlay() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["linewidth", "--n-min", "0"]);
    assert_eq!(code(&o), 2);
    let o = run(d.path(), &["linewidth", "--n-max", "1.5"]);
    assert_eq!(code(&o), 2);

    write(d.path(), "overlay.csv", "# measured\nn,w_khz\n0.084,14300\n");
    let o = run(d.path(), &["linewidth", "--overlay", "overlay.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = data_rows(&fs::read_to_string(d.path().join("linewidth.csv")).unwrap());
    assert_eq!(rows.len(), 41);
    let (a, b) = (&rows[0], &rows[40]);
    let slope_contact = (b[1] / a[1]).ln() / (b[0] / a[0]).ln();
    let slope_dipolar = (b[2] / a[2]).ln() / (b[0] / a[0]).ln();
    assert!((slope_contact - 0.5).abs() < 1e-9 && (slope_dipolar - 0.5).abs() < 1e-9);
    let ov = data_rows(&fs::read_to_string(d.path().join("linewidth_overlay.csv")).unwrap());
    assert!((ov[0][2] - 1.0).abs() < 0.02, "{:?}", ov[0]);
    let svg = fs::read_to_string(d.path().join("linewidth.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert_eq!(svg.matches("<circle").count(), 1);

    write(d.path(), "bad.csv", "n,w_khz\n0.1,2\n\n0.2,nope\n");
    let o = run(d.path(), &["linewidth", "--overlay", "bad.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bad.csv: line 4"), "{}", stderr(&o));
}

fn echo_csv(t2: f64) -> String {
    let mut s = String::from("t_us,signal\n");
    for k in 0..80 {
        let t = k as f64 * 40.0;
        s.push_str(&format!("{t},{}\n", 0.05 + 0.9 * (-(t / t2).powi(3)).exp()));
    }
    s
}

#[test]
fn fit_echo_and_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "echo.csv", &echo_csv(1800.0));
    let o = run(d.path(), &["fit", "--model", "cubic_echo", "--input", "echo.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(d.path().join("fit_cubic_echo.txt")).unwrap();
    let t2: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("t2_us: "))
        .and_then(|v| v.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((t2 / 1800.0 - 1.0).abs() < 0.01, "{t2}");

    let flat: String =
        std::iter::once("t_us,signal\n".to_string()).chain((0..20).map(|k| format!("{k},0.5\n"))).collect();
    write(d.path(), "flat.csv", &flat);
    let o = run(d.path(), &["fit", "--input", "flat.csv"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    write(d.path(), "bad.csv", "# header\nt_us,signal\n0,1\n1,x\n");
    let o = run(d.path(), &["fit", "--input", "bad.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let o = run(d.path(), &["fit", "--input", "missing.csv"]);
    assert_eq!(code(&o), 2);
    let o = run(d.path(), &["fit", "--model", "nonsense", "--input", "echo.csv"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn fit_scaling_and_bell() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "t2.csv", "n,t2_us\n0.011,650\n0.0035,1800\n");
    let o = run(d.path(), &["fit", "--model", "inverse_n", "--input", "t2.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("C_us: 6.71"));
    assert!(stdout(&o).contains("also labelled 0.3%"));
    let o = run(d.path(), &["fit", "--model", "bell"]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(d.path().join("fit_bell.txt")).unwrap();
    assert!(text.contains("psi_us: 25.667"), "{text}");
    assert!(text.contains("phi_us: 11.413"), "{text}");
}

#[test]
fn bath_stats_and_limits() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["bath", "--radius", "20"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(d.path().join("bath_report.txt")).unwrap();
    let sites: usize = report.lines().find_map(|l| l.strip_prefix("sites: ")).unwrap().parse().unwrap();
    assert!(sites >= 3000);
    assert!(report.contains("second_moment_coefficient_cm6"));
    assert!(report.contains("convention:"));

    let o = run(d.path(), &["bath", "--concentration", "0"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("occupied: 0 "));

    let o = run(d.path(), &["bath", "--radius", "500"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("limit"));
}

#[test]
fn reruns_are_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let args = |out: &'static str, seed: &'static str, threads: &'static str| {
        vec![
            "--seed",
            seed,
            "--threads",
            threads,
            "bath",
            "--concentration",
            "0.05",
            "--fid-samples",
            "200",
            "--fid-points",
            "20",
            "--out-dir",
            out,
        ]
    };
    for (out, seed, threads) in [("a", "7", "1"), ("b", "7", "3"), ("c", "8", "1")] {
        let o = run(d.path(), &args(out, seed, threads));
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["bath_occupied.csv", "bath_fid.csv", "bath_report.txt", "bath_fid.svg"] {
        let a = fs::read(d.path().join("a").join(f)).unwrap();
        let b = fs::read(d.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let a = fs::read_to_string(d.path().join("a/bath_occupied.csv")).unwrap();
    let c = fs::read_to_string(d.path().join("c/bath_occupied.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn pulse_modes() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "phi.seq",
        "# phi-\nmw 0:00 -1:00 pi 0\nrf -1:00 -1:10 pi/2 -pi/2 control=2:0\nwait tau\nrf -1:10 -1:11 pi pi/2 control=1:1\n",
    );
    let o = run(d.path(), &["pulse", "--sequence", "phi.seq", "--tau", "0,2.5", "--init", "ideal"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(d.path().join("pulse_run.csv")).unwrap();
    assert!(csv.contains("tau_us,p[0:00],p[0:01]"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!((r[5] - 0.5).abs() < 1e-12 && (r[8] - 0.5).abs() < 1e-12, "{r:?}");
    }
    // default start: m_s = 0 with mixed nuclei
    let o = run(d.path(), &["pulse", "--sequence", "phi.seq", "--tau", "0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = &data_rows(&fs::read_to_string(d.path().join("pulse_run.csv")).unwrap())[0];
    assert!((r[1..].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(r[1..].iter().all(|p| *p < 0.5), "{r:?}");

    write(d.path(), "bad.seq", "mw 0:00 -1:00 pi 0\n\n# c\nrf -1:00 -1:10 half 0\n");
    let o = run(d.path(), &["pulse", "--sequence", "bad.seq"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bad.seq: line 4"), "{}", stderr(&o));

    let o = run(d.path(), &["pulse", "--mode", "endor"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for r in data_rows_skip_text(&fs::read_to_string(d.path().join("pulse_endor.csv")).unwrap()) {
        assert!((r[0] - 1.0).abs() < 1e-10 && (r[1] - 1.0).abs() < 1e-10, "{r:?}");
    }

    let o = run(d.path(), &["pulse", "--mode", "bell", "--variant", "phi-", "--points", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let bell = fs::read_to_string(d.path().join("pulse_bell.csv")).unwrap();
    let first = bell.lines().find(|l| l.starts_with("phi-,")).unwrap();
    let f: f64 = first.rsplit(',').next().unwrap().parse().unwrap();
    assert!(f > 1.0 - 1e-10);

    let o = run(d.path(), &["pulse", "--mode", "rabi", "--points", "41"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rabi = data_rows(&fs::read_to_string(d.path().join("pulse_rabi.csv")).unwrap());
    let lo = rabi.iter().map(|r| r[1]).fold(1.0, f64::min);
    assert!(lo < 0.05 && (rabi[0][1] - 1.0).abs() < 1e-12);
}

/// Numeric columns after the first two text ones.
fn data_rows_skip_text(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').skip(2).map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn config_file_and_out_dir_precedence() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "run.toml", "seed = 5\nout_dir = \"from_file\"\n\n[spectrum]\nnuclei = \"none\"\nfwhm_mhz = 3\n");
    let o = run(d.path(), &["--config", "run.toml", "spectrum"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let lines = fs::read_to_string(d.path().join("from_file/spectrum_lines.csv")).unwrap();
    assert!(lines.contains("# seed: 5") && lines.contains("# nuclei: none"));

    // flags beat the file
    let o = run(d.path(), &["--config", "run.toml", "--seed", "9", "spectrum", "--nuclei", "fs0", "--out-dir", "flag"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let lines = fs::read_to_string(d.path().join("flag/spectrum_lines.csv")).unwrap();
    assert!(lines.contains("# seed: 9") && lines.contains("# nuclei: fs0"));

    // env var only applies when neither flag nor file sets the directory
    let o = bin().current_dir(d.path()).env("SPINBATH_OUT_DIR", "from_env").args(["spectrum"]).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(d.path().join("from_env/spectrum.csv").is_file());
    let o = bin()
        .current_dir(d.path())
        .env("SPINBATH_OUT_DIR", "from_env2")
        .args(["--config", "run.toml", "spectrum"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(!d.path().join("from_env2").exists());

    // different settings change the hash, identical ones do not
    let hash = |dir: &str| {
        fs::read_to_string(d.path().join(dir).join("spectrum.csv"))
            .unwrap()
            .lines()
            .find(|l| l.starts_with("# config_hash"))
            .unwrap()
            .to_string()
    };
    run(d.path(), &["spectrum", "--out-dir", "h1"]);
    run(d.path(), &["spectrum", "--out-dir", "h2"]);
    run(d.path(), &["spectrum", "--fwhm-mhz", "2", "--out-dir", "h3"]);
    assert_eq!(hash("h1"), hash("h2"));
    assert_ne!(hash("h1"), hash("h3"));

    write(d.path(), "typo.toml", "[spectrum]\nnucleii = \"fs0\"\n");
    let o = run(d.path(), &["--config", "typo.toml", "spectrum"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unwritable_out_dir_fails_before_compute() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "file", "x");
    let o = run(d.path(), &["bath", "--out-dir", "file/sub"]);
    assert_eq!(code(&o), 2);
}
