use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tomocouple(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tomocouple"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn sinogram_noise_fbp_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&tomocouple(d, &["phantom", "--size", "32", "--pgm", "p.pgm"]));
    assert!(fs::read(d.join("p.pgm")).unwrap().starts_with(b"P5\n32 32\n"));
    let said = ok(&tomocouple(d, &["sinogram", "--preset", "sl-under", "--size", "32", "--out", "s.raw"]));
    assert!(said.contains("7 views x 32 cells"), "{said}");
    let s = d.join("s.raw");
    ok(&tomocouple(d, &["--seed", "3", "noise", "--input", s.to_str().unwrap(), "--out", "n.raw"]));
    let n = d.join("n.raw");
    ok(&tomocouple(d, &["fbp", "--input", n.to_str().unwrap(), "--adjoint", "kb", "--filter", "hann"]));
    assert_eq!(fs::read(d.join("fbp.raw")).unwrap().len(), 32 * 32 * 4);
}

#[test]
fn recon_writes_image_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let said = ok(&tomocouple(
        d,
        &[
            "recon", "--algo", "admm", "--fwd", "rd", "--adj", "dd", "--data", "sl-full", "--size", "24", "--iters", "5",
            "--lambda", "0.1", "--rho", "1.0", "--trace", "out.csv", "--out", "img.raw",
        ],
    ));
    assert!(said.contains("diverged=false") && said.contains("psnr="), "{said}");
    let trace = fs::read_to_string(d.join("out.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("iter,cost,psnr,diverged"));
    assert_eq!(trace.lines().count(), 6);
}

#[test]
fn audit_prints_the_coupling_table() {
    let dir = tempfile::tempdir().unwrap();
    let said = ok(&tomocouple(dir.path(), &["audit", "--size", "16", "--views", "10", "--seeds", "3"]));
    assert!(said.starts_with("fwd,adj,max_abs_r_minus_1,digits"));
    assert!(said.contains("dominant diagonal: 6/6"), "{said}");
}

#[test]
fn matrix_and_report_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = d.join("m.txt");
    fs::write(&spec, "dataset=sl-full algo=fbp fwd=pd adj=all filter=ramp\n").unwrap();
    let said = ok(&tomocouple(d, &["matrix", "--spec", spec.to_str().unwrap(), "--size", "24", "--report"]));
    assert!(said.contains("coupling dominance: "), "{said}");
    let csv = fs::read_to_string(d.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    ok(&tomocouple(d, &["report"]));

    let bad = d.join("bad");
    fs::create_dir(&bad).unwrap();
    fs::write(&spec, "dataset=sl-full algo=fbp fwd=pd adj=pd views=0\n").unwrap();
    let out = tomocouple(&bad, &["matrix", "--spec", spec.to_str().unwrap(), "--size", "16"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cell sl-full"));

    fs::write(&spec, "dataset=sl-full algo=nonsense fwd=pd\n").unwrap();
    assert!(!tomocouple(&bad, &["matrix", "--spec", spec.to_str().unwrap()]).status.success());
}
