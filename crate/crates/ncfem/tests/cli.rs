use std::path::PathBuf;
use std::process::Command;

fn ncfem() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ncfem"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ncfem-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn study_writes_identical_csv_twice() {
    let dir = scratch("study");
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.join(run);
        let status = ncfem()
            .args(["--test", "layer", "--method", "both", "--epsilon", "1e-6,1e-8", "--levels", "1,2", "--serial", "--format", "csv,markdown,json", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        files.push(std::fs::read_to_string(out.join("study.csv")).unwrap());
        assert!(out.join("study.md").exists() && out.join("study.json").exists());
    }
    assert_eq!(files[0], files[1]);
    assert!(files[0].starts_with("test,method,epsilon,n,h,dof_phi,dof_total,err_phi,rate_phi,err_u_l2,rate_u_l2,err_u_h1,rate_u_h1,solve_seconds\n"));
    assert_eq!(files[0].lines().count(), 9);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn config_file_with_flag_override() {
    let dir = scratch("config");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("study.toml");
    std::fs::write(&path, "test = \"smooth\"\nepsilons = [1.0]\nlevels = [1, 2]\nformats = [\"json\"]\n").unwrap();
    let out = ncfem().arg("--config").arg(&path).args(["--epsilon", "1e-2", "--out"]).arg(&dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = std::fs::read_to_string(dir.join("study.json")).unwrap();
    assert!(json.contains("\"epsilon\": 0.01") && !json.contains("solve_seconds"), "{json}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = scratch("bad");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.toml");
    std::fs::write(&path, "levels = [2]\nquad = 3\n").unwrap();
    let out = ncfem().arg("--config").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("quad") && err.contains("line 2"), "{err}");
    assert_eq!(ncfem().args(["--levels", "2,3"]).output().unwrap().status.code(), Some(2));
    assert_eq!(ncfem().args(["--method", "fancy"]).output().unwrap().status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn verify_suite_passes_and_marks_infsup_skipped() {
    let dir = scratch("verify");
    let out = ncfem().args(["--verify", "--epsilon", "1,1e-8", "--out"]).arg(&dir).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text.contains("SKIP inf-sup estimate"), "{text}");
    assert!(text.contains("0 failed, 1 skipped"), "{text}");
    let json = std::fs::read_to_string(dir.join("verify.json")).unwrap();
    assert!(json.contains("\"status\": \"pass\"") && json.contains("\"seconds\": null"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn solver_failure_exits_with_one() {
    let dir = scratch("fail");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("tight.toml");
    std::fs::write(&path, "levels = [2]\nepsilons = [1.0]\n[solver]\nmax_cg_iterations = 1\n").unwrap();
    let out = ncfem().arg("--config").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("poisson for w"));
    let _ = std::fs::remove_dir_all(&dir);
}
