use std::process::Command;

fn opprec(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_opprec"))
        .args(args)
        .env("OPPREC_SEED", "0")
        .output()
        .expect("binary runs")
}

#[test]
fn cube_csv_table() {
    let out = opprec(&["run", "--levels", "2", "--dense-check"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "dofs,h_min,kappa_a,kappa_ga,sec_per_dof");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("12,0.707107,14.5"));
    assert!(lines[2].starts_with("48,"));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("dense oracle deviation"));
}

#[test]
fn square_json_report_to_file() {
    let dir = std::env::temp_dir().join(format!("opprec-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("rows.json");
    let out = opprec(&[
        "run",
        "--geometry",
        "unit-square",
        "--operator",
        "mass",
        "--s",
        "0",
        "--levels",
        "3",
        "--format",
        "json",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.trim_start().starts_with('['));
    assert_eq!(text.matches("\"dofs\"").count(), 3);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn invalid_arguments_are_rejected() {
    for args in [
        &["run", "--beta", "-1"][..],
        &["run", "--geometry", "unit-square", "--operator", "single-layer"],
        &["run", "--s", "1.5"],
        &[
            "run",
            "--refine",
            "corners",
            "--geometry",
            "unit-square",
            "--operator",
            "none",
        ],
    ] {
        let out = opprec(args);
        assert!(!out.status.success(), "{args:?} should fail");
    }
}
