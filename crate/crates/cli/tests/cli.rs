use std::path::Path;
use std::process::{Command, Output};

fn locsent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locsent"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn certify_example_reports_n_six() {
    let o = locsent(&["certify", "example2"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.starts_with("certified yes\n"), "{out}");
    assert!(out.contains("v 1 v' 2 q 3 N 6"), "{out}");
}

#[test]
fn certify_refusal_dumps_a_three_element_chain() {
    let o = locsent(&["certify", "nonlocal", "--steps", "1", "--max-size", "3"]);
    assert_eq!(code(&o), 3);
    let out = stdout(&o);
    assert!(out.contains("certified no"), "{out}");
    assert!(out.contains("domain 3\n"), "{out}");
}

#[test]
fn decide_documented_cases() {
    let o = locsent(&["decide", "theta_star_beta", "omega-model"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("answer no\n"));
    for (input, q) in [
        ("theta", "arbitrarily-large-finite"),
        ("example2", "infinite"),
    ] {
        let o = locsent(&["decide", input, q]);
        assert_eq!(code(&o), 0);
        assert!(stdout(&o).contains("answer yes\n"), "{input} {q}");
    }
}

#[test]
fn decided_witness_passes_verify() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.dump");
    let o = locsent(&["decide", "example2", "infinite", "--format", "dump"]);
    assert_eq!(code(&o), 0);
    std::fs::write(&path, &o.stdout).unwrap();
    let v = locsent(&["verify", "example2", path.to_str().unwrap()]);
    assert_eq!(code(&v), 0);
    assert_eq!(stdout(&v), "model yes\nplain indiscernibles yes\n");

    let tampered = stdout(&o).replacen("rel P: (0)\n", "", 1);
    std::fs::write(&path, tampered).unwrap();
    assert_eq!(
        code(&locsent(&["verify", "example2", path.to_str().unwrap()])),
        3
    );
}

#[test]
fn spectra_at_ceiling_six() {
    for (input, expected) in [
        ("theta", "{1, 2, 3, 4, 5, 6}"),
        ("beta", "{2, 4, 6}"),
        ("example2", "{2, 3, 4, 5, 6}"),
    ] {
        let o = locsent(&["spectrum", input, "--ceiling", "6"]);
        assert_eq!(code(&o), 0);
        assert!(
            stdout(&o).starts_with(&format!("spectrum {expected}\n")),
            "{input}"
        );
    }
}

#[test]
fn stretch_reports_period_equal_to_block() {
    let o = locsent(&["stretch", "ab_blocks", "omega-prefix(5)"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("ground 0 block 2\n"), "{out}");
    assert!(out.contains("word A-A-A-A-A-\n"), "{out}");
    assert!(out.contains("u=0 v=2\n"), "{out}");
}

#[test]
fn stretch_prefixes_are_coherent() {
    let three = stdout(&locsent(&[
        "stretch",
        "first_marked",
        "omega-prefix(3)",
        "--format",
        "dump",
    ]));
    let four = stdout(&locsent(&[
        "stretch",
        "first_marked",
        "omega-prefix(4)",
        "--format",
        "dump",
    ]));
    assert!(three.starts_with("domain 4\n"), "{three}");
    assert!(four.starts_with("domain 5\n"), "{four}");
    assert_eq!(three.replace("domain 4", ""), four.replace("domain 5", ""));
}

#[test]
fn stretch_refuses_without_special_witness() {
    assert_eq!(code(&locsent(&["stretch", "theta", "3"])), 3);
}

#[test]
fn combine_star_round_trips_and_certifies() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("star.sent");
    let o = locsent(&["combine", "star", "theta", "-o", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("steps 2;"), "{text}");
    let c = locsent(&["certify", path.to_str().unwrap()]);
    assert_eq!(code(&c), 0);
    assert!(stdout(&c).starts_with("certified yes\n"));
}

#[test]
fn combine_phi_has_eighteen_symbols() {
    let out = stdout(&locsent(&["combine", "Phi"]));
    let sig = out.lines().find(|l| l.starts_with("sig {")).unwrap();
    assert_eq!(sig.matches('/').count() + 1, 18, "{sig}");
    assert!(out.contains("steps 7;"));
}

#[test]
fn combine_tn_has_two_stage_provenance() {
    let out = stdout(&locsent(&["combine", "Tn", "single", "1"]));
    let header: Vec<&str> = out.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(
        header.iter().any(|l| l.contains("psi'_1(single)")),
        "{header:?}"
    );
    assert!(header.last().unwrap().contains("T_1(single)"), "{header:?}");
}

#[test]
fn output_is_independent_of_worker_count() {
    let one = locsent(&["decide", "example2", "infinite", "--workers", "1"]);
    let four = locsent(&["decide", "example2", "infinite", "--workers", "4"]);
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&locsent(&["frobnicate"])), 1);
    assert_eq!(code(&locsent(&["certify", "no-such-sentence"])), 1);
    assert_eq!(
        code(&locsent(&[
            "decide", "example2", "infinite", "--budget", "10"
        ])),
        2
    );
    assert_eq!(
        code(&locsent(&[
            "decide", "example2", "infinite", "--steps", "0"
        ])),
        3
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.sent");
    std::fs::write(
        &bad,
        "sig { fn g/2; }\nsteps 1;\nforall x y . g(x, y) = x\n",
    )
    .unwrap();
    assert_eq!(
        code(&locsent(&["decide", bad.to_str().unwrap(), "omega-model"])),
        3
    );
    std::fs::write(&bad, "forall x . (x\n").unwrap();
    assert_eq!(
        code(&locsent(&[
            "certify",
            bad.to_str().unwrap(),
            "--steps",
            "1"
        ])),
        1
    );
    assert!(Path::new(env!("CARGO_BIN_EXE_locsent")).exists());
}
