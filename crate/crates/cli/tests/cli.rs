use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qhe(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qhe-lab"))
        .args(args)
        .current_dir(dir)
        .env_remove("QHE_LAB_SEED")
        .output()
        .expect("run qhe-lab")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = qhe(dir, args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    stdout(&o)
}

#[test]
fn keygen_reports_gadget_count() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(d.path(), &["keygen", "-L", "2", "--out", "b.json"]);
    assert!(out.contains("2 gadgets"), "{out}");
}

#[test]
fn enc_then_dec_without_eval() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["keygen", "--levels", "3", "--out", "b.json"]);
    ok(d.path(), &["enc", "--bundle", "b.json", "--state-spec", "plus", "--wires", "2", "--out", "c.json"]);
    let out = ok(d.path(), &["dec", "--bundle", "b.json", "--in", "c.json"]);
    assert!(out.contains("fidelity 1.000000000"), "{out}");
}

#[test]
fn full_pipeline_with_privacy() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("c.txt"), "# two T gates\nH 0\nT 0\nCNOT 0 1\nP 1\nT 1\nH 1\n").unwrap();
    ok(d.path(), &["keygen", "-L", "2", "--out", "b.json"]);
    ok(d.path(), &["enc", "--bundle", "b.json", "--state-spec", "random", "--wires", "2", "--out", "x.json"]);
    let out = ok(
        d.path(),
        &["eval", "--bundle", "b.json", "--circuit", "c.txt", "--in", "x.json", "--out", "y.json", "--circuit-privacy"],
    );
    assert!(out.contains("2 gadgets consumed"), "{out}");
    let out = ok(d.path(), &["dec", "--bundle", "b.json", "--in", "y.json"]);
    assert!(out.contains("fidelity 1.000000000"), "{out}");
}

#[test]
fn xor_only_scheme_cannot_correct_t() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("t.txt"), "T 0\n").unwrap();
    ok(d.path(), &["keygen", "-L", "1", "--scheme", "toy", "--out", "b.json"]);
    ok(d.path(), &["enc", "--bundle", "b.json", "--out", "c.json"]);
    let o = qhe(d.path(), &["eval", "--bundle", "b.json", "--circuit", "t.txt", "--in", "c.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unsupported operation"), "{}", stderr(&o));
}

#[test]
fn out_of_gadgets_exits_2() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("t5.txt"), "T 0\nT 0\nT 0\nT 0\nT 0\n").unwrap();
    ok(d.path(), &["keygen", "-L", "4", "--out", "b.json"]);
    ok(d.path(), &["enc", "--bundle", "b.json", "--out", "c.json"]);
    let o = qhe(d.path(), &["eval", "--bundle", "b.json", "--circuit", "t5.txt", "--in", "c.json", "--out", "y.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).trim(), "error: out of gadgets: need 5, have 4");
    assert!(!d.path().join("y.json").exists());
}

#[test]
fn parse_and_io_errors_exit_1() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("bad.txt"), "H 0\nCNOT 0 0\n").unwrap();
    ok(d.path(), &["keygen", "-L", "1", "--out", "b.json"]);
    ok(d.path(), &["enc", "--bundle", "b.json", "--out", "c.json"]);
    let o = qhe(d.path(), &["eval", "--bundle", "b.json", "--circuit", "bad.txt", "--in", "c.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert_eq!(stderr(&o).lines().count(), 1);

    assert_eq!(qhe(d.path(), &["dec", "--bundle", "nope.json", "--in", "c.json"]).status.code(), Some(1));
    assert_eq!(qhe(d.path(), &["dec", "--bundle", "c.json", "--in", "c.json"]).status.code(), Some(1));
    assert_eq!(qhe(d.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(qhe(d.path(), &["demo", "nope"]).status.code(), Some(1));
}

#[test]
fn mismatched_bundle_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["keygen", "-L", "1", "--out", "b1.json"]);
    ok(d.path(), &["--seed", "9", "keygen", "-L", "1", "--out", "b2.json"]);
    ok(d.path(), &["enc", "--bundle", "b1.json", "--out", "c.json"]);
    let o = qhe(d.path(), &["dec", "--bundle", "b2.json", "--in", "c.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not encrypted under"));
}

#[test]
fn seeds_make_output_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let a = ok(d.path(), &["keygen", "-L", "2"]);
    let b = ok(d.path(), &["keygen", "-L", "2"]);
    assert_eq!(a, b);
    let c = ok(d.path(), &["--seed", "1", "keygen", "-L", "2"]);
    assert_ne!(a, c);
    let o = Command::new(env!("CARGO_BIN_EXE_qhe-lab"))
        .args(["keygen", "-L", "2"])
        .env("QHE_LAB_SEED", "1")
        .output()
        .unwrap();
    assert_eq!(stdout(&o), c);
}

#[test]
fn demos() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(d.path(), &["demo", "toy"]);
    assert!(out.ends_with("12-qubit gadget; all 4 (sk,c) cases: phase corrected; fidelity 1.000000000\n"), "{out}");
    let out = ok(d.path(), &["demo", "barrington-or"]);
    assert!(out.contains("accepting cycle (14235)"), "{out}");
    assert!(out.contains("P†"));
    let out = ok(d.path(), &["demo", "bv-chain"]);
    assert!(out.contains("all 27 (v,w) cases corrected"), "{out}");
}

#[test]
fn gh_eval_path() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(d.path(), &["gh-eval", "--alice", "0", "--bob", "0"]);
    assert!(out.contains("path in → pipe1 → pipe3 → out(Bob)"), "{out}");
    ok(d.path(), &["export", "toy-protocol", "--out", "p.json"]);
    let out = ok(d.path(), &["gh-eval", "--protocol", "p.json", "--alice", "1", "--bob", "1"]);
    assert!(out.contains("output 0"));
    assert_eq!(qhe(d.path(), &["gh-eval", "--alice", "2", "--bob", "0"]).status.code(), Some(2));
}

#[test]
fn bench_shows_ten_l_scaling() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(d.path(), &["bench", "--levels-range", "1,2,4,8", "--out", "r.json"]);
    let totals: Vec<&str> = out.lines().skip(1).map(|l| l.split_whitespace().nth(2).unwrap()).collect();
    assert_eq!(totals, ["40", "80", "160", "320"]);
}

#[test]
fn every_written_document_reads_back() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("c.txt"), "H 0\nT 0\n").unwrap();
    ok(d.path(), &["keygen", "-L", "1", "--out", "bundle.json"]);
    ok(d.path(), &["enc", "--bundle", "bundle.json", "--out", "ct.json"]);
    ok(d.path(), &["eval", "--bundle", "bundle.json", "--circuit", "c.txt", "--in", "ct.json", "--out", "ct2.json"]);
    ok(d.path(), &["export", "toy-protocol", "--out", "gh.json"]);
    ok(d.path(), &["export", "or-program", "--out", "prog.json"]);
    ok(d.path(), &["export", "toy-gadget", "--out", "gadget.json"]);
    ok(d.path(), &["export", "toy-plan", "--out", "plan.json"]);
    ok(d.path(), &["bench", "--levels-range", "1", "--out", "report.json"]);
    for (file, kind) in [
        ("bundle.json", "bundle"),
        ("ct.json", "qciphertext"),
        ("ct2.json", "qciphertext"),
        ("gh.json", "ghprotocol"),
        ("prog.json", "program"),
        ("gadget.json", "gadget"),
        ("plan.json", "plan"),
        ("report.json", "report"),
    ] {
        let out = ok(d.path(), &["inspect", file]);
        assert!(out.starts_with(&format!("{kind} document, format version 1")), "{file}: {out}");
        let text = fs::read_to_string(d.path().join(file)).unwrap();
        assert!(text.ends_with('\n'));
    }
    let again = ok(d.path(), &["export", "toy-protocol"]);
    assert_eq!(again, fs::read_to_string(d.path().join("gh.json")).unwrap());
}

#[test]
fn selftest_single_criterion() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(d.path(), &["selftest", "--criterion", "2"]);
    assert!(out.contains("[PASS]  2"), "{out}");
    assert_eq!(qhe(d.path(), &["selftest", "--criterion", "99"]).status.code(), Some(1));
}
