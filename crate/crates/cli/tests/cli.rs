mod common;

use std::path::Path;

use common::{eegunify, envelope, fixture_set, stderr, stdout, MockLlm};
use eegunify::load_locator;
use serde_json::Value;

fn ok(cwd: &Path, args: &[&str]) -> String {
    let o = eegunify(cwd, args);
    assert!(
        o.status.success(),
        "{args:?} exited {:?}: {}",
        o.status.code(),
        stderr(&o)
    );
    stdout(&o)
}

fn scanned(tmp: &Path) -> std::path::PathBuf {
    fixture_set(&tmp.join("data"));
    ok(
        tmp,
        &[
            "merge",
            "--dataset-path",
            "data/ds_clinic",
            "--domain-tag",
            "clinic",
            "--dataset-path",
            "data/ds_lab",
            "--domain-tag",
            "lab",
            "--out",
            "all.csv",
        ],
    );
    tmp.join("all.csv")
}

#[test]
fn help_and_version_exit_zero() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["--version"], &["help", "filter"]] {
        let o = eegunify(tmp.path(), args);
        assert_eq!(o.status.code(), Some(0), "{args:?}");
        assert!(!stdout(&o).is_empty());
    }
}

#[test]
fn every_subcommand_documents_its_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let expected: &[(&str, &[&str])] = &[
        (
            "scan",
            &[
                "--dataset-path",
                "--domain-tag",
                "--out",
                "--sampling-rate",
                "--channel-names",
            ],
        ),
        (
            "merge",
            &["--locator", "--dataset-path", "--domain-tag", "--out"],
        ),
        ("report", &["--locator", "--out"]),
        ("viz-freq", &["--max-sample", "--normalize", "--out"]),
        ("viz-corr", &["--max-sample", "--out"]),
        (
            "sample-filter",
            &["--completeness-check", "--where", "--save-locator"],
        ),
        ("quality", &["--locator", "--save-locator", "--report"]),
        (
            "filter",
            &[
                "--type", "--l-freq", "--h-freq", "--order", "--out", "--format",
            ],
        ),
        (
            "ica",
            &[
                "--max-components",
                "--method",
                "--kurtosis-threshold",
                "--out",
            ],
        ),
        ("resample", &["--new-sfreq", "--out"]),
        ("align", &["--channel-order", "--out"]),
        ("infer-units", &["--save-locator"]),
        ("events", &["--save-locator"]),
        ("epoch-by-event", &["--seg-sec", "--out"]),
        ("epoch-pretrain", &["--seg-sec", "--stride-sec", "--out"]),
        ("save-as", &["--format", "--out"]),
        (
            "llm-suggest",
            &[
                "--description",
                "--header",
                "--context",
                "--apply",
                "--locator",
            ],
        ),
        ("pipeline", &["--spec", "--save-locator"]),
    ];
    for (cmd, flags) in expected {
        let o = eegunify(tmp.path(), &[cmd, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{cmd}");
        let text = stdout(&o);
        for flag in *flags {
            assert!(text.contains(flag), "{cmd} --help lacks {flag}");
        }
        for global in ["--seed", "--jobs", "--json"] {
            assert!(text.contains(global), "{cmd} --help lacks {global}");
        }
    }
}

#[test]
fn usage_errors_exit_one_without_side_effects() {
    let tmp = tempfile::tempdir().unwrap();
    let loc = scanned(tmp.path());
    let before = std::fs::read(&loc).unwrap();
    let cases: &[&[&str]] = &[
        &["quality", "--locator", "all.csv", "--bogus"],
        &[
            "filter",
            "--locator",
            "all.csv",
            "--out",
            "f",
            "--type",
            "notch",
        ],
        &["resample", "--locator", "all.csv", "--out", "r"],
        &["--jobs", "0", "quality", "--locator", "all.csv"],
        &["quality", "--dataset-path", "data", "--locator", "all.csv"],
        &[
            "quality",
            "--dataset-path",
            "data/ds_lab",
            "--domain-tag",
            "lab",
        ],
        &["quality", "--locator", "all.csv", "--domain-tag", "nobody"],
        &[
            "resample",
            "--locator",
            "all.csv",
            "--new-sfreq",
            "-5",
            "--out",
            "r",
        ],
        &["nonsense"],
    ];
    for args in cases {
        let o = eegunify(tmp.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty(), "{args:?} printed no error");
    }
    assert_eq!(std::fs::read(&loc).unwrap(), before);
    assert!(!tmp.path().join("f").exists() && !tmp.path().join("r").exists());
}

#[test]
fn metadata_from_a_scan_needs_somewhere_to_go() {
    let tmp = tempfile::tempdir().unwrap();
    fixture_set(&tmp.path().join("data"));
    let o = eegunify(
        tmp.path(),
        &[
            "quality",
            "--dataset-path",
            "data/ds_lab",
            "--domain-tag",
            "lab",
        ],
    );
    assert!(stderr(&o).contains("--save-locator"), "{}", stderr(&o));
    ok(
        tmp.path(),
        &[
            "quality",
            "--dataset-path",
            "data/ds_lab",
            "--domain-tag",
            "lab",
            "--save-locator",
            "lab.csv",
        ],
    );
    let rows = load_locator(tmp.path().join("lab.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.rows().iter().all(|r| r.quality_score.is_some()));
}

#[test]
fn a_failing_file_gives_exit_two_and_leaves_its_row() {
    let tmp = tempfile::tempdir().unwrap();
    let loc = scanned(tmp.path());
    // Break one file after it was catalogued.
    let broken = tmp.path().join("data/ds_lab/l2.edf");
    let bytes = std::fs::read(&broken).unwrap();
    std::fs::write(&broken, &bytes[..bytes.len() / 2]).unwrap();

    let o = eegunify(
        tmp.path(),
        &[
            "filter",
            "--locator",
            "all.csv",
            "--l-freq",
            "1",
            "--h-freq",
            "49",
            "--out",
            "f",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(
        stderr(&o).contains("5 ok, 0 skipped, 1 failed"),
        "{}",
        stderr(&o)
    );
    let text = stdout(&o);
    let failed: Vec<&str> = text.lines().filter(|l| l.starts_with("failed")).collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0].contains("l2.edf"));

    let out = load_locator(tmp.path().join("f.csv")).unwrap();
    let original = load_locator(&loc).unwrap();
    let kept = out
        .rows()
        .iter()
        .find(|r| r.file_path.ends_with("l2.edf"))
        .unwrap();
    let was = original
        .rows()
        .iter()
        .find(|r| r.file_path.ends_with("l2.edf"))
        .unwrap();
    assert_eq!(kept, was);
    assert!(!tmp.path().join("f/lab/l2.raw").exists());
    assert!(tmp.path().join("f/lab/l1.raw").exists());
}

#[test]
fn json_mode_prints_one_object_per_row() {
    let tmp = tempfile::tempdir().unwrap();
    scanned(tmp.path());
    let out = ok(tmp.path(), &["--json", "quality", "--locator", "all.csv"]);
    let objects: Vec<Value> = out
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(objects.len(), 6);
    for v in &objects {
        assert_eq!(v["status"], "ok");
        assert!(v["file_path"].is_string() && v["domain_tag"].is_string());
        assert!(v["quality_score"]
            .as_f64()
            .is_some_and(|q| (0.0..=100.0).contains(&q)));
    }

    let out = ok(
        tmp.path(),
        &[
            "--json",
            "scan",
            "--dataset-path",
            "data/ds_lab",
            "--domain-tag",
            "lab",
            "--out",
            "l.csv",
        ],
    );
    for line in out.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["domain_tag"], "lab");
    }
}

#[test]
fn quality_report_breaks_scores_down_by_channel() {
    let tmp = tempfile::tempdir().unwrap();
    scanned(tmp.path());
    ok(
        tmp.path(),
        &["quality", "--locator", "all.csv", "--report", "q.csv"],
    );
    let text = std::fs::read_to_string(tmp.path().join("q.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("File Path,Domain Tag,Channel,Clipping,Flatline,Line Noise,High Frequency")
    );
    let table = load_locator(tmp.path().join("all.csv")).unwrap();
    let channels: usize = table.rows().iter().map(|r| r.channel_names.len()).sum();
    assert_eq!(lines.count(), channels);
}

#[test]
fn domain_tag_with_locator_touches_only_that_tag() {
    let tmp = tempfile::tempdir().unwrap();
    scanned(tmp.path());
    ok(
        tmp.path(),
        &["quality", "--locator", "all.csv", "--domain-tag", "lab"],
    );
    let table = load_locator(tmp.path().join("all.csv")).unwrap();
    assert_eq!(table.len(), 6);
    for row in table.rows() {
        assert_eq!(
            row.quality_score.is_some(),
            row.domain_tag == "lab",
            "{}",
            row.file_path
        );
    }
}

#[test]
fn event_epochs_report_events_that_run_off_the_end() {
    let tmp = tempfile::tempdir().unwrap();
    scanned(tmp.path());
    let out = ok(
        tmp.path(),
        &[
            "--json",
            "epoch-by-event",
            "--locator",
            "all.csv",
            "--domain-tag",
            "lab",
            "--seg-sec",
            "1",
            "--out",
            "ev",
        ],
    );
    let l2: Value = out
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .find(|v| v["file_path"].as_str().unwrap().ends_with("l2.edf"))
        .unwrap();
    // "go" at 2 s fits; "late" at 11.5 s in a 12 s recording does not.
    assert_eq!(l2["epochs"][0], 1);
    assert_eq!(l2["dropped_events"], 1);
    // Epoch commands leave the locator alone unless asked.
    assert!(!tmp.path().join("ev.csv").exists());
}

#[test]
fn seed_changes_sampling_but_repeats_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    scanned(tmp.path());
    let run = |seed: &str| {
        ok(
            tmp.path(),
            &[
                "--seed",
                seed,
                "viz-freq",
                "--locator",
                "all.csv",
                "--max-sample",
                "2",
                "--out",
                "v",
            ],
        )
    };
    assert_eq!(run("4"), run("4"));
}

#[test]
fn llm_header_suggestion_that_fails_validation_is_not_applied() {
    let tmp = tempfile::tempdir().unwrap();
    let loc = scanned(tmp.path());
    let before = std::fs::read(&loc).unwrap();
    std::fs::write(tmp.path().join("hdr.bin"), b"rate=300;n=2").unwrap();
    let mock = MockLlm::start(vec![(
        200,
        envelope(r#"{"channel_names": ["A", "B"], "sampling_rate": 300}"#),
    )]);
    let o = std::process::Command::new(env!("CARGO_BIN_EXE_eegunify"))
        .args([
            "llm-suggest",
            "--header",
            "hdr.bin",
            "--apply",
            "--locator",
            "all.csv",
            "--domain-tag",
            "lab",
        ])
        .current_dir(tmp.path())
        .env("EEGUNIFY_LLM_BASE_URL", &mock.base_url)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(stderr(&o).matches("rejected for").count(), 3);
    // Every lab row was rejected, so the rewritten locator is unchanged.
    assert_eq!(
        load_locator(&loc).unwrap().rows(),
        load_locator_bytes(&before, tmp.path()).rows()
    );
    let requests = mock.join();
    assert_eq!(requests.len(), 1);
    assert!(requests[0].contains("hex"));
}

fn load_locator_bytes(bytes: &[u8], dir: &Path) -> eegunify::LocatorTable {
    let path = dir.join("before.csv");
    std::fs::write(&path, bytes).unwrap();
    load_locator(&path).unwrap()
}

#[test]
fn llm_prose_replies_degrade_and_server_errors_fail() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("d.txt"), "some dataset").unwrap();
    let mock = MockLlm::start(vec![
        (200, envelope("It is probably 256 Hz.")),
        (200, envelope("Really not sure.")),
        (500, "{}".into()),
    ]);
    let run = || {
        std::process::Command::new(env!("CARGO_BIN_EXE_eegunify"))
            .args(["llm-suggest", "--description", "d.txt"])
            .current_dir(tmp.path())
            .env("EEGUNIFY_LLM_BASE_URL", &mock.base_url)
            .output()
            .unwrap()
    };
    let first = run();
    assert_eq!(first.status.code(), Some(0));
    assert!(stdout(&first).contains("confidence=low"));
    let second = run();
    assert_eq!(second.status.code(), Some(1));
    assert!(stderr(&second).contains("500"), "{}", stderr(&second));
    assert_eq!(mock.join().len(), 3);
}
