use certsieve::corpus::{build_corpus_index, CorpusWriter};
use certsieve::harvest::DomainRecord;
use certsieve_fixtures::{test_root, Behavior, CertBuilder, Farm};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn certsieve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_certsieve"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, n: &str) -> PathBuf {
    let out = dir.join("synth.csv");
    let o = certsieve(&["synth", "--pos-spec", "phishing", "--neg-spec", "alexa", "--n", n, "--seed", "3", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn eval_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path(), "200");
    let run = || certsieve(&["eval", "--features", p(&csv), "--cv", "10", "--algo", "forest", "--seed", "7"]);
    let (a, b) = (run(), run());
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8_lossy(&a.stdout).contains("seed 7"));

    let json = certsieve(&["eval", "--features", p(&csv), "--algo", "knn", "--format", "json"]);
    assert_eq!(code(&json), 0);
    let text = String::from_utf8_lossy(&json.stdout);
    assert!(text.contains("\"pos_recall\"") && text.contains("\"seed\": 2009"));
}

#[test]
fn synth_output_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let x = std::fs::read(synth(a.path(), "50")).unwrap();
    let y = std::fs::read(synth(b.path(), "50")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&certsieve(&["frobnicate"])), 1);
    assert_eq!(code(&certsieve(&["eval", "--features"])), 1);
    assert_eq!(code(&certsieve(&["--help"])), 0);

    let missing = dir.path().join("missing.csv");
    assert_eq!(code(&certsieve(&["eval", "--features", p(&missing)])), 2);

    let csv = synth(dir.path(), "30");
    let text = std::fs::read_to_string(&csv).unwrap();
    let unlabeled = dir.path().join("unlabeled.csv");
    std::fs::write(&unlabeled, text.replace(",pos\n", ",\n")).unwrap();
    let o = certsieve(&["train", "--features", p(&unlabeled), "--model-out", p(&dir.path().join("m.json"))]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    let one_class = dir.path().join("one_class.csv");
    let kept: Vec<&str> = text.lines().filter(|l| !l.ends_with(",neg")).collect();
    std::fs::write(&one_class, kept.join("\n") + "\n").unwrap();
    let model = dir.path().join("never.json");
    let o = certsieve(&["train", "--features", p(&one_class), "--model-out", p(&model)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("degenerate"));
    assert!(!model.exists(), "no output on failure");

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"format\":\"certsieve-model\",\"vers").unwrap();
    let o = certsieve(&["classify", "--model", p(&broken), "--features", p(&csv)]);
    assert_eq!(code(&o), 3);
}

fn record(domain: &str, der: Vec<u8>) -> DomainRecord {
    DomainRecord {
        domain: domain.into(),
        http_ok: true,
        https_ok: true,
        harvest_time: 1_262_304_000,
        cert_der: Some(der),
        presented_chain_der: Some(vec![]),
        tls_error: None,
    }
}

fn write_corpus(path: &Path, records: &[DomainRecord]) {
    let mut w = CorpusWriter::create(path).unwrap();
    for r in records {
        w.append(r).unwrap();
    }
}

#[test]
fn extract_with_foreign_index_reports_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let a = CertBuilder::new("a.example").self_signed();
    let b = CertBuilder::new("b.example").serial("9").self_signed();
    let other_b = CertBuilder::new("b.example").serial("10").self_signed();
    let corpus = dir.path().join("corpus.ndjson");
    write_corpus(&corpus, &[record("a.example", a.der.clone()), record("b.example", b.der)]);
    let index = build_corpus_index(&[record("a.example", a.der), record("b.example", other_b.der)]);
    let index_path = dir.path().join("index.json");
    std::fs::write(&index_path, serde_json::to_string(&index).unwrap()).unwrap();

    let out = dir.path().join("features.csv");
    let o = certsieve(&["extract", "--corpus", p(&corpus), "--index", p(&index_path), "--out", p(&out)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("not part of the corpus index"), "{}", stderr(&o));
    assert!(!out.exists());

    let rebuilt = dir.path().join("rebuilt.json");
    let o = certsieve(&[
        "extract", "--corpus", p(&corpus), "--index-out", p(&rebuilt), "--out", p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = certsieve(&["extract", "--corpus", p(&corpus), "--index", p(&rebuilt)]);
    assert_eq!(code(&o), 0);
    assert_eq!(o.stdout, std::fs::read(&out).unwrap());
}

#[test]
fn full_pipeline_against_fixture_farm() {
    let dir = tempfile::tempdir().unwrap();
    let root = test_root("Pipeline Root", 3);
    let mut specs = Vec::new();
    let mut labels = String::from("domain,label\n");
    let mut domains = String::new();
    for i in 0..4 {
        let name = format!("shady{i}.farm.test");
        let cert = CertBuilder::new("localhost")
            .subject(&[("CN", "localhost"), ("O", "SomeOrganization")])
            .serial("1")
            .self_signed();
        specs.push((name.clone(), Behavior::Both, Some(cert), vec![]));
        labels.push_str(&format!("{name},pos\n"));
        domains.push_str(&format!("{name}\n"));
    }
    for i in 0..4 {
        let name = format!("shop{i}.farm.test");
        let cert = CertBuilder::new(&name).serial(&format!("{}", 5_000_000 + i)).signed_by(&root);
        specs.push((name.clone(), Behavior::HttpsOnly, Some(cert), vec![]));
        labels.push_str(&format!("{name},neg\n"));
        domains.push_str(&format!("{name}\n"));
    }
    specs.push(("plain.farm.test".into(), Behavior::HttpOnly, None, vec![]));
    domains.push_str("plain.farm.test\n");
    let farm = Farm::start(specs);

    let domains_file = dir.path().join("domains.txt");
    std::fs::write(&domains_file, domains).unwrap();
    let labels_file = dir.path().join("labels.csv");
    std::fs::write(&labels_file, labels).unwrap();
    let trust = dir.path().join("roots.pem");
    std::fs::write(&trust, root.pem()).unwrap();

    let corpus = dir.path().join("corpus.ndjson");
    let http_port = farm.http_port.to_string();
    let https_port = farm.https_port.to_string();
    let mut probe: Vec<String> = [
        "probe", "--domains", p(&domains_file), "--out", p(&corpus), "--concurrency", "3",
        "--http-port", &http_port, "--https-port", &https_port, "--connect-timeout-ms", "2000",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for (name, ip) in farm.resolutions() {
        probe.push("--resolve".into());
        probe.push(format!("{name}={ip}"));
    }
    let args: Vec<&str> = probe.iter().map(String::as_str).collect();
    let o = certsieve(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = String::from_utf8_lossy(&o.stdout);
    assert!(summary.contains("probe,11.1,44.4,44.4,0,9"), "{summary}");
    assert!(farm.stats.max_concurrent() <= 3);

    let features = dir.path().join("features.csv");
    let o = certsieve(&[
        "extract", "--corpus", p(&corpus), "--trust-store", p(&trust), "--labels", p(&labels_file),
        "--out", p(&features),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&features).unwrap();
    assert_eq!(text.lines().count(), 9);
    let shady = text.lines().find(|l| l.starts_with("shady0.")).unwrap();
    assert!(shady.starts_with("shady0.farm.test,0,1,1,1,1,1,1,0,"), "{shady}");

    let model = dir.path().join("model.json");
    let o = certsieve(&["train", "--features", p(&features), "--algo", "tree", "--model-out", p(&model)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let verdicts = dir.path().join("verdicts.csv");
    let o = certsieve(&[
        "classify", "--model", p(&model), "--corpus", p(&corpus), "--trust-store", p(&trust),
        "--out", p(&verdicts),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let verdicts = std::fs::read_to_string(&verdicts).unwrap();
    for line in verdicts.lines().skip(1) {
        let expect = if line.starts_with("shady") { ",pos," } else { ",neg," };
        assert!(line.contains(expect), "{line}");
    }

    let o = certsieve(&["report", "categories", "--corpus", &format!("farm={}", p(&corpus))]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("farm,11.1,44.4,44.4,0,9"));
}
