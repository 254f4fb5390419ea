use crate::error::CliError;
use crate::{
    ClassifyArgs, CertInputs, EvalArgs, ExtractArgs, ModelOptions, ProbeArgs, ReportArgs, ReportFormat, ReportKind,
    SynthArgs, TrainArgs,
};
use certsieve::cert::{load_trust_store, CertificateSummary};
use certsieve::corpus::{build_corpus_index, latest_per_domain, load_corpus, CorpusIndex, CorpusWriter};
use certsieve::features::csv::{read_features, write_features};
use certsieve::features::{extract_corpus, BogusValueList, ExtractContext, FeatureId, FeatureVector, Label};
use certsieve::harvest::{parse_domain_list, probe_corpus, CategoryCounts, DomainRecord, ProbeConfig};
use certsieve::ml::{
    cross_validate, load_model, render_model, train as train_model, Dataset, FeatureSchema, Hyperparameters,
    MaxFeatures, ModelKind,
};
use certsieve::report::{boolean_feature_table, category_table_csv, cdf_series, cdf_to_csv};
use certsieve::synthgen::{sample_corpus, shipped_spec, MarginalSpec};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use tempfile::NamedTempFile;

fn temp_beside(path: &Path) -> Result<NamedTempFile, CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir.display(), e))
}

fn persist(tmp: NamedTempFile, path: &Path) -> Result<(), CliError> {
    tmp.as_file().sync_all().map_err(|e| CliError::io(path.display(), e))?;
    tmp.persist(path).map_err(|e| CliError::io(path.display(), e.error))?;
    Ok(())
}

/// Writes via a temporary sibling file renamed into place on success.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = temp_beside(path)?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path.display(), e))?;
    persist(tmp, path)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io("stdout", e))
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))
}

fn read_feature_file(path: &Path) -> Result<Vec<FeatureVector>, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path.display(), e))?;
    read_features(f).map_err(|e| match e {
        certsieve::features::csv::CsvError::Format { line, message } => {
            CliError::Data(format!("{}: line {line}: {message}", path.display()))
        }
        other => other.into(),
    })
}

fn features_csv(rows: &[FeatureVector]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_features(&mut buf, rows).expect("writing to memory");
    buf
}

fn parse_pair<'a>(text: &'a str, what: &str) -> Result<(&'a str, &'a str), CliError> {
    text.split_once('=')
        .filter(|(k, v)| !k.is_empty() && !v.is_empty())
        .ok_or_else(|| CliError::Usage(format!("{what} must look like NAME=VALUE, got {text:?}")))
}

pub fn probe(a: ProbeArgs) -> Result<(), CliError> {
    let mut resolve = BTreeMap::new();
    for r in &a.resolve {
        let (name, ip) = parse_pair(r, "--resolve")?;
        let ip = ip
            .parse()
            .map_err(|_| CliError::Usage(format!("--resolve: bad address {ip:?}")))?;
        resolve.insert(name.to_ascii_lowercase(), ip);
    }
    let config = ProbeConfig {
        connect_timeout_ms: a.connect_timeout_ms,
        handshake_timeout_ms: a.handshake_timeout_ms,
        max_concurrency: a.concurrency,
        retries: a.retries,
        http_port: a.http_port,
        https_port: a.https_port,
        resolve,
    };
    config.validate()?;
    let domains = parse_domain_list(&read_text(&a.domains)?);

    let existing = if a.append && a.out.exists() {
        let loaded = load_corpus(&a.out)?;
        if loaded.dropped_partial_tail {
            log::warn!("{}: dropping unterminated final line", a.out.display());
        }
        loaded.records
    } else {
        Vec::new()
    };

    let mut slots: Vec<Option<DomainRecord>> = vec![None; domains.len()];
    let counts = probe_corpus(&domains, &config, |i, rec| slots[i] = Some(rec))?;

    let tmp = temp_beside(&a.out)?;
    let file = tmp.as_file().try_clone().map_err(|e| CliError::io(a.out.display(), e))?;
    let mut writer = CorpusWriter::from_file(file);
    for rec in existing.iter().chain(slots.iter().flatten()) {
        writer.append(rec)?;
    }
    writer.sync()?;
    drop(writer);
    persist(tmp, &a.out)?;
    log::info!("{} records written to {}", existing.len() + domains.len(), a.out.display());
    emit(None, category_table_csv(&[("probe", counts)]).as_bytes())
}

struct CertContext {
    trust: Vec<CertificateSummary>,
    bogus: BogusValueList,
}

fn cert_context(c: &CertInputs) -> Result<CertContext, CliError> {
    let trust = match &c.trust_store {
        Some(p) => load_trust_store(p)?,
        None => {
            log::warn!("no trust store given: every chain will fail verification (F5)");
            Vec::new()
        }
    };
    let bogus = match &c.bogus_list {
        Some(p) => BogusValueList::parse(&read_text(p)?)
            .ok_or_else(|| CliError::Data(format!("{}: bogus-value list is empty", p.display())))?,
        None => BogusValueList::default(),
    };
    Ok(CertContext { trust, bogus })
}

fn extract_rows(
    records: &[DomainRecord],
    index: &CorpusIndex,
    certs: &CertContext,
    c: &CertInputs,
) -> Result<Vec<FeatureVector>, CliError> {
    let ctx = ExtractContext {
        index,
        trust_store: &certs.trust,
        bogus: &certs.bogus,
        shingle: c.shingle,
    };
    Ok(extract_corpus(records, &ctx)?)
}

fn load_records(path: &Path) -> Result<Vec<DomainRecord>, CliError> {
    let loaded = load_corpus(path)?;
    if loaded.dropped_partial_tail {
        log::warn!("{}: ignoring unterminated final line", path.display());
    }
    Ok(loaded.records)
}

fn read_labels(path: &Path) -> Result<BTreeMap<String, Label>, CliError> {
    let mut out = BTreeMap::new();
    for (n, line) in read_text(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (n == 0 && line.eq_ignore_ascii_case("domain,label")) {
            continue;
        }
        let (d, l) = line
            .split_once(',')
            .ok_or_else(|| CliError::Data(format!("{}: line {}: expected domain,label", path.display(), n + 1)))?;
        let l: Label = l
            .parse()
            .map_err(|e| CliError::Data(format!("{}: line {}: {e}", path.display(), n + 1)))?;
        out.insert(d.trim().to_ascii_lowercase(), l);
    }
    Ok(out)
}

pub fn extract(a: ExtractArgs) -> Result<(), CliError> {
    let records = load_records(&a.corpus)?;
    let certs = cert_context(&a.certs)?;
    let index = match &a.index {
        Some(p) => serde_json::from_str(&read_text(p)?)
            .map_err(|e| CliError::Data(format!("{}: not a corpus index: {e}", p.display())))?,
        None => build_corpus_index(&records),
    };
    let mut rows = extract_rows(&records, &index, &certs, &a.certs)?;
    if let Some(l) = a.label {
        rows.iter_mut().for_each(|r| r.label = Some(l));
    }
    if let Some(p) = &a.labels {
        let labels = read_labels(p)?;
        for r in &mut rows {
            r.label = labels.get(&r.domain).copied();
            if r.label.is_none() {
                log::warn!("{}: no label in {}", r.domain, p.display());
            }
        }
    }
    if let Some(p) = &a.index_out {
        let json = serde_json::to_string(&index).expect("index serializes") + "\n";
        write_atomic(p, json.as_bytes())?;
    }
    log::info!("{} feature rows from {} records", rows.len(), records.len());
    emit(a.out.as_deref(), &features_csv(&rows))
}

fn model_settings(o: &ModelOptions) -> Result<(ModelKind, Hyperparameters, FeatureSchema), CliError> {
    let kind: ModelKind = o.algo.into();
    let mut hp = Hyperparameters::defaults_for(kind);
    let positive = |v: Option<usize>, name: &str| -> Result<Option<usize>, CliError> {
        match v {
            Some(0) => Err(CliError::Usage(format!("--{name} must be at least 1"))),
            other => Ok(other),
        }
    };
    if let Some(v) = positive(o.max_depth, "max-depth")? {
        hp.max_depth = v;
    }
    if let Some(v) = positive(o.min_leaf, "min-leaf")? {
        hp.min_leaf = v;
    }
    if let Some(v) = positive(o.trees, "trees")? {
        hp.n_trees = v;
    }
    if let Some(v) = positive(o.k, "k")? {
        hp.k = v;
    }
    if let Some(m) = &o.max_features {
        hp.max_features = match m.as_str() {
            "sqrt" => MaxFeatures::Sqrt,
            "all" => MaxFeatures::All,
            n => match n.parse::<usize>() {
                Ok(c) if c > 0 => MaxFeatures::Count(c),
                _ => return Err(CliError::Usage(format!("--max-features: expected a count, sqrt or all, got {n:?}"))),
            },
        };
    }
    let schema = match &o.include {
        None => FeatureSchema::default(),
        Some(list) => {
            let ids = list
                .split(',')
                .map(|s| s.trim().parse::<FeatureId>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Usage(format!("--include: {e}")))?;
            FeatureSchema::new(&ids).map_err(|e| CliError::Usage(format!("--include: {e}")))?
        }
    };
    Ok((kind, hp, schema))
}

fn dataset(path: &Path, schema: FeatureSchema) -> Result<Dataset, CliError> {
    Ok(Dataset::new(schema, read_feature_file(path)?)?)
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let (kind, hp, schema) = model_settings(&a.model)?;
    let ds = dataset(&a.features, schema)?;
    let model = train_model(&ds, kind, &hp, a.model.seed)?;
    write_atomic(&a.model_out, render_model(&model).as_bytes())?;
    let summary = format!(
        "trained {kind} on {} rows ({} pos, {} neg), seed {}, model written to {}\n",
        ds.len(),
        ds.count(Label::Pos),
        ds.count(Label::Neg),
        a.model.seed,
        a.model_out.display()
    );
    emit(None, summary.as_bytes())
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let (kind, hp, schema) = model_settings(&a.model)?;
    let ds = dataset(&a.features, schema)?;
    let report = cross_validate(&ds, a.cv, kind, &hp, a.model.seed)?;
    let text = match a.format {
        ReportFormat::Table => report.render_table(),
        ReportFormat::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    };
    emit(a.out.as_deref(), text.as_bytes())
}

pub fn classify(a: ClassifyArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let rows = match (&a.features, &a.corpus) {
        (Some(f), _) => read_feature_file(f)?,
        (None, Some(c)) => {
            let records = load_records(c)?;
            let certs = cert_context(&a.certs)?;
            extract_rows(&records, &build_corpus_index(&records), &certs, &a.certs)?
        }
        (None, None) => return Err(CliError::Usage("one of --features or --corpus is required".into())),
    };
    let preds = model.predict_all(&model.schema, &rows)?;
    let mut out = String::from("domain,label,score\n");
    for (r, p) in rows.iter().zip(preds) {
        let domain = if r.domain.contains([',', '"']) {
            format!("\"{}\"", r.domain.replace('"', "\"\""))
        } else {
            r.domain.clone()
        };
        out.push_str(&format!("{domain},{},{:.6}\n", p.label, p.score));
    }
    emit(a.out.as_deref(), out.as_bytes())
}

pub fn report(a: ReportArgs) -> Result<(), CliError> {
    match a.kind {
        ReportKind::Table { datasets, out } => {
            let mut loaded = Vec::new();
            for d in &datasets {
                let (name, path) = parse_pair(d, "--dataset")?;
                loaded.push((name.to_string(), read_feature_file(Path::new(path))?));
            }
            let named: Vec<(&str, &[FeatureVector])> = loaded.iter().map(|(n, r)| (n.as_str(), r.as_slice())).collect();
            emit(out.as_deref(), boolean_feature_table(&named).to_csv().as_bytes())
        }
        ReportKind::Cdf {
            features,
            feature,
            label,
            out,
        } => {
            if !feature.kind().is_numeric() {
                return Err(CliError::Usage(format!("{feature} is not numeric")));
            }
            let values: Vec<f64> = read_feature_file(&features)?
                .iter()
                .filter(|r| label.is_none() || r.label == label)
                .map(|r| r.value(feature).as_f64().expect("numeric"))
                .collect();
            emit(out.as_deref(), cdf_to_csv(&cdf_series(&values)?).as_bytes())
        }
        ReportKind::Categories { corpora, out } => {
            let mut counts = Vec::new();
            for c in &corpora {
                let (name, path) = parse_pair(c, "--corpus")?;
                let records = load_records(Path::new(path))?;
                counts.push((name.to_string(), CategoryCounts::from_records(latest_per_domain(&records))));
            }
            let named: Vec<(&str, CategoryCounts)> = counts.iter().map(|(n, c)| (n.as_str(), *c)).collect();
            emit(out.as_deref(), category_table_csv(&named).as_bytes())
        }
    }
}

fn resolve_spec(arg: &str) -> Result<MarginalSpec, CliError> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(MarginalSpec::parse(&read_text(path)?)?);
    }
    shipped_spec(arg).ok_or_else(|| {
        let names: Vec<&str> = certsieve::synthgen::shipped_spec_names().collect();
        CliError::Usage(format!(
            "{arg:?} is neither a spec file nor a shipped spec ({})",
            names.join(", ")
        ))
    })
}

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let pos = resolve_spec(&a.pos_spec)?;
    let neg = resolve_spec(&a.neg_spec)?;
    let ds = sample_corpus(&pos, &neg, a.n, a.seed)?;
    eprintln!("seed {}", a.seed);
    emit(a.out.as_deref(), &features_csv(ds.rows()))
}
