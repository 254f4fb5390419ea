//! Acceptance criteria 1–9. Runs as a plain binary and prints one line per
//! criterion; exits non-zero if any criterion fails.

use certsieve::cert::{parse_certificate, CertificateSummary};
use certsieve::corpus::{build_corpus_index, load_corpus, read_corpus, CorpusWriter};
use certsieve::features::{
    extract_corpus, jaccard_with, BogusValueList, ExtractContext, FeatureId, FeatureVector, Label, Shingle,
};
use certsieve::harvest::{probe_corpus, Category, DomainRecord, ProbeConfig};
use certsieve::ml::{
    cross_validate, parse_model, render_model, stratified_folds, train, Confusion, Dataset, FeatureSchema,
    Hyperparameters, MlError, ModelKind,
};
use certsieve::report::boolean_feature_table;
use certsieve::synthgen::{bayes_optimal_accuracy, sample_corpus, shipped_spec};
use certsieve_fixtures::{test_root, Behavior, CertBuilder, Digest, Farm, Fixture, KeyKind, BASE_TIME, DAY};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

/// Exhaustive 2^7 enumeration over the phishing and Alexa boolean marginals,
/// computed independently before the build.
const PHISHING_ALEXA_ORACLE: f64 = 0.7378404970848406;

const BOOLEAN_SEVEN: [FeatureId; 7] = [
    FeatureId::F1,
    FeatureId::F2,
    FeatureId::F3,
    FeatureId::F4,
    FeatureId::F6,
    FeatureId::F7,
    FeatureId::F8,
];

type Criterion = fn() -> String;

fn main() {
    let criteria: [(u32, &str, Criterion, Option<Duration>); 9] = [
        (1, "feature extraction oracle", c1_extraction, Some(Duration::from_secs(10))),
        (2, "jaccard oracle", c2_jaccard, None),
        (3, "corpus duplicate oracle", c3_duplicates, None),
        (4, "cross-validation correctness", c4_cv, None),
        (5, "separable data sanity", c5_separable, Some(Duration::from_secs(30))),
        (6, "oracle-relative forest quality", c6_forest, Some(Duration::from_secs(120))),
        (7, "distribution round-trip", c7_table, None),
        (8, "harvest fidelity", c8_harvest, None),
        (9, "persistence round-trips", c9_persistence, None),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, title, run, limit) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let verdict = match result {
            Ok(_) if limit.is_some_and(|l| elapsed > l) => {
                Err(format!("took {elapsed:.2?}, limit {:?}", limit.unwrap()))
            }
            Ok(detail) => Ok(detail),
            Err(e) => Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        match verdict {
            Ok(detail) => println!("criterion {n} ({title}): PASS [{elapsed:.2?}] {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} ({title}): FAIL [{elapsed:.2?}] {why}");
            }
        }
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- 1

struct Case {
    domain: &'static str,
    cert: Fixture,
    chain: Vec<Fixture>,
    expect: FeatureVector,
}

fn expected(domain: &str, f: impl FnOnce(&mut FeatureVector)) -> FeatureVector {
    let mut v = FeatureVector::blank(domain);
    f(&mut v);
    v
}

fn c1_extraction() -> String {
    let harvest = BASE_TIME + 30 * DAY;
    let root = test_root("Acceptance Root", 1);
    let ca_subject = [("CN", "Acceptance CA"), ("O", "Acceptance Issuing"), ("C", "ZA")];
    let ca = CertBuilder::new("")
        .subject(&ca_subject)
        .serial("77")
        .validity(BASE_TIME - 3650 * DAY, BASE_TIME + 3650 * DAY)
        .key(KeyKind::Rsa, 2)
        .signed_by(&root);
    let stranger = test_root("Other Root", 4);

    let ca_issued = |v: &mut FeatureVector| {
        v.f9_issuer_cn = "Acceptance CA".into();
        v.f10_issuer_org = "Acceptance Issuing".into();
        v.f11_issuer_country = "ZA".into();
    };
    let own_issuer = |v: &mut FeatureVector, cn: &str| {
        v.f9_issuer_cn = cn.into();
        v.f3_self_signed = true;
        v.f5_verification_failed = true;
    };
    let twin = CertBuilder::new("twin.test").serial("5555").signed_by(&ca);

    let cases = vec![
        Case {
            domain: "good.test",
            cert: CertBuilder::new("good.test").serial("123456789").signed_by(&ca),
            chain: vec![ca.clone()],
            expect: expected("good.test", |v| {
                ca_issued(v);
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 9;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "md5.test",
            cert: CertBuilder::new("md5.test").serial("2001").digest(Digest::Md5).signed_by(&ca),
            chain: vec![ca.clone()],
            expect: expected("md5.test", |v| {
                ca_issued(v);
                v.f1_md5 = true;
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "sha1.test",
            cert: CertBuilder::new("sha1.test").serial("2002").digest(Digest::Sha1).signed_by(&ca),
            chain: vec![ca.clone()],
            expect: expected("sha1.test", |v| {
                ca_issued(v);
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "self.test",
            cert: CertBuilder::new("self.test").serial("3001").self_signed(),
            chain: vec![],
            expect: expected("self.test", |v| {
                own_issuer(v, "self.test");
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "expired.test",
            cert: CertBuilder::new("expired.test")
                .serial("3003")
                .validity(BASE_TIME - 400 * DAY, BASE_TIME - 35 * DAY)
                .signed_by(&ca),
            chain: vec![ca.clone()],
            expect: expected("expired.test", |v| {
                ca_issued(v);
                v.f4_expired = true;
                v.f5_verification_failed = true;
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "notyet.test",
            cert: CertBuilder::new("notyet.test")
                .serial("3004")
                .validity(BASE_TIME + 60 * DAY, BASE_TIME + 425 * DAY)
                .signed_by(&ca),
            chain: vec![ca.clone()],
            expect: expected("notyet.test", |v| {
                ca_issued(v);
                v.f5_verification_failed = true;
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "bogus-o.test",
            cert: CertBuilder::new("bogus-o.test")
                .entry("O", "SomeOrganization")
                .serial("3005")
                .signed_by(&ca),
            chain: vec![ca.clone()],
            expect: expected("bogus-o.test", |v| {
                ca_issued(v);
                v.f2_bogus_subject = true;
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "bogus-st.test",
            cert: CertBuilder::new("bogus-st.test")
                .entry("ST", "Some-State")
                .entry("C", "AU")
                .serial("3006")
                .signed_by(&ca),
            chain: vec![ca.clone()],
            expect: expected("bogus-st.test", |v| {
                ca_issued(v);
                v.f2_bogus_subject = true;
                v.f12_subject_country = "AU".into();
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "localhost.test",
            cert: CertBuilder::new("localhost").serial("3007").self_signed(),
            chain: vec![],
            expect: expected("localhost.test", |v| {
                own_issuer(v, "localhost");
                v.f2_bogus_subject = true;
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 2.0 / 3.0;
            }),
        },
        Case {
            domain: "long.test",
            cert: CertBuilder::new("long.test").serial("3008").validity_days(1096).signed_by(&ca),
            chain: vec![ca.clone()],
            expect: expected("long.test", |v| {
                ca_issued(v);
                v.f8_validity_gt_3y = true;
                v.f13_validity_days = 1096;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "exact3y.test",
            cert: CertBuilder::new("exact3y.test").serial("3009").validity_days(1095).signed_by(&ca),
            chain: vec![ca.clone()],
            expect: expected("exact3y.test", |v| {
                ca_issued(v);
                v.f13_validity_days = 1095;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "decade.test",
            cert: CertBuilder::new("decade.test").serial("3010").validity_days(3650).self_signed(),
            chain: vec![],
            expect: expected("decade.test", |v| {
                own_issuer(v, "decade.test");
                v.f8_validity_gt_3y = true;
                v.f13_validity_days = 3650;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "twin-a.test",
            cert: twin.clone(),
            chain: vec![ca.clone()],
            expect: expected("twin-a.test", |v| {
                ca_issued(v);
                v.f6_common_certificate = true;
                v.f7_common_serial = true;
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 7.0 / 11.0;
            }),
        },
        Case {
            domain: "twin-b.test",
            cert: twin,
            chain: vec![ca.clone()],
            expect: expected("twin-b.test", |v| {
                ca_issued(v);
                v.f6_common_certificate = true;
                v.f7_common_serial = true;
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 7.0 / 11.0;
            }),
        },
        Case {
            domain: "sa.test",
            cert: CertBuilder::new("alpha.test").serial("4242").signed_by(&ca),
            chain: vec![ca.clone()],
            expect: expected("sa.test", |v| {
                ca_issued(v);
                v.f7_common_serial = true;
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 0.5;
            }),
        },
        Case {
            domain: "sb.test",
            cert: CertBuilder::new("beta.test").serial("4242").signed_by(&ca),
            chain: vec![ca.clone()],
            expect: expected("sb.test", |v| {
                ca_issued(v);
                v.f7_common_serial = true;
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 0.4;
            }),
        },
        Case {
            domain: "untrusted.test",
            cert: CertBuilder::new("untrusted.test").serial("3011").signed_by(&stranger),
            chain: vec![stranger.clone()],
            expect: expected("untrusted.test", |v| {
                v.f5_verification_failed = true;
                v.f9_issuer_cn = "Other Root".into();
                v.f10_issuer_org = "Fixture Trust".into();
                v.f11_issuer_country = "US".into();
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "forged.test",
            cert: CertBuilder::new("forged.test").serial("3012").claiming_issuer(&ca_subject),
            chain: vec![ca.clone()],
            expect: expected("forged.test", |v| {
                ca_issued(v);
                v.f5_verification_failed = true;
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "nochain.test",
            cert: CertBuilder::new("nochain.test").serial("3013").signed_by(&ca),
            chain: vec![],
            expect: expected("nochain.test", |v| {
                ca_issued(v);
                v.f5_verification_failed = true;
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "direct.test",
            cert: CertBuilder::new("direct.test").serial("3014").signed_by(&root),
            chain: vec![],
            expect: expected("direct.test", |v| {
                v.f9_issuer_cn = "Acceptance Root".into();
                v.f10_issuer_org = "Fixture Trust".into();
                v.f11_issuer_country = "US".into();
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "bank.com",
            cert: CertBuilder::new("banc.com").serial("3015").signed_by(&ca),
            chain: vec![ca.clone()],
            expect: expected("bank.com", |v| {
                ca_issued(v);
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 5.0 / 9.0;
            }),
        },
        Case {
            domain: "ec.test",
            cert: CertBuilder::new("ec.test")
                .serial("123456789012345678901234567890123456789")
                .key(KeyKind::EcP256, 0)
                .signed_by(&ca),
            chain: vec![ca.clone()],
            expect: expected("ec.test", |v| {
                ca_issued(v);
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 39;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "neg.test",
            cert: CertBuilder::new("neg.test").serial("-123456").self_signed(),
            chain: vec![],
            expect: expected("neg.test", |v| {
                own_issuer(v, "neg.test");
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 6;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "www.wild.test",
            cert: CertBuilder::new("*.wild.test").serial("3016").signed_by(&ca),
            chain: vec![ca.clone()],
            expect: expected("www.wild.test", |v| {
                ca_issued(v);
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0;
            }),
        },
        Case {
            domain: "empty.test",
            cert: CertBuilder::empty_subject().serial("3017").signed_by(&ca),
            chain: vec![ca.clone()],
            expect: expected("empty.test", |v| {
                ca_issued(v);
                v.f13_validity_days = 365;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0 / 15.0;
            }),
        },
        Case {
            domain: "combo.test",
            cert: CertBuilder::new("combo.test")
                .entry("O", "Internet Widgits Pty Ltd")
                .entry("C", "US")
                .serial("3018")
                .digest(Digest::Md5)
                .validity(BASE_TIME - 800 * DAY, BASE_TIME - 70 * DAY)
                .self_signed(),
            chain: vec![],
            expect: expected("combo.test", |v| {
                own_issuer(v, "combo.test");
                v.f1_md5 = true;
                v.f2_bogus_subject = true;
                v.f4_expired = true;
                v.f10_issuer_org = "Internet Widgits Pty Ltd".into();
                v.f11_issuer_country = "US".into();
                v.f12_subject_country = "US".into();
                v.f13_validity_days = 730;
                v.f14_serial_digit_count = 4;
                v.f15_name_similarity = 1.0;
            }),
        },
    ];
    assert!(cases.len() >= 20);

    let records: Vec<DomainRecord> = cases
        .iter()
        .map(|c| DomainRecord {
            domain: c.domain.into(),
            http_ok: true,
            https_ok: true,
            harvest_time: harvest,
            cert_der: Some(c.cert.der.clone()),
            presented_chain_der: Some(c.chain.iter().map(|f| f.der.clone()).collect()),
            tls_error: None,
        })
        .collect();
    let index = build_corpus_index(&records);
    let trust: Vec<CertificateSummary> = vec![parse_certificate(&root.der).unwrap()];
    let bogus = BogusValueList::default();
    let ctx = ExtractContext {
        index: &index,
        trust_store: &trust,
        bogus: &bogus,
        shingle: Shingle::Bigram,
    };
    let got = extract_corpus(&records, &ctx).unwrap();
    assert_eq!(got.len(), cases.len());
    for (case, v) in cases.iter().zip(&got) {
        assert_eq!(v, &case.expect, "{}", case.domain);
        assert!(v.check_invariants().is_ok(), "{}", case.domain);
    }
    format!("{} fixture certificates matched exactly", cases.len())
}

// ---------------------------------------------------------------- 2

/// Shingles as a sorted, deduplicated vector of char windows.
fn oracle_shingles(s: &str, n: usize) -> Vec<Vec<char>> {
    let chars: Vec<char> = s.chars().collect();
    let w = if chars.len() < n { 1 } else { n };
    let mut out: Vec<Vec<char>> = if chars.is_empty() {
        Vec::new()
    } else {
        (0..=chars.len() - w).map(|i| chars[i..i + w].to_vec()).collect()
    };
    out.sort();
    out.dedup();
    out
}

fn oracle_jaccard(a: &str, b: &str, n: usize) -> f64 {
    let sa = oracle_shingles(a, n);
    let sb = oracle_shingles(b, n);
    let inter = sa.iter().filter(|x| sb.contains(x)).count();
    let union = sa.len() + sb.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn random_name(rng: &mut ChaCha8Rng) -> String {
    const ALPHABET: &[char] = &['a', 'b', 'c', 'd', 'e', 'k', 'n', 'p', '.', '-', '0', '1', 'é', 'ß'];
    let len = rng.random_range(0..16);
    (0..len).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())]).collect()
}

fn c2_jaccard() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    for i in 0..1000 {
        let a = random_name(&mut rng);
        let b = if i % 10 == 0 { a.clone() } else { random_name(&mut rng) };
        for shingle in [Shingle::Unigram, Shingle::Bigram, Shingle::Trigram] {
            let got = jaccard_with(&a, &b, shingle);
            let want = oracle_jaccard(&a, &b, shingle.width());
            assert_eq!(got.to_bits(), want.to_bits(), "J({a:?}, {b:?}) width {}", shingle.width());
            checked += 1;
        }
    }
    for x in ["paypal.com", "a", "", "żółw.pl"] {
        assert_eq!(jaccard_with(x, x, Shingle::Bigram), 1.0);
    }
    assert_eq!(jaccard_with("abcd.com", "xyz-net", Shingle::Bigram), 0.0);
    assert_eq!(jaccard_with("bank.com", "banc.com", Shingle::Bigram), 5.0 / 9.0);
    format!("{checked} comparisons bit-identical")
}

// ---------------------------------------------------------------- 3

fn c3_duplicates() -> String {
    // 48 distinct certificates over 12 serials, so serial collisions
    // between different certificates are common.
    let pool: Vec<(Fixture, u32)> = (0..48)
        .map(|i| {
            let serial = 900 + (i % 12) as u32;
            let cert = CertBuilder::new(&format!("pool{i}.test"))
                .serial(&serial.to_string())
                .key(KeyKind::EcP256, i % 3)
                .self_signed();
            (cert, serial)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut total_f6 = 0;
    let mut total_f7 = 0;
    for corpus in 0..100 {
        let n = rng.random_range(1..=300);
        let domains = rng.random_range(1..=n.min(200));
        let picks: Vec<(usize, Option<usize>, i64)> = (0..n)
            .map(|_| {
                let d = rng.random_range(0..domains);
                let cert = (!rng.random_bool(0.15)).then(|| rng.random_range(0..pool.len()));
                (d, cert, rng.random_range(0..5))
            })
            .collect();
        let records: Vec<DomainRecord> = picks
            .iter()
            .map(|&(d, c, t)| DomainRecord {
                domain: format!("d{d}.corpus{corpus}.test"),
                http_ok: true,
                https_ok: c.is_some(),
                harvest_time: BASE_TIME + t,
                cert_der: c.map(|c| pool[c].0.der.clone()),
                presented_chain_der: c.map(|_| Vec::new()),
                tls_error: None,
            })
            .collect();

        // Oracle: the latest record per domain (later wins ties), then all pairs.
        let mut latest: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, &(d, _, t)) in picks.iter().enumerate() {
            match latest.get(&d) {
                Some(&j) if picks[j].2 > t => {}
                _ => {
                    latest.insert(d, i);
                }
            }
        }
        let live: Vec<(usize, usize)> = latest
            .iter()
            .filter_map(|(&d, &i)| picks[i].1.map(|c| (d, c)))
            .collect();
        let index = build_corpus_index(&records);
        let (mut f6n, mut f7n) = (0, 0);
        for &(d, c) in &live {
            let mut f6 = false;
            let mut f7 = false;
            for &(d2, c2) in &live {
                if d2 == d {
                    continue;
                }
                f6 |= pool[c2].0.der == pool[c].0.der;
                f7 |= pool[c2].1 == pool[c].1;
            }
            let fp = certsieve::cert::fingerprint(&pool[c].0.der);
            let got = index.duplicate_flags(&format!("d{d}.corpus{corpus}.test"), &fp).unwrap();
            assert_eq!(got, (f6, f7), "corpus {corpus}, domain d{d}");
            f6n += f6 as usize;
            f7n += f7 as usize;
        }
        assert!(f7n >= f6n, "corpus {corpus}: F7 {f7n} < F6 {f6n}");
        total_f6 += f6n;
        total_f7 += f7n;
    }
    format!("100 corpora agree with the pairwise oracle; F6 {total_f6}, F7 {total_f7}")
}

// ---------------------------------------------------------------- 4

fn c4_cv() -> String {
    let mut runs = 0;
    for (n, k, seed) in [(40, 10, 1u64), (73, 5, 2), (120, 10, 3), (25, 2, 4)] {
        let p = shipped_spec("typosquatting").unwrap();
        let a = shipped_spec("alexa").unwrap();
        let mut rows = sample_corpus(&p, &a, n, seed).unwrap().into_rows();
        // Unbalance the classes a little.
        rows.truncate(2 * n - n / 4);
        let ds = Dataset::new(FeatureSchema::default(), rows).unwrap();
        let labels: Vec<Label> = (0..ds.len()).map(|i| ds.label(i)).collect();
        let folds = stratified_folds(&labels, k, seed).unwrap();
        let mut seen = vec![0; ds.len()];
        for f in &folds {
            for &i in f {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1), "folds not a partition");
        for class in [Label::Pos, Label::Neg] {
            let sizes: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| labels[i] == class).count()).collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }

        for kind in ModelKind::ALL {
            let r = cross_validate(&ds, k, kind, &Hyperparameters::defaults_for(kind), seed).unwrap();
            let ids: BTreeSet<&str> = r.predictions.iter().map(|p| p.domain.as_str()).collect();
            let want: BTreeSet<&str> = ds.rows().iter().map(|r| r.domain.as_str()).collect();
            assert_eq!(ids, want);
            assert_eq!(r.predictions.len(), ds.len());
            let mut per_fold = vec![Confusion::default(); k];
            let mut class_sizes = vec![[0usize; 2]; k];
            for p in &r.predictions {
                per_fold[p.fold].record(p.truth, p.predicted);
                class_sizes[p.fold][p.truth.is_positive() as usize] += 1;
                assert_eq!(p.predicted == Label::Pos, p.score >= 0.5);
            }
            for c in 0..2 {
                let s: Vec<usize> = class_sizes.iter().map(|x| x[c]).collect();
                assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
            }
            assert_eq!(per_fold, r.per_fold);
            let c = r.confusion;
            let total: u64 = per_fold.iter().map(|f| f.total()).sum();
            assert_eq!(c.total(), total);
            let ratio = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
            assert_eq!(r.pos_recall.0, ratio(c.tp, c.tp + c.fn_));
            assert_eq!(r.pos_precision.0, ratio(c.tp, c.tp + c.fp));
            assert_eq!(r.neg_recall.0, ratio(c.tn, c.tn + c.fp));
            assert_eq!(r.neg_precision.0, ratio(c.tn, c.tn + c.fn_));
            runs += 1;
        }
    }
    format!("{runs} cross-validation runs checked against per-row predictions")
}

// ---------------------------------------------------------------- 5

fn c5_separable() -> String {
    // Rows drawn from the Alexa marginals, labeled by the rule, first 1000 of
    // each class kept.
    let noise = shipped_spec("alexa").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rows = Vec::with_capacity(2000);
    let (mut pos, mut neg) = (0, 0);
    let mut i = 0;
    while pos < 1000 || neg < 1000 {
        let mut v = noise.sample_row(format!("row{i:06}.test"), &mut rng);
        i += 1;
        let positive = v.f3_self_signed && v.f4_expired;
        let slot = if positive { &mut pos } else { &mut neg };
        if *slot == 1000 {
            continue;
        }
        *slot += 1;
        v.label = Some(if positive { Label::Pos } else { Label::Neg });
        rows.push(v);
    }
    let ds = Dataset::new(FeatureSchema::default(), rows).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for kind in ModelKind::ALL {
        let r = cross_validate(&ds, 10, kind, &Hyperparameters::defaults_for(kind), 5).unwrap();
        let acc = r.accuracy().0.unwrap();
        ok &= acc >= 0.99;
        parts.push(format!("{kind} {acc:.4}"));
    }
    let summary = parts.join(", ");
    assert!(ok, "below 0.99: {summary}");
    summary
}

// ---------------------------------------------------------------- 6

fn c6_forest() -> String {
    let p = shipped_spec("phishing").unwrap();
    let a = shipped_spec("alexa").unwrap();
    let oracle = bayes_optimal_accuracy(&p, &a, &BOOLEAN_SEVEN).unwrap();
    assert!((oracle - PHISHING_ALEXA_ORACLE).abs() < 1e-12, "oracle drifted: {oracle}");
    let schema = FeatureSchema::new(&BOOLEAN_SEVEN).unwrap();
    let ds = sample_corpus(&p, &a, 5000, 6).unwrap().with_schema(schema);
    let r = cross_validate(&ds, 10, ModelKind::Forest, &Hyperparameters::defaults_for(ModelKind::Forest), 6).unwrap();
    let acc = r.accuracy().0.unwrap();
    let (lo, hi) = (PHISHING_ALEXA_ORACLE - 0.03, PHISHING_ALEXA_ORACLE + 0.02);
    assert!((lo..=hi).contains(&acc), "forest accuracy {acc} outside [{lo:.4}, {hi:.4}]");
    format!("forest accuracy {acc:.4}, oracle {PHISHING_ALEXA_ORACLE:.4}")
}

// ---------------------------------------------------------------- 7

fn c7_table() -> String {
    // Published percent of certificates with each feature (F1–F8).
    let table: [(&str, [f64; 8]); 5] = [
        ("alexa", [19., 11., 28., 21., 29., 33., 38., 17.]),
        ("com", [24., 7., 24., 25., 40., 60., 64., 14.]),
        ("net", [22., 8., 27., 22., 37., 64., 68., 17.]),
        ("phishing", [35., 20., 36., 26., 36., 72., 75., 13.]),
        ("typosquatting", [26., 29., 53., 43., 70., 95., 96., 19.]),
    ];
    let mut worst: f64 = 0.0;
    let mut samples = Vec::new();
    for (i, (name, _)) in table.iter().enumerate() {
        let spec = shipped_spec(name).unwrap();
        let rows: Vec<FeatureVector> = sample_corpus(&spec, &spec, 100_000, 70 + i as u64)
            .unwrap()
            .into_rows()
            .into_iter()
            .filter(|r| r.label == Some(Label::Pos))
            .collect();
        samples.push((name.to_string(), rows));
    }
    let named: Vec<(&str, &[FeatureVector])> = samples.iter().map(|(n, r)| (n.as_str(), r.as_slice())).collect();
    let t = boolean_feature_table(&named);
    for (col, (name, want)) in table.iter().enumerate() {
        assert_eq!(t.columns[col], (name.to_string(), 100_000));
        for (row, (f, cells)) in t.rows.iter().enumerate() {
            let got = cells[col].unwrap();
            let diff = (got - want[row]).abs();
            worst = worst.max(diff);
            assert!(diff <= 0.5, "{name} {f}: {got:.2}% vs {}%", want[row]);
        }
    }
    format!("40 cells within ±0.5 points (worst {worst:.3})")
}

// ---------------------------------------------------------------- 8

fn c8_harvest() -> String {
    let root = test_root("Harvest Root", 5);
    let inter = CertBuilder::new("Harvest CA").serial("31").signed_by(&root);
    let mut specs = Vec::new();
    let mut expect = BTreeMap::new();
    for i in 0..16 {
        let name = format!("h{i:02}.farm.test");
        let behavior = [Behavior::Both, Behavior::HttpsOnly, Behavior::HttpOnly, Behavior::Dead][i % 4];
        let leaf = matches!(behavior, Behavior::Both | Behavior::HttpsOnly).then(|| {
            let b = CertBuilder::new(&name).serial(&(6000 + i).to_string());
            if i % 8 == 0 {
                b.digest(Digest::Md5).self_signed()
            } else {
                b.signed_by(&inter)
            }
        });
        let chain = if leaf.is_some() && i % 8 != 0 { vec![inter.clone()] } else { vec![] };
        let category = match behavior {
            Behavior::Both => Category::Both,
            Behavior::HttpsOnly => Category::HttpsOnly,
            Behavior::HttpOnly => Category::HttpOnly,
            _ => Category::Neither,
        };
        expect.insert(name.clone(), (category, leaf.as_ref().map(|l| l.der.clone()), chain.len()));
        specs.push((name, behavior, leaf, chain));
    }
    let farm = Farm::start(specs);
    let domains: Vec<String> = expect.keys().cloned().collect();
    let mut peaks = Vec::new();
    for limit in [1usize, 2, 5] {
        let before = farm.stats.total();
        let cfg = ProbeConfig {
            connect_timeout_ms: 2_000,
            handshake_timeout_ms: 4_000,
            max_concurrency: limit,
            retries: 1,
            http_port: farm.http_port,
            https_port: farm.https_port,
            resolve: farm.resolutions().into_iter().collect(),
        };
        let mut got = Vec::new();
        let counts = probe_corpus(&domains, &cfg, |i, r| got.push((i, r))).unwrap();
        assert_eq!((counts.both, counts.https_only, counts.http_only, counts.neither), (4, 4, 4, 4));
        assert_eq!(got.len(), domains.len());
        for (i, r) in &got {
            let (category, der, chain_len) = &expect[&domains[*i]];
            assert_eq!(&r.domain, &domains[*i]);
            assert_eq!(r.category(), *category, "{}", r.domain);
            assert_eq!(&r.cert_der, der, "{}: harvested certificate differs", r.domain);
            assert_eq!(r.presented_chain_der.as_ref().map_or(0, Vec::len), *chain_len);
        }
        let peak = farm.stats.max_concurrent();
        assert!(peak <= limit, "limit {limit} exceeded: {peak} concurrent connections");
        assert!(farm.stats.total() > before);
        peaks.push(format!("limit {limit} peak {peak}"));
        farm.stats.reset_peak();
    }
    format!("16 domains, 4 categories, certificates byte-identical; {}", peaks.join(", "))
}

// ---------------------------------------------------------------- 9

fn c9_persistence() -> String {
    let dir = tempfile::tempdir().unwrap();
    let leaf = CertBuilder::new("persist.test").serial("-42").self_signed();
    let inter = test_root("Persist Root", 1);
    let records = vec![
        DomainRecord {
            domain: "persist.test".into(),
            http_ok: true,
            https_ok: true,
            harvest_time: BASE_TIME,
            cert_der: Some(leaf.der.clone()),
            presented_chain_der: Some(vec![inter.der.clone()]),
            tls_error: None,
        },
        DomainRecord {
            domain: "broken.test".into(),
            http_ok: false,
            https_ok: true,
            harvest_time: BASE_TIME + 1,
            cert_der: Some(leaf.der.clone()),
            presented_chain_der: Some(vec![]),
            tls_error: Some("handshake failure".into()),
        },
        DomainRecord {
            domain: "plain.test".into(),
            http_ok: true,
            https_ok: false,
            harvest_time: BASE_TIME + 2,
            cert_der: None,
            presented_chain_der: None,
            tls_error: None,
        },
    ];
    let path = dir.path().join("corpus.ndjson");
    let mut w = CorpusWriter::create(&path).unwrap();
    for r in &records {
        w.append(r).unwrap();
    }
    drop(w);
    let loaded = load_corpus(&path).unwrap();
    assert_eq!(loaded.records, records);
    assert!(!loaded.dropped_partial_tail);

    // Simulate a crash halfway through a line.
    let intact = std::fs::read(&path).unwrap();
    let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
    f.write_all(b"{\"domain\":\"half.test\",\"http_o").unwrap();
    drop(f);
    let loaded = load_corpus(&path).unwrap();
    assert!(loaded.dropped_partial_tail);
    assert_eq!(loaded.records, records);
    let mut w = CorpusWriter::open_append(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), intact, "prior data changed");
    let extra = DomainRecord {
        domain: "later.test".into(),
        harvest_time: BASE_TIME + 3,
        ..records[2].clone()
    };
    w.append(&extra).unwrap();
    drop(w);
    let reread = read_corpus(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(reread.records.len(), 4);
    assert_eq!(&reread.records[..3], &records[..]);
    assert_eq!(reread.records[3], extra);

    // Models: every kind reloads identical and predicts identically.
    let p = shipped_spec("phishing").unwrap();
    let a = shipped_spec("alexa").unwrap();
    let ds = sample_corpus(&p, &a, 300, 9).unwrap();
    let probes = sample_corpus(&p, &a, 500, 10).unwrap();
    for kind in ModelKind::ALL {
        let m = train(&ds, kind, &Hyperparameters::defaults_for(kind), 9).unwrap();
        let text = render_model(&m);
        let model_path = dir.path().join(format!("{kind}.json"));
        certsieve::ml::save_model(&m, &model_path).unwrap();
        let back = certsieve::ml::load_model(&model_path).unwrap();
        assert_eq!(back, m, "{kind}");
        for v in probes.rows() {
            assert_eq!(back.predict_unchecked(v), m.predict_unchecked(v));
        }
        let cut = &text[..text.len() * 2 / 3];
        std::fs::write(dir.path().join("cut.json"), cut).unwrap();
        assert!(matches!(
            certsieve::ml::load_model(&dir.path().join("cut.json")),
            Err(MlError::CorruptModel(_))
        ));
        assert!(matches!(
            parse_model(&text.replacen("\"version\":1", "\"version\":7", 1)),
            Err(MlError::VersionMismatch { .. })
        ));
        assert_eq!(certsieve::ml::load_model(&model_path).unwrap(), m);
    }
    "corpus and all four model kinds round-trip; truncation detected".into()
}
