use super::dataset::Encoded;
use super::{fit_rows, structure_score, Dataset, Hyperparameters, MlError, ModelKind, Prediction};
use crate::features::Label;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// A ratio that may be undefined (zero denominator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric(pub Option<f64>);

impl Metric {
    fn ratio(num: u64, den: u64) -> Metric {
        Metric((den > 0).then(|| num as f64 / den as f64))
    }

    pub fn value(self) -> Option<f64> {
        self.0
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v:.4}"),
            None => f.write_str("undefined"),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => s.serialize_f64(v),
            None => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Metric(Some(v))),
            Raw::Text(t) if t == "undefined" => Ok(Metric(None)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad metric {t:?}"))),
        }
    }
}

impl Confusion {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Pos, Label::Pos) => self.tp += 1,
            (Label::Pos, Label::Neg) => self.fn_ += 1,
            (Label::Neg, Label::Neg) => self.tn += 1,
            (Label::Neg, Label::Pos) => self.fp += 1,
        }
    }

    pub fn add(&mut self, o: &Confusion) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn pos_recall(&self) -> Metric {
        Metric::ratio(self.tp, self.tp + self.fn_)
    }

    pub fn pos_precision(&self) -> Metric {
        Metric::ratio(self.tp, self.tp + self.fp)
    }

    pub fn neg_recall(&self) -> Metric {
        Metric::ratio(self.tn, self.tn + self.fp)
    }

    pub fn neg_precision(&self) -> Metric {
        Metric::ratio(self.tn, self.tn + self.fn_)
    }

    pub fn accuracy(&self) -> Metric {
        Metric::ratio(self.tp + self.tn, self.total())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowPrediction {
    pub domain: String,
    pub fold: usize,
    pub truth: Label,
    pub predicted: Label,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classifier: ModelKind,
    pub folds: usize,
    pub seed: u64,
    pub confusion: Confusion,
    pub pos_recall: Metric,
    pub pos_precision: Metric,
    pub neg_recall: Metric,
    pub neg_precision: Metric,
    pub per_fold: Vec<Confusion>,
    pub predictions: Vec<RowPrediction>,
}

impl EvalReport {
    pub fn from_confusions(classifier: ModelKind, seed: u64, per_fold: Vec<Confusion>, predictions: Vec<RowPrediction>) -> Self {
        let mut confusion = Confusion::default();
        for c in &per_fold {
            confusion.add(c);
        }
        EvalReport {
            classifier,
            folds: per_fold.len(),
            seed,
            confusion,
            pos_recall: confusion.pos_recall(),
            pos_precision: confusion.pos_precision(),
            neg_recall: confusion.neg_recall(),
            neg_precision: confusion.neg_precision(),
            per_fold,
            predictions,
        }
    }

    /// Mean of per-fold ratios, skipping folds where a ratio is undefined.
    pub fn macro_average(&self) -> [Metric; 4] {
        let pick: [fn(&Confusion) -> Metric; 4] = [
            Confusion::pos_recall,
            Confusion::pos_precision,
            Confusion::neg_recall,
            Confusion::neg_precision,
        ];
        pick.map(|f| {
            let vals: Vec<f64> = self.per_fold.iter().filter_map(|c| f(c).0).collect();
            Metric((!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64))
        })
    }

    pub fn accuracy(&self) -> Metric {
        self.confusion.accuracy()
    }

    pub fn table_header() -> String {
        format!(
            "{:<14} {:>10} {:>10} {:>10} {:>10}\n{:<14} {:>10} {:>10} {:>10} {:>10}",
            "classifier", "positive", "positive", "negative", "negative", "", "recall", "precision", "recall", "precision"
        )
    }

    pub fn table_row(&self) -> String {
        format!(
            "{:<14} {:>10} {:>10} {:>10} {:>10}",
            self.classifier.as_str(),
            self.pos_recall.to_string(),
            self.pos_precision.to_string(),
            self.neg_recall.to_string(),
            self.neg_precision.to_string()
        )
    }

    pub fn render_table(&self) -> String {
        let c = &self.confusion;
        format!(
            "{}\n{}\n\nfolds {}  seed {}  tp {}  fp {}  tn {}  fn {}  accuracy {}\n",
            Self::table_header(),
            self.table_row(),
            self.folds,
            self.seed,
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            self.accuracy()
        )
    }
}

/// Stratified fold assignment over rows in their given order: each class is
/// shuffled with `seed` and dealt round-robin, the second class continuing
/// where the first stopped. Returns the test indices of each fold.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, MlError> {
    if k < 2 {
        return Err(MlError::TooFewRows(format!("k must be at least 2, got {k}")));
    }
    if labels.len() < k {
        return Err(MlError::TooFewRows(format!("{} rows cannot fill {k} folds", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [Label::Pos, Label::Neg] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// k-fold stratified cross-validation; metrics come from the summed confusion.
pub fn cross_validate(ds: &Dataset, k: usize, kind: ModelKind, hp: &Hyperparameters, seed: u64) -> Result<EvalReport, MlError> {
    hp.validate()?;
    for label in [Label::Pos, Label::Neg] {
        let n = ds.count(label);
        if n < k.max(2) {
            return Err(MlError::TooFewRows(format!(
                "class {label} has {n} rows; {k}-fold validation needs at least {}",
                k.max(2)
            )));
        }
    }
    let ds = ds.canonical();
    let enc = Encoded::new(&ds);
    let labels: Vec<Label> = (0..ds.len()).map(|i| ds.label(i)).collect();
    let folds = stratified_folds(&labels, k, seed)?;
    let mut fold_of = vec![0; ds.len()];
    for (f, rows) in folds.iter().enumerate() {
        for &r in rows {
            fold_of[r] = f;
        }
    }
    let fold_seeds = super::member_seeds(seed ^ 0x5f0c_a11d_f01d_5eed, k);
    let results = crate::par::map_range(k, |f| {
        let train: Vec<usize> = (0..ds.len()).filter(|&i| fold_of[i] != f).collect();
        let structure = fit_rows(&ds, &enc, &train, kind, hp, fold_seeds[f]);
        let mut conf = Confusion::default();
        let preds: Vec<RowPrediction> = folds[f]
            .iter()
            .map(|&i| {
                let row = &ds.rows()[i];
                let p = Prediction::from_score(structure_score(&structure, row));
                conf.record(labels[i], p.label);
                RowPrediction {
                    domain: row.domain.clone(),
                    fold: f,
                    truth: labels[i],
                    predicted: p.label,
                    score: p.score,
                }
            })
            .collect();
        (conf, preds)
    });
    let mut per_fold = Vec::with_capacity(k);
    let mut predictions = Vec::with_capacity(ds.len());
    for (c, p) in results {
        per_fold.push(c);
        predictions.extend(p);
    }
    Ok(EvalReport::from_confusions(kind, seed, per_fold, predictions))
}
