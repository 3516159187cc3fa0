use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ingest::{ingest_csv, ColumnKind, CsvSchema, Dataset, Target};
use super::{check_arm, Environment};
use crate::{Error, Result, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetName {
    Mushroom,
    Statlog,
    Covertype,
    Financial,
    Jester,
    Adult,
    Census,
}

/// How a row and an action turn into a reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardRule {
    /// 1 for the row's class, 0 otherwise.
    Classification,
    /// Arm 0 is `eat`, arm 1 is `pass`.
    Mushroom,
    /// The value of the selected output column.
    Outputs,
}

const EAT: usize = 0;
const EDIBLE: usize = 0;
const MUSHROOM_EAT: f64 = 5.0;
const MUSHROOM_POISON: f64 = -35.0;

const MUSHROOM_LEVELS: [(&str, &str); 22] = [
    ("cap-shape", "bcxfks"),
    ("cap-surface", "fgys"),
    ("cap-color", "nbcgrpuewy"),
    ("bruises", "tf"),
    ("odor", "alcyfmnps"),
    ("gill-attachment", "af"),
    ("gill-spacing", "cw"),
    ("gill-size", "bn"),
    ("gill-color", "knbhgropuewy"),
    ("stalk-shape", "et"),
    ("stalk-root", "bcer?"),
    ("stalk-surface-above-ring", "fyks"),
    ("stalk-surface-below-ring", "fyks"),
    ("stalk-color-above-ring", "nbcgopewy"),
    ("stalk-color-below-ring", "nbcgopewy"),
    ("veil-type", "p"),
    ("veil-color", "nowy"),
    ("ring-number", "not"),
    ("ring-type", "eflnp"),
    ("spore-print-color", "knbhrouwy"),
    ("population", "acnsvy"),
    ("habitat", "glmpuwd"),
];

const ADULT_LEVELS: [(&str, &[&str]); 8] = [
    ("workclass", &["Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov", "State-gov", "Without-pay"]),
    (
        "education",
        &[
            "Bachelors", "Some-college", "11th", "HS-grad", "Prof-school", "Assoc-acdm", "Assoc-voc", "9th", "7th-8th",
            "12th", "Masters", "1st-4th", "10th", "Doctorate", "5th-6th", "Preschool",
        ],
    ),
    (
        "marital-status",
        &[
            "Married-civ-spouse", "Divorced", "Never-married", "Separated", "Widowed", "Married-spouse-absent",
            "Married-AF-spouse",
        ],
    ),
    ("relationship", &["Wife", "Own-child", "Husband", "Not-in-family", "Other-relative", "Unmarried"]),
    ("race", &["White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"]),
    ("sex", &["Female", "Male"]),
    (
        "native-country",
        &[
            "United-States", "Cambodia", "England", "Puerto-Rico", "Canada", "Germany", "Outlying-US(Guam-USVI-etc)",
            "India", "Japan", "Greece", "South", "China", "Cuba", "Iran", "Honduras", "Philippines", "Italy", "Poland",
            "Jamaica", "Vietnam", "Mexico", "Portugal", "Ireland", "France", "Dominican-Republic", "Laos", "Ecuador",
            "Taiwan", "Haiti", "Columbia", "Hungary", "Guatemala", "Nicaragua", "Scotland", "Thailand", "Yugoslavia",
            "El-Salvador", "Trinadad&Tobago", "Peru", "Hong", "Holand-Netherlands",
        ],
    ),
    ("income", &["<=50K", ">50K"]),
];

const ADULT_NUMERIC: [&str; 6] = ["age", "fnlwgt", "education-num", "capital-gain", "capital-loss", "hours-per-week"];

const ADULT_OCCUPATIONS: [&str; 14] = [
    "Adm-clerical", "Armed-Forces", "Craft-repair", "Exec-managerial", "Farming-fishing", "Handlers-cleaners",
    "Machine-op-inspct", "Other-service", "Priv-house-serv", "Prof-specialty", "Protective-serv", "Sales",
    "Tech-support", "Transport-moving",
];

/// Class frequencies of the shuttle data: 34108, 37, 132, 6748, 2458, 6 and 11 of 43500 rows.
const STATLOG_COUNTS: [u32; 7] = [34108, 37, 132, 6748, 2458, 6, 11];

fn strings<'a>(it: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    it.into_iter().map(str::to_owned).collect()
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

impl DatasetName {
    pub const ALL: [DatasetName; 7] = [
        DatasetName::Mushroom,
        DatasetName::Statlog,
        DatasetName::Covertype,
        DatasetName::Financial,
        DatasetName::Jester,
        DatasetName::Adult,
        DatasetName::Census,
    ];

    pub fn rule(self) -> RewardRule {
        match self {
            DatasetName::Mushroom => RewardRule::Mushroom,
            DatasetName::Financial | DatasetName::Jester => RewardRule::Outputs,
            _ => RewardRule::Classification,
        }
    }

    /// Column layout of the CSV files this crate reads for each dataset.
    pub fn schema(self) -> CsvSchema {
        let class_ids = |n: usize| (1..=n).map(|i| i.to_string()).collect();
        match self {
            DatasetName::Mushroom => CsvSchema {
                label: Some("class".into()),
                classes: strings(["e", "p"]),
                categorical: MUSHROOM_LEVELS.iter().map(|(n, _)| n.to_string()).collect(),
                levels: MUSHROOM_LEVELS
                    .iter()
                    .map(|(n, l)| (n.to_string(), l.chars().map(String::from).collect()))
                    .collect(),
                expected_dim: Some(117),
                ..Default::default()
            },
            DatasetName::Statlog => CsvSchema {
                label: Some("class".into()),
                classes: class_ids(7),
                rest: Some(ColumnKind::Numeric),
                expected_dim: Some(9),
                ..Default::default()
            },
            DatasetName::Covertype => CsvSchema {
                label: Some("Cover_Type".into()),
                classes: class_ids(7),
                rest: Some(ColumnKind::Numeric),
                expected_dim: Some(54),
                ..Default::default()
            },
            DatasetName::Financial => CsvSchema {
                outputs: numbered("arm", 8),
                rest: Some(ColumnKind::Numeric),
                expected_dim: Some(21),
                ..Default::default()
            },
            DatasetName::Jester => CsvSchema {
                outputs: numbered("arm", 8),
                rest: Some(ColumnKind::Numeric),
                expected_dim: Some(32),
                ..Default::default()
            },
            DatasetName::Adult => CsvSchema {
                label: Some("occupation".into()),
                classes: strings(ADULT_OCCUPATIONS),
                numeric: strings(ADULT_NUMERIC),
                categorical: ADULT_LEVELS.iter().map(|(n, _)| n.to_string()).collect(),
                levels: ADULT_LEVELS.iter().map(|(n, l)| (n.to_string(), strings(l.iter().copied()))).collect(),
                na: Some("?".into()),
                expected_dim: Some(92),
                ..Default::default()
            },
            DatasetName::Census => CsvSchema {
                label: Some("dOccup".into()),
                drop: strings(["caseid"]),
                rest: Some(ColumnKind::Categorical),
                ..Default::default()
            },
        }
    }
}

/// Streams the rows of a dataset as a contextual bandit, one row per step.
///
/// Rows are shuffled once with the construction stream and optionally cut to a horizon.
/// Numeric columns are standardised with the mean and sd of the first `warmup` streamed rows.
#[derive(Debug, Clone)]
pub struct DatasetEnv {
    data: Arc<Dataset>,
    rule: RewardRule,
    order: Vec<usize>,
    shift: Vec<f64>,
    scale: Vec<f64>,
    cursor: usize,
    current: Option<usize>,
    arms: usize,
}

pub const DEFAULT_WARMUP: usize = 1000;

impl DatasetEnv {
    pub fn new(
        data: Arc<Dataset>,
        rule: RewardRule,
        horizon: Option<usize>,
        warmup: usize,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let arms = match (&data.target, rule) {
            (Target::Classes { .. }, RewardRule::Mushroom) if data.num_classes() == 2 => 2,
            (Target::Classes { .. }, RewardRule::Classification) => data.num_classes(),
            (Target::Outputs(_), RewardRule::Outputs) => data.num_classes(),
            _ => return Err(Error::Config(format!("reward rule {rule:?} does not fit the dataset target"))),
        };
        if arms == 0 || data.is_empty() {
            return Err(Error::Config("dataset has no rows or no actions".into()));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(rng);
        if let Some(h) = horizon {
            if h > order.len() {
                return Err(Error::Config(format!("horizon {h} exceeds the {} dataset rows", order.len())));
            }
            order.truncate(h);
        }

        let d = data.dim();
        let w = warmup.clamp(1, order.len());
        let mut shift = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for j in (0..d).filter(|&j| data.numeric[j]) {
            let col = order[..w].iter().map(|&i| data.features[i][j]);
            let mean = col.clone().sum::<f64>() / w as f64;
            let var = col.map(|v| (v - mean).powi(2)).sum::<f64>() / w as f64;
            shift[j] = mean;
            if var > 0.0 {
                scale[j] = var.sqrt();
            }
        }
        Ok(Self { data, rule, order, shift, scale, cursor: 0, current: None, arms })
    }

    pub fn rule(&self) -> RewardRule {
        self.rule
    }

    pub fn remaining(&self) -> usize {
        self.order.len() - self.cursor
    }

    fn row(&self) -> Result<usize> {
        self.current.ok_or_else(|| Error::Config("no context drawn yet".into()))
    }
}

/// Loads `source` with the dataset's schema and wraps it as an environment over all rows.
pub fn dataset_env(name: DatasetName, source: impl AsRef<Path>, rng: &mut RngStream) -> Result<DatasetEnv> {
    let data = ingest_csv(source, &name.schema())?;
    DatasetEnv::new(Arc::new(data), name.rule(), None, DEFAULT_WARMUP, rng)
}

impl Environment for DatasetEnv {
    fn num_arms(&self) -> usize {
        self.arms
    }

    fn context_dim(&self) -> usize {
        self.data.dim()
    }

    fn horizon(&self) -> Option<usize> {
        Some(self.order.len())
    }

    fn next_context(&mut self, _rng: &mut RngStream) -> Result<Vec<f64>> {
        let &i = self.order.get(self.cursor).ok_or(Error::Exhausted(self.order.len()))?;
        self.cursor += 1;
        self.current = Some(i);
        Ok(self.data.features[i].iter().zip(self.shift.iter().zip(&self.scale)).map(|(v, (m, s))| (v - m) / s).collect())
    }

    fn reward(&mut self, arm: usize, ctx: &[f64], rng: &mut RngStream) -> Result<f64> {
        check_arm(arm, self.arms)?;
        let i = self.row()?;
        match (&self.data.target, self.rule) {
            (Target::Classes { labels, .. }, RewardRule::Mushroom) if arm == EAT && labels[i] != EDIBLE => {
                Ok(if rng.bernoulli(0.5) { MUSHROOM_EAT } else { MUSHROOM_POISON })
            }
            _ => self.expected_reward(arm, ctx),
        }
    }

    fn expected_reward(&self, arm: usize, _ctx: &[f64]) -> Result<f64> {
        check_arm(arm, self.arms)?;
        let i = self.row()?;
        Ok(match (&self.data.target, self.rule) {
            (Target::Classes { labels, .. }, RewardRule::Mushroom) => match (arm == EAT, labels[i] == EDIBLE) {
                (false, _) => 0.0,
                (true, true) => MUSHROOM_EAT,
                (true, false) => 0.5 * (MUSHROOM_EAT + MUSHROOM_POISON),
            },
            (Target::Classes { labels, .. }, _) => f64::from(u8::from(labels[i] == arm)),
            (Target::Outputs(out), _) => out[i][arm],
        })
    }
}

/// CSV text shaped like the shuttle data: 9 integer features and classes 1 to 7 with the
/// original class frequencies, drawn from well separated Gaussian clusters.
pub fn standin_statlog(rows: usize, rng: &mut RngStream) -> Result<String> {
    const D: usize = 9;
    let centers: Vec<Vec<f64>> =
        (0..STATLOG_COUNTS.len()).map(|_| (0..D).map(|_| 2.5 * rng.standard_normal()).collect()).collect();
    let total: u32 = STATLOG_COUNTS.iter().sum();
    let mut out = String::new();
    let header: Vec<String> = numbered("a", D).into_iter().chain(["class".to_string()]).collect();
    writeln!(out, "{}", header.join(",")).expect("write to String");
    for _ in 0..rows {
        let mut u = rng.index(total as usize) as u32;
        let class = STATLOG_COUNTS
            .iter()
            .position(|&c| {
                let hit = u < c;
                u = u.saturating_sub(c);
                hit
            })
            .expect("draw below total");
        let feats: Vec<String> = centers[class]
            .iter()
            .map(|c| format!("{}", (50.0 + 10.0 * (c + rng.standard_normal())).round()))
            .collect();
        writeln!(out, "{},{}", feats.join(","), class + 1).expect("write to String");
    }
    Ok(out)
}

/// CSV text shaped like the portfolio data: 21 Gaussian features and 8 outputs, each a fixed
/// linear combination of the features.
pub fn standin_financial(rows: usize, rng: &mut RngStream) -> Result<String> {
    const D: usize = 21;
    const K: usize = 8;
    let weights: Vec<Vec<f64>> =
        (0..K).map(|_| (0..D).map(|_| rng.standard_normal() / (D as f64).sqrt()).collect()).collect();
    let mut out = String::new();
    let header: Vec<String> = numbered("x", D).into_iter().chain(numbered("arm", K)).collect();
    writeln!(out, "{}", header.join(",")).expect("write to String");
    for _ in 0..rows {
        let x: Vec<f64> = (0..D).map(|_| rng.standard_normal()).collect();
        let y = weights.iter().map(|w| crate::linalg::dot(w, &x));
        let cells: Vec<String> = x.iter().copied().chain(y).map(|v| format!("{v:.6}")).collect();
        writeln!(out, "{}", cells.join(",")).expect("write to String");
    }
    Ok(out)
}
