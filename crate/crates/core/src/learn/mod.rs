//! Material classifiers over dissipation vectors.
//!
//! Three model families are provided, all written from first principles:
//! a random forest of Gini-split CART trees, one-vs-rest linear SVMs trained
//! by stochastic subgradient descent, and a one-hidden-layer MLP with
//! softmax output. Class lists are kept in lexicographic order, so every
//! "lowest class index" tie-break is also a "lexicographically smallest
//! label" tie-break.

mod eval;
mod forest;
mod mlp;
mod model_io;
mod scaler;
mod svm;

pub use eval::{
    cross_validate, evaluate, hamming_loss, kfold_split, multiset_accuracy, EvalReport, Fold,
};
pub use forest::{train_forest, ForestModel, ForestParams, Node, Tree};
pub use mlp::{train_mlp, MlpModel, MlpParams};
pub use scaler::Standardizer;
pub use svm::{svm_objective, train_svm, train_svm_with_history, SvmModel, SvmParams};

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fingerprint::{read_mdv, write_mdv};
use crate::frame::DissipationVector;

/// How the object was held before it was put down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HoldType {
    Fixed,
    Natural,
    Quick,
}

impl HoldType {
    pub const ALL: [HoldType; 3] = [HoldType::Fixed, HoldType::Natural, HoldType::Quick];

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for HoldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HoldType::Fixed => "fixed",
            HoldType::Natural => "natural",
            HoldType::Quick => "quick",
        })
    }
}

impl FromStr for HoldType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(HoldType::Fixed),
            "natural" => Ok(HoldType::Natural),
            "quick" => Ok(HoldType::Quick),
            _ => Err(Error::Encoding(format!("unknown hold type {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Female, Gender::Male];

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Female => "female",
            Gender::Male => "male",
        })
    }
}

impl FromStr for Gender {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "female" => Ok(Gender::Female),
            "male" => Ok(Gender::Male),
            _ => Err(Error::Encoding(format!("unknown gender {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub vector: DissipationVector,
    pub context: Option<HoldType>,
    pub gender_meta: Option<Gender>,
    pub label: String,
}

impl LabeledSample {
    pub fn new(vector: DissipationVector, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        check_label(&label)?;
        Ok(LabeledSample {
            vector,
            context: None,
            gender_meta: None,
            label,
        })
    }

    pub fn with_context(mut self, context: HoldType) -> Self {
        self.context = Some(context);
        self
    }

    pub fn with_gender(mut self, gender: Gender) -> Self {
        self.gender_meta = Some(gender);
        self
    }
}

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() || label.chars().any(char::is_whitespace) {
        return Err(Error::invalid("label", format!("{label:?} must be a non-empty word")));
    }
    Ok(())
}

/// Which optional sample fields are appended to the vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeatureEncoding {
    pub include_context: bool,
    pub include_gender: bool,
}

impl FeatureEncoding {
    pub fn extra_dims(&self) -> usize {
        3 * self.include_context as usize + 2 * self.include_gender as usize
    }
}

/// Vector values, then one-hot hold type (fixed, natural, quick), then
/// one-hot gender (female, male), as configured.
pub fn encode_features(sample: &LabeledSample, enc: FeatureEncoding) -> Result<Vec<f64>> {
    let mut x = sample.vector.values().to_vec();
    if enc.include_context {
        let c = sample
            .context
            .ok_or_else(|| Error::Encoding("sample has no hold-type context".into()))?;
        let mut slots = [0.0; 3];
        slots[c.slot()] = 1.0;
        x.extend_from_slice(&slots);
    }
    if enc.include_gender {
        let g = sample
            .gender_meta
            .ok_or_else(|| Error::Encoding("sample has no gender metadata".into()))?;
        let mut slots = [0.0; 2];
        slots[g.slot()] = 1.0;
        x.extend_from_slice(&slots);
    }
    Ok(x)
}

/// Encoded feature rows with class indices into a sorted class list.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    targets: Vec<usize>,
    classes: Vec<String>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: &[impl AsRef<str>]) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Domain(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(first) = features.first() {
            let d = first.len();
            if d == 0 {
                return Err(Error::Domain("feature rows are empty".into()));
            }
            if let Some(i) = features.iter().position(|r| r.len() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: features[i].len(),
                });
            }
            if features.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Domain("non-finite feature value".into()));
            }
        }
        for l in labels {
            check_label(l.as_ref())?;
        }
        let mut classes: Vec<String> = labels.iter().map(|l| l.as_ref().to_owned()).collect();
        classes.sort();
        classes.dedup();
        let targets = labels
            .iter()
            .map(|l| classes.binary_search_by(|c| c.as_str().cmp(l.as_ref())).expect("present"))
            .collect();
        Ok(Dataset {
            features,
            targets,
            classes,
        })
    }

    pub fn from_samples(samples: &[LabeledSample], enc: FeatureEncoding) -> Result<Self> {
        let features = samples
            .iter()
            .map(|s| encode_features(s, enc))
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<&str> = samples.iter().map(|s| s.label.as_str()).collect();
        Self::new(features, &labels)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn label(&self, i: usize) -> &str {
        &self.classes[self.targets[i]]
    }

    /// Rows at `indices`; the class list is kept as is.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            classes: self.classes.clone(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for &t in &self.targets {
            counts[t] += 1;
        }
        counts
    }

    /// At least two classes present, each with at least two samples.
    pub(crate) fn check_trainable(&self) -> Result<()> {
        let present: Vec<usize> = self.class_counts().into_iter().filter(|&c| c > 0).collect();
        if present.len() < 2 {
            return Err(Error::DegenerateModel(format!(
                "training data has {} class(es); need at least 2",
                present.len()
            )));
        }
        if present.iter().any(|&c| c < 2) {
            return Err(Error::DegenerateModel(
                "every class needs at least 2 training samples".into(),
            ));
        }
        Ok(())
    }
}

/// Shared predict-side behaviour of the three model families.
pub trait Classifier {
    fn classes(&self) -> &[String];
    fn n_features(&self) -> usize;
    /// Class index for a feature row of the right dimension.
    fn predict_index(&self, x: &[f64]) -> usize;

    fn predict(&self, x: &[f64]) -> Result<&str> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        Ok(&self.classes()[self.predict_index(x)])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Forest(ForestModel),
    Svm(SvmModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Forest(_) => "forest",
            Model::Svm(_) => "svm",
            Model::Mlp(_) => "mlp",
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::Forest(m) => m,
            Model::Svm(m) => m,
            Model::Mlp(m) => m,
        }
    }
}

impl Classifier for Model {
    fn classes(&self) -> &[String] {
        self.inner().classes()
    }
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }
    fn predict_index(&self, x: &[f64]) -> usize {
        self.inner().predict_index(x)
    }
}

/// A model together with the feature encoding it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub encoding: FeatureEncoding,
    pub model: Model,
}

impl TrainedModel {
    pub fn predict_sample(&self, sample: &LabeledSample) -> Result<&str> {
        let x = encode_features(sample, self.encoding)?;
        self.model.predict(&x)
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        model_io::write_model(self, out)
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self> {
        model_io::read_model(input)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Forest,
    Svm,
    Mlp,
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forest" | "rf" => Ok(ModelKind::Forest),
            "svm" => Ok(ModelKind::Svm),
            "mlp" => Ok(ModelKind::Mlp),
            _ => Err(Error::Config(format!("unknown model kind {s:?}"))),
        }
    }
}

/// Hyperparameters for any of the three families, with one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub forest: ForestParams,
    pub svm: SvmParams,
    pub mlp: MlpParams,
}

impl TrainParams {
    pub fn with_seed(seed: u64) -> Self {
        TrainParams {
            forest: ForestParams {
                seed,
                ..ForestParams::default()
            },
            svm: SvmParams {
                seed,
                ..SvmParams::default()
            },
            mlp: MlpParams {
                seed,
                ..MlpParams::default()
            },
        }
    }
}

pub fn train(kind: ModelKind, data: &Dataset, params: &TrainParams) -> Result<Model> {
    Ok(match kind {
        ModelKind::Forest => Model::Forest(train_forest(data, &params.forest)?),
        ModelKind::Svm => Model::Svm(train_svm(data, &params.svm)?),
        ModelKind::Mlp => Model::Mlp(train_mlp(data, &params.mlp)?),
    })
}

/// One manifest line: `path/to/vector.mdv <label> [context] [gender]`.
/// `-` stands for an absent context when a gender follows. Relative paths
/// are resolved against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<LabeledSample>> {
    let file = File::open(path).map_err(|source| Error::Io { position: 0, source })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest(BufReader::new(file), &base)
}

pub fn parse_manifest<R: BufRead>(input: R, base: &Path) -> Result<Vec<LabeledSample>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|source| Error::Io { position: 0, source })?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        if !(2..=4).contains(&fields.len()) {
            return Err(Error::parse(i + 1, "expected `<path> <label> [context] [gender]`"));
        }
        let mut vpath = PathBuf::from(fields[0]);
        if vpath.is_relative() {
            vpath = base.join(vpath);
        }
        let file = File::open(&vpath).map_err(|e| {
            Error::parse(i + 1, format!("cannot open {}: {e}", vpath.display()))
        })?;
        let vector = read_mdv(BufReader::new(file))?;
        let mut sample = LabeledSample::new(vector, fields[1])?;
        if let Some(c) = fields.get(2).filter(|c| **c != "-") {
            sample.context = Some(c.parse().map_err(|e: Error| Error::parse(i + 1, e.to_string()))?);
        }
        if let Some(g) = fields.get(3) {
            sample.gender_meta = Some(g.parse().map_err(|e: Error| Error::parse(i + 1, e.to_string()))?);
        }
        out.push(sample);
    }
    Ok(out)
}

/// Writes each sample as `<stem>_<n>.mdv` in `dir` and returns manifest text
/// with paths relative to `dir`.
pub fn write_dataset(samples: &[LabeledSample], dir: &Path) -> Result<String> {
    let mut manifest = String::new();
    for (n, s) in samples.iter().enumerate() {
        let name = format!("{}_{n:04}.mdv", s.label);
        let file = File::create(dir.join(&name)).map_err(|source| Error::Io { position: 0, source })?;
        write_mdv(&s.vector, std::io::BufWriter::new(file))?;
        manifest.push_str(&name);
        manifest.push(' ');
        manifest.push_str(&s.label);
        match (s.context, s.gender_meta) {
            (Some(c), Some(g)) => manifest.push_str(&format!(" {c} {g}")),
            (Some(c), None) => manifest.push_str(&format!(" {c}")),
            (None, Some(g)) => manifest.push_str(&format!(" - {g}")),
            (None, None) => {}
        }
        manifest.push('\n');
    }
    Ok(manifest)
}

/// Reads a whole model file.
pub fn load_model_file(path: &Path) -> Result<TrainedModel> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| Error::Io { position: 0, source })?;
    TrainedModel::load(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec3() -> DissipationVector {
        DissipationVector::new(vec![1.0, 0.5, 0.0], 8000).unwrap()
    }

    #[test]
    fn encoding_dimensions() {
        let s = LabeledSample::new(vec3(), "pp").unwrap();
        assert_eq!(encode_features(&s, FeatureEncoding::default()).unwrap().len(), 3);
        let both = FeatureEncoding {
            include_context: true,
            include_gender: true,
        };
        assert!(matches!(encode_features(&s, both), Err(Error::Encoding(_))));
        let s = s.with_context(HoldType::Natural).with_gender(Gender::Male);
        assert_eq!(
            encode_features(&s, both).unwrap(),
            vec![1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn one_hot_slots_sum_to_one_for_every_category() {
        let enc = FeatureEncoding {
            include_context: true,
            include_gender: true,
        };
        for c in HoldType::ALL {
            for g in Gender::ALL {
                let s = LabeledSample::new(vec3(), "x").unwrap().with_context(c).with_gender(g);
                let x = encode_features(&s, enc).unwrap();
                assert_eq!(x.len(), 3 + 5);
                assert_eq!(x[3..6].iter().sum::<f64>(), 1.0);
                assert_eq!(x[6..8].iter().sum::<f64>(), 1.0);
                assert!(x[3..].iter().all(|&v| v == 0.0 || v == 1.0));
                assert_eq!(c.to_string().parse::<HoldType>().unwrap(), c);
                assert_eq!(g.to_string().parse::<Gender>().unwrap(), g);
            }
        }
    }

    #[test]
    fn dataset_classes_are_sorted() {
        let d = Dataset::new(vec![vec![1.0], vec![2.0], vec![3.0]], &["pvc", "hdpe", "pvc"]).unwrap();
        assert_eq!(d.classes(), &["hdpe".to_string(), "pvc".to_string()]);
        assert_eq!(d.targets(), &[1, 0, 1]);
        assert!(d.check_trainable().is_err());
        assert!(Dataset::new(vec![vec![1.0], vec![2.0, 3.0]], &["a", "b"]).is_err());
        assert!(Dataset::new(vec![vec![1.0]], &["a b"]).is_err());
        assert!(Dataset::new(vec![vec![f64::NAN]], &["a"]).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![
            LabeledSample::new(vec3(), "pp").unwrap().with_context(HoldType::Quick),
            LabeledSample::new(vec3(), "ps").unwrap().with_gender(Gender::Female),
            LabeledSample::new(vec3(), "ps").unwrap(),
        ];
        let manifest = write_dataset(&samples, dir.path()).unwrap();
        let mpath = dir.path().join("data.txt");
        std::fs::write(&mpath, &manifest).unwrap();
        assert_eq!(read_manifest(&mpath).unwrap(), samples);
        let bad = parse_manifest("x.mdv\n".as_bytes(), dir.path());
        assert!(matches!(bad, Err(Error::Parse { line: 1, .. })));
    }
}
