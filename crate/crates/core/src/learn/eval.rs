use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{train, Classifier, Dataset, ModelKind, TrainParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub accuracy: f64,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
    /// Per-sample Hamming loss with each sample as a one-label scene, which
    /// comes out as `1 - accuracy`.
    pub hamming_loss: f64,
}

impl EvalReport {
    fn from_confusion(classes: Vec<String>, confusion: Vec<Vec<usize>>) -> Self {
        let total: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..confusion.len()).map(|i| confusion[i][i]).sum();
        let accuracy = correct as f64 / total as f64;
        EvalReport {
            classes,
            accuracy,
            confusion,
            hamming_loss: 1.0 - accuracy,
        }
    }
}

/// Scores `model` on `data`. Data classes must be a subset of the model's.
pub fn evaluate(model: &dyn Classifier, data: &Dataset) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::Domain("test set is empty".into()));
    }
    let classes = model.classes().to_vec();
    let index: Vec<usize> = data
        .classes()
        .iter()
        .map(|c| {
            classes
                .binary_search(c)
                .map_err(|_| Error::Domain(format!("test label {c:?} unknown to the model")))
        })
        .collect::<Result<_>>()?;
    let k = classes.len();
    let mut confusion = vec![vec![0; k]; k];
    for (x, &t) in data.features().iter().zip(data.targets()) {
        let p = model.predict(x)?;
        let p = classes.binary_search_by(|c| c.as_str().cmp(p)).expect("model label");
        confusion[index[t]][p] += 1;
    }
    Ok(EvalReport::from_confusion(classes, confusion))
}

/// Mean over scenes of `|pred ^ truth| / |pred | truth|`; a scene where both
/// sets are empty counts as 0.
pub fn hamming_loss<S: AsRef<str>>(predicted: &[Vec<S>], truth: &[Vec<S>]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Domain(format!(
            "{} predicted scenes but {} true scenes",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Domain("no scenes to score".into()));
    }
    let total: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            let p: BTreeSet<&str> = p.iter().map(AsRef::as_ref).collect();
            let t: BTreeSet<&str> = t.iter().map(AsRef::as_ref).collect();
            let universe = p.union(&t).count();
            if universe == 0 {
                0.0
            } else {
                p.symmetric_difference(&t).count() as f64 / universe as f64
            }
        })
        .sum();
    Ok(total / predicted.len() as f64)
}

/// Fraction of scenes whose predicted label multiset equals the true one.
pub fn multiset_accuracy<S: AsRef<str>>(predicted: &[Vec<S>], truth: &[Vec<S>]) -> Result<f64> {
    if predicted.len() != truth.len() || predicted.is_empty() {
        return Err(Error::Domain("scene lists must be non-empty and equally long".into()));
    }
    fn sorted<S: AsRef<str>>(v: &[S]) -> Vec<&str> {
        let mut s: Vec<&str> = v.iter().map(AsRef::as_ref).collect();
        s.sort_unstable();
        s
    }
    let ok = predicted
        .iter()
        .zip(truth)
        .filter(|(p, t)| sorted(p) == sorted(t))
        .count();
    Ok(ok as f64 / predicted.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified folds: each class is shuffled and dealt round-robin, with the
/// dealing position carried over from one class to the next so fold sizes
/// differ by at most one.
pub fn kfold_split(data: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Config("k must be >= 2".into()));
    }
    let counts = data.class_counts();
    if let Some((c, &n)) = counts.iter().enumerate().find(|(_, &n)| n > 0 && n < k) {
        return Err(Error::Domain(format!(
            "class {:?} has {n} samples, fewer than k = {k}",
            data.classes()[c]
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tests = vec![Vec::new(); k];
    let mut slot = 0;
    for c in 0..counts.len() {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.targets()[i] == c).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            tests[slot].push(i);
            slot = (slot + 1) % k;
        }
    }
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let train = (0..data.len()).filter(|i| test.binary_search(i).is_err()).collect();
            Fold { train, test }
        })
        .collect())
}

/// Pooled confusion over `k` stratified folds.
pub fn cross_validate(
    kind: ModelKind,
    data: &Dataset,
    k: usize,
    params: &TrainParams,
    seed: u64,
) -> Result<EvalReport> {
    let n = data.classes().len();
    let mut confusion = vec![vec![0; n]; n];
    for fold in kfold_split(data, k, seed)? {
        let model = train(kind, &data.subset(&fold.train), params)?;
        let r = evaluate(&model, &data.subset(&fold.test))?;
        for (row, add) in confusion.iter_mut().zip(&r.confusion) {
            for (a, b) in row.iter_mut().zip(add) {
                *a += b;
            }
        }
    }
    Ok(EvalReport::from_confusion(data.classes().to_vec(), confusion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::ForestModel;
    use crate::learn::Tree;
    use rand::Rng;

    fn labelled(counts: &[usize]) -> Dataset {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                x.push(vec![c as f64, i as f64]);
                y.push(format!("m{c}"));
            }
        }
        Dataset::new(x, &y).unwrap()
    }

    #[test]
    fn hamming_edge_cases() {
        let a = vec![vec!["pp", "ps"]];
        assert_eq!(hamming_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(hamming_loss(&[vec!["pp"]], &[vec!["ps", "pvc"]]).unwrap(), 1.0);
        assert_eq!(hamming_loss::<&str>(&[vec![]], &[vec![]]).unwrap(), 0.0);
        assert!(hamming_loss::<&str>(&[], &[]).is_err());
        assert_eq!(hamming_loss(&[vec!["a", "b"]], &[vec!["b", "c"]]).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn hamming_matches_brute_force() {
        let alphabet = ["a", "b", "c", "d", "e"];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<&str> {
            alphabet.iter().copied().filter(|_| rng.random_bool(0.4)).collect()
        };
        for _ in 0..200 {
            let p: Vec<Vec<&str>> = (0..5).map(|_| draw(&mut rng)).collect();
            let t: Vec<Vec<&str>> = (0..5).map(|_| draw(&mut rng)).collect();
            let mut expect = 0.0;
            for (ps, ts) in p.iter().zip(&t) {
                let mut diff = 0;
                let mut uni = 0;
                for l in alphabet {
                    let (ip, it) = (ps.contains(&l), ts.contains(&l));
                    diff += (ip != it) as usize;
                    uni += (ip || it) as usize;
                }
                expect += if uni == 0 { 0.0 } else { diff as f64 / uni as f64 };
            }
            expect /= 5.0;
            assert!((hamming_loss(&p, &t).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn multiset_accuracy_counts_duplicates() {
        let p = vec![vec!["a", "a"], vec!["b", "a"]];
        let t = vec![vec!["a"], vec!["a", "b"]];
        assert_eq!(multiset_accuracy(&p, &t).unwrap(), 0.5);
    }

    #[test]
    fn folds_are_stratified_disjoint_and_balanced() {
        let d = labelled(&[7, 11, 5]);
        let k = 5;
        let folds = kfold_split(&d, k, 3).unwrap();
        let mut seen = vec![0; d.len()];
        for f in &folds {
            for &i in &f.test {
                seen[i] += 1;
            }
            assert_eq!(f.train.len() + f.test.len(), d.len());
            assert!(f.train.iter().all(|i| !f.test.contains(i)));
        }
        assert!(seen.iter().all(|&s| s == 1));
        let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let global = d.class_counts();
        for f in &folds {
            let local = d.subset(&f.test).class_counts();
            for (l, g) in local.iter().zip(&global) {
                let expect = *g as f64 / k as f64;
                assert!((*l as f64 - expect).abs() <= 1.0);
            }
        }
        assert_eq!(folds, kfold_split(&d, k, 3).unwrap());
        assert!(kfold_split(&d, 6, 0).is_err());
        assert!(kfold_split(&d, 1, 0).is_err());
    }

    #[test]
    fn leave_one_out_on_single_class() {
        let d = labelled(&[6]);
        let folds = kfold_split(&d, 6, 0).unwrap();
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..6).collect::<Vec<_>>());
        assert!(folds.iter().all(|f| f.test.len() == 1));
    }

    #[test]
    fn report_rows_sum_to_class_counts() {
        let d = labelled(&[3, 4]);
        let stump = Tree::stump(1, 1.5, vec![2, 0], vec![0, 2]);
        let m = ForestModel::from_trees(d.classes().to_vec(), 2, vec![stump]).unwrap();
        let r = evaluate(&m, &d).unwrap();
        let rows: Vec<usize> = r.confusion.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(rows, d.class_counts());
        assert!((0.0..=1.0).contains(&r.accuracy));
        assert!((r.hamming_loss - (1.0 - r.accuracy)).abs() < 1e-12);
        assert!(evaluate(&m, &d.subset(&[])).is_err());
    }
}
