//! Plain-text model files.
//!
//! ```text
//! MIDAS-MODEL 1 <forest|svm|mlp>
//! encoding context <0|1> gender <0|1>
//! features <d>
//! classes <k> <name>...
//! ```
//!
//! followed by the family body. Floats are written in shortest round-trip
//! form, so a saved model reloads bit-identical.

use std::fmt::Display;
use std::io::{BufRead, Write};

use super::{FeatureEncoding, ForestModel, MlpModel, Model, Node, Standardizer, SvmModel, Tree, TrainedModel};
use super::Classifier;
use crate::error::{Error, Result};

const MAGIC: &str = "MIDAS-MODEL";

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn io_err(source: std::io::Error) -> Error {
    Error::Io { position: 0, source }
}

pub(super) fn write_model<W: Write>(m: &TrainedModel, mut out: W) -> Result<()> {
    let mut s = String::new();
    let model = &m.model;
    s += &format!("{MAGIC} 1 {}\n", model.kind());
    s += &format!(
        "encoding context {} gender {}\n",
        m.encoding.include_context as u8, m.encoding.include_gender as u8
    );
    s += &format!("features {}\n", model.n_features());
    s += &format!("classes {} {}\n", model.classes().len(), model.classes().join(" "));
    match model {
        Model::Forest(f) => {
            s += &format!("trees {}\n", f.trees().len());
            for t in f.trees() {
                s += &format!("tree {}\n", t.nodes.len());
                for n in &t.nodes {
                    match n {
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => s += &format!("split {feature} {threshold} {left} {right}\n"),
                        Node::Leaf { counts } => s += &format!("leaf {}\n", join(counts)),
                    }
                }
            }
        }
        Model::Svm(v) => {
            s += &format!("mean {}\nstd {}\n", join(&v.scaler.mean), join(&v.scaler.std));
            for (w, b) in v.weights.iter().zip(&v.biases) {
                s += &format!("head {b} {}\n", join(w));
            }
        }
        Model::Mlp(p) => {
            s += &format!("hidden {}\n", p.hidden);
            s += &format!("mean {}\nstd {}\n", join(&p.scaler.mean), join(&p.scaler.std));
            s += &format!("params {}\n", join(&p.params));
        }
    }
    out.write_all(s.as_bytes()).map_err(io_err)?;
    out.flush().map_err(io_err)
}

struct Lines<R> {
    input: R,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<Vec<String>> {
        let mut buf = String::new();
        loop {
            buf.clear();
            self.line += 1;
            if self.input.read_line(&mut buf).map_err(io_err)? == 0 {
                return Err(Error::parse(self.line, "unexpected end of model file"));
            }
            let words: Vec<String> = buf.split_whitespace().map(str::to_owned).collect();
            if !words.is_empty() {
                return Ok(words);
            }
        }
    }

    /// Next line, which must start with `key`; returns the remaining words.
    fn expect(&mut self, key: &str) -> Result<Vec<String>> {
        let mut w = self.next()?;
        if w[0] != key {
            return Err(Error::parse(self.line, format!("expected `{key}`, found `{}`", w[0])));
        }
        w.remove(0);
        Ok(w)
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse()
            .map_err(|_| Error::parse(self.line, format!("bad number {s:?}")))
    }

    fn nums<T: std::str::FromStr>(&self, words: &[String], n: usize) -> Result<Vec<T>> {
        if words.len() != n {
            return Err(Error::parse(self.line, format!("expected {n} values, found {}", words.len())));
        }
        words.iter().map(|w| self.num(w)).collect()
    }

    fn one<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let w = self.expect(key)?;
        Ok(self.nums::<T>(&w, 1)?.remove(0))
    }
}

fn flag(l: &Lines<impl BufRead>, s: &str) -> Result<bool> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::parse(l.line, format!("expected 0 or 1, found {s:?}"))),
    }
}

pub(super) fn read_model<R: BufRead>(input: R) -> Result<TrainedModel> {
    let mut l = Lines { input, line: 0 };
    let head = l.expect(MAGIC)?;
    if head.len() != 2 {
        return Err(Error::parse(l.line, "expected `MIDAS-MODEL 1 <kind>`"));
    }
    if head[0] != "1" {
        return Err(Error::Format(format!("unsupported model version {}", head[0])));
    }
    let kind = head[1].clone();
    let enc = l.expect("encoding")?;
    if enc.len() != 4 || enc[0] != "context" || enc[2] != "gender" {
        return Err(Error::parse(l.line, "expected `encoding context <0|1> gender <0|1>`"));
    }
    let encoding = FeatureEncoding {
        include_context: flag(&l, &enc[1])?,
        include_gender: flag(&l, &enc[3])?,
    };
    let d: usize = l.one("features")?;
    let cls = l.expect("classes")?;
    let k: usize = cls.first().map(|c| l.num(c)).transpose()?.unwrap_or(0);
    if k < 2 || cls.len() != k + 1 {
        return Err(Error::parse(l.line, "class line must list at least 2 names"));
    }
    let classes: Vec<String> = cls[1..].to_vec();
    if classes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::parse(l.line, "class names must be sorted and distinct"));
    }

    let scaler = |l: &mut Lines<R>| -> Result<Standardizer> {
        let w = l.expect("mean")?;
        let mean = l.nums(&w, d)?;
        let w = l.expect("std")?;
        let std = l.nums(&w, d)?;
        Ok(Standardizer { mean, std })
    };

    let model = match kind.as_str() {
        "forest" => {
            let n: usize = l.one("trees")?;
            let mut trees = Vec::with_capacity(n);
            for _ in 0..n {
                let m: usize = l.one("tree")?;
                let mut nodes = Vec::with_capacity(m);
                for _ in 0..m {
                    let w = l.next()?;
                    nodes.push(match w[0].as_str() {
                        "split" if w.len() == 5 => Node::Split {
                            feature: l.num(&w[1])?,
                            threshold: l.num(&w[2])?,
                            left: l.num(&w[3])?,
                            right: l.num(&w[4])?,
                        },
                        "leaf" => Node::Leaf {
                            counts: l.nums(&w[1..], k)?,
                        },
                        _ => return Err(Error::parse(l.line, "expected a split or leaf node")),
                    });
                }
                trees.push(Tree { nodes });
            }
            Model::Forest(ForestModel::from_trees(classes, d, trees)?)
        }
        "svm" => {
            let scaler = scaler(&mut l)?;
            let mut weights = Vec::with_capacity(k);
            let mut biases = Vec::with_capacity(k);
            for _ in 0..k {
                let w = l.expect("head")?;
                let v: Vec<f64> = l.nums(&w, d + 1)?;
                biases.push(v[0]);
                weights.push(v[1..].to_vec());
            }
            Model::Svm(SvmModel {
                classes,
                scaler,
                weights,
                biases,
            })
        }
        "mlp" => {
            let hidden: usize = l.one("hidden")?;
            let scaler = scaler(&mut l)?;
            let w = l.expect("params")?;
            let n = hidden * d + hidden + k * hidden + k;
            let params = l.nums(&w, n)?;
            if hidden == 0 {
                return Err(Error::parse(l.line, "hidden units must be >= 1"));
            }
            Model::Mlp(MlpModel {
                classes,
                scaler,
                hidden,
                params,
            })
        }
        other => return Err(Error::Format(format!("unknown model kind {other:?}"))),
    };
    Ok(TrainedModel { encoding, model })
}
