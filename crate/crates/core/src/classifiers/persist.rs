//! Versioned JSON model files.
//!
//! Every file starts with the same header fields (`format_version`,
//! `classifier_type`, `feature_dim`, `classes`) followed by a
//! type-specific `model` object. Trees are stored as parallel flat arrays
//! indexed by node id, with `-1` where a link or class does not apply.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    ClassifierError, Dataset, DecisionTree, ForestModel, KnnModel, Model, ModelMetadata,
    NaiveBayesModel, Node, Result, SvmModel,
};
use crate::NUM_CLASSES;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u64,
    classifier_type: String,
    feature_dim: usize,
    classes: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct FileRepr<B> {
    #[serde(flatten)]
    header: Header,
    model: B,
}

#[derive(Serialize, Deserialize)]
struct TreeRepr {
    feature: Vec<i64>,
    threshold: Vec<f64>,
    left: Vec<i64>,
    right: Vec<i64>,
    class: Vec<i64>,
    counts: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct ForestRepr {
    seed: u64,
    metadata: ModelMetadata,
    trees: Vec<TreeRepr>,
}

#[derive(Serialize, Deserialize)]
struct SingleTreeRepr {
    tree: TreeRepr,
}

#[derive(Serialize, Deserialize)]
struct KnnRepr {
    k: usize,
    labels: Vec<u8>,
    features: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NbRepr {
    class_counts: Vec<u64>,
    active_counts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct SvmRepr {
    lambda: f64,
    weights: Vec<Vec<f64>>,
}

fn corrupt(msg: impl Into<String>) -> ClassifierError {
    ClassifierError::Corrupt(msg.into())
}

impl TreeRepr {
    fn from_tree(tree: &DecisionTree) -> Self {
        let n = tree.nodes().len();
        let mut r = TreeRepr {
            feature: Vec::with_capacity(n),
            threshold: Vec::with_capacity(n),
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            class: Vec::with_capacity(n),
            counts: Vec::with_capacity(n),
        };
        for node in tree.nodes() {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    r.feature.push(*feature as i64);
                    r.threshold.push(*threshold);
                    r.left.push(*left as i64);
                    r.right.push(*right as i64);
                    r.class.push(-1);
                    r.counts.push(Vec::new());
                }
                Node::Leaf {
                    class,
                    class_counts,
                } => {
                    r.feature.push(-1);
                    r.threshold.push(0.0);
                    r.left.push(-1);
                    r.right.push(-1);
                    r.class.push(*class as i64);
                    r.counts.push(class_counts.to_vec());
                }
            }
        }
        r
    }

    fn into_tree(self, feature_dim: usize) -> Result<DecisionTree> {
        let n = self.feature.len();
        if [
            self.threshold.len(),
            self.left.len(),
            self.right.len(),
            self.class.len(),
            self.counts.len(),
        ]
        .iter()
        .any(|&l| l != n)
        {
            return Err(corrupt("tree arrays differ in length"));
        }
        let idx = |v: i64| usize::try_from(v).map_err(|_| corrupt(format!("negative index {v}")));
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            if self.feature[i] >= 0 {
                nodes.push(Node::Split {
                    feature: idx(self.feature[i])?,
                    threshold: self.threshold[i],
                    left: idx(self.left[i])?,
                    right: idx(self.right[i])?,
                });
            } else {
                let counts: [u32; NUM_CLASSES] = self.counts[i]
                    .as_slice()
                    .try_into()
                    .map_err(|_| corrupt(format!("leaf {i} needs {NUM_CLASSES} class counts")))?;
                let class = u8::try_from(self.class[i])
                    .map_err(|_| corrupt(format!("leaf {i} has no class")))?;
                nodes.push(Node::Leaf {
                    class,
                    class_counts: counts,
                });
            }
        }
        DecisionTree::from_nodes(nodes, feature_dim)
    }
}

fn to_json(model: &Model) -> Result<String> {
    let header = Header {
        format_version: FORMAT_VERSION,
        classifier_type: model.kind().to_string(),
        feature_dim: model.feature_dim(),
        classes: model.classes(),
    };
    let json = match model {
        Model::Forest(m) => serde_json::to_string(&FileRepr {
            header,
            model: ForestRepr {
                seed: m.seed,
                metadata: m.metadata.clone(),
                trees: m.trees.iter().map(TreeRepr::from_tree).collect(),
            },
        }),
        Model::Tree(t) => serde_json::to_string(&FileRepr {
            header,
            model: SingleTreeRepr {
                tree: TreeRepr::from_tree(t),
            },
        }),
        Model::Knn(m) => serde_json::to_string(&FileRepr {
            header,
            model: KnnRepr {
                k: m.k,
                labels: m.train.labels().to_vec(),
                features: m.train.features().to_vec(),
            },
        }),
        Model::NaiveBayes(m) => serde_json::to_string(&FileRepr {
            header,
            model: NbRepr {
                class_counts: m.class_counts().to_vec(),
                active_counts: m.active_counts().to_vec(),
            },
        }),
        Model::Svm(m) => serde_json::to_string(&FileRepr {
            header,
            model: SvmRepr {
                lambda: m.lambda(),
                weights: m.weights().to_vec(),
            },
        }),
    };
    json.map_err(|e| corrupt(e.to_string()))
}

fn body<B: DeserializeOwned>(value: Value) -> Result<B> {
    serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))
}

fn from_json(text: &str) -> Result<Model> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| corrupt("missing format_version"))?;
    if version != FORMAT_VERSION {
        return Err(ClassifierError::UnsupportedVersion(version));
    }
    let model_value = value
        .as_object_mut()
        .and_then(|o| o.remove("model"))
        .ok_or_else(|| corrupt("missing model section"))?;
    let header: Header = body(value)?;
    let dim = header.feature_dim;
    if dim == 0 {
        return Err(corrupt("feature_dim must be positive"));
    }

    let model = match header.classifier_type.as_str() {
        "forest" => {
            let r: ForestRepr = body(model_value)?;
            if r.trees.is_empty() {
                return Err(corrupt("forest has no trees"));
            }
            let trees = r
                .trees
                .into_iter()
                .map(|t| t.into_tree(dim))
                .collect::<Result<Vec<_>>>()?;
            Model::Forest(ForestModel {
                trees,
                classes: header.classes.clone(),
                feature_dim: dim,
                seed: r.seed,
                metadata: r.metadata,
            })
        }
        "tree" => Model::Tree(body::<SingleTreeRepr>(model_value)?.tree.into_tree(dim)?),
        "knn" => {
            let r: KnnRepr = body(model_value)?;
            let train =
                Dataset::new(dim, r.features, r.labels).map_err(|e| corrupt(e.to_string()))?;
            Model::Knn(KnnModel::new(train, r.k).map_err(|e| corrupt(e.to_string()))?)
        }
        "nb" => {
            let r: NbRepr = body(model_value)?;
            let counts: [u64; NUM_CLASSES] = r
                .class_counts
                .try_into()
                .map_err(|_| corrupt("class_counts needs 10 entries"))?;
            Model::NaiveBayes(
                NaiveBayesModel::from_counts(dim, counts, r.active_counts)
                    .map_err(|e| corrupt(e.to_string()))?,
            )
        }
        "svm" => {
            let r: SvmRepr = body(model_value)?;
            Model::Svm(SvmModel::from_parts(
                dim,
                r.lambda,
                header.classes.clone(),
                r.weights,
            )?)
        }
        other => return Err(corrupt(format!("unknown classifier_type {other:?}"))),
    };
    Ok(model)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let json = to_json(model)?;
    fs::write(path, json).map_err(|source| ClassifierError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(|source| ClassifierError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|_| corrupt("model file is not UTF-8"))?;
    from_json(text)
}
