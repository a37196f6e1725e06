//! Single-model workflows: descriptor caches and trained map + classifier
//! pipelines that can be saved and reloaded.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{build_map, ExperimentConfig, Method, Prepared};
use crate::descriptor::{LogCovDescriptor, LogEps};
use crate::error::{Error, Result};
use crate::featmap::{DenseMatrix, FeatureMapModel, MapDocument, RbfParams};
use crate::learn::{train_kernel_svm, train_linear_svm, KernelSvmModel, LinearSvmDocument, LinearSvmModel};

pub const PIPELINE_FORMAT_VERSION: u32 = 1;

/// Descriptors of a dataset as written by the `descriptors` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorCache {
    pub version: u32,
    pub dataset: String,
    pub eps: LogEps,
    pub labels: Vec<String>,
    /// `None` where the descriptor could not be computed.
    pub descriptors: Vec<Option<DenseMatrix>>,
    pub failures: Vec<(usize, String)>,
}

impl DescriptorCache {
    pub fn new(dataset: &str, eps: LogEps, labels: Vec<String>, set: &super::DescriptorSet) -> Self {
        Self {
            version: PIPELINE_FORMAT_VERSION,
            dataset: dataset.to_string(),
            eps,
            labels,
            descriptors: set
                .descriptors
                .iter()
                .map(|d| d.as_ref().map(|d| DenseMatrix::from(&d.view().to_owned())))
                .collect(),
            failures: set.failures.clone(),
        }
    }

    pub fn to_descriptors(&self) -> Result<Vec<Option<LogCovDescriptor>>> {
        self.descriptors
            .iter()
            .map(|d| d.as_ref().map(|m| LogCovDescriptor::from_matrix(m.to_array()?)).transpose())
            .collect()
    }
}

/// A trained classifier over descriptors.
#[derive(Debug, Clone)]
pub enum Pipeline {
    Linear { map: FeatureMapModel, svm: LinearSvmModel },
    Kernel(KernelSvmModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "classifier", rename_all = "snake_case")]
pub enum PipelineBody {
    Linear {
        map: MapDocument,
        svm: LinearSvmDocument,
    },
    Kernel {
        classes: Vec<String>,
        sigma: f64,
        c: f64,
        bias: f64,
        dual_coefs: DenseMatrix,
        support: Vec<DenseMatrix>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineDocument {
    pub version: u32,
    pub method: Method,
    pub eps: LogEps,
    #[serde(flatten)]
    pub body: PipelineBody,
}

/// Trains `cfg.method` at feature dimension `nu` on the training part.
pub fn train_pipeline(data: &Prepared, cfg: &ExperimentConfig, nu: usize) -> Result<Pipeline> {
    cfg.validate()?;
    let svm = cfg.svm(cfg.seed);
    match cfg.method {
        Method::Exact => Ok(Pipeline::Kernel(train_kernel_svm(
            &data.train,
            &data.train_labels,
            RbfParams::new(cfg.sigma)?,
            &svm,
        )?)),
        Method::Map(kind) => {
            let map = build_map(cfg, kind, nu, data, cfg.seed)?.ok_or_else(|| {
                Error::Contract(format!("{kind} cannot run at nu = {nu}"))
            })?;
            let feats = map.transform(&data.train)?;
            let svm = train_linear_svm(feats.view(), &data.train_labels, &svm)?;
            Ok(Pipeline::Linear { map, svm })
        }
    }
}

impl Pipeline {
    pub fn predict(&self, descriptors: &[LogCovDescriptor]) -> Result<Vec<String>> {
        match self {
            Pipeline::Linear { map, svm } => svm.predict(map.transform(descriptors)?.view()),
            Pipeline::Kernel(k) => k.predict(descriptors),
        }
    }

    pub fn to_document(&self, method: Method, eps: LogEps) -> PipelineDocument {
        let body = match self {
            Pipeline::Linear { map, svm } => PipelineBody::Linear {
                map: map.to_document(),
                svm: svm.to_document(),
            },
            Pipeline::Kernel(k) => PipelineBody::Kernel {
                classes: k.classes.clone(),
                sigma: k.sigma,
                c: k.c,
                bias: k.bias,
                dual_coefs: DenseMatrix::from(&k.dual_coefs),
                support: k.support_inputs.iter().map(|d| DenseMatrix::from(&d.view().to_owned())).collect(),
            },
        };
        PipelineDocument {
            version: PIPELINE_FORMAT_VERSION,
            method,
            eps,
            body,
        }
    }

    pub fn from_document(doc: &PipelineDocument) -> Result<Self> {
        if doc.version != PIPELINE_FORMAT_VERSION {
            return Err(Error::Contract(format!("unsupported model document version {}", doc.version)));
        }
        match &doc.body {
            PipelineBody::Linear { map, svm } => Ok(Pipeline::Linear {
                map: FeatureMapModel::from_document(map)?,
                svm: LinearSvmModel::from_document(svm)?,
            }),
            PipelineBody::Kernel {
                classes,
                sigma,
                c,
                bias,
                dual_coefs,
                support,
            } => {
                let dual_coefs: Array2<f64> = dual_coefs.to_array()?;
                if dual_coefs.dim() != (classes.len(), support.len()) {
                    return Err(Error::Contract("kernel model shapes disagree".into()));
                }
                let support_inputs = support
                    .iter()
                    .map(|m| LogCovDescriptor::from_matrix(m.to_array()?))
                    .collect::<Result<_>>()?;
                Ok(Pipeline::Kernel(KernelSvmModel {
                    classes: classes.clone(),
                    dual_coefs,
                    support_inputs,
                    sigma: *sigma,
                    c: *c,
                    bias: *bias,
                }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{compute_descriptors, synth_dataset, SynthConfig};
    use crate::featmap::FeatureMapKind;

    fn data() -> Prepared {
        let ds = synth_dataset(&SynthConfig {
            classes: 2,
            per_class: 6,
            joints: 3,
            frames: (20, 25),
            noise: 0.05,
            seed: 4,
        })
        .unwrap();
        let set = compute_descriptors(&ds, LogEps::Auto).unwrap();
        Prepared::from_parts(&set.descriptors, &ds.labels(), &ds.split).unwrap()
    }

    #[test]
    fn pipelines_survive_serialization() {
        let data = data();
        for method in [Method::Exact, Method::Map(FeatureMapKind::KronPi), Method::Map(FeatureMapKind::Perceptron)] {
            let cfg = ExperimentConfig {
                method,
                mlp: crate::perceptron::MlpConfig {
                    max_epochs: 20,
                    ..Default::default()
                },
                ..ExperimentConfig::default()
            };
            let p = train_pipeline(&data, &cfg, 20).unwrap();
            let doc = p.to_document(method, LogEps::Auto);
            let json = serde_json::to_string(&doc).unwrap();
            let back = Pipeline::from_document(&serde_json::from_str(&json).unwrap()).unwrap();
            assert_eq!(back.predict(&data.test).unwrap(), p.predict(&data.test).unwrap(), "{method}");
        }
    }
}
