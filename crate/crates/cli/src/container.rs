//! The versioned model container: magic `CCNN`, a format version, a JSON
//! metadata block, then named parameter sections of little-endian 32-bit
//! floats. Training runs in f64; the container is the only 32-bit surface.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crisiscnn_core::baselines::{LinearKind, LinearModel};
use crisiscnn_core::cnn::{CnnConfig, CnnParams};
use crisiscnn_core::corpus::{LabelSchema, Vocabulary};
use crisiscnn_core::embeddings::EmbeddingTable;
use crisiscnn_core::error::{Error, Result};
use crisiscnn_core::features::NgramVocab;
use crisiscnn_core::numerics::Matrix;

pub const MAGIC: &[u8; 4] = b"CCNN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CnnMeta {
    pub t_max: usize,
    pub embed_dim: usize,
    pub num_filters: usize,
    pub window: usize,
    pub pool_len: usize,
    pub dense_units: usize,
    pub num_classes: usize,
    pub dropout: f64,
    pub extra_dim: usize,
}

impl CnnMeta {
    pub fn to_config(&self) -> CnnConfig {
        CnnConfig {
            t_max: self.t_max,
            embed_dim: self.embed_dim,
            num_filters: self.num_filters,
            window: self.window,
            pool_len: self.pool_len,
            dense_units: self.dense_units,
            num_classes: self.num_classes,
            dropout_rate: self.dropout,
            extra_dim: self.extra_dim,
        }
    }

    pub fn from_config(cfg: &CnnConfig) -> Self {
        CnnMeta {
            t_max: cfg.t_max,
            embed_dim: cfg.embed_dim,
            num_filters: cfg.num_filters,
            window: cfg.window,
            pool_len: cfg.pool_len,
            dense_units: cfg.dense_units,
            num_classes: cfg.num_classes,
            dropout: cfg.dropout_rate,
            extra_dim: cfg.extra_dim,
        }
    }
}

/// Serialized n-gram feature pipeline (for linear models and the auxiliary
/// CNN channel).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub ngrams: Vec<String>,
    pub doc_freq: Vec<u32>,
    pub n_docs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<Vec<usize>>,
}

impl FeatureMeta {
    pub fn to_vocab(&self) -> Result<NgramVocab> {
        NgramVocab::from_parts(self.ngrams.clone(), self.doc_freq.clone(), self.n_docs)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContainerMeta {
    /// "cnn", "logistic", or "svm_hinge".
    pub kind: String,
    pub schema: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cnn: Option<CnnMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<u64>,
    pub data: Vec<f32>,
}

impl Tensor {
    fn vector(name: &str, values: &[f64]) -> Self {
        Tensor {
            name: name.to_string(),
            dims: vec![values.len() as u64],
            data: values.iter().map(|&v| v as f32).collect(),
        }
    }

    fn matrix(name: &str, m: &Matrix) -> Self {
        Tensor {
            name: name.to_string(),
            dims: vec![m.rows() as u64, m.cols() as u64],
            data: m.data().iter().map(|&v| v as f32).collect(),
        }
    }

    fn to_vec_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    fn to_matrix(&self) -> Result<Matrix> {
        if self.dims.len() != 2 {
            return Err(Error::invalid(format!("tensor {} is not a matrix", self.name)));
        }
        Matrix::from_vec(self.dims[0] as usize, self.dims[1] as usize, self.to_vec_f64())
    }
}

#[derive(Debug, Clone)]
pub struct ModelContainer {
    pub meta: ContainerMeta,
    pub tensors: Vec<Tensor>,
}

impl ModelContainer {
    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::to_vec(&self.meta).expect("metadata serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
            for &d in &t.dims {
                out.extend_from_slice(&d.to_le_bytes());
            }
            for &v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut cursor = Cursor::new(bytes);
        let bad = |what: &str| Error::invalid(format!("{}: {what}", origin.display()));

        let mut magic = [0u8; 4];
        cursor.read_exact(&mut magic).map_err(|_| bad("not a model container"))?;
        if &magic != MAGIC {
            return Err(bad("not a model container"));
        }
        let version = read_u32(&mut cursor).map_err(|_| bad("truncated header"))?;
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported container version {version}")));
        }
        let meta_len = read_u64(&mut cursor).map_err(|_| bad("truncated header"))? as usize;
        let mut meta_bytes = vec![0u8; meta_len];
        cursor.read_exact(&mut meta_bytes).map_err(|_| bad("truncated metadata"))?;
        let meta: ContainerMeta = serde_json::from_slice(&meta_bytes)
            .map_err(|e| bad(&format!("bad metadata: {e}")))?;

        let mut tensors = Vec::new();
        // Sections run to the end of the file.
        while let Ok(name_len) = read_u32(&mut cursor) {
            let mut name = vec![0u8; name_len as usize];
            cursor.read_exact(&mut name).map_err(|_| bad("truncated tensor name"))?;
            let name =
                String::from_utf8(name).map_err(|_| bad("tensor name is not UTF-8"))?;
            let rank = read_u32(&mut cursor).map_err(|_| bad("truncated tensor rank"))? as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(read_u64(&mut cursor).map_err(|_| bad("truncated tensor dims"))?);
            }
            let count: u64 = dims.iter().product();
            let mut data = Vec::with_capacity(count as usize);
            for _ in 0..count {
                let mut b = [0u8; 4];
                cursor.read_exact(&mut b).map_err(|_| bad("truncated tensor data"))?;
                data.push(f32::from_le_bytes(b));
            }
            tensors.push(Tensor { name, dims, data });
        }
        Ok(ModelContainer { meta, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::atomic_write(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::invalid(format!("container is missing tensor {name:?}")))
    }

    pub fn schema(&self) -> Result<LabelSchema> {
        LabelSchema::new(self.meta.schema.clone())
    }

    pub fn from_cnn(
        cfg: &CnnConfig,
        params: &CnnParams,
        vocab: &Vocabulary,
        schema: &LabelSchema,
        features: Option<FeatureMeta>,
    ) -> Self {
        let meta = ContainerMeta {
            kind: "cnn".to_string(),
            schema: schema.classes().to_vec(),
            vocab: Some(vocab.tokens().to_vec()),
            cnn: Some(CnnMeta::from_config(cfg)),
            features,
        };
        let tensors = vec![
            Tensor::matrix("embeddings", &params.embeddings.matrix),
            Tensor::matrix("filters", &params.filters),
            Tensor::vector("filter_bias", &params.filter_bias),
            Tensor::matrix("dense_w", &params.dense_w),
            Tensor::vector("dense_b", &params.dense_b),
            Tensor::matrix("out_w", &params.out_w),
            Tensor::vector("out_b", &params.out_b),
        ];
        ModelContainer { meta, tensors }
    }

    pub fn to_cnn(&self) -> Result<(CnnConfig, CnnParams, Vocabulary, LabelSchema)> {
        if self.meta.kind != "cnn" {
            return Err(Error::invalid(format!(
                "expected a cnn container, found kind {:?}",
                self.meta.kind
            )));
        }
        let cnn_meta = self
            .meta
            .cnn
            .as_ref()
            .ok_or_else(|| Error::invalid("cnn container without cnn metadata"))?;
        let cfg = cnn_meta.to_config();
        let vocab_tokens = self
            .meta
            .vocab
            .clone()
            .ok_or_else(|| Error::invalid("cnn container without a vocabulary"))?;
        let vocab = Vocabulary::from_tokens(vocab_tokens)?;
        let schema = self.schema()?;

        let embeddings = EmbeddingTable {
            matrix: self.tensor("embeddings")?.to_matrix()?,
            trainable: true,
            pretrained_overlap: None,
            warning: None,
        };
        let params = CnnParams {
            embeddings,
            filters: self.tensor("filters")?.to_matrix()?,
            filter_bias: self.tensor("filter_bias")?.to_vec_f64(),
            dense_w: self.tensor("dense_w")?.to_matrix()?,
            dense_b: self.tensor("dense_b")?.to_vec_f64(),
            out_w: self.tensor("out_w")?.to_matrix()?,
            out_b: self.tensor("out_b")?.to_vec_f64(),
        };
        params.check_shapes(&cfg)?;
        if params.embeddings.vocab_size() != vocab.len() {
            return Err(Error::invalid("embedding rows do not match the stored vocabulary"));
        }
        Ok((cfg, params, vocab, schema))
    }

    pub fn from_linear(
        model: &LinearModel,
        schema: &LabelSchema,
        features: FeatureMeta,
    ) -> Self {
        let meta = ContainerMeta {
            kind: model.kind.tag().to_string(),
            schema: schema.classes().to_vec(),
            vocab: None,
            cnn: None,
            features: Some(features),
        };
        let tensors = vec![
            Tensor::matrix("weights", &model.weights),
            Tensor::vector("bias", &model.bias),
        ];
        ModelContainer { meta, tensors }
    }

    pub fn to_linear(&self) -> Result<(LinearModel, LabelSchema)> {
        let kind = LinearKind::from_tag(&self.meta.kind)?;
        let weights = self.tensor("weights")?.to_matrix()?;
        let bias = self.tensor("bias")?.to_vec_f64();
        if weights.rows() != bias.len() {
            return Err(Error::invalid("linear container weight/bias shape mismatch"));
        }
        let schema = self.schema()?;
        if schema.len() != weights.rows() {
            return Err(Error::invalid("linear container class count mismatch"));
        }
        Ok((
            LinearModel { kind, weights, bias, l2_strength: 0.0, epochs: 0, seed: 0 },
            schema,
        ))
    }
}

fn read_u32(cursor: &mut Cursor<&[u8]>) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    cursor.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(cursor: &mut Cursor<&[u8]>) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    cursor.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crisiscnn_core::corpus::{build_vocab, LabeledExample, Origin};
    use crisiscnn_core::embeddings::random_init;

    fn sample_cnn() -> ModelContainer {
        let cfg = CnnConfig {
            t_max: 4,
            embed_dim: 3,
            num_filters: 2,
            window: 2,
            pool_len: 2,
            dense_units: 3,
            num_classes: 2,
            dropout_rate: 0.5,
            extra_dim: 0,
        };
        let examples = vec![LabeledExample {
            id: "x".into(),
            tokens: vec!["a".into(), "b".into(), "c".into()],
            label: 0,
            origin: Origin::Event,
        }];
        let vocab = build_vocab(&examples, 100.0).unwrap();
        let table = random_init(&vocab, cfg.embed_dim, 3, 0.25).unwrap();
        let params = CnnParams::init(&cfg, table, 4).unwrap();
        let schema = LabelSchema::binary();
        ModelContainer::from_cnn(&cfg, &params, &vocab, &schema, None)
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let container = sample_cnn();
        let bytes = container.to_bytes();
        let loaded = ModelContainer::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(loaded.to_bytes(), bytes);
    }

    #[test]
    fn cnn_round_trip_preserves_parameters_at_f32() {
        let container = sample_cnn();
        let bytes = container.to_bytes();
        let loaded = ModelContainer::from_bytes(&bytes, Path::new("mem")).unwrap();
        let (_, params, vocab, schema) = loaded.to_cnn().unwrap();
        assert_eq!(schema.len(), 2);
        assert_eq!(vocab.len(), 5);
        // Values pass through f32 exactly once; a second pass is an identity.
        for (a, b) in params.filters.data().iter().zip(container.tensor("filters").unwrap().to_vec_f64()) {
            assert_eq!(*a, b);
        }
    }

    #[test]
    fn wrong_magic_is_reported() {
        let mut bytes = sample_cnn().to_bytes();
        bytes[0] = b'X';
        let err = ModelContainer::from_bytes(&bytes, Path::new("m.ccnn")).unwrap_err();
        assert!(err.to_string().contains("not a model container"));
    }

    #[test]
    fn truncated_container_is_clean_error() {
        let bytes = sample_cnn().to_bytes();
        for cut in [3, 9, 20, bytes.len() - 5] {
            assert!(
                ModelContainer::from_bytes(&bytes[..cut], Path::new("m.ccnn")).is_err(),
                "cut at {cut} should fail"
            );
        }
    }
}
