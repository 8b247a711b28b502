//! Model file format: one line of JSON (settings, vocabularies, tag set,
//! matrix dimensions) followed by every parameter group as little-endian
//! 64-bit floats in canonical group order.
//!
//! The header's matrix list is validated against the reconstructed shapes on
//! load, and the payload length must match exactly. Saving the same model
//! twice produces byte-identical files.

use crate::char_conv::CharConvParams;
use crate::corpus::{TagSet, Vocabulary};
use crate::error::{Error, Result};
use crate::features::{CapClass, EmbeddingTable, HandcraftedFeatureSpec};
use crate::inference::TransitionParams;
use crate::model::{ModelParams, ParamGroup};
use crate::num::Scalar;
use crate::scorer::{ModelVariant, ScorerParams, VariantKind};
use crate::trainer::Hyperparameters;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

const FORMAT_NAME: &str = "charwnn-model";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct HeaderHp {
    word_dim: usize,
    word_window: usize,
    char_dim: usize,
    char_window: usize,
    conv_units: usize,
    hidden_units: usize,
    learning_rate: f64,
    max_epochs: usize,
    seed: u64,
    freeze_word_embeddings: bool,
    lr_decay: bool,
    decode_mask: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderFeatures {
    capitalization: bool,
    suffix: bool,
    suffix_length: usize,
    feature_dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixInfo {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
    variant: String,
    hyperparameters: HeaderHp,
    features: HeaderFeatures,
    word_entries: Option<Vec<String>>,
    char_entries: Option<Vec<String>>,
    suffix_entries: Option<Vec<String>>,
    tags: Vec<String>,
    matrices: Vec<MatrixInfo>,
}

fn group_shape<F: Scalar>(model: &ModelParams<F>, group: ParamGroup) -> (usize, usize) {
    match group {
        ParamGroup::WordTable => {
            let t = model.word_table.as_ref().unwrap();
            (t.dim(), t.vocab().len())
        }
        ParamGroup::CharTable => {
            let t = &model.char_conv.as_ref().unwrap().char_table;
            (t.dim(), t.vocab().len())
        }
        ParamGroup::ConvWeights => {
            let c = model.char_conv.as_ref().unwrap();
            (c.conv_weights.nrows(), c.conv_weights.ncols())
        }
        ParamGroup::ConvBias => (1, model.char_conv.as_ref().unwrap().conv_bias.len()),
        ParamGroup::CapsTable => {
            let t = model.caps_table.as_ref().unwrap();
            (t.dim(), t.vocab().len())
        }
        ParamGroup::SuffixTable => {
            let t = model.suffix_table.as_ref().unwrap();
            (t.dim(), t.vocab().len())
        }
        ParamGroup::HiddenWeights => (
            model.scorer.hidden_weights.nrows(),
            model.scorer.hidden_weights.ncols(),
        ),
        ParamGroup::HiddenBias => (1, model.scorer.hidden_bias.len()),
        ParamGroup::OutputWeights => (
            model.scorer.output_weights.nrows(),
            model.scorer.output_weights.ncols(),
        ),
        ParamGroup::OutputBias => (1, model.scorer.output_bias.len()),
        ParamGroup::Transitions => (
            model.transitions.transitions.nrows(),
            model.transitions.transitions.ncols(),
        ),
        ParamGroup::Start => (1, model.transitions.start.len()),
    }
}

/// Writes the model: JSON header line, then the parameter payload.
pub fn save_model<F: Scalar>(model: &ModelParams<F>, mut writer: impl Write) -> Result<()> {
    let hp = &model.hp;
    let header = ModelHeader {
        format: FORMAT_NAME.to_string(),
        version: FORMAT_VERSION,
        variant: model.variant.kind.as_str().to_string(),
        hyperparameters: HeaderHp {
            word_dim: hp.word_dim,
            word_window: hp.word_window,
            char_dim: hp.char_dim,
            char_window: hp.char_window,
            conv_units: hp.conv_units,
            hidden_units: hp.hidden_units,
            learning_rate: hp.learning_rate,
            max_epochs: hp.max_epochs,
            seed: hp.seed,
            freeze_word_embeddings: hp.freeze_word_embeddings,
            lr_decay: hp.lr_decay,
            decode_mask: hp.decode_mask,
        },
        features: HeaderFeatures {
            capitalization: model.variant.handcrafted.capitalization,
            suffix: model.variant.handcrafted.suffix,
            suffix_length: model.variant.handcrafted.suffix_length,
            feature_dim: model.variant.handcrafted.feature_dim,
        },
        word_entries: model
            .word_table
            .as_ref()
            .map(|t| t.vocab().entries().to_vec()),
        char_entries: model
            .char_conv
            .as_ref()
            .map(|c| c.char_table.vocab().entries().to_vec()),
        suffix_entries: model
            .suffix_table
            .as_ref()
            .map(|t| t.vocab().entries().to_vec()),
        tags: model.tags.names().to_vec(),
        matrices: model
            .group_order()
            .into_iter()
            .map(|g| {
                let (rows, cols) = group_shape(model, g);
                MatrixInfo {
                    name: g.name().to_string(),
                    rows,
                    cols,
                }
            })
            .collect(),
    };
    let header_json =
        serde_json::to_string(&header).map_err(|e| Error::Model(format!("header: {e}")))?;
    writer.write_all(header_json.as_bytes())?;
    writer.write_all(b"\n")?;
    for group in model.group_order() {
        let values = model.group_values(group).expect("group present");
        for v in values {
            writer.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a model written by [`save_model`].
pub fn load_model<F: Scalar>(mut reader: impl BufRead) -> Result<ModelParams<F>> {
    let mut header_line = String::new();
    reader.read_line(&mut header_line)?;
    let header: ModelHeader = serde_json::from_str(header_line.trim_end())
        .map_err(|e| Error::Model(format!("bad header: {e}")))?;
    if header.format != FORMAT_NAME {
        return Err(Error::Model(format!(
            "not a model file (format {:?})",
            header.format
        )));
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::Model(format!(
            "unsupported format version {} (expected {FORMAT_VERSION})",
            header.version
        )));
    }
    let kind = VariantKind::parse(&header.variant)
        .ok_or_else(|| Error::Model(format!("unknown variant {:?}", header.variant)))?;
    let handcrafted = HandcraftedFeatureSpec {
        capitalization: header.features.capitalization,
        suffix: header.features.suffix,
        suffix_length: header.features.suffix_length,
        feature_dim: header.features.feature_dim,
    };
    let variant = ModelVariant { kind, handcrafted };
    let h = &header.hyperparameters;
    let hp = Hyperparameters {
        word_dim: h.word_dim,
        word_window: h.word_window,
        char_dim: h.char_dim,
        char_window: h.char_window,
        conv_units: h.conv_units,
        hidden_units: h.hidden_units,
        learning_rate: h.learning_rate,
        max_epochs: h.max_epochs,
        seed: h.seed,
        variant,
        freeze_word_embeddings: h.freeze_word_embeddings,
        lr_decay: h.lr_decay,
        decode_mask: h.decode_mask,
    };
    let tags = TagSet::from_tags(&header.tags)
        .map_err(|e| Error::Model(format!("bad tag set: {e}")))?;
    if tags.names() != header.tags.as_slice() {
        return Err(Error::Model("tag list is not in canonical order".into()));
    }

    let word_table = header
        .word_entries
        .as_ref()
        .map(|e| EmbeddingTable::zeros(Vocabulary::from_entries(e), hp.word_dim));
    let char_conv = header.char_entries.as_ref().map(|e| {
        let table = EmbeddingTable::zeros(Vocabulary::from_entries(e), hp.char_dim);
        let input = hp.char_dim * hp.char_window;
        CharConvParams {
            char_table: table,
            conv_weights: Array2::zeros((hp.conv_units, input)),
            conv_bias: Array1::zeros(hp.conv_units),
            window: hp.char_window,
        }
    });
    let caps_table = variant
        .uses_capitalization()
        .then(|| EmbeddingTable::zeros(CapClass::vocabulary(), handcrafted.feature_dim));
    let suffix_table = header
        .suffix_entries
        .as_ref()
        .map(|e| EmbeddingTable::zeros(Vocabulary::from_entries(e), handcrafted.feature_dim));

    let rep_dim = word_table.as_ref().map_or(0, |t| t.dim())
        + char_conv.as_ref().map_or(0, |c| c.units())
        + caps_table.as_ref().map_or(0, |t| t.dim())
        + suffix_table.as_ref().map_or(0, |t| t.dim());
    let mut model = ModelParams {
        variant,
        hp,
        word_table,
        char_conv,
        caps_table,
        suffix_table,
        scorer: ScorerParams {
            hidden_weights: Array2::zeros((
                header.hyperparameters.hidden_units,
                rep_dim * header.hyperparameters.word_window,
            )),
            hidden_bias: Array1::zeros(header.hyperparameters.hidden_units),
            output_weights: Array2::zeros((tags.len(), header.hyperparameters.hidden_units)),
            output_bias: Array1::zeros(tags.len()),
            word_window: header.hyperparameters.word_window,
        },
        transitions: TransitionParams::zeros(tags.len()),
        tags,
    };

    let groups = model.group_order();
    if groups.len() != header.matrices.len() {
        return Err(Error::Model(format!(
            "header lists {} matrices, variant needs {}",
            header.matrices.len(),
            groups.len()
        )));
    }
    for (group, info) in groups.iter().zip(&header.matrices) {
        if group.name() != info.name {
            return Err(Error::Model(format!(
                "matrix order mismatch: expected {}, header says {}",
                group.name(),
                info.name
            )));
        }
        let (rows, cols) = group_shape(&model, *group);
        if (rows, cols) != (info.rows, info.cols) {
            return Err(Error::Model(format!(
                "matrix {}: header says {}x{}, reconstructed {}x{}",
                info.name, info.rows, info.cols, rows, cols
            )));
        }
        let slice = model.group_slice_mut(*group);
        let mut buf = [0u8; 8];
        for v in slice.iter_mut() {
            reader.read_exact(&mut buf).map_err(|e| {
                Error::Model(format!("payload truncated in {}: {e}", info.name))
            })?;
            *v = F::from_f64(f64::from_le_bytes(buf));
        }
    }
    let mut trailing = [0u8; 1];
    match reader.read(&mut trailing)? {
        0 => Ok(model),
        _ => Err(Error::Model("trailing bytes after payload".into())),
    }
}
