use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EncoderParams, LayerSpec, Padding};
use crate::losses::LossKind;
use crate::Result;

/// JSON model file: architecture, flat parameters (per layer weights then
/// biases), training seed and loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub arch: Vec<LayerSpec>,
    #[serde(default)]
    pub padding: Padding,
    pub params: Vec<f64>,
    pub seed: u64,
    pub loss_kind: LossKind,
}

impl Checkpoint {
    pub fn new(params: &EncoderParams, seed: u64, loss_kind: LossKind) -> Self {
        Self { arch: params.arch(), padding: params.padding(), params: params.to_flat(), seed, loss_kind }
    }

    pub fn params(&self) -> Result<EncoderParams> {
        EncoderParams::from_flat(&self.arch, self.padding, &self.params)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_slice(&std::fs::read(path)?)?;
        ck.params()?;
        Ok(ck)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}
