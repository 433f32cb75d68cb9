//! The language agent: image encoder, word encoder, word decoder and image
//! decoder, plus the four training configurations built from them.
//!
//! Encoding discretizes the continuous latent at 0.5 (strict: exactly 0.5
//! maps to 0). Training always regresses the continuous pre-discretization
//! output; the threshold is applied only at read-out.

use crate::error::CoreError;
use crate::glyphset::{Image, IMAGE_LEN};
use crate::net::{deserialize_mlp, serialize_mlp, train_step, ChainLink, Mlp, TrainConfig};
use rand::Rng;
use std::fs;
use std::path::Path;

/// Layer sizes of the four sub-networks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentArch {
    pub ei: Vec<usize>,
    pub ew: Vec<usize>,
    pub dw: Vec<usize>,
    pub di: Vec<usize>,
}

impl AgentArch {
    /// The standard architecture: 784x128xn_l image nets, n_l^3 word nets.
    pub fn symmetric(n_l: usize) -> Self {
        AgentArch {
            ei: vec![IMAGE_LEN, 128, n_l],
            ew: vec![n_l, n_l, n_l],
            dw: vec![n_l, n_l, n_l],
            di: vec![n_l, 128, IMAGE_LEN],
        }
    }

    /// An asymmetric word encoder (e.g. 20x18x15); the word decoder mirrors
    /// it and the image nets adapt at both ends.
    pub fn with_word_encoder(ew: Vec<usize>) -> Result<Self, CoreError> {
        if ew.len() < 2 {
            return Err(CoreError::InvalidConfig(
                "word encoder needs >=2 layers".into(),
            ));
        }
        let first = ew[0];
        let n_l = *ew.last().unwrap();
        let dw: Vec<usize> = ew.iter().rev().copied().collect();
        let arch = AgentArch {
            ei: vec![IMAGE_LEN, 128, first],
            dw,
            di: vec![first, 128, IMAGE_LEN],
            ew,
        };
        debug_assert_eq!(arch.n_l(), n_l);
        arch.validate()?;
        Ok(arch)
    }

    /// Signal width: the word encoder's output layer.
    pub fn n_l(&self) -> usize {
        *self.ew.last().unwrap()
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let chained = [
            (self.ei.last(), self.ew.first(), "E_i -> E_w"),
            (self.ew.last(), self.dw.first(), "E_w -> D_w"),
            (self.dw.last(), self.di.first(), "D_w -> D_i"),
        ];
        for (out, inp, name) in chained {
            match (out, inp) {
                (Some(o), Some(i)) if o == i => {}
                _ => {
                    return Err(CoreError::InvalidConfig(format!(
                        "architecture mismatch at {name}: {:?}",
                        self
                    )))
                }
            }
        }
        if self.ei.first() != Some(&IMAGE_LEN) || self.di.last() != Some(&IMAGE_LEN) {
            return Err(CoreError::InvalidConfig(
                "image nets must start/end at 784".into(),
            ));
        }
        Ok(())
    }
}

/// A binary word of the evolved language.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signal {
    bits: Vec<u8>,
}

impl Signal {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self, CoreError> {
        if bits.iter().any(|&b| b > 1) {
            return Err(CoreError::InvalidConfig("signal bits must be 0/1".into()));
        }
        Ok(Signal { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| b as f64).collect()
    }
}

/// Componentwise threshold; strictly greater than 0.5 maps to 1.
pub fn discretize(latent: &[f64]) -> Signal {
    Signal {
        bits: latent.iter().map(|&z| u8::from(z > 0.5)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub ei: Mlp,
    pub ew: Mlp,
    pub dw: Mlp,
    pub di: Mlp,
    arch: AgentArch,
}

impl Agent {
    pub fn new_naive<R: Rng + ?Sized>(arch: &AgentArch, rng: &mut R) -> Result<Self, CoreError> {
        arch.validate()?;
        Ok(Agent {
            ei: Mlp::init(&arch.ei, rng)?,
            ew: Mlp::init(&arch.ew, rng)?,
            dw: Mlp::init(&arch.dw, rng)?,
            di: Mlp::init(&arch.di, rng)?,
            arch: arch.clone(),
        })
    }

    pub fn arch(&self) -> &AgentArch {
        &self.arch
    }

    pub fn n_l(&self) -> usize {
        self.arch.n_l()
    }

    /// Continuous pre-discretization latent, every component in (0,1).
    pub fn encode_latent(&self, image: &Image) -> Vec<f64> {
        self.encode_latent_f64(&image.to_f64())
    }

    pub(crate) fn encode_latent_f64(&self, pixels: &[f64]) -> Vec<f64> {
        let z = self.ei.forward(pixels).expect("image width fixed");
        self.ew.forward(&z).expect("arch validated")
    }

    pub fn encode(&self, image: &Image) -> Signal {
        discretize(&self.encode_latent(image))
    }

    pub fn decode(&self, signal: &Signal) -> Result<Image, CoreError> {
        let z = self.dw.forward(&signal.to_f64())?;
        let y = self.di.forward(&z)?;
        Image::from_pixels(y.iter().map(|&v| v as f32).collect())
    }

    /// Supervised step on the encoder chain [E_i, E_w] against binary
    /// signal targets.
    pub fn train_encoder_pair(
        &mut self,
        image: &[f64],
        signal: &[f64],
        cfg: &TrainConfig,
    ) -> Result<f64, CoreError> {
        let mut chain = [
            ChainLink::trainable(&mut self.ei),
            ChainLink::trainable(&mut self.ew),
        ];
        train_step(&mut chain, image, signal, cfg)
    }

    /// Supervised step on the decoder chain [D_w, D_i].
    pub fn train_decoder_pair(
        &mut self,
        signal: &[f64],
        image: &[f64],
        cfg: &TrainConfig,
    ) -> Result<f64, CoreError> {
        let mut chain = [
            ChainLink::trainable(&mut self.dw),
            ChainLink::trainable(&mut self.di),
        ];
        train_step(&mut chain, signal, image, cfg)
    }

    /// Unsupervised step on the outer autoencoder [E_i, D_i].
    pub fn train_outer(&mut self, image: &[f64], cfg: &TrainConfig) -> Result<f64, CoreError> {
        let mut chain = [
            ChainLink::trainable(&mut self.ei),
            ChainLink::trainable(&mut self.di),
        ];
        train_step(&mut chain, image, image, cfg)
    }

    /// Unsupervised step on the inner autoencoder [E_w, D_w]: the agent's
    /// own image encoder produces the latent, with no update to E_i.
    pub fn train_inner(&mut self, image: &[f64], cfg: &TrainConfig) -> Result<f64, CoreError> {
        let z = self.ei.forward(image)?;
        let mut chain = [
            ChainLink::trainable(&mut self.ew),
            ChainLink::trainable(&mut self.dw),
        ];
        train_step(&mut chain, &z, &z, cfg)
    }

    pub fn snapshot(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(AGENT_MAGIC);
        buf.extend_from_slice(&AGENT_VERSION.to_le_bytes());
        for net in [&self.ei, &self.ew, &self.dw, &self.di] {
            serialize_mlp(net, &mut buf);
        }
        buf
    }

    pub fn restore(data: &[u8]) -> Result<Self, CoreError> {
        if data.len() < 8 || &data[..4] != AGENT_MAGIC {
            return Err(CoreError::Format("not an agent snapshot".into()));
        }
        let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
        if version != AGENT_VERSION {
            return Err(CoreError::Version {
                found: version,
                expected: AGENT_VERSION,
            });
        }
        let mut pos = 8;
        let ei = deserialize_mlp(data, &mut pos)?;
        let ew = deserialize_mlp(data, &mut pos)?;
        let dw = deserialize_mlp(data, &mut pos)?;
        let di = deserialize_mlp(data, &mut pos)?;
        if pos != data.len() {
            return Err(CoreError::Format("trailing bytes in snapshot".into()));
        }
        let arch = AgentArch {
            ei: ei.layer_sizes().to_vec(),
            ew: ew.layer_sizes().to_vec(),
            dw: dw.layer_sizes().to_vec(),
            di: di.layer_sizes().to_vec(),
        };
        arch.validate()?;
        Ok(Agent {
            ei,
            ew,
            dw,
            di,
            arch,
        })
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<(), CoreError> {
        fs::write(path, self.snapshot())?;
        Ok(())
    }

    pub fn load_snapshot(path: &Path) -> Result<Self, CoreError> {
        Agent::restore(&fs::read(path)?)
    }
}

const AGENT_MAGIC: &[u8; 4] = b"SAGT";
const AGENT_VERSION: u32 = 1;
