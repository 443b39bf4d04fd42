//! Binary checkpoint format.
//!
//! ```text
//! "LGDQN"                      5 bytes
//! version                      u32 = 1
//! layer count                  u32
//! per layer:  rows u32, cols u32, weights f32[rows*cols] (row-major), biases f32[rows]
//! optimizer tag                u8  (0 none, 1 sgd-nesterov, 2 rmsprop, 3 adadelta)
//! per auxiliary buffer:        the layer blocks again, same layout
//! crc32 (IEEE) of all prior bytes, u32
//! ```
//!
//! Every integer and float is little-endian.

use std::fs;
use std::path::Path;

use super::{
    Algorithm, Hyperparameters, Layer, Network, NeuralError, OptimizerState, DEFAULT_DIMS,
};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"LGDQN";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_layers(out: &mut Vec<u8>, net: &Network<f32>) {
    for l in &net.layers {
        put_u32(out, l.rows as u32);
        put_u32(out, l.cols as u32);
        for v in l.weights.iter().chain(&l.biases) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

/// Serializes a network and optional optimizer state.
pub fn encode(net: &Network<f32>, opt: Option<&OptimizerState<f32>>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + net.num_params() * 4 * 3);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, net.layers.len() as u32);
    put_layers(&mut out, net);
    match opt {
        None => out.push(0),
        Some(o) => {
            out.push(o.algorithm.tag());
            for b in &o.buffers {
                put_layers(&mut out, b);
            }
        }
    }
    let crc = crc32fast::hash(&out);
    put_u32(&mut out, crc);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8], NeuralError> {
        if self.pos + n > self.bytes.len() {
            return Err(NeuralError::ShapeMismatch {
                field: field.to_string(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, field: &str) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, field: &str) -> Result<Vec<f32>, NeuralError> {
        let raw = self.take(n * 4, field)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn layers(
        &mut self,
        count: usize,
        prefix: &str,
        expect: Option<&[usize]>,
    ) -> Result<Network<f32>, NeuralError> {
        let mut layers = Vec::with_capacity(count);
        for i in 0..count {
            let rows = self.u32(&format!("{prefix}layer[{i}].rows"))? as usize;
            let cols = self.u32(&format!("{prefix}layer[{i}].cols"))? as usize;
            let ok = match expect {
                Some(dims) => dims[i] == cols && dims[i + 1] == rows,
                None => {
                    let in_ok = if i == 0 {
                        cols == DEFAULT_DIMS[0]
                    } else {
                        cols == layers.last().map(|l: &Layer<f32>| l.rows).unwrap()
                    };
                    let out_ok = i + 1 < count || rows == DEFAULT_DIMS[3];
                    in_ok && out_ok && rows > 0
                }
            };
            if !ok {
                return Err(NeuralError::ShapeMismatch {
                    field: format!("{prefix}layer[{i}] {rows}x{cols}"),
                });
            }
            let weights = self.f32s(rows * cols, &format!("{prefix}layer[{i}].weights"))?;
            let biases = self.f32s(rows, &format!("{prefix}layer[{i}].biases"))?;
            layers.push(Layer {
                rows,
                cols,
                weights,
                biases,
            });
        }
        Ok(Network { layers })
    }
}

/// Parses checkpoint bytes. Optimizer hyperparameters are not stored, so a
/// restored optimizer gets its algorithm's defaults.
pub fn decode(bytes: &[u8]) -> Result<(Network<f32>, Option<OptimizerState<f32>>), NeuralError> {
    let mut r = Reader { bytes, pos: 0 };
    if bytes.len() < CHECKPOINT_MAGIC.len() || &bytes[..5] != CHECKPOINT_MAGIC {
        return Err(NeuralError::BadMagic);
    }
    r.pos = 5;
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(NeuralError::BadVersion(version));
    }
    let count = r.u32("layer_count")? as usize;
    if count == 0 || count > 16 {
        return Err(NeuralError::ShapeMismatch {
            field: format!("layer_count {count}"),
        });
    }
    let net = r.layers(count, "", None)?;
    let tag = r.take(1, "optimizer_tag")?[0];
    let opt = if tag == 0 {
        None
    } else {
        let algorithm = Algorithm::from_tag(tag).ok_or(NeuralError::BadOptimizerTag(tag))?;
        let dims = net.dims();
        let mut buffers = Vec::new();
        for b in 0..algorithm.buffer_count() {
            buffers.push(r.layers(count, &format!("buffer[{b}].",), Some(&dims))?);
        }
        Some(OptimizerState {
            algorithm,
            hyper: Hyperparameters::defaults(algorithm),
            buffers,
        })
    };
    let body_end = r.pos;
    let stored = r.u32("checksum")?;
    if r.pos != bytes.len() {
        return Err(NeuralError::ShapeMismatch {
            field: format!("trailing {} byte(s)", bytes.len() - r.pos),
        });
    }
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(NeuralError::Checksum { stored, computed });
    }
    Ok((net, opt))
}

pub fn save_model(net: &Network<f32>, path: impl AsRef<Path>) -> Result<(), NeuralError> {
    fs::write(path, encode(net, None))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Network<f32>, NeuralError> {
    Ok(decode(&fs::read(path)?)?.0)
}

pub fn save_checkpoint(
    net: &Network<f32>,
    opt: &OptimizerState<f32>,
    path: impl AsRef<Path>,
) -> Result<(), NeuralError> {
    fs::write(path, encode(net, Some(opt)))?;
    Ok(())
}

pub fn load_checkpoint(
    path: impl AsRef<Path>,
) -> Result<(Network<f32>, Option<OptimizerState<f32>>), NeuralError> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Network<f32> {
        Network::with_dims(&[16, 4, 4, 128], 3)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = small();
        let mut opt = OptimizerState::with_defaults(Algorithm::AdaDelta, &net);
        for (i, v) in opt.buffers[1].params_mut().enumerate() {
            *v = i as f32 * 0.5;
        }
        let (back, back_opt) = decode(&encode(&net, Some(&opt))).unwrap();
        assert_eq!(back, net);
        assert_eq!(back_opt.unwrap(), opt);
        let (plain, none) = decode(&encode(&net, None)).unwrap();
        assert_eq!(plain, net);
        assert!(none.is_none());
    }

    #[test]
    fn truncated_file_is_shape_mismatch() {
        let bytes = encode(&small(), None);
        let err = decode(&bytes[..bytes.len() / 2]).unwrap_err();
        assert!(
            matches!(err, NeuralError::ShapeMismatch { ref field } if field.contains("layer")),
            "{err}"
        );
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode(&small(), None);
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(NeuralError::BadMagic)));
        let mut bytes = encode(&small(), None);
        bytes[5] = 9;
        assert!(matches!(decode(&bytes), Err(NeuralError::BadVersion(9))));
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let mut bytes = encode(&small(), None);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(decode(&bytes), Err(NeuralError::Checksum { .. })));
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&small(), None);
        assert_eq!(&bytes[..5], b"LGDQN");
        assert_eq!(u32::from_le_bytes(bytes[5..9].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[9..13].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[13..17].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[17..21].try_into().unwrap()), 16);
        let params = 16 * 4 + 4 + 4 * 4 + 4 + 128 * 4 + 128;
        assert_eq!(bytes.len(), 13 + 3 * 8 + params * 4 + 1 + 4);
    }
}
