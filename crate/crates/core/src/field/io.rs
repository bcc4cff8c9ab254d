//! Binary parameter file.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic          8 bytes  "SDFVNET\0"
//! version        u32      1
//! hidden_width   u32
//! feature_width  u32
//! trunk_depth    u32      8
//! flags          u32      bit 0: mapping network, bit 1: modulation signals
//! [z_dim u32, mapping_hidden u32, w_dim u32, leaky_slope f32]   if bit 0
//! float_count    u64      number of f32 values that follow
//! field layers   trunk.0..7, sdf_head, color_film, color_head; weight then bias
//! mapping layers mapping.0..2, mapping.head                      if bit 0
//! modulation     all gammas, then all betas                      if bit 1
//! ```

use std::path::Path;

use super::layer::Linear;
use super::mapping::{MappingNetwork, ModulationSignals, MAPPING_DEPTH};
use super::network::{FieldNetwork, TRUNK_DEPTH};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAGIC: &[u8; 8] = b"SDFVNET\0";
pub const FORMAT_VERSION: u32 = 1;

const FLAG_MAPPING: u32 = 1;
const FLAG_MODULATION: u32 = 2;

/// Everything needed to evaluate a field: the network, optionally the
/// mapping network that conditions it and a fixed set of signals.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile<T> {
    pub field: FieldNetwork<T>,
    pub mapping: Option<MappingNetwork<T>>,
    pub modulation: Option<ModulationSignals<T>>,
}

impl<T: Real> ModelFile<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        let put = |out: &mut Vec<u8>, v: u32| out.extend_from_slice(&v.to_le_bytes());
        put(&mut out, FORMAT_VERSION);
        put(&mut out, self.field.hidden_width() as u32);
        put(&mut out, self.field.feature_width() as u32);
        put(&mut out, TRUNK_DEPTH as u32);
        let flags = if self.mapping.is_some() { FLAG_MAPPING } else { 0 }
            | if self.modulation.is_some() { FLAG_MODULATION } else { 0 };
        put(&mut out, flags);
        if let Some(m) = &self.mapping {
            put(&mut out, m.z_dim() as u32);
            put(&mut out, m.layers[0].out_dim() as u32);
            put(&mut out, m.w_dim() as u32);
            out.extend_from_slice(&m.leaky_slope().to_f32_lossy().to_le_bytes());
        }

        let mut floats: Vec<f32> = Vec::new();
        let mut push_layer = |l: &Linear<T>| {
            floats.extend(l.weight.iter().map(|v| v.to_f32_lossy()));
            floats.extend(l.bias.iter().map(|v| v.to_f32_lossy()));
        };
        self.field.layers().into_iter().for_each(&mut push_layer);
        if let Some(m) = &self.mapping {
            m.named_layers().into_iter().for_each(|(_, l)| push_layer(l));
        }
        if let Some(mods) = &self.modulation {
            floats.extend(mods.to_flat().iter().map(|v| v.to_f32_lossy()));
        }
        out.extend_from_slice(&(floats.len() as u64).to_le_bytes());
        for f in floats {
            out.extend_from_slice(&f.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(8)? != MAGIC {
            return Err(Error::format(path, "not a network parameter file (bad magic)"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::format(path, format!("unsupported format version {version}")));
        }
        let hidden = r.u32()? as usize;
        let feature = r.u32()? as usize;
        let depth = r.u32()? as usize;
        if depth != TRUNK_DEPTH {
            return Err(Error::format(path, format!("trunk depth {depth}, expected {TRUNK_DEPTH}")));
        }
        let flags = r.u32()?;
        let mapping_dims = if flags & FLAG_MAPPING != 0 {
            Some((r.u32()? as usize, r.u32()? as usize, r.u32()? as usize, r.f32()?))
        } else {
            None
        };
        let count = r.u64()? as usize;
        let remaining = bytes.len() - r.pos;
        if remaining != count * 4 {
            return Err(Error::format(path, format!("{count} floats declared but {remaining} bytes remain")));
        }

        let layer = |r: &mut Reader, i: usize, o: usize| -> Result<Linear<T>> {
            let w = r.floats(i * o)?;
            let b = r.floats(o)?;
            Linear::from_parts(i, o, w, b)
        };
        let mut trunk = vec![layer(&mut r, 3, hidden)?];
        for _ in 1..TRUNK_DEPTH {
            trunk.push(layer(&mut r, hidden, hidden)?);
        }
        let sdf_head = layer(&mut r, hidden, 1)?;
        let color_film = layer(&mut r, hidden + 3, feature)?;
        let color_head = layer(&mut r, feature, 3)?;
        let field = FieldNetwork::from_layers(trunk, sdf_head, color_film, color_head)?;
        let widths = field.film_widths();

        let mapping = match mapping_dims {
            Some((z_dim, mh, w_dim, slope)) => {
                let mut layers = Vec::with_capacity(MAPPING_DEPTH);
                let mut fan_in = z_dim;
                for i in 0..MAPPING_DEPTH {
                    let out = if i + 1 == MAPPING_DEPTH { w_dim } else { mh };
                    layers.push(layer(&mut r, fan_in, out)?);
                    fan_in = out;
                }
                let total: usize = widths.iter().sum();
                let head = layer(&mut r, w_dim, 2 * total)?;
                Some(MappingNetwork::from_layers(layers, head, T::lit(slope as f64), &widths)?)
            }
            None => None,
        };
        let modulation = if flags & FLAG_MODULATION != 0 {
            let total: usize = widths.iter().sum();
            Some(ModulationSignals::from_flat(&widths, &r.floats(2 * total)?)?)
        } else {
            None
        };
        if r.pos != bytes.len() {
            return Err(Error::format(path, "trailing bytes after parameters"));
        }
        Ok(Self { field, mapping, modulation })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(self.path, "unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn floats<T: Real>(&mut self, n: usize) -> Result<Vec<T>> {
        Ok(self
            .take(4 * n)?
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldConfig, MappingConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_preserves_f32_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let field = FieldNetwork::<f32>::new(FieldConfig { hidden_width: 8, feature_width: 5 }, &mut rng);
        let mcfg = MappingConfig { z_dim: 4, hidden_width: 6, w_dim: 7, leaky_slope: 0.2 };
        let mapping = MappingNetwork::new(&mcfg, &field.film_widths(), 30.0, &mut rng);
        let modulation = Some(field.siren_modulation(30.0));
        let model = ModelFile { field, mapping: Some(mapping), modulation };
        let bytes = model.to_bytes();
        let back = ModelFile::<f32>::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn rejects_truncated_and_foreign_files() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let field = FieldNetwork::<f32>::new(FieldConfig { hidden_width: 4, feature_width: 3 }, &mut rng);
        let bytes = ModelFile { field, mapping: None, modulation: None }.to_bytes();
        let p = Path::new("mem");
        assert!(ModelFile::<f32>::from_bytes(&bytes[..bytes.len() - 4], p).is_err());
        assert!(ModelFile::<f32>::from_bytes(b"PK\x03\x04garbage", p).is_err());
        let mut bad_version = bytes.clone();
        bad_version[8] = 9;
        assert!(ModelFile::<f32>::from_bytes(&bad_version, p).is_err());
    }
}
