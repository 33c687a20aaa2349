//! Versioned little-endian container for trained models.
//!
//! Layout: magic `GZCV`, `u16` version, `u8` task tag, `u64` epochs trained,
//! `u32` layer count, then per layer `u32` in/out/kernel height followed by
//! the `f64` weights and biases. Segmentation models append a `u32` count and
//! the `f64` class weights. Optimizer state is not stored.

use alloc::vec::Vec;

use crate::error::{format_err, Result};
use crate::genvae::VaeModel;
use crate::layers::ConvLayer;
use crate::reconnet::ReconModel;
use crate::segnet::SegModel;

pub const MAGIC: [u8; 4] = *b"GZCV";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Segment,
    Reconstruct,
    Generate,
}

impl Task {
    fn tag(self) -> u8 {
        match self {
            Task::Segment => 1,
            Task::Reconstruct => 2,
            Task::Generate => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Segment => "segment",
            Task::Reconstruct => "reconstruct",
            Task::Generate => "generate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Segment(SegModel),
    Reconstruct(ReconModel),
    Generate(VaeModel),
}

impl Model {
    pub fn task(&self) -> Task {
        match self {
            Model::Segment(_) => Task::Segment,
            Model::Reconstruct(_) => Task::Reconstruct,
            Model::Generate(_) => Task::Generate,
        }
    }

    fn parts(&self) -> (&[ConvLayer], u64) {
        match self {
            Model::Segment(m) => (&m.layers, m.epochs_trained),
            Model::Reconstruct(m) => (&m.layers, m.epochs_trained),
            Model::Generate(m) => (&m.layers, m.epochs_trained),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let (layers, epochs) = self.parts();
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.task().tag());
        out.extend_from_slice(&epochs.to_le_bytes());
        put_u32(&mut out, layers.len());
        for l in layers {
            put_u32(&mut out, l.in_depth());
            put_u32(&mut out, l.out_depth());
            put_u32(&mut out, l.kernel_height());
            l.weights
                .iter()
                .chain(&l.bias)
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
        if let Model::Segment(m) = self {
            put_u32(&mut out, m.class_weights.len());
            m.class_weights
                .iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
        out
    }

    /// Parses and validates a container; any structural problem is a
    /// [`Format`](crate::Error::Format) or configuration error.
    pub fn decode(bytes: &[u8]) -> Result<Model> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(format_err!("not a model file (bad magic)"));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(format_err!("unsupported model file version {version}"));
        }
        let tag = r.take(1)?[0];
        let epochs_trained = u64::from_le_bytes(r.array()?);
        let count = r.u32()?;
        let mut layers = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let (i, o, k) = (r.u32()?, r.u32()?, r.u32()?);
            if i == 0 || o == 0 || k == 0 {
                return Err(format_err!("layer with a zero dimension"));
            }
            let n = o
                .checked_mul(i)
                .and_then(|v| v.checked_mul(k))
                .ok_or_else(|| format_err!("layer too large"))?;
            let weights = r.f64s(n)?;
            let bias = r.f64s(o)?;
            layers.push(ConvLayer::with_params(i, o, k, weights, bias)?);
        }
        let model = match tag {
            1 => {
                let n = r.u32()?;
                let class_weights = r.f64s(n)?;
                let m = SegModel {
                    layers,
                    class_weights,
                    epochs_trained,
                };
                m.validate()?;
                Model::Segment(m)
            }
            2 => {
                let m = ReconModel {
                    layers,
                    epochs_trained,
                };
                m.validate()?;
                Model::Reconstruct(m)
            }
            3 => {
                let m = VaeModel {
                    layers,
                    epochs_trained,
                };
                m.validate()?;
                Model::Generate(m)
            }
            t => return Err(format_err!("unknown task tag {t}")),
        };
        if r.pos != bytes.len() {
            return Err(format_err!("{} trailing bytes", bytes.len() - r.pos));
        }
        Ok(model)
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format_err!("truncated model file at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut a = [0; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.array()?) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| format_err!("length overflow"))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genvae::VaeArch;
    use crate::reconnet::ReconArch;
    use crate::segnet::SegArch;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn models() -> [Model; 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seg = SegModel::new(&SegArch::default(), &mut rng).unwrap();
        seg.class_weights = alloc::vec![0.5, 1.5, 1.0, 1.0, 1.0];
        seg.epochs_trained = 17;
        [
            Model::Segment(seg),
            Model::Reconstruct(ReconModel::new(&ReconArch::default(), &mut rng).unwrap()),
            Model::Generate(VaeModel::new(&VaeArch::default(), &mut rng).unwrap()),
        ]
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for m in models() {
            let bytes = m.encode();
            let back = Model::decode(&bytes).unwrap();
            assert_eq!(back.encode(), bytes);
            assert_eq!(back, m);
        }
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = models()[1].encode();
        assert!(Model::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Model::decode(&bad).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Model::decode(&extra).is_err());
        let mut tag = bytes;
        tag[6] = 9;
        assert!(Model::decode(&tag).is_err());
    }
}
