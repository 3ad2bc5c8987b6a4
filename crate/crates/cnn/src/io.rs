//! HFCN model files.
//!
//! Layout: "HFCN", version u8, input code u8 (0 = 64, 1 = 128), qp u8, then
//! one u32 LE dimension header per layer (conv: kh, kw, cin, cout; fc: in,
//! out), then every tensor as f32 LE in declaration order: conv1 weights,
//! conv1 biases, conv2 weights, conv2 biases, fc1 weights, fc1 biases, fc2
//! weights, fc2 bias.

use std::path::Path;

use crate::arch::{Arch, IN_CHANNELS, KERNEL};
use crate::error::{Error, Result};
use crate::model::{Model, Params};

pub const HFCN_MAGIC: &[u8; 4] = b"HFCN";
pub const HFCN_VERSION: u8 = 1;
const HEADER_LEN: usize = 7 + 12 * 4;

fn dims(arch: &Arch) -> [u32; 12] {
    let k = KERNEL as u32;
    let (f1, f2, u) = (
        arch.filters1 as u32,
        arch.filters2 as u32,
        arch.fc_units as u32,
    );
    [
        k,
        k,
        IN_CHANNELS as u32,
        f1,
        k,
        k,
        f1,
        f2,
        arch.flat() as u32,
        u,
        u,
        1,
    ]
}

pub fn to_bytes(model: &Model<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * model.param_count());
    out.extend_from_slice(HFCN_MAGIC);
    out.push(HFCN_VERSION);
    out.push(if model.arch.input == 64 { 0 } else { 1 });
    out.push(model.qp);
    for d in dims(&model.arch) {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for t in model.params.tensors() {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<Model<f32>> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != HFCN_MAGIC {
        return Err(Error::Format("not an HFCN model file".into()));
    }
    if bytes[4] != HFCN_VERSION {
        return Err(Error::Format(format!(
            "unsupported HFCN version {}",
            bytes[4]
        )));
    }
    let input = match bytes[5] {
        0 => 64,
        1 => 128,
        c => return Err(Error::Format(format!("unknown input size code {c}"))),
    };
    let qp = bytes[6];
    let mut d = [0u32; 12];
    for (i, v) in d.iter_mut().enumerate() {
        let o = 7 + 4 * i;
        *v = u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    }
    let arch = Arch::with_widths(input, d[3] as usize, d[7] as usize, d[9] as usize)
        .map_err(|e| Error::Format(e.to_string()))?;
    if dims(&arch) != d {
        return Err(Error::Format(format!(
            "layer dimensions {d:?} do not fit a {input}x{input} network"
        )));
    }
    let mut params = Params::zeros(&arch);
    let want = HEADER_LEN + 4 * params.count();
    if bytes.len() != want {
        return Err(Error::Format(format!(
            "model file is {} bytes, expected {want}",
            bytes.len()
        )));
    }
    let mut vals = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v = vals.next().unwrap();
        }
    }
    Ok(Model { arch, qp, params })
}

pub fn save_model(model: &Model<f32>, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model<f32>> {
    from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_bytes() {
        let m = Model::<f32>::init(Arch::shrunken(128).unwrap(), 42, 3);
        let b = to_bytes(&m);
        let back = from_bytes(&b).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_bytes(&back), b);
        assert_eq!(&b[..7], &[b'H', b'F', b'C', b'N', 1, 1, 42]);
    }

    #[test]
    fn rejects_damage() {
        let m = Model::<f32>::init(Arch::shrunken(64).unwrap(), 22, 3);
        let mut b = to_bytes(&m);
        assert!(matches!(from_bytes(b"HFCX"), Err(Error::Format(_))));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes(&bad), Err(Error::Format(_))));
        let mut bad = b.clone();
        bad[5] = 7;
        assert!(from_bytes(&bad).is_err());
        let mut bad = b.clone();
        bad[7 + 4 * 8] ^= 1;
        assert!(from_bytes(&bad).is_err());
        b.pop();
        assert!(from_bytes(&b).is_err());
    }
}
