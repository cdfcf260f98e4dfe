//! Binary checkpoint format for parameter vectors.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes      | field                                   |
//! |------------|-----------------------------------------|
//! | 4          | magic `GLNK`                            |
//! | 2          | format version (currently 1)            |
//! | 1          | model role tag                          |
//! | 1          | hidden activation code                  |
//! | 1          | output activation code                  |
//! | 4          | number of layer sizes `L`               |
//! | 4·L        | layer sizes                             |
//! | 8          | L2 coefficient (f64)                    |
//! | 8          | parameter count `P`                     |
//! | 8·P        | parameters (f64)                        |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::network::{Activation, NetworkSpec, ParamVector};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GLNK";
pub const FORMAT_VERSION: u16 = 1;

/// What a checkpointed parameter vector is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelRole {
    Untagged,
    Generator,
    Critic,
    Encoder,
    Decoder,
    Attacker,
}

impl ModelRole {
    fn code(self) -> u8 {
        match self {
            ModelRole::Untagged => 0,
            ModelRole::Generator => 1,
            ModelRole::Critic => 2,
            ModelRole::Encoder => 3,
            ModelRole::Decoder => 4,
            ModelRole::Attacker => 5,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => ModelRole::Untagged,
            1 => ModelRole::Generator,
            2 => ModelRole::Critic,
            3 => ModelRole::Encoder,
            4 => ModelRole::Decoder,
            5 => ModelRole::Attacker,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub role: ModelRole,
    pub spec: NetworkSpec,
    pub params: ParamVector,
}

pub fn write_checkpoint<W: Write>(
    mut w: W,
    role: ModelRole,
    spec: &NetworkSpec,
    params: &[f64],
) -> Result<()> {
    if params.len() != spec.param_count() {
        return Err(Error::DimensionMismatch {
            expected: spec.param_count(),
            got: params.len(),
        });
    }
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&[
        role.code(),
        spec.hidden_activation().code(),
        spec.output_activation().code(),
    ])?;
    w.write_all(&(spec.layer_sizes().len() as u32).to_le_bytes())?;
    for &n in spec.layer_sizes() {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    w.write_all(&spec.l2_reg_coeff().to_le_bytes())?;
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for p in params {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Checkpoint("truncated".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let magic: [u8; 4] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {magic:?}")));
    }
    let version = u16::from_le_bytes(read_array(&mut r)?);
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let [role, hidden, output] = read_array::<3, _>(&mut r)?;
    let role = ModelRole::from_code(role)
        .ok_or_else(|| Error::Checkpoint(format!("unknown role tag {role}")))?;
    let act = |c| {
        Activation::from_code(c).ok_or_else(|| Error::Checkpoint(format!("unknown activation {c}")))
    };
    let (hidden, output) = (act(hidden)?, act(output)?);
    let n_layers = u32::from_le_bytes(read_array(&mut r)?) as usize;
    if !(2..=1024).contains(&n_layers) {
        return Err(Error::Checkpoint(format!("implausible layer count {n_layers}")));
    }
    let sizes = (0..n_layers)
        .map(|_| Ok(u32::from_le_bytes(read_array(&mut r)?) as usize))
        .collect::<Result<Vec<_>>>()?;
    let l2 = f64::from_le_bytes(read_array(&mut r)?);
    let spec = NetworkSpec::new(sizes, hidden, output)
        .and_then(|s| s.with_l2(l2))
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    let count = u64::from_le_bytes(read_array(&mut r)?) as usize;
    if count != spec.param_count() {
        return Err(Error::Checkpoint(format!(
            "parameter count {count} disagrees with layer sizes ({})",
            spec.param_count()
        )));
    }
    let values = (0..count)
        .map(|_| Ok(f64::from_le_bytes(read_array(&mut r)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    let params = ParamVector::from_vec(&spec, values).map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(Checkpoint { role, spec, params })
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    role: ModelRole,
    spec: &NetworkSpec,
    params: &[f64],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, role, spec, params)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::init_params;
    use proptest::prelude::*;

    fn sample() -> (NetworkSpec, ParamVector) {
        let spec = NetworkSpec::new(vec![3, 4, 2], Activation::Relu, Activation::Sigmoid)
            .unwrap()
            .with_l2(1e-4)
            .unwrap();
        let p = init_params(&spec, 2);
        (spec, p)
    }

    #[test]
    fn header_bytes() {
        let (spec, p) = sample();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, ModelRole::Critic, &spec, &p).unwrap();
        assert_eq!(&buf[..4], b"GLNK");
        assert_eq!(&buf[4..6], &[1, 0]);
        assert_eq!(&buf[6..9], &[2, 0, 1]);
        assert_eq!(&buf[9..13], &[3, 0, 0, 0]);
        assert_eq!(buf.len(), 4 + 2 + 3 + 4 + 12 + 8 + 8 + 8 * spec.param_count());
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let (spec, p) = sample();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, ModelRole::Generator, &spec, &p).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(&bad[..]), Err(Error::Checkpoint(_))));

        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(read_checkpoint(truncated), Err(Error::Checkpoint(_))));

        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(read_checkpoint(&extra[..]), Err(Error::Checkpoint(_))));

        let mut wrong_size = buf.clone();
        wrong_size[13] = 9; // first layer size 3 -> 9
        assert!(matches!(read_checkpoint(&wrong_size[..]), Err(Error::Checkpoint(_))));
    }

    proptest! {
        #[test]
        fn roundtrip(sizes in prop::collection::vec(1usize..6, 2..5), seed in any::<u64>()) {
            let spec = NetworkSpec::new(sizes, Activation::Tanh, Activation::Identity).unwrap();
            let p = init_params(&spec, seed);
            let mut buf = Vec::new();
            write_checkpoint(&mut buf, ModelRole::Attacker, &spec, &p).unwrap();
            let ck = read_checkpoint(&buf[..]).unwrap();
            prop_assert_eq!(ck.role, ModelRole::Attacker);
            prop_assert_eq!(ck.spec, spec);
            prop_assert_eq!(ck.params, p);
        }
    }
}
