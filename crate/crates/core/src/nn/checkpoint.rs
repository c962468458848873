//! Binary network checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic          8 bytes  "DAMARLNN"
//! version        u32      1
//! hidden act     u8       0 identity, 1 relu, 2 tanh
//! output act     u8       0 identity, 1 tanh, 2 split tanh
//! split count    u32      squashed outputs for split tanh, else 0
//! layer count    u32      L
//! shapes         L x (u32 inputs, u32 outputs)
//! parameters     per layer: outputs*inputs weights row-major, then outputs
//!                biases, each an f64
//! ```
//!
//! Values are stored as `f64` whatever the in-memory scalar type.

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::Scalar;

use super::{Activation, Layer, Mlp, NnError, OutputActivation, Result};

pub const MAGIC: &[u8; 8] = b"DAMARLNN";
pub const VERSION: u32 = 1;

pub fn write_checkpoint<T: Scalar, W: Write>(net: &Mlp<T>, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&[activation_code(net.hidden_activation())])?;
    let (code, split) = match net.output_activation() {
        OutputActivation::Identity => (0u8, 0usize),
        OutputActivation::Tanh => (1, 0),
        OutputActivation::SplitTanh(n) => (2, n),
    };
    out.write_all(&[code])?;
    out.write_all(&to_u32(split)?.to_le_bytes())?;
    out.write_all(&to_u32(net.layers().len())?.to_le_bytes())?;
    for l in net.layers() {
        out.write_all(&to_u32(l.inputs)?.to_le_bytes())?;
        out.write_all(&to_u32(l.outputs)?.to_le_bytes())?;
    }
    for p in net.params() {
        out.write_all(&p.as_f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<T: Scalar, R: Read>(mut input: R) -> Result<Mlp<T>> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let hidden = match read_u8(&mut input)? {
        0 => Activation::Identity,
        1 => Activation::Relu,
        2 => Activation::Tanh,
        c => return Err(NnError::Checkpoint(format!("unknown hidden activation code {c}"))),
    };
    let out_code = read_u8(&mut input)?;
    let split = read_u32(&mut input)? as usize;
    let output = match out_code {
        0 => OutputActivation::Identity,
        1 => OutputActivation::Tanh,
        2 => OutputActivation::SplitTanh(split),
        c => return Err(NnError::Checkpoint(format!("unknown output activation code {c}"))),
    };
    let count = read_u32(&mut input)? as usize;
    let mut shapes = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        shapes.push((read_u32(&mut input)? as usize, read_u32(&mut input)? as usize));
    }
    let mut layers = Vec::with_capacity(shapes.len());
    for (inputs, outputs) in shapes {
        let weights = read_values(&mut input, inputs * outputs)?;
        let bias = read_values(&mut input, outputs)?;
        layers.push(Layer { inputs, outputs, weights, bias });
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(NnError::Checkpoint("trailing bytes after parameters".into()));
    }
    let net = Mlp::from_layers(layers, hidden, output)?;
    if let OutputActivation::SplitTanh(n) = output {
        if n > net.output_dim() {
            return Err(NnError::Checkpoint(format!("{n} squashed outputs of {}", net.output_dim())));
        }
    }
    Ok(net)
}

/// Human-readable dump for diffing two checkpoints. Every value prints with
/// the shortest representation that round-trips.
pub fn checkpoint_to_text<T: Scalar>(net: &Mlp<T>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "version {VERSION}");
    let _ = writeln!(s, "hidden {:?}", net.hidden_activation());
    let _ = writeln!(s, "output {:?}", net.output_activation());
    for (i, l) in net.layers().iter().enumerate() {
        let _ = writeln!(s, "layer {i} {}x{}", l.outputs, l.inputs);
        for row in l.weights.chunks(l.inputs) {
            let line: Vec<String> = row.iter().map(|v| format!("{:?}", v.as_f64())).collect();
            let _ = writeln!(s, "w {}", line.join(" "));
        }
        let line: Vec<String> = l.bias.iter().map(|v| format!("{:?}", v.as_f64())).collect();
        let _ = writeln!(s, "b {}", line.join(" "));
    }
    s
}

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Identity => 0,
        Activation::Relu => 1,
        Activation::Tanh => 2,
    }
}

fn to_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| NnError::Checkpoint(format!("{n} does not fit in u32")))
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_values<T: Scalar, R: Read>(r: &mut R, n: usize) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(n.min(1 << 20));
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(T::lit(f64::from_le_bytes(b)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::MlpSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for spec in [MlpSpec::actor(5, 2, 3), MlpSpec::critic(9), MlpSpec::actor(3, 1, 0)] {
            let net = Mlp::<f64>::new(&spec, &mut rng).unwrap();
            let mut buf = Vec::new();
            write_checkpoint(&net, &mut buf).unwrap();
            assert_eq!(&buf[..8], MAGIC);
            let back: Mlp<f64> = read_checkpoint(buf.as_slice()).unwrap();
            assert_eq!(back, net);
        }
    }

    #[test]
    fn header_layout() {
        let net = Mlp::<f32>::zeros(&MlpSpec::actor(2, 1, 0)).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&net, &mut buf).unwrap();
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(buf[12], 1);
        assert_eq!(buf[13], 1);
        assert_eq!(u32::from_le_bytes(buf[18..22].try_into().unwrap()), 3);
        let params = net.num_params();
        assert_eq!(buf.len(), 22 + 3 * 8 + params * 8);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let net = Mlp::<f64>::zeros(&MlpSpec::critic(2)).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&net, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint::<f64, _>(bad.as_slice()), Err(NnError::Checkpoint(_))));
        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(read_checkpoint::<f64, _>(truncated), Err(NnError::Io(_))));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(read_checkpoint::<f64, _>(extra.as_slice()), Err(NnError::Checkpoint(_))));
    }

    #[test]
    fn text_dump_lists_every_layer() {
        let net = Mlp::<f64>::new(&MlpSpec::actor(2, 1, 1), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let text = checkpoint_to_text(&net);
        assert_eq!(text.lines().filter(|l| l.starts_with("layer")).count(), 3);
        assert_eq!(text.lines().filter(|l| l.starts_with("w ")).count(), 128 + 128 + 2);
        assert!(text.contains("SplitTanh(1)"));
    }
}
