//! Weight files.
//!
//! ```text
//! "NLNW"  u16 version=1  u8 order (0 = untagged)
//! u16 levels  u16 base_channels  u16 rows  u32 width  u8 activation
//! u32 layer count, then per layer: u8 kind  u32 c_out  u32 c_in  u32 kh  u32 kw
//! per layer: f32 weights, f32 bias
//! per layer: f32 m_weight, f32 m_bias, f32 v_weight, f32 v_bias
//! u64 Adam step
//! ```
//!
//! Little-endian throughout.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sigmodel::Order;

use super::model::{topology, ConvLayer, LayerKind};
use super::{NetConfig, Network, OutputActivation};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"NLNW";
pub const WEIGHTS_VERSION: u16 = 1;

fn put_f32s<W: Write>(out: &mut W, values: &[f32]) -> Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_weights<W: Write>(net: &Network<f32>, out: &mut W) -> Result<()> {
    out.write_all(&WEIGHTS_MAGIC)?;
    out.write_all(&WEIGHTS_VERSION.to_le_bytes())?;
    out.write_all(&[net.order.map_or(0, |o| o.as_u8())])?;
    let c = &net.config;
    out.write_all(&(c.levels as u16).to_le_bytes())?;
    out.write_all(&(c.base_channels as u16).to_le_bytes())?;
    out.write_all(&(c.rows as u16).to_le_bytes())?;
    out.write_all(&(c.width as u32).to_le_bytes())?;
    out.write_all(&[c.output_activation.id()])?;
    out.write_all(&(net.layers.len() as u32).to_le_bytes())?;
    for l in &net.layers {
        let k = l.kind.kernel() as u32;
        out.write_all(&[l.kind.id()])?;
        for v in [l.c_out as u32, l.c_in as u32, k, k] {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    for l in &net.layers {
        put_f32s(out, &l.weight)?;
        put_f32s(out, &l.bias)?;
    }
    for l in &net.layers {
        put_f32s(out, &l.m_weight)?;
        put_f32s(out, &l.m_bias)?;
        put_f32s(out, &l.v_weight)?;
        put_f32s(out, &l.v_bias)?;
    }
    out.write_all(&net.step.to_le_bytes())?;
    Ok(())
}

pub fn save_weights(net: &Network<f32>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_weights(net, &mut out)?;
    out.flush()?;
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn get_f32s<R: Read>(r: &mut R, n: usize, layer: usize) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; 4 * n];
    r.read_exact(&mut bytes).map_err(|_| Error::CorruptLayerTable {
        layer,
        reason: format!("payload shorter than the {n} values the layer table declares"),
    })?;
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub fn read_weights<R: Read>(input: &mut R) -> Result<Network<f32>> {
    let magic = take::<4, _>(input)?;
    if magic != WEIGHTS_MAGIC {
        return Err(Error::BadMagic {
            expected: WEIGHTS_MAGIC,
            found: magic,
        });
    }
    let version = u16::from_le_bytes(take(input)?);
    if version != WEIGHTS_VERSION {
        return Err(Error::VersionMismatch {
            expected: WEIGHTS_VERSION,
            found: version,
        });
    }
    let order = match take::<1, _>(input)?[0] {
        0 => None,
        o => Some(Order::try_from(o)?),
    };
    let levels = u16::from_le_bytes(take(input)?) as usize;
    let base_channels = u16::from_le_bytes(take(input)?) as usize;
    let rows = u16::from_le_bytes(take(input)?) as usize;
    let width = u32::from_le_bytes(take(input)?) as usize;
    let act = take::<1, _>(input)?[0];
    let output_activation =
        OutputActivation::from_id(act).ok_or_else(|| Error::Config(format!("unknown output activation id {act}")))?;
    let config = NetConfig {
        levels,
        base_channels,
        rows,
        width,
        output_activation,
    };
    config.validate()?;
    let expected = topology(&config);
    let count = u32::from_le_bytes(take(input)?) as usize;
    if count != expected.len() {
        return Err(Error::CorruptLayerTable {
            layer: count.min(expected.len()),
            reason: format!("table lists {count} layers, configuration implies {}", expected.len()),
        });
    }
    for (i, &(kind, c_in, c_out)) in expected.iter().enumerate() {
        let kind_id = take::<1, _>(input)?[0];
        let dims: Vec<usize> = (0..4)
            .map(|_| take::<4, _>(input).map(|b| u32::from_le_bytes(b) as usize))
            .collect::<Result<_>>()?;
        let k = kind.kernel();
        if LayerKind::from_id(kind_id) != Some(kind) || dims != [c_out, c_in, k, k] {
            return Err(Error::CorruptLayerTable {
                layer: i,
                reason: format!("entry (kind {kind_id}, shape {dims:?}) does not match expected {kind:?} [{c_out}, {c_in}, {k}, {k}]"),
            });
        }
    }
    let mut net = Network::<f32>::zeros(config, order)?;
    for (i, l) in net.layers.iter_mut().enumerate() {
        l.weight = get_f32s(input, l.weight.len(), i)?;
        l.bias = get_f32s(input, l.bias.len(), i)?;
    }
    for (i, l) in net.layers.iter_mut().enumerate() {
        let ConvLayer {
            m_weight,
            m_bias,
            v_weight,
            v_bias,
            ..
        } = l;
        *m_weight = get_f32s(input, m_weight.len(), i)?;
        *m_bias = get_f32s(input, m_bias.len(), i)?;
        *v_weight = get_f32s(input, v_weight.len(), i)?;
        *v_bias = get_f32s(input, v_bias.len(), i)?;
    }
    net.step = u64::from_le_bytes(take(input)?);
    Ok(net)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Network<f32>> {
    read_weights(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Tensor4;

    fn small() -> NetConfig {
        NetConfig {
            levels: 2,
            base_channels: 2,
            rows: 8,
            width: 16,
            output_activation: OutputActivation::Sigmoid,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut net = Network::<f32>::new(small(), Some(Order::Third), 11).unwrap();
        net.step = 17;
        net.layers[2].m_weight[0] = 0.25;
        net.layers[4].v_bias[1] = 1e-7;
        let mut buf = Vec::new();
        write_weights(&net, &mut buf).unwrap();
        let back = read_weights(&mut buf.as_slice()).unwrap();
        assert_eq!(back, net);
        let input = Tensor4::new((0..128).map(|i| (i as f32 * 0.37).sin()).collect(), [1, 1, 8, 16]).unwrap();
        let a = net.forward(&input).unwrap();
        let b = back.forward(&input).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupted_shape_names_the_layer() {
        let net = Network::<f32>::new(small(), None, 1).unwrap();
        let mut buf = Vec::new();
        write_weights(&net, &mut buf).unwrap();
        // header: 4 + 2 + 1 + 2 + 2 + 2 + 4 + 1 + 4 = 22 bytes; each table entry is 17 bytes
        let entry = 22 + 3 * 17;
        buf[entry + 1] ^= 0x01; // c_out of layer 3
        match read_weights(&mut buf.as_slice()) {
            Err(Error::CorruptLayerTable { layer, .. }) => assert_eq!(layer, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_is_reported() {
        let net = Network::<f32>::new(small(), None, 1).unwrap();
        let mut buf = Vec::new();
        write_weights(&net, &mut buf).unwrap();
        buf.truncate(buf.len() / 2);
        assert!(matches!(read_weights(&mut buf.as_slice()), Err(Error::CorruptLayerTable { .. })));
    }

    #[test]
    fn order_tag_survives() {
        let net = Network::<f32>::new(small(), Some(Order::Second), 1).unwrap();
        let mut buf = Vec::new();
        write_weights(&net, &mut buf).unwrap();
        assert_eq!(buf[6], 2);
        assert_eq!(read_weights(&mut buf.as_slice()).unwrap().order, Some(Order::Second));
        buf[0] = b'Q';
        assert!(matches!(read_weights(&mut buf.as_slice()), Err(Error::BadMagic { .. })));
    }
}
