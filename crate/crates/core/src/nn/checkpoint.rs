//! Network checkpoint format.
//!
//! ```text
//! version=1
//! layer_widths=23,64,64,32
//! activations=tanh,tanh,identity
//! param_count=5792
//! end_header
//! <param_count little-endian f64 values, layer order: W row-major then b>
//! ```

use std::io::{BufRead, Write};

use super::net::{Activation, DenseNet};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const END_HEADER: &str = "end_header";

pub fn write_net<W: Write>(net: &DenseNet, mut out: W) -> Result<()> {
    let widths: Vec<String> = net.widths().iter().map(|w| w.to_string()).collect();
    let acts: Vec<String> = net.activations().iter().map(|a| a.to_string()).collect();
    writeln!(out, "version={CHECKPOINT_VERSION}")?;
    writeln!(out, "layer_widths={}", widths.join(","))?;
    writeln!(out, "activations={}", acts.join(","))?;
    writeln!(out, "param_count={}", net.num_params())?;
    writeln!(out, "{END_HEADER}")?;
    let mut bytes = Vec::with_capacity(net.num_params() * 8);
    for p in net.params() {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    out.write_all(&bytes)?;
    Ok(())
}

fn parse_err(message: impl Into<String>) -> Error {
    Error::Parse {
        what: "checkpoint",
        message: message.into(),
    }
}

/// Reads one network; the reader is left positioned right after its last
/// parameter so several checkpoints can be concatenated in one stream.
pub fn read_net<R: BufRead>(input: &mut R) -> Result<DenseNet> {
    let mut version = None;
    let mut widths: Option<Vec<usize>> = None;
    let mut acts: Option<Vec<Activation>> = None;
    let mut count: Option<usize> = None;
    loop {
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(parse_err("unexpected end of header"));
        }
        let line = line.trim_end_matches(['\n', '\r']);
        if line == END_HEADER {
            break;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("header line without `=`: {line:?}")))?;
        match key {
            "version" => {
                version = Some(value.parse::<u32>().map_err(|e| parse_err(e.to_string()))?)
            }
            "layer_widths" => {
                widths = Some(
                    value
                        .split(',')
                        .map(|w| w.trim().parse::<usize>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| parse_err(e.to_string()))?,
                )
            }
            "activations" => {
                acts = Some(value.split(',').map(str::parse).collect::<Result<_>>()?)
            }
            "param_count" => {
                count = Some(value.parse::<usize>().map_err(|e| parse_err(e.to_string()))?)
            }
            other => return Err(parse_err(format!("unknown header key `{other}`"))),
        }
    }
    match version {
        Some(CHECKPOINT_VERSION) => {}
        Some(v) => return Err(parse_err(format!("unsupported version {v}"))),
        None => return Err(parse_err("missing version")),
    }
    let widths = widths.ok_or_else(|| parse_err("missing layer_widths"))?;
    let acts = acts.ok_or_else(|| parse_err("missing activations"))?;
    let net = DenseNet::zeroed(&widths, &acts)?;
    if let Some(c) = count {
        if c != net.num_params() {
            return Err(parse_err(format!(
                "param_count {c} does not match layer widths ({})",
                net.num_params()
            )));
        }
    }
    let mut bytes = vec![0u8; net.num_params() * 8];
    input
        .read_exact(&mut bytes)
        .map_err(|e| parse_err(format!("truncated parameter block: {e}")))?;
    let params = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    net.with_params(params)
}

pub fn save_net(net: &DenseNet, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_net(net, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_net(path: &std::path::Path) -> Result<DenseNet> {
    let file = std::fs::File::open(path)?;
    read_net(&mut std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), hidden in 1usize..6, out in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = DenseNet::mlp(3, &[hidden, hidden + 1], out, &mut rng).unwrap();
            let mut buf = Vec::new();
            write_net(&net, &mut buf).unwrap();
            let back = read_net(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back.widths(), net.widths());
            prop_assert_eq!(back.activations(), net.activations());
            let a: Vec<u64> = net.params().iter().map(|p| p.to_bits()).collect();
            let b: Vec<u64> = back.params().iter().map(|p| p.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn concatenated_checkpoints_read_in_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DenseNet::mlp(2, &[3], 1, &mut rng).unwrap();
        let b = DenseNet::mlp(4, &[2], 2, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_net(&a, &mut buf).unwrap();
        write_net(&b, &mut buf).unwrap();
        let mut cursor = buf.as_slice();
        assert_eq!(read_net(&mut cursor).unwrap(), a);
        assert_eq!(read_net(&mut cursor).unwrap(), b);
        assert!(cursor.is_empty());
    }

    #[test]
    fn header_is_plain_text() {
        let net = DenseNet::zeroed(&[2, 1], &[Activation::Identity]).unwrap();
        let mut buf = Vec::new();
        write_net(&net, &mut buf).unwrap();
        let text = String::from_utf8_lossy(&buf[..buf.len() - 24]);
        assert_eq!(
            text,
            "version=1\nlayer_widths=2,1\nactivations=identity\nparam_count=3\nend_header\n"
        );
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let net = DenseNet::zeroed(&[2, 1], &[Activation::Identity]).unwrap();
        let mut buf = Vec::new();
        write_net(&net, &mut buf).unwrap();
        buf.pop();
        assert!(matches!(read_net(&mut buf.as_slice()), Err(Error::Parse { .. })));
    }
}
