//! Binary state dumps: three little-endian u64 dimensions (2^N, n+1, and n+1
//! or 1 for the second pulse) followed by (re, im) f64 pairs.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;

use super::state::{Dims, QuantumState};
use crate::error::{Error, Result};

pub fn write_state(state: &QuantumState, mut w: impl Write) -> Result<()> {
    let d = state.dims;
    let second = if d.pulses == 2 { d.ladder() } else { 1 };
    for v in [d.atom_dim(), d.ladder(), second] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for a in &state.amplitudes {
        w.write_all(&a.re.to_le_bytes())?;
        w.write_all(&a.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_state(mut r: impl Read) -> Result<QuantumState> {
    let mut word = [0u8; 8];
    let mut header = [0u64; 3];
    for h in &mut header {
        r.read_exact(&mut word)?;
        *h = u64::from_le_bytes(word);
    }
    let [atom_dim, ladder, second] = header;
    if !atom_dim.is_power_of_two() || ladder == 0 || (second != 1 && second != ladder) {
        return Err(Error::Parameter(format!("bad snapshot header {header:?}")));
    }
    let dims = Dims {
        n_atoms: atom_dim.trailing_zeros() as usize,
        n_photons: ladder as usize - 1,
        pulses: if second == 1 { 1 } else { 2 },
    };
    let mut amplitudes = Vec::with_capacity(dims.len());
    for _ in 0..dims.len() {
        r.read_exact(&mut word)?;
        let re = f64::from_le_bytes(word);
        r.read_exact(&mut word)?;
        amplitudes.push(C64::new(re, f64::from_le_bytes(word)));
    }
    Ok(QuantumState { dims, amplitudes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EnsembleConfig, Protocol, ProtocolParams};
    use crate::sim::{evolve, Limits};

    #[test]
    fn roundtrip() {
        let cfg = EnsembleConfig::new(3, vec![0.9, 1.1]).unwrap();
        let p = ProtocolParams::new(0.4, 0.2, Protocol::Matched);
        let s = evolve(&cfg, &p, &Limits::default()).unwrap();
        let mut buf = Vec::new();
        write_state(&s, &mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 16 * 4 * 16);
        assert_eq!(&buf[..8], &4u64.to_le_bytes());
        assert_eq!(&buf[16..24], &4u64.to_le_bytes());
        assert_eq!(read_state(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn truncated_file() {
        let buf = [4u64, 3, 1].iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<_>>();
        assert!(matches!(read_state(buf.as_slice()), Err(Error::Io(_))));
    }
}
