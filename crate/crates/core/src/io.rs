//! Little-endian binary files for snapshot sets (`PSNP`), reduced bases
//! (`PRBS`) and trained networks (`PMLP`).
//!
//! Every file starts with a 4-byte magic and a `u32` version. Variable-length
//! strings are stored as a `u64` byte count followed by UTF-8. Real-valued
//! data (all imaginary parts `+0.0`) is written without its imaginary half,
//! and reading restores `+0.0`, so round-trips are bit-exact.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::nn::{AffineNorm, Mlp};
use crate::pod::{RankSelection, ReducedBasis, SnapshotSet};
use crate::problem::ModelProblemConfig;
use crate::qmc::ParamPoint;
use crate::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"PSNP";
pub const BASIS_MAGIC: &[u8; 4] = b"PRBS";
pub const MODEL_MAGIC: &[u8; 4] = b"PMLP";
pub const VERSION: u32 = 1;

const FLAG_COMPLEX: u32 = 1;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn header(magic: &[u8; 4]) -> Self {
        let mut w = Writer(magic.to_vec());
        w.u32(VERSION);
        w
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn complex(&mut self, vs: &[Complex64], complex: bool) {
        for v in vs {
            self.0.extend_from_slice(&v.re.to_le_bytes());
            if complex {
                self.0.extend_from_slice(&v.im.to_le_bytes());
            }
        }
    }

    fn string(&mut self, s: &str) {
        self.u64(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn open(buf: &'a [u8], magic: &[u8; 4], what: &'static str) -> Result<Self> {
        let mut r = Reader { buf, pos: 0, what };
        if r.take(4)? != magic {
            return Err(Error::Format(format!(
                "{what}: bad magic, expected {}",
                String::from_utf8_lossy(magic)
            )));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "{what}: unsupported version {version}, expected {VERSION}"
            )));
        }
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                Error::Format(format!("{}: truncated at byte {}", self.what, self.pos))
            })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v)
            .map_err(|_| Error::Format(format!("{}: length {v} overflows", self.what)))
    }

    /// Reads a count and checks that at least `count * unit` bytes remain.
    fn count(&mut self, unit: usize) -> Result<usize> {
        let n = self.u64()?;
        self.check_room(n, unit)?;
        Ok(n)
    }

    fn check_room(&self, n: usize, unit: usize) -> Result<()> {
        match n.checked_mul(unit) {
            Some(b) if b <= self.buf.len() - self.pos => Ok(()),
            _ => Err(Error::Format(format!(
                "{}: declared size {n} exceeds the file",
                self.what
            ))),
        }
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        self.check_room(n, 8)?;
        Ok(self
            .take(8 * n)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn complex(&mut self, n: usize, complex: bool) -> Result<Vec<Complex64>> {
        if complex {
            let raw = self.f64s(n.checked_mul(2).ok_or_else(|| self.overflow())?)?;
            Ok(raw
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect())
        } else {
            Ok(self
                .f64s(n)?
                .into_iter()
                .map(|re| Complex64::new(re, 0.0))
                .collect())
        }
    }

    fn string(&mut self) -> Result<String> {
        let n = self.count(1)?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Format(format!("{}: invalid UTF-8 string", self.what)))
    }

    fn overflow(&self) -> Error {
        Error::Format(format!("{}: size overflow", self.what))
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{}: {} trailing bytes",
                self.what,
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn is_real(vs: &[Complex64]) -> bool {
    vs.iter().all(|v| v.im.to_bits() == 0)
}

fn product(a: usize, b: usize, r: &Reader) -> Result<usize> {
    a.checked_mul(b).ok_or_else(|| r.overflow())
}

/// Header: flags u32, N_h u64, N u64, s u64; then the parameters row-major,
/// the snapshots column-major, the problem description as JSON (empty when
/// absent) and the Gram identifier.
pub fn encode_snapshots(snap: &SnapshotSet) -> Result<Vec<u8>> {
    let complex = !snap.is_real();
    let mut w = Writer::header(SNAPSHOT_MAGIC);
    w.u32(if complex { FLAG_COMPLEX } else { 0 });
    w.u64(snap.n_dof);
    w.u64(snap.n_samples());
    w.u64(snap.s());
    for p in &snap.params {
        w.f64s(p.coords());
    }
    w.complex(&snap.data, complex);
    let meta = match &snap.problem_meta {
        Some(m) => serde_json::to_string(m).map_err(|e| Error::Format(e.to_string()))?,
        None => String::new(),
    };
    w.string(&meta);
    w.string(&snap.gram_id);
    Ok(w.0)
}

pub fn decode_snapshots(buf: &[u8]) -> Result<SnapshotSet> {
    let mut r = Reader::open(buf, SNAPSHOT_MAGIC, "snapshot file")?;
    let complex = r.u32()? & FLAG_COMPLEX != 0;
    let n_dof = r.u64()?;
    let n = r.u64()?;
    let s = r.u64()?;
    let coords = r.f64s(product(n, s, &r)?)?;
    let params = if s == 0 {
        vec![ParamPoint::zeros(0); n]
    } else {
        coords
            .chunks_exact(s)
            .map(|c| ParamPoint::new(c.to_vec()))
            .collect::<Result<Vec<_>>>()?
    };
    let data = r.complex(product(n_dof, n, &r)?, complex)?;
    let meta = r.string()?;
    let problem_meta = if meta.is_empty() {
        None
    } else {
        Some(
            serde_json::from_str::<ModelProblemConfig>(&meta)
                .map_err(|e| Error::Format(format!("snapshot file: problem description: {e}")))?,
        )
    };
    let gram_id = r.string()?;
    r.finish()?;
    SnapshotSet::new(params, n_dof, data, problem_meta, gram_id)
}

fn selection_code(sel: RankSelection) -> (u32, f64) {
    match sel {
        RankSelection::Full => (0, 0.0),
        RankSelection::Tolerance(t) => (1, t),
        RankSelection::Apriori => (2, 0.0),
        RankSelection::Fixed => (3, 0.0),
    }
}

fn selection_from(code: u32, value: f64) -> Result<RankSelection> {
    Ok(match code {
        0 => RankSelection::Full,
        1 => RankSelection::Tolerance(value),
        2 => RankSelection::Apriori,
        3 => RankSelection::Fixed,
        _ => {
            return Err(Error::Format(format!(
                "basis file: unknown rank selection {code}"
            )))
        }
    })
}

/// Header: flags u32, N_h u64, N u64, s u64, J u64, number of singular values
/// u64, rank selection (u32 kind, f64 value); then the singular values, the
/// J basis columns and the Gram identifier.
pub fn encode_basis(b: &ReducedBasis) -> Vec<u8> {
    let complex = !is_real(&b.basis);
    let mut w = Writer::header(BASIS_MAGIC);
    w.u32(if complex { FLAG_COMPLEX } else { 0 });
    w.u64(b.n_dof);
    w.u64(b.n_samples);
    w.u64(b.s);
    w.u64(b.rank);
    w.u64(b.singular_values.len());
    let (code, value) = selection_code(b.selection);
    w.u32(code);
    w.f64s(&[value]);
    w.f64s(&b.singular_values);
    w.complex(&b.basis, complex);
    w.string(&b.gram_id);
    w.0
}

pub fn decode_basis(buf: &[u8]) -> Result<ReducedBasis> {
    let mut r = Reader::open(buf, BASIS_MAGIC, "basis file")?;
    let complex = r.u32()? & FLAG_COMPLEX != 0;
    let n_dof = r.u64()?;
    let n_samples = r.u64()?;
    let s = r.u64()?;
    let rank = r.u64()?;
    let n_sigma = r.u64()?;
    let code = r.u32()?;
    let value = r.f64s(1)?[0];
    let selection = selection_from(code, value)?;
    let singular_values = r.f64s(n_sigma)?;
    let basis = r.complex(product(n_dof, rank, &r)?, complex)?;
    let gram_id = r.string()?;
    r.finish()?;
    if rank > n_sigma {
        return Err(Error::Format(format!(
            "basis file: rank {rank} exceeds {n_sigma} singular values"
        )));
    }
    Ok(ReducedBasis {
        n_dof,
        rank,
        basis,
        singular_values,
        selection,
        n_samples,
        s,
        gram_id,
    })
}

/// Layer count u64, the `layers + 1` widths, per layer `W` row-major then
/// `b`, the input and output normalisations (shift then scale), and the
/// fingerprint of the basis the network was trained against.
pub fn encode_model(m: &Mlp, basis_id: &str) -> Vec<u8> {
    let mut w = Writer::header(MODEL_MAGIC);
    w.u64(m.n_layers());
    for &d in &m.dims {
        w.u64(d);
    }
    w.f64s(&m.params);
    for norm in [&m.input_norm, &m.output_norm] {
        w.f64s(&norm.shift);
        w.f64s(&norm.scale);
    }
    w.string(basis_id);
    w.0
}

pub fn decode_model(buf: &[u8]) -> Result<(Mlp, String)> {
    let mut r = Reader::open(buf, MODEL_MAGIC, "model file")?;
    let layers = r.count(8)?;
    let dims = (0..=layers).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
    let mut n_params = 0usize;
    for w in dims.windows(2) {
        let layer = w[1]
            .checked_mul(w[0])
            .and_then(|v| v.checked_add(w[1]))
            .ok_or_else(|| r.overflow())?;
        n_params = n_params.checked_add(layer).ok_or_else(|| r.overflow())?;
    }
    let params = r.f64s(n_params)?;
    let (n_in, n_out) = (dims[0], dims[layers]);
    let input_norm = AffineNorm {
        shift: r.f64s(n_in)?,
        scale: r.f64s(n_in)?,
    };
    let output_norm = AffineNorm {
        shift: r.f64s(n_out)?,
        scale: r.f64s(n_out)?,
    };
    let basis_id = r.string()?;
    r.finish()?;
    Ok((
        Mlp::from_parts(dims, params, input_norm, output_norm)?,
        basis_id,
    ))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

pub fn write_snapshots(path: &Path, snap: &SnapshotSet) -> Result<()> {
    Ok(fs::write(path, encode_snapshots(snap)?)?)
}

pub fn read_snapshots(path: &Path) -> Result<SnapshotSet> {
    decode_snapshots(&read(path)?)
}

pub fn write_basis(path: &Path, b: &ReducedBasis) -> Result<()> {
    Ok(fs::write(path, encode_basis(b))?)
}

pub fn read_basis(path: &Path) -> Result<ReducedBasis> {
    decode_basis(&read(path)?)
}

pub fn write_model(path: &Path, m: &Mlp, basis_id: &str) -> Result<()> {
    Ok(fs::write(path, encode_model(m, basis_id))?)
}

pub fn read_model(path: &Path) -> Result<(Mlp, String)> {
    decode_model(&read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pod::{assemble_snapshots, pod_basis};
    use crate::problem::ModelProblem;
    use crate::qmc::{parameter_points, QmcConfig};

    fn snapshots(cfg: &ModelProblemConfig, n: usize) -> (SnapshotSet, ModelProblem) {
        let p = ModelProblem::new(cfg).unwrap();
        let pts = parameter_points(&QmcConfig::new(cfg.s, n)).unwrap();
        (assemble_snapshots(&p, &pts).unwrap(), p)
    }

    #[test]
    fn snapshot_round_trip_real_and_complex() {
        for cfg in [
            ModelProblemConfig::real_diffusion(12, 3),
            ModelProblemConfig::complex_reaction(12, 3),
        ] {
            let (snap, _) = snapshots(&cfg, 5);
            let bytes = encode_snapshots(&snap).unwrap();
            let back = decode_snapshots(&bytes).unwrap();
            assert_eq!(back, snap);
            assert_eq!(encode_snapshots(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn real_snapshots_are_stored_without_imaginary_part() {
        let (snap, _) = snapshots(&ModelProblemConfig::real_diffusion(10, 2), 3);
        let mut bare = snap.clone();
        bare.problem_meta = None;
        bare.gram_id.clear();
        let bytes = encode_snapshots(&bare).unwrap();
        let header = 4 + 4 + 4 + 3 * 8;
        assert_eq!(bytes.len(), header + 3 * 2 * 8 + 3 * 10 * 8 + 2 * 8);
        assert_eq!(&bytes[8..12], &0u32.to_le_bytes());
    }

    #[test]
    fn negative_zero_imaginary_parts_survive() {
        let mut snap = SnapshotSet::from_columns(
            vec![ParamPoint::zeros(1)],
            &[vec![Complex64::new(1.0, -0.0)]],
            "g",
        )
        .unwrap();
        snap.problem_meta = None;
        let back = decode_snapshots(&encode_snapshots(&snap).unwrap()).unwrap();
        assert_eq!(back.data[0].im.to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn basis_and_model_round_trip() {
        let (snap, p) = snapshots(&ModelProblemConfig::complex_reaction(16, 4), 8);
        let (basis, _) = pod_basis(&snap, p.gram()).unwrap();
        let basis = basis.truncated(3, RankSelection::Tolerance(0.125)).unwrap();
        let bytes = encode_basis(&basis);
        let back = decode_basis(&bytes).unwrap();
        assert_eq!(back, basis);
        assert_eq!(encode_basis(&back), bytes);

        let mut m = Mlp::init(&[4, 5, 6], 7).unwrap();
        m.output_norm = AffineNorm {
            shift: vec![0.5; 6],
            scale: vec![2.0; 6],
        };
        let bytes = encode_model(&m, &basis.fingerprint());
        let (back, id) = decode_model(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(id, basis.fingerprint());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let (snap, _) = snapshots(&ModelProblemConfig::real_diffusion(6, 2), 2);
        let bytes = encode_snapshots(&snap).unwrap();
        assert!(decode_basis(&bytes).is_err());
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(decode_snapshots(&wrong_version).is_err());
        assert!(decode_snapshots(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_snapshots(&extra).is_err());
        let mut huge = bytes.clone();
        huge[12..20].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode_snapshots(&huge).is_err());
        assert!(decode_model(b"PMLP").is_err());
    }
}
