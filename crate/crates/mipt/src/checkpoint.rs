//! Binary state checkpoints: the correlation matrix as row-major complex
//! doubles (little-endian) behind a fixed header carrying the lattice shape,
//! particle number, simulation time and the RNG cursor.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;

const MAGIC: &[u8; 8] = b"MIPTCKPT";
const VERSION: u32 = 1;

/// Largest site count a checkpoint may declare (cap before allocation).
const MAX_SITES: u64 = 1 << 14;

/// Position of a ChaCha8 trajectory stream, enough to resume mid-trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngCursor {
    pub base_seed: u64,
    pub stream: u64,
    pub word_pos: u128,
}

/// Decoded checkpoint contents.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub d: u32,
    pub l: u32,
    pub n_particles: u64,
    pub time: f64,
    pub rng: RngCursor,
    pub gtilde: Array2<C64>,
}

/// Serialize a state (with its RNG cursor) into the checkpoint format.
pub fn encode_checkpoint(state: &GaussianState, rng: RngCursor) -> Vec<u8> {
    let lattice = state.spectrum().lattice;
    let n = state.n_sites();
    let gtilde = state.gtilde();
    let mut out = Vec::with_capacity(80 + 16 * n * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(lattice.d as u32).to_le_bytes());
    out.extend_from_slice(&(lattice.l as u32).to_le_bytes());
    out.extend_from_slice(&(state.n_particles() as u64).to_le_bytes());
    out.extend_from_slice(&state.time().to_le_bytes());
    out.extend_from_slice(&rng.base_seed.to_le_bytes());
    out.extend_from_slice(&rng.stream.to_le_bytes());
    out.extend_from_slice(&(rng.word_pos as u64).to_le_bytes());
    out.extend_from_slice(&((rng.word_pos >> 64) as u64).to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for z in gtilde.iter() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Schema("checkpoint truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parse and validate a checkpoint buffer. All header fields are checked
/// against each other and against the buffer length before the matrix is
/// allocated.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Schema("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Schema(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let d = r.u32()?;
    let l = r.u32()?;
    if d == 0 || d > 8 || l < 2 {
        return Err(Error::Schema(format!("implausible lattice {l}^{d}")));
    }
    let n_particles = r.u64()?;
    let time = r.f64()?;
    if !time.is_finite() || time < 0.0 {
        return Err(Error::Schema(format!("bad time {time}")));
    }
    let base_seed = r.u64()?;
    let stream = r.u64()?;
    let word_lo = r.u64()?;
    let word_hi = r.u64()?;
    let n = r.u64()?;
    let expect_n = (l as u64).checked_pow(d).filter(|&v| v <= MAX_SITES);
    if expect_n != Some(n) {
        return Err(Error::Schema(format!(
            "site count {n} does not match lattice {l}^{d}"
        )));
    }
    if n_particles > n {
        return Err(Error::Schema(format!(
            "{n_particles} particles on {n} sites"
        )));
    }
    let payload = (n * n) as usize * 16;
    if bytes.len() - r.pos != payload {
        return Err(Error::Schema(format!(
            "payload is {} bytes, header implies {payload}",
            bytes.len() - r.pos
        )));
    }
    let n = n as usize;
    let mut gtilde = Array2::<C64>::zeros((n, n));
    for z in gtilde.iter_mut() {
        let re = r.f64()?;
        let im = r.f64()?;
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::Schema("non-finite matrix entry".into()));
        }
        *z = C64::new(re, im);
    }
    Ok(Checkpoint {
        d,
        l,
        n_particles,
        time,
        rng: RngCursor {
            base_seed,
            stream,
            word_pos: (word_hi as u128) << 64 | word_lo as u128,
        },
        gtilde,
    })
}

pub fn save_checkpoint(path: &Path, state: &GaussianState, rng: RngCursor) -> Result<()> {
    let bytes = encode_checkpoint(state, rng);
    let mut file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(&bytes)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    decode_checkpoint(&bytes)
}
