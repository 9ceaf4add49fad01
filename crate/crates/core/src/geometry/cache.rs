//! Binary cache for [`ScanTables`].
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! magic      4 bytes  "SRPT"
//! version    u32      1
//! key        32 bytes SHA-256 over geometry, rates and scan parameters
//! header     u32 × 6  coarse_level, fine_level, interpolation_rate,
//!                     corr_len, n_pairs, n_coarse
//!            u32      n_fine
//!            f64      refine_radius
//!            u8       half_sphere
//! pairs      n_pairs × (u32 i, u32 j)
//! points     n_coarse × 3 f64, then n_fine × 3 f64
//! tables     coarse then fine; per pair: f64 max_tdoa, then per point
//!            f64 tdoa, i32 lag, i32 lag_lo, i32 lag_hi, u8 visible
//! neighbors  per coarse point: u32 count, count × u32 fine index
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{GeometryError, PairTable, ScanGrid, ScanParams, ScanTables};
use crate::config::MicSpec;
use crate::Vec3;

const MAGIC: &[u8; 4] = b"SRPT";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a table cache (bad magic)")]
    BadMagic,
    #[error("unsupported cache version {0}")]
    Version(u32),
    #[error("cache key does not match the requested geometry")]
    KeyMismatch,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

struct Writer<W>(W);

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> io::Result<()> {
        self.0.write_all(&[v])
    }
    fn u32(&mut self, v: u32) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn i32(&mut self, v: i32) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn vec3(&mut self, v: &Vec3) -> io::Result<()> {
        self.f64(v.x)?;
        self.f64(v.y)?;
        self.f64(v.z)
    }
}

struct Reader<R>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> io::Result<[u8; N]> {
        let mut b = [0; N];
        self.0.read_exact(&mut b)?;
        Ok(b)
    }
    fn u8(&mut self) -> io::Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u32(&mut self) -> io::Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn i32(&mut self) -> io::Result<i32> {
        Ok(i32::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> io::Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn vec3(&mut self) -> io::Result<Vec3> {
        Ok(Vec3::new(self.f64()?, self.f64()?, self.f64()?))
    }
}

fn write_table<W: Write>(w: &mut Writer<W>, t: &PairTable) -> io::Result<()> {
    for p in 0..t.n_pairs() {
        w.f64(t.max_tdoa_samples[p])?;
        for k in 0..t.n_points {
            w.f64(t.tdoa[p][k])?;
            w.i32(t.lag[p][k])?;
            w.i32(t.lag_lo[p][k])?;
            w.i32(t.lag_hi[p][k])?;
            w.u8(t.visible[p][k] as u8)?;
        }
    }
    Ok(())
}

fn read_table<R: Read>(
    r: &mut Reader<R>,
    pairs: &[(usize, usize)],
    n_points: usize,
    interpolation_rate: usize,
    corr_len: usize,
) -> io::Result<PairTable> {
    let n = pairs.len();
    let mut t = PairTable {
        pairs: pairs.to_vec(),
        n_points,
        interpolation_rate,
        corr_len,
        tdoa: vec![Vec::with_capacity(n_points); n],
        lag: vec![Vec::with_capacity(n_points); n],
        lag_lo: vec![Vec::with_capacity(n_points); n],
        lag_hi: vec![Vec::with_capacity(n_points); n],
        visible: vec![Vec::with_capacity(n_points); n],
        max_tdoa_samples: Vec::with_capacity(n),
    };
    for p in 0..n {
        t.max_tdoa_samples.push(r.f64()?);
        for _ in 0..n_points {
            t.tdoa[p].push(r.f64()?);
            t.lag[p].push(r.i32()?);
            t.lag_lo[p].push(r.i32()?);
            t.lag_hi[p].push(r.i32()?);
            t.visible[p].push(r.u8()? != 0);
        }
    }
    Ok(t)
}

impl ScanTables {
    /// Hash of everything the tables depend on.
    pub fn cache_key(mics: &[MicSpec], params: &ScanParams) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(MAGIC);
        h.update(VERSION.to_le_bytes());
        for m in mics {
            for v in m.position_m.iter().chain(&m.orientation) {
                h.update(v.to_le_bytes());
            }
            h.update(m.fov_deg.to_le_bytes());
            h.update(m.sigma_pos_m.to_le_bytes());
        }
        h.update(params.coarse_level.to_le_bytes());
        h.update(params.fine_level.to_le_bytes());
        match params.up {
            Some(u) => {
                h.update([1]);
                for v in [u.x, u.y, u.z] {
                    h.update(v.to_le_bytes());
                }
            }
            None => h.update([0]),
        }
        h.update([params.prune_pairs as u8]);
        for v in [params.fs, params.c, params.c_uncertainty] {
            h.update(v.to_le_bytes());
        }
        h.update((params.interpolation_rate as u64).to_le_bytes());
        h.update((params.frame_size as u64).to_le_bytes());
        h.finalize().into()
    }

    pub fn save<W: Write>(&self, key: &[u8; 32], out: W) -> io::Result<()> {
        let mut w = Writer(io::BufWriter::new(out));
        w.0.write_all(MAGIC)?;
        w.u32(VERSION)?;
        w.0.write_all(key)?;
        let ft = &self.fine_table;
        for v in [
            self.coarse.level,
            self.fine.level,
            ft.interpolation_rate as u32,
            ft.corr_len as u32,
            ft.n_pairs() as u32,
            self.coarse.len() as u32,
            self.fine.len() as u32,
        ] {
            w.u32(v)?;
        }
        w.f64(self.refine_radius)?;
        w.u8(self.fine.half_sphere as u8)?;
        for &(i, j) in &ft.pairs {
            w.u32(i as u32)?;
            w.u32(j as u32)?;
        }
        for p in self.coarse.points.iter().chain(&self.fine.points) {
            w.vec3(p)?;
        }
        write_table(&mut w, &self.coarse_table)?;
        write_table(&mut w, &self.fine_table)?;
        for n in &self.neighbors {
            w.u32(n.len() as u32)?;
            for &i in n {
                w.u32(i as u32)?;
            }
        }
        w.0.flush()
    }

    pub fn load<R: Read>(input: R, expected_key: &[u8; 32]) -> Result<Self, CacheError> {
        let mut r = Reader(io::BufReader::new(input));
        if &r.bytes::<4>()? != MAGIC {
            return Err(CacheError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CacheError::Version(version));
        }
        if &r.bytes::<32>()? != expected_key {
            return Err(CacheError::KeyMismatch);
        }
        let coarse_level = r.u32()?;
        let fine_level = r.u32()?;
        let rate = r.u32()? as usize;
        let corr_len = r.u32()? as usize;
        let n_pairs = r.u32()? as usize;
        let n_coarse = r.u32()? as usize;
        let n_fine = r.u32()? as usize;
        let refine_radius = r.f64()?;
        let half_sphere = r.u8()? != 0;
        let pairs = (0..n_pairs)
            .map(|_| Ok((r.u32()? as usize, r.u32()? as usize)))
            .collect::<io::Result<Vec<_>>>()?;
        let coarse_points = (0..n_coarse).map(|_| r.vec3()).collect::<io::Result<Vec<_>>>()?;
        let fine_points = (0..n_fine).map(|_| r.vec3()).collect::<io::Result<Vec<_>>>()?;
        let coarse_table = read_table(&mut r, &pairs, n_coarse, rate, corr_len)?;
        let fine_table = read_table(&mut r, &pairs, n_fine, rate, corr_len)?;
        let neighbors = (0..n_coarse)
            .map(|_| {
                let n = r.u32()? as usize;
                (0..n).map(|_| Ok(r.u32()? as usize)).collect::<io::Result<Vec<_>>>()
            })
            .collect::<io::Result<Vec<_>>>()?;
        Ok(Self {
            coarse: ScanGrid {
                points: coarse_points,
                level: coarse_level,
                half_sphere,
            },
            fine: ScanGrid {
                points: fine_points,
                level: fine_level,
                half_sphere,
            },
            fine_table,
            coarse_table,
            neighbors,
            refine_radius,
        })
    }

    /// Load tables from `dir` if a cache for this geometry exists, otherwise
    /// build them and write the cache.
    pub fn build_cached(mics: &[MicSpec], params: &ScanParams, dir: &Path) -> Result<Self, CacheError> {
        let key = Self::cache_key(mics, params);
        let path = cache_path(dir, &key);
        if let Ok(file) = fs::File::open(&path) {
            match Self::load(file, &key) {
                Ok(t) => return Ok(t),
                Err(e) => log::warn!("ignoring unreadable table cache {}: {e}", path.display()),
            }
        }
        let tables = Self::build(mics, params)?;
        fs::create_dir_all(dir)?;
        tables.save(&key, fs::File::create(&path)?)?;
        Ok(tables)
    }
}

pub(crate) fn cache_path(dir: &Path, key: &[u8; 32]) -> PathBuf {
    let hex: String = key.iter().map(|b| format!("{b:02x}")).collect();
    dir.join(format!("{hex}.srpt"))
}
