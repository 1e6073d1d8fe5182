//! Null-table persistence.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  b"CVDNULL\0"
//! version u32      FORMAT_VERSION
//! hlen    u32      length of the JSON header
//! header  hlen     JSON-encoded TableMeta
//! values  8·B      replicate values as f64 bits, ascending
//! ```
//!
//! The CSV form carries the same header as `# key: value` comment lines
//! followed by one value per line. Both forms round-trip bit for bit.

use std::fs;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nulldist::{NullSimulator, NullTable, TableMeta};
use crate::statistics::Statistic;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"CVDNULL\0";

/// Environment variable that overrides the default cache directory.
pub const CACHE_DIR_ENV: &str = "CONVEXDIV_CACHE_DIR";

/// Content hash of everything that determines a uniform-source null table.
pub fn cache_key(statistic: &Statistic, sizes: &[usize], replicates: usize, seed: u64) -> String {
    let weights = statistic
        .weights()
        .map(|w| {
            w.as_slice()
                .iter()
                .map(|p| format!("{:016x}", p.to_bits()))
                .collect::<Vec<_>>()
                .join(",")
        })
        .unwrap_or_default();
    let sizes = sizes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
    let canonical = format!(
        "v{FORMAT_VERSION}|{}|{}|{:?}|{weights}|{sizes}|{replicates}|{seed}",
        statistic.kind().as_str(),
        statistic.generator_name(),
        statistic.convention(),
    );
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub fn write_binary<W: Write>(table: &NullTable, mut w: W) -> std::io::Result<()> {
    let header = serde_json::to_vec(&table.meta()).map_err(std::io::Error::other)?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    for v in &table.replicates {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

pub fn read_binary<R: Read>(mut r: R, origin: &Path) -> Result<NullTable> {
    let corrupt = |message: String| Error::Cache {
        path: origin.to_path_buf(),
        message,
    };
    let io = |e: std::io::Error| Error::io(format!("reading {}", origin.display()), e);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(io)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(corrupt(format!("unsupported format version {version}")));
    }
    r.read_exact(&mut word).map_err(io)?;
    let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
    r.read_exact(&mut header).map_err(io)?;
    let meta: TableMeta =
        serde_json::from_slice(&header).map_err(|e| corrupt(format!("bad header: {e}")))?;

    let mut replicates = Vec::with_capacity(meta.replicates);
    let mut buf = [0u8; 8];
    for _ in 0..meta.replicates {
        r.read_exact(&mut buf).map_err(io)?;
        replicates.push(f64::from_le_bytes(buf));
    }
    if r.read(&mut buf).map_err(io)? != 0 {
        return Err(corrupt("trailing bytes after replicate values".into()));
    }
    Ok(from_meta(meta, replicates))
}

fn from_meta(meta: TableMeta, replicates: Vec<f64>) -> NullTable {
    NullTable {
        statistic_kind: meta.statistic_kind,
        generator_name: meta.generator_name,
        convention: meta.convention,
        weights: meta.weights,
        sample_sizes: meta.sample_sizes,
        source: meta.source,
        seed: meta.seed,
        replicates,
    }
}

pub fn write_csv<W: Write>(table: &NullTable, mut w: W) -> std::io::Result<()> {
    let header = serde_json::to_string(&table.meta()).map_err(std::io::Error::other)?;
    writeln!(w, "# format: convexdiv-null-table v{FORMAT_VERSION}")?;
    writeln!(w, "# meta: {header}")?;
    writeln!(w, "statistic")?;
    for v in &table.replicates {
        // Display for f64 is the shortest representation that parses back exactly.
        writeln!(w, "{v}")?;
    }
    w.flush()
}

pub fn read_csv<R: BufRead>(r: R, origin: &Path) -> Result<NullTable> {
    let corrupt = |message: String| Error::Cache {
        path: origin.to_path_buf(),
        message,
    };
    let mut meta: Option<TableMeta> = None;
    let mut replicates = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", origin.display()), e))?;
        let line = line.trim();
        if let Some(json) = line.strip_prefix("# meta:") {
            meta = Some(
                serde_json::from_str(json.trim()).map_err(|e| corrupt(format!("bad header: {e}")))?,
            );
        } else if line.starts_with('#') || line.is_empty() || line == "statistic" {
            continue;
        } else {
            replicates.push(
                line.parse::<f64>()
                    .map_err(|_| corrupt(format!("line {}: bad value `{line}`", idx + 1)))?,
            );
        }
    }
    let meta = meta.ok_or_else(|| corrupt("missing `# meta:` header".into()))?;
    if meta.replicates != replicates.len() {
        return Err(corrupt(format!(
            "header announces {} replicates, found {}",
            meta.replicates,
            replicates.len()
        )));
    }
    Ok(from_meta(meta, replicates))
}

/// Directory of binary null tables named by [`cache_key`].
#[derive(Debug, Clone)]
pub struct NullTableCache {
    dir: PathBuf,
}

impl NullTableCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        NullTableCache { dir: dir.into() }
    }

    /// `$CONVEXDIV_CACHE_DIR`, else the platform temp dir.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(dir) => NullTableCache::new(dir),
            None => NullTableCache::new(std::env::temp_dir().join("convexdiv-null-cache")),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.cvdnull"))
    }

    pub fn load(&self, key: &str) -> Result<Option<NullTable>> {
        let path = self.path_for(key);
        match fs::File::open(&path) {
            Ok(f) => read_binary(std::io::BufReader::new(f), &path).map(Some),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(format!("opening {}", path.display()), e)),
        }
    }

    pub fn store(&self, key: &str, table: &NullTable) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| Error::io(format!("creating {}", self.dir.display()), e))?;
        let path = self.path_for(key);
        // Write then rename so a concurrent reader never sees a partial file.
        let tmp = self.dir.join(format!("{key}.{}.tmp", std::process::id()));
        let file = fs::File::create(&tmp)
            .map_err(|e| Error::io(format!("creating {}", tmp.display()), e))?;
        write_binary(table, std::io::BufWriter::new(file))
            .map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(format!("renaming {}", tmp.display()), e))?;
        Ok(path)
    }

    /// Returns the cached table, simulating and storing it on a miss. The
    /// boolean reports whether the cache was hit.
    pub fn get_or_simulate(
        &self,
        statistic: &Statistic,
        sizes: &[usize],
        replicates: usize,
        seed: u64,
        workers: Option<usize>,
    ) -> Result<(NullTable, bool)> {
        let key = cache_key(statistic, sizes, replicates, seed);
        if let Some(table) = self.load(&key)? {
            if table.matches(statistic, sizes) && table.seed == seed && table.len() == replicates {
                return Ok((table, true));
            }
        }
        let table = NullSimulator::new(statistic, sizes)
            .replicates(replicates)
            .seed(seed)
            .workers(workers)
            .run()?;
        self.store(&key, &table)?;
        Ok((table, false))
    }
}
