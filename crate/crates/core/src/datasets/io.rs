//! Dataset container.
//!
//! Layout: the 8-byte magic, a little-endian u32 format version, a u32 header
//! length and that many bytes of `key=value` header text, followed by one
//! record per sample: the point coordinates (imaginary parts after the real
//! parts for complex clouds), the flattened ground-truth matrix, all as
//! little-endian f64, and the object id as a little-endian u32.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use super::{canonical_objects, Dataset, DatasetSpec, PointCloud};
use crate::error::{Error, Result};
use crate::kv::KvText;
use crate::liegroup::{GroupElement, GroupKind, GroupSpec};

pub const DATASET_MAGIC: &[u8; 8] = b"LIEFLOWD";
pub const DATASET_VERSION: u32 = 1;

const KNOWN_KEYS: &[&str] = &[
    "object",
    "target",
    "sample_count",
    "seed",
    "angle_sigma",
    "dim",
    "points_per_sample",
    "complex_points",
    "group",
];

fn header(ds: &Dataset) -> KvText {
    let canonical = &canonical_objects(ds.spec.object)[0];
    let complex = ds.samples.iter().any(PointCloud::is_complex);
    let mut kv = KvText::new();
    kv.push("object", ds.spec.object)
        .push("target", ds.spec.target)
        .push("sample_count", ds.len())
        .push("seed", ds.spec.seed)
        .push_f64("angle_sigma", ds.spec.angle_sigma)
        .push("dim", canonical.dim())
        .push("points_per_sample", canonical.len())
        .push("complex_points", complex)
        .push("group", ds.spec.transform_spec().kind);
    kv
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let text = header(ds).render();
    let complex = ds.samples.iter().any(PointCloud::is_complex);
    let mut buf = Vec::new();
    buf.extend_from_slice(DATASET_MAGIC);
    buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    buf.extend_from_slice(&(text.len() as u32).to_le_bytes());
    buf.extend_from_slice(text.as_bytes());
    for i in 0..ds.len() {
        let s = &ds.samples[i];
        for v in s.coords() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        if complex {
            let zeros = vec![0.0; s.coords().len()];
            for v in s.imag().unwrap_or(&zeros) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        for v in ds.ground_truth[i].flatten() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&ds.object_ids[i].to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Loads a dataset, logging a warning for each unrecognised header key.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let (ds, warnings) = load_dataset_with_warnings(path)?;
    for w in warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(ds)
}

/// Loads a dataset and returns the header warnings instead of logging them.
pub fn load_dataset_with_warnings(path: &Path) -> Result<(Dataset, Vec<String>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse(&bytes)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &dyn Fn() -> String) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::parse("dataset", format!("{}: file truncated", what())));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &dyn Fn() -> String) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &dyn Fn() -> String) -> Result<Vec<f64>> {
        let raw = self.take(8 * n, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn parse(bytes: &[u8]) -> Result<(Dataset, Vec<String>)> {
    let mut r = Reader { bytes, pos: 0 };
    let fixed = |s: &'static str| move || s.to_string();
    if r.take(8, &fixed("magic"))? != DATASET_MAGIC {
        return Err(Error::parse("dataset", "not a dataset file (bad magic)"));
    }
    let version = r.u32(&fixed("version"))?;
    if version != DATASET_VERSION {
        return Err(Error::parse("dataset", format!("unsupported version {version}")));
    }
    let hlen = r.u32(&fixed("header length"))? as usize;
    let text = std::str::from_utf8(r.take(hlen, &fixed("header"))?)
        .map_err(|_| Error::parse("dataset", "header is not UTF-8"))?;
    let kv = KvText::parse("dataset header", text)?;
    let warnings: Vec<String> = kv
        .unknown_keys(KNOWN_KEYS)
        .into_iter()
        .map(|k| format!("ignoring unknown header key {k:?}"))
        .collect();

    let what = "dataset header";
    let spec = DatasetSpec {
        object: kv.parse_value(what, "object")?,
        target: kv.parse_value(what, "target")?,
        sample_count: kv.parse_value(what, "sample_count")?,
        seed: kv.parse_value(what, "seed")?,
        angle_sigma: kv.parse_value(what, "angle_sigma")?,
    };
    spec.validate()
        .map_err(|e| Error::parse(what, e.to_string()))?;
    let dim: usize = kv.parse_value(what, "dim")?;
    let npts: usize = kv.parse_value(what, "points_per_sample")?;
    let complex: bool = kv.parse_value(what, "complex_points")?;
    let group: GroupKind = kv.parse_value(what, "group")?;
    let objects = canonical_objects(spec.object);
    if dim != objects[0].dim() || npts != objects[0].len() {
        return Err(Error::parse(what, "point layout does not match the object kind"));
    }
    let gspec = GroupSpec::new(group);

    let mut samples = Vec::with_capacity(spec.sample_count);
    let mut ground_truth = Vec::with_capacity(spec.sample_count);
    let mut object_ids = Vec::with_capacity(spec.sample_count);
    for i in 0..spec.sample_count {
        let rec = || format!("record {i}");
        let bad = |detail: String| Error::parse("dataset", format!("record {i}: {detail}"));
        let re = r.f64s(dim * npts, &rec)?;
        let cloud = if complex {
            let im = r.f64s(dim * npts, &rec)?;
            PointCloud::new_complex(dim, re, im)
        } else {
            PointCloud::new(dim, re)
        }
        .map_err(|e| bad(e.to_string()))?;
        let flat = r.f64s(gspec.flat_len(), &rec)?;
        let g = GroupElement::from_flat(gspec, &flat).map_err(|e| bad(e.to_string()))?;
        let id = r.u32(&rec)?;
        if id as usize >= objects.len() {
            return Err(bad(format!("object id {id} out of range")));
        }
        samples.push(cloud);
        ground_truth.push(g);
        object_ids.push(id);
    }
    if r.pos != bytes.len() {
        return Err(Error::parse(
            "dataset",
            format!("{} trailing bytes after record {}", bytes.len() - r.pos, spec.sample_count),
        ));
    }
    Ok((
        Dataset {
            spec,
            samples,
            ground_truth,
            object_ids,
        },
        warnings,
    ))
}

/// Writes one row per sample: index, object id, point coordinates
/// (`p{k}_{axis}`), then the flattened ground-truth matrix (`g{k}`).
pub fn export_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    let canonical = &canonical_objects(ds.spec.object)[0];
    let axes = ["x", "y", "z"];
    let mut cols = vec!["index".to_string(), "object_id".to_string()];
    for p in 0..canonical.len() {
        for a in axes.iter().take(canonical.dim()) {
            cols.push(format!("p{p}_{a}"));
        }
    }
    for k in 0..ds.spec.transform_spec().flat_len() {
        cols.push(format!("g{k}"));
    }
    out.push_str(&cols.join(","));
    out.push('\n');
    for i in 0..ds.len() {
        let mut row = vec![i.to_string(), ds.object_ids[i].to_string()];
        row.extend(ds.samples[i].coords().iter().map(|v| format!("{v:?}")));
        row.extend(ds.ground_truth[i].flatten().iter().map(|v| format!("{v:?}")));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
