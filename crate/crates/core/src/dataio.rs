//! Payload datasets: ingestion, the binary cache, resampling, splits and the
//! synthetic generator used for desk-scale runs.
//!
//! A packet is represented by its first [`PAYLOAD_LEN`] payload bytes, each
//! scaled to `[0, 1]`. Short payloads are zero padded on the right and long
//! ones truncated.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{invalid, OdxuError, Result};
use crate::rng::{seeded, stream};

pub const PAYLOAD_LEN: usize = 1500;

const CACHE_MAGIC: &[u8; 4] = b"ODXD";
const CACHE_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PayloadRecord {
    bytes: Arc<[f64]>,
    label: String,
    split_tag: Option<String>,
}

impl PayloadRecord {
    /// Builds a record from already-normalized values, checking the length
    /// and range invariants.
    pub fn new(bytes: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if bytes.len() != PAYLOAD_LEN {
            return Err(OdxuError::DimensionMismatch {
                expected: PAYLOAD_LEN,
                got: bytes.len(),
            });
        }
        if let Some(bad) = bytes.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return invalid(format!("payload value {bad} outside [0, 1]"));
        }
        Ok(Self {
            bytes: bytes.into(),
            label: label.into(),
            split_tag: None,
        })
    }

    /// Pads or truncates raw payload bytes to the fixed length. The flag is
    /// set when bytes were dropped.
    pub fn from_raw(raw: &[u8], label: impl Into<String>) -> (Self, bool) {
        let mut bytes = vec![0.0; PAYLOAD_LEN];
        for (dst, &b) in bytes.iter_mut().zip(raw) {
            *dst = f64::from(b) / 255.0;
        }
        let rec = Self {
            bytes: bytes.into(),
            label: label.into(),
            split_tag: None,
        };
        (rec, raw.len() > PAYLOAD_LEN)
    }

    pub fn bytes(&self) -> &[f64] {
        &self.bytes
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn split_tag(&self) -> Option<&str> {
        self.split_tag.as_deref()
    }

    /// Raw byte view (values rounded back onto the 0..=255 grid).
    pub fn raw_bytes(&self) -> Vec<u8> {
        self.bytes
            .iter()
            .map(|v| (v * 255.0).round() as u8)
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    records: Vec<PayloadRecord>,
    class_table: BTreeMap<String, usize>,
}

impl Dataset {
    pub fn new(records: Vec<PayloadRecord>) -> Self {
        let mut class_table = BTreeMap::new();
        for r in &records {
            *class_table.entry(r.label.clone()).or_insert(0) += 1;
        }
        Self {
            records,
            class_table,
        }
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Dataset>) -> Self {
        Self::new(
            parts
                .into_iter()
                .flat_map(|d| d.records.iter().cloned())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[PayloadRecord] {
        &self.records
    }

    pub fn class_table(&self) -> &BTreeMap<String, usize> {
        &self.class_table
    }

    pub fn count(&self, class: &str) -> usize {
        self.class_table.get(class).copied().unwrap_or(0)
    }

    /// Marks every record with the split that produced it.
    pub fn tagged(mut self, tag: &str) -> Self {
        for r in &mut self.records {
            r.split_tag = Some(tag.to_string());
        }
        self
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self::new(indices.iter().map(|&i| self.records[i].clone()).collect())
    }

    /// Row-major `n × 1500` feature matrix.
    pub fn feature_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.len(), PAYLOAD_LEN));
        for (mut row, r) in m.rows_mut().into_iter().zip(&self.records) {
            row.assign(&ndarray::ArrayView1::from(r.bytes()));
        }
        m
    }
}

/// Stable mapping between class names and contiguous class indices.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LabelMap {
    names: Vec<String>,
}

impl LabelMap {
    pub fn from_dataset(ds: &Dataset) -> Self {
        Self {
            names: ds.class_table.keys().cloned().collect(),
        }
    }

    pub fn from_names(mut names: Vec<String>) -> Self {
        names.sort();
        names.dedup();
        Self { names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn encode(&self, ds: &Dataset) -> Result<Vec<usize>> {
        ds.records
            .iter()
            .map(|r| {
                self.index_of(&r.label)
                    .ok_or_else(|| OdxuError::UnknownClass(r.label.clone()))
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    /// Rows whose payload exceeded the fixed length and were truncated.
    pub truncated: usize,
}

/// Reads a `payload,label` CSV where `payload` is a hex string.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Ingested> {
    read_csv(File::open(path)?)
}

pub fn read_csv(reader: impl Read) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| OdxuError::MalformedRow {
                line: 1,
                reason: format!("missing `{name}` column"),
            })
    };
    let (payload_col, label_col) = (col("payload")?, col("label")?);

    let mut records = Vec::new();
    let mut truncated = 0;
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let payload = row.get(payload_col).unwrap_or("").trim();
        let raw = hex::decode(payload).map_err(|e| OdxuError::MalformedRow {
            line,
            reason: format!("bad hex payload: {e}"),
        })?;
        let label = row.get(label_col).unwrap_or("").trim();
        if label.is_empty() {
            return Err(OdxuError::MalformedRow {
                line,
                reason: "empty label".into(),
            });
        }
        let (rec, cut) = PayloadRecord::from_raw(&raw, label);
        if cut {
            truncated += 1;
        }
        records.push(rec);
    }
    if truncated > 0 {
        log::warn!("{truncated} payload(s) longer than {PAYLOAD_LEN} bytes were truncated");
    }
    Ok(Ingested {
        dataset: Dataset::new(records),
        truncated,
    })
}

/// Writes records back as `payload,label` CSV. Trailing zero padding is kept
/// so the round trip is exact.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["payload", "label"])?;
    for r in ds.records() {
        w.write_record([hex::encode(r.raw_bytes()), r.label().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cache(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_cache(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<Dataset> {
    decode_cache(&mut BufReader::new(File::open(path)?))
}

pub fn encode_cache(ds: &Dataset, w: &mut impl Write) -> Result<()> {
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&(ds.len() as u64).to_le_bytes())?;
    for r in ds.records() {
        w.write_all(&r.raw_bytes())?;
        let label = r.label().as_bytes();
        w.write_all(&(label.len() as u32).to_le_bytes())?;
        w.write_all(label)?;
    }
    Ok(())
}

pub fn decode_cache(r: &mut impl Read) -> Result<Dataset> {
    let bad = |m: &str| OdxuError::Checkpoint(format!("dataset cache: {m}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut v = [0u8; 2];
    r.read_exact(&mut v)?;
    if u16::from_le_bytes(v) != CACHE_VERSION {
        return Err(bad("unsupported version"));
    }
    let mut n = [0u8; 8];
    r.read_exact(&mut n)?;
    let n = u64::from_le_bytes(n) as usize;
    let mut records = Vec::with_capacity(n.min(1 << 20));
    let mut buf = vec![0u8; PAYLOAD_LEN];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut label = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut label)?;
        let label = String::from_utf8(label).map_err(|_| bad("label is not UTF-8"))?;
        records.push(PayloadRecord::from_raw(&buf, label).0);
    }
    Ok(Dataset::new(records))
}

/// Loads either format, picked by extension (`.csv` or anything else for the
/// binary cache).
pub fn load_any(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        Ok(load_csv(path)?.dataset)
    } else {
        read_cache(path)
    }
}

pub fn save_any(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write_csv(ds, path)
    } else {
        write_cache(ds, path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub seed: u64,
    pub benign_class: String,
    /// Fraction of benign records removed.
    pub benign_downsample: f64,
    /// Final count = round(factor × original).
    pub upsample_classes: BTreeMap<String, f64>,
    pub portion: f64,
    pub holdout_class: Option<String>,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self {
            seed: 0,
            benign_class: "Benign".into(),
            benign_downsample: 0.0,
            upsample_classes: BTreeMap::new(),
            portion: 1.0,
            holdout_class: None,
        }
    }
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.portion > 0.0 && self.portion <= 1.0) {
            return invalid(format!("portion {} outside (0, 1]", self.portion));
        }
        if !(0.0..1.0).contains(&self.benign_downsample) {
            return invalid(format!(
                "benign_downsample {} outside [0, 1)",
                self.benign_downsample
            ));
        }
        for (cls, f) in &self.upsample_classes {
            if !(f.is_finite() && *f >= 1.0) {
                return invalid(format!("upsample factor {f} for `{cls}` must be >= 1"));
            }
        }
        Ok(())
    }
}

/// Downsamples the benign class and replicates the rare classes named in the
/// plan. Retained records keep their relative order; replicas are appended.
pub fn rebalance(ds: &Dataset, plan: &SplitPlan) -> Result<Dataset> {
    plan.validate()?;
    for cls in plan.upsample_classes.keys() {
        if ds.count(cls) == 0 {
            return Err(OdxuError::UnknownClass(cls.clone()));
        }
    }
    if plan.benign_downsample > 0.0 && ds.count(&plan.benign_class) == 0 {
        return Err(OdxuError::UnknownClass(plan.benign_class.clone()));
    }
    let mut rng = seeded(plan.seed, stream::REBALANCE);

    let benign_idx: Vec<usize> = indices_of(ds, &plan.benign_class);
    let keep_benign = ((1.0 - plan.benign_downsample) * benign_idx.len() as f64).round() as usize;
    let mut dropped = vec![false; ds.len()];
    let kept: Vec<usize> = rand::seq::index::sample(&mut rng, benign_idx.len(), keep_benign)
        .into_iter()
        .map(|i| benign_idx[i])
        .collect();
    for &i in &benign_idx {
        dropped[i] = true;
    }
    for &i in &kept {
        dropped[i] = false;
    }

    let mut records: Vec<PayloadRecord> = ds
        .records
        .iter()
        .zip(&dropped)
        .filter(|(_, &d)| !d)
        .map(|(r, _)| r.clone())
        .collect();

    for (cls, factor) in &plan.upsample_classes {
        let idx = indices_of(ds, cls);
        let target = (factor * idx.len() as f64).round() as usize;
        for _ in idx.len()..target {
            let pick = idx[rng.random_range(0..idx.len())];
            records.push(ds.records[pick].clone());
        }
    }
    Ok(Dataset::new(records))
}

fn indices_of(ds: &Dataset, class: &str) -> Vec<usize> {
    ds.records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.label == class)
        .map(|(i, _)| i)
        .collect()
}

/// Largest-remainder allocation of `n` items over `fractions`; leftover units
/// go to the largest fractional parts, earlier parts first on ties.
fn allocate(n: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Partitions `ds` into `fractions.len()` disjoint parts. Each part keeps the
/// original record order.
pub fn split(ds: &Dataset, fractions: &[f64], stratified: bool, seed: u64) -> Result<Vec<Dataset>> {
    if fractions.is_empty() {
        return invalid("no split fractions given");
    }
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0)) {
        return invalid(format!("split fraction {f} must be > 0"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return invalid(format!("split fractions sum to {total}, expected 1"));
    }
    let mut rng = seeded(seed, stream::SPLIT);
    let groups: Vec<Vec<usize>> = if stratified {
        ds.class_table
            .keys()
            .map(|cls| indices_of(ds, cls))
            .collect()
    } else {
        vec![(0..ds.len()).collect()]
    };

    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); fractions.len()];
    for mut group in groups {
        group.shuffle(&mut rng);
        let mut start = 0;
        for (part, count) in parts.iter_mut().zip(allocate(group.len(), fractions)) {
            part.extend_from_slice(&group[start..start + count]);
            start += count;
        }
    }
    Ok(parts
        .into_iter()
        .map(|mut idx| {
            idx.sort_unstable();
            ds.subset(&idx)
        })
        .collect())
}

/// Stratified subsample keeping `portion` of every class.
pub fn take_portion(ds: &Dataset, portion: f64, seed: u64) -> Result<Dataset> {
    if !(portion > 0.0 && portion <= 1.0) {
        return invalid(format!("portion {portion} outside (0, 1]"));
    }
    if portion == 1.0 {
        return Ok(ds.clone());
    }
    let mut parts = split(ds, &[portion, 1.0 - portion], true, seed)?;
    Ok(parts.swap_remove(0))
}

/// Separates the records of `class` (returned second) from the rest.
pub fn holdout_unknown(ds: &Dataset, class: &str) -> Result<(Dataset, Dataset)> {
    if ds.count(class) == 0 {
        return Err(OdxuError::UnknownClass(class.to_string()));
    }
    let (unknown, known): (Vec<_>, Vec<_>) =
        ds.records.iter().cloned().partition(|r| r.label == class);
    Ok((Dataset::new(known), Dataset::new(unknown)))
}

pub const SYNTH_BENIGN: &str = "Benign";
pub const SYNTH_UNKNOWN: &str = "Unknown";

fn synth_block(n_classes: usize) -> usize {
    (PAYLOAD_LEN / n_classes).min(48)
}

/// Class names produced by [`synth_generate`]: class 0 is benign.
pub fn synth_class_name(c: usize) -> String {
    if c == 0 {
        SYNTH_BENIGN.to_string()
    } else {
        format!("Attack-{c:02}")
    }
}

/// Generates a labelled payload dataset with controllable class overlap.
///
/// Every class owns a disjoint block of byte positions (like a protocol field)
/// holding class-specific values; all other bytes are zero padding. The block
/// positions depend only on the class index, the values on the seed, so two
/// seeds give related but different traffic.
///
/// `overlap` controls confusion: with probability `overlap / 2` a sample is a
/// convex blend of its own template and a random other class template (blend
/// weight uniform on `[0, 1]`), and every byte receives uniform jitter of
/// amplitude `0.1 × overlap`. Values are clamped to `[0, 1]` and quantized to
/// the byte grid.
pub fn synth_generate(n_classes: usize, n_per_class: usize, overlap: f64, seed: u64) -> Result<Dataset> {
    if n_classes < 2 {
        return invalid("synthetic data needs at least 2 classes");
    }
    if n_classes > PAYLOAD_LEN {
        return invalid(format!("at most {PAYLOAD_LEN} synthetic classes"));
    }
    if !(0.0..=1.0).contains(&overlap) {
        return invalid(format!("overlap {overlap} outside [0, 1]"));
    }
    let mut rng = seeded(seed, stream::SYNTH);
    let block = synth_block(n_classes);

    let templates: Vec<Vec<f64>> = (0..n_classes)
        .map(|c| {
            let mut t = vec![0.0; PAYLOAD_LEN];
            for v in &mut t[c * block..(c + 1) * block] {
                *v = rng.random_range(0.3..1.0);
            }
            t
        })
        .collect();

    let mut records = Vec::with_capacity(n_classes * n_per_class);
    for (c, template) in templates.iter().enumerate() {
        let label = synth_class_name(c);
        for _ in 0..n_per_class {
            let mut x = template.clone();
            if rng.random::<f64>() < overlap / 2.0 {
                let mut other = rng.random_range(0..n_classes - 1);
                if other >= c {
                    other += 1;
                }
                let lambda: f64 = rng.random();
                for (xi, oi) in x.iter_mut().zip(&templates[other]) {
                    *xi = (1.0 - lambda) * *xi + lambda * oi;
                }
            }
            if overlap > 0.0 {
                let amp = 0.1 * overlap;
                for xi in &mut x {
                    *xi += amp * rng.random_range(-1.0..1.0);
                }
            }
            for xi in &mut x {
                *xi = (xi.clamp(0.0, 1.0) * 255.0).round() / 255.0;
            }
            records.push(PayloadRecord::new(x, label.clone())?);
        }
    }
    Ok(Dataset::new(records))
}

/// Unknown traffic for a dataset from [`synth_generate`] with `n_classes`
/// classes: each record fills one block of byte positions that no class uses,
/// so it lies outside the support of every known class.
pub fn synth_out_of_support(n_classes: usize, n: usize, seed: u64) -> Result<Dataset> {
    if n_classes < 2 {
        return invalid("synthetic data needs at least 2 classes");
    }
    let block = synth_block(n_classes);
    let free = n_classes * block;
    if free + block > PAYLOAD_LEN {
        return invalid(format!("{n_classes} classes leave no unused byte positions"));
    }
    let mut rng = seeded(seed, stream::SYNTH_UNKNOWN);
    let records = (0..n)
        .map(|_| {
            let mut x = vec![0.0; PAYLOAD_LEN];
            let start = rng.random_range(free..=PAYLOAD_LEN - block);
            for v in &mut x[start..start + block] {
                *v = (rng.random_range(0.3..1.0f64) * 255.0).round() / 255.0;
            }
            PayloadRecord::new(x, SYNTH_UNKNOWN)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(first: u8, label: &str) -> PayloadRecord {
        PayloadRecord::from_raw(&[first], label).0
    }

    fn toy(counts: &[(&str, usize)]) -> Dataset {
        let mut recs = Vec::new();
        let mut k = 0u8;
        for (label, n) in counts {
            for _ in 0..*n {
                recs.push(rec(k, label));
                k = k.wrapping_add(1);
            }
        }
        Dataset::new(recs)
    }

    #[test]
    fn csv_padding_and_normalization() {
        let csv = "payload,label\nff00,Benign\n,Benign\n";
        let ing = read_csv(csv.as_bytes()).unwrap();
        let r = &ing.dataset.records()[0];
        assert_eq!(r.bytes().len(), PAYLOAD_LEN);
        assert_eq!(r.bytes()[0], 1.0);
        assert!(r.bytes()[1..].iter().all(|&v| v == 0.0));
        assert!(ing.dataset.records()[1].bytes().iter().all(|&v| v == 0.0));
        assert_eq!(ing.dataset.count("Benign"), 2);
        assert_eq!(ing.truncated, 0);
    }

    #[test]
    fn csv_truncates_long_payloads() {
        let payload = "ab".repeat(PAYLOAD_LEN + 1);
        let csv = format!("payload,label\n{payload},DNS Flood\n");
        let ing = read_csv(csv.as_bytes()).unwrap();
        assert_eq!(ing.truncated, 1);
        assert_eq!(ing.dataset.records()[0].bytes().len(), PAYLOAD_LEN);
    }

    #[test]
    fn csv_malformed_hex_reports_line() {
        let csv = "payload,label\nff,Benign\nzz,Benign\n";
        match read_csv(csv.as_bytes()) {
            Err(OdxuError::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn record_invariants_checked() {
        assert!(PayloadRecord::new(vec![0.0; 10], "x").is_err());
        let mut v = vec![0.0; PAYLOAD_LEN];
        v[3] = 1.5;
        assert!(PayloadRecord::new(v, "x").is_err());
    }

    #[test]
    fn cache_round_trip() {
        let ds = synth_generate(3, 4, 0.3, 1).unwrap();
        let mut buf = Vec::new();
        encode_cache(&ds, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"ODXD");
        let back = decode_cache(&mut buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn rebalance_benign_downsample() {
        let ds = toy(&[("Benign", 1000), ("ICMP Flood", 58)]);
        let plan = SplitPlan {
            benign_downsample: 0.95,
            upsample_classes: [("ICMP Flood".to_string(), 2.0)].into(),
            ..SplitPlan::default()
        };
        let out = rebalance(&ds, &plan).unwrap();
        assert_eq!(out.count("Benign"), 50);
        assert_eq!(out.count("ICMP Flood"), 116);
    }

    #[test]
    fn rebalance_identity_and_errors() {
        let ds = toy(&[("Benign", 10), ("UDP Flood", 5)]);
        let plan = SplitPlan {
            upsample_classes: [("UDP Flood".to_string(), 1.0)].into(),
            ..SplitPlan::default()
        };
        assert_eq!(rebalance(&ds, &plan).unwrap(), ds);
        let plan = SplitPlan {
            upsample_classes: [("Nope".to_string(), 2.0)].into(),
            ..SplitPlan::default()
        };
        assert!(matches!(rebalance(&ds, &plan), Err(OdxuError::UnknownClass(_))));
    }

    #[test]
    fn split_exact_and_stratified() {
        let ds = toy(&[("a", 50), ("b", 50)]);
        let parts = split(&ds, &[0.5, 0.5], false, 3).unwrap();
        assert_eq!((parts[0].len(), parts[1].len()), (50, 50));

        let ds = toy(&[("a", 40), ("b", 40)]);
        let parts = split(&ds, &[0.75, 0.25], true, 3).unwrap();
        assert_eq!(parts[0].count("a"), 30);
        assert_eq!(parts[0].count("b"), 30);
        assert_eq!(parts[1].count("a"), 10);
        assert_eq!(parts[1].count("b"), 10);

        assert!(split(&ds, &[1.0, 0.0], true, 3).is_err());
        assert!(split(&ds, &[0.5, 0.6], true, 3).is_err());
    }

    #[test]
    fn holdout_partitions() {
        let ds = toy(&[("Benign", 20), ("Slowloris", 7)]);
        let (known, unknown) = holdout_unknown(&ds, "Slowloris").unwrap();
        assert_eq!(known.count("Slowloris"), 0);
        assert_eq!(unknown.len(), 7);
        assert_eq!(known.len() + unknown.len(), ds.len());
        assert!(holdout_unknown(&known, "Slowloris").is_err());
    }

    #[test]
    fn synth_is_deterministic() {
        let a = synth_generate(3, 10, 0.4, 9).unwrap();
        let b = synth_generate(3, 10, 0.4, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synth_generate(3, 10, 0.4, 10).unwrap());
    }

    #[test]
    fn label_map_is_sorted() {
        let ds = toy(&[("b", 1), ("a", 2)]);
        let map = LabelMap::from_dataset(&ds);
        assert_eq!(map.index_of("a"), Some(0));
        assert_eq!(map.encode(&ds).unwrap(), vec![1, 0, 0]);
    }
}
