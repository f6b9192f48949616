//! Bit-exact label containers: varints, CRC-checked bundle and catalog files.
//!
//! A [`LabelBundle`] holds one byte-string label per vertex; a [`Catalog`]
//! holds the shared read-only side data a scheme's decoder consults in
//! addition to the labels. Bundle and catalog sizes are always reported
//! separately so the per-vertex label cost is never hidden inside shared
//! state.
//!
//! File formats (little-endian throughout):
//!
//! * bundle: magic `CLK1`, scheme-id byte, varint `n`, then per vertex
//!   varint length + payload, then a CRC-32 trailer over everything before it.
//! * catalog: magic `CLKC`, scheme-id byte, varint section count, sections as
//!   (varint name length, name, varint size, bytes), CRC-32 trailer.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use thiserror::Error;

pub const BUNDLE_MAGIC: [u8; 4] = *b"CLK1";
pub const CATALOG_MAGIC: [u8; 4] = *b"CLKC";

/// Scheme identifiers used in bundle/catalog headers.
pub mod scheme_id {
    pub const ARBORICITY: u8 = 0x01;
    pub const EXPANSION: u8 = 0x02;
    pub const LOCAL: u8 = 0x03;
    pub const GENERAL: u8 = 0x04;
    pub const SCATTERED: u8 = 0x05;
    pub const COUNTING: u8 = 0x06;
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: [u8; 4] },
    #[error("truncated payload while reading {context}")]
    Truncated { context: &'static str },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("varint overflows u64")]
    VarintOverflow,
    #[error("duplicate label detected: labels must be injective over vertices")]
    DuplicateLabel,
    #[error("label id field decodes to {found} but vertex index is {expected}")]
    LabelIdMismatch { found: u64, expected: u64 },
    #[error("duplicate catalog section {0:?}")]
    DuplicateSection(String),
    #[error("catalog section name is not utf-8")]
    BadSectionName,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// varint: unsigned little-endian base-128
// ---------------------------------------------------------------------------

/// Appends `value` as an unsigned LEB128 varint.
pub fn write_varint(out: &mut Vec<u8>, mut value: u64) {
    loop {
        let byte = (value & 0x7f) as u8;
        value >>= 7;
        if value == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

/// Reads a varint from `buf` starting at `*pos`, advancing the cursor.
pub fn read_varint(buf: &[u8], pos: &mut usize) -> Result<u64, CodecError> {
    let mut value: u64 = 0;
    let mut shift = 0u32;
    loop {
        let byte = *buf
            .get(*pos)
            .ok_or(CodecError::Truncated { context: "varint" })?;
        *pos += 1;
        if shift == 63 && byte > 1 {
            return Err(CodecError::VarintOverflow);
        }
        value |= u64::from(byte & 0x7f) << shift;
        if byte & 0x80 == 0 {
            return Ok(value);
        }
        shift += 7;
        if shift > 63 {
            return Err(CodecError::VarintOverflow);
        }
    }
}

/// Number of bytes `value` occupies as a varint.
pub fn varint_len(value: u64) -> usize {
    let bits = 64 - value.leading_zeros().max(0) as usize;
    std::cmp::max(1, bits.div_ceil(7))
}

/// Varint length of the largest vertex id of an `n`-vertex graph,
/// i.e. the per-id byte budget used in label-size accounting.
pub fn varbytes(n: usize) -> usize {
    varint_len(n as u64)
}

// ---------------------------------------------------------------------------
// CRC-32 (IEEE, reflected)
// ---------------------------------------------------------------------------

fn crc32_table() -> &'static [u32; 256] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[u32; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [0u32; 256];
        for (i, slot) in table.iter_mut().enumerate() {
            let mut c = i as u32;
            for _ in 0..8 {
                c = if c & 1 != 0 { 0xedb8_8320 ^ (c >> 1) } else { c >> 1 };
            }
            *slot = c;
        }
        table
    })
}

/// CRC-32 (IEEE 802.3) of `data`.
pub fn crc32(data: &[u8]) -> u32 {
    let table = crc32_table();
    let mut c = 0xffff_ffffu32;
    for &b in data {
        c = table[((c ^ u32::from(b)) & 0xff) as usize] ^ (c >> 8);
    }
    c ^ 0xffff_ffff
}

// ---------------------------------------------------------------------------
// LabelBundle
// ---------------------------------------------------------------------------

/// Immutable map vertex -> byte-string label, plus the scheme that built it.
///
/// Labels are injective over vertices and each label's first field is the
/// varint of its own vertex id, so a label alone identifies its vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelBundle {
    scheme_id: u8,
    labels: Vec<Vec<u8>>,
}

impl LabelBundle {
    /// Wraps freshly built labels, checking injectivity and the id-prefix
    /// convention.
    pub fn new(scheme_id: u8, labels: Vec<Vec<u8>>) -> Result<Self, CodecError> {
        let mut seen = std::collections::BTreeSet::new();
        for (v, label) in labels.iter().enumerate() {
            if !seen.insert(label.as_slice()) {
                return Err(CodecError::DuplicateLabel);
            }
            let mut pos = 0;
            let id = read_varint(label, &mut pos)?;
            if id != v as u64 {
                return Err(CodecError::LabelIdMismatch { found: id, expected: v as u64 });
            }
        }
        Ok(LabelBundle { scheme_id, labels })
    }

    pub fn scheme_id(&self) -> u8 {
        self.scheme_id
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, v: usize) -> &[u8] {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[Vec<u8>] {
        &self.labels
    }

    /// Decodes the vertex id a label identifies (its leading varint).
    pub fn vertex_of_label(label: &[u8]) -> Result<u64, CodecError> {
        let mut pos = 0;
        read_varint(label, &mut pos)
    }

    pub fn write_to(&self, sink: &mut impl Write) -> Result<(), CodecError> {
        let mut buf = Vec::new();
        buf.extend_from_slice(&BUNDLE_MAGIC);
        buf.push(self.scheme_id);
        write_varint(&mut buf, self.labels.len() as u64);
        for label in &self.labels {
            write_varint(&mut buf, label.len() as u64);
            buf.extend_from_slice(label);
        }
        let crc = crc32(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        sink.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(source: &mut impl Read) -> Result<Self, CodecError> {
        let mut buf = Vec::new();
        source.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, CodecError> {
        if buf.len() < 4 + 1 + 4 {
            if buf.len() < 4 || buf[..4] != BUNDLE_MAGIC {
                return Err(CodecError::BadMagic { expected: BUNDLE_MAGIC });
            }
            return Err(CodecError::Truncated { context: "bundle header" });
        }
        if buf[..4] != BUNDLE_MAGIC {
            return Err(CodecError::BadMagic { expected: BUNDLE_MAGIC });
        }
        let body = &buf[..buf.len() - 4];
        let stored = u32::from_le_bytes(buf[buf.len() - 4..].try_into().unwrap());
        let computed = crc32(body);
        if stored != computed {
            return Err(CodecError::ChecksumMismatch { stored, computed });
        }
        let mut pos = 4;
        let scheme_id = body[pos];
        pos += 1;
        let n = read_varint(body, &mut pos)? as usize;
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let len = read_varint(body, &mut pos)? as usize;
            let end = pos
                .checked_add(len)
                .filter(|&e| e <= body.len())
                .ok_or(CodecError::Truncated { context: "label payload" })?;
            labels.push(body[pos..end].to_vec());
            pos = end;
        }
        if pos != body.len() {
            return Err(CodecError::Truncated { context: "bundle trailer" });
        }
        Self::new(scheme_id, labels)
    }

    pub fn report(&self) -> LabelLengthReport {
        LabelLengthReport::for_bundle(self)
    }
}

/// Size statistics of a bundle; lengths are counted in bits (8 per byte,
/// labels are byte-aligned).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LabelLengthReport {
    pub n: usize,
    pub max_bits: usize,
    pub mean_bits: f64,
    /// label byte-length -> number of vertices with that length
    pub histogram: BTreeMap<usize, usize>,
}

impl LabelLengthReport {
    pub fn for_bundle(bundle: &LabelBundle) -> Self {
        let mut histogram = BTreeMap::new();
        let mut total_bits = 0usize;
        let mut max_bits = 0usize;
        for label in &bundle.labels {
            let bits = label.len() * 8;
            total_bits += bits;
            max_bits = max_bits.max(bits);
            *histogram.entry(label.len()).or_insert(0) += 1;
        }
        let mean_bits = if bundle.labels.is_empty() {
            0.0
        } else {
            total_bits as f64 / bundle.labels.len() as f64
        };
        LabelLengthReport { n: bundle.labels.len(), max_bits, mean_bits, histogram }
    }
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

/// Shared read-only side data emitted by a builder and consulted by its
/// decoder: piece subgraphs, colorings, truth-bit vectors, partition tables.
///
/// Catalogs are deliberately not labels. Every report keeps catalog bytes
/// separate from per-vertex label bits.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Catalog {
    scheme_id: u8,
    sections: BTreeMap<String, Vec<u8>>,
}

impl Catalog {
    pub fn new(scheme_id: u8) -> Self {
        Catalog { scheme_id, sections: BTreeMap::new() }
    }

    pub fn scheme_id(&self) -> u8 {
        self.scheme_id
    }

    pub fn insert(&mut self, name: impl Into<String>, bytes: Vec<u8>) -> Result<(), CodecError> {
        let name = name.into();
        if self.sections.contains_key(&name) {
            return Err(CodecError::DuplicateSection(name));
        }
        self.sections.insert(name, bytes);
        Ok(())
    }

    pub fn section(&self, name: &str) -> Option<&[u8]> {
        self.sections.get(name).map(Vec::as_slice)
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    /// Total payload bytes across sections (names excluded).
    pub fn payload_bytes(&self) -> usize {
        self.sections.values().map(Vec::len).sum()
    }

    /// Content checksum over the canonical serialization.
    pub fn checksum(&self) -> u32 {
        crc32(&self.to_bytes()[..])
    }

    pub fn write_to(&self, sink: &mut impl Write) -> Result<(), CodecError> {
        let mut buf = Vec::new();
        buf.extend_from_slice(&CATALOG_MAGIC);
        buf.push(self.scheme_id);
        write_varint(&mut buf, self.sections.len() as u64);
        for (name, bytes) in &self.sections {
            write_varint(&mut buf, name.len() as u64);
            buf.extend_from_slice(name.as_bytes());
            write_varint(&mut buf, bytes.len() as u64);
            buf.extend_from_slice(bytes);
        }
        let crc = crc32(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        sink.write_all(&buf)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from(source: &mut impl Read) -> Result<Self, CodecError> {
        let mut buf = Vec::new();
        source.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, CodecError> {
        if buf.len() < 4 || buf[..4] != CATALOG_MAGIC {
            return Err(CodecError::BadMagic { expected: CATALOG_MAGIC });
        }
        if buf.len() < 4 + 1 + 4 {
            return Err(CodecError::Truncated { context: "catalog header" });
        }
        let body = &buf[..buf.len() - 4];
        let stored = u32::from_le_bytes(buf[buf.len() - 4..].try_into().unwrap());
        let computed = crc32(body);
        if stored != computed {
            return Err(CodecError::ChecksumMismatch { stored, computed });
        }
        let mut pos = 4;
        let scheme_id = body[pos];
        pos += 1;
        let count = read_varint(body, &mut pos)? as usize;
        let mut catalog = Catalog::new(scheme_id);
        for _ in 0..count {
            let name_len = read_varint(body, &mut pos)? as usize;
            let name_end = pos
                .checked_add(name_len)
                .filter(|&e| e <= body.len())
                .ok_or(CodecError::Truncated { context: "section name" })?;
            let name = std::str::from_utf8(&body[pos..name_end])
                .map_err(|_| CodecError::BadSectionName)?
                .to_owned();
            pos = name_end;
            let len = read_varint(body, &mut pos)? as usize;
            let end = pos
                .checked_add(len)
                .filter(|&e| e <= body.len())
                .ok_or(CodecError::Truncated { context: "section payload" })?;
            catalog.insert(name, body[pos..end].to_vec())?;
            pos = end;
        }
        if pos != body.len() {
            return Err(CodecError::Truncated { context: "catalog trailer" });
        }
        Ok(catalog)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn varint_boundaries() {
        let mut buf = Vec::new();
        write_varint(&mut buf, 0);
        assert_eq!(buf, [0x00]);
        buf.clear();
        write_varint(&mut buf, 127);
        assert_eq!(buf.len(), 1);
        buf.clear();
        write_varint(&mut buf, 128);
        assert_eq!(buf.len(), 2);
        assert_eq!(varint_len(0), 1);
        assert_eq!(varint_len(127), 1);
        assert_eq!(varint_len(128), 2);
        assert_eq!(varint_len(u64::MAX), 10);
    }

    #[test]
    fn varint_fuzz_round_trip() {
        // deterministic LCG walk over a million values
        let mut x: u64 = 0x9e3779b97f4a7c15;
        let mut buf = Vec::new();
        for i in 0..1_000_000u64 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let v = x >> (i % 40);
            buf.clear();
            write_varint(&mut buf, v);
            let mut pos = 0;
            assert_eq!(read_varint(&buf, &mut pos).unwrap(), v);
            assert_eq!(pos, buf.len());
            assert_eq!(varint_len(v), buf.len());
        }
    }

    #[test]
    fn crc32_known_vector() {
        assert_eq!(crc32(b"123456789"), 0xcbf43926);
        assert_eq!(crc32(b""), 0);
    }

    fn label_for(v: usize, extra: &[u8]) -> Vec<u8> {
        let mut l = Vec::new();
        write_varint(&mut l, v as u64);
        l.extend_from_slice(extra);
        l
    }

    #[test]
    fn empty_bundle_is_header_only() {
        let bundle = LabelBundle::new(0x01, vec![]).unwrap();
        let bytes = bundle.to_bytes();
        // magic + scheme + varint(0) + crc
        assert_eq!(bytes.len(), 4 + 1 + 1 + 4);
        assert_eq!(LabelBundle::from_bytes(&bytes).unwrap(), bundle);
    }

    #[test]
    fn one_vertex_round_trip() {
        let bundle = LabelBundle::new(0x01, vec![label_for(0, b"abc")]).unwrap();
        let bytes = bundle.to_bytes();
        assert_eq!(LabelBundle::from_bytes(&bytes).unwrap(), bundle);
    }

    #[test]
    fn bundle_error_paths_are_distinct() {
        let bundle = LabelBundle::new(0x02, vec![label_for(0, b"x"), label_for(1, b"y")]).unwrap();
        let bytes = bundle.to_bytes();

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            LabelBundle::from_bytes(&bad_magic),
            Err(CodecError::BadMagic { .. })
        ));

        let truncated = &bytes[..bytes.len() - 6];
        assert!(matches!(
            LabelBundle::from_bytes(truncated),
            Err(CodecError::ChecksumMismatch { .. }) | Err(CodecError::Truncated { .. })
        ));

        let mut flipped = bytes.clone();
        let mid = bytes.len() / 2;
        flipped[mid] ^= 0xff;
        assert!(matches!(
            LabelBundle::from_bytes(&flipped),
            Err(CodecError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let err = LabelBundle::new(0x01, vec![label_for(0, b"s"), label_for(0, b"s")]);
        assert!(matches!(err, Err(CodecError::DuplicateLabel)));
        // distinct labels but a wrong id prefix
        let err = LabelBundle::new(0x01, vec![label_for(0, b"s"), label_for(7, b"t")]);
        assert!(matches!(err, Err(CodecError::LabelIdMismatch { found: 7, expected: 1 })));
        // same payload, ids differ -> fine
        LabelBundle::new(0x01, vec![label_for(0, b"s"), label_for(1, b"s")]).unwrap();
    }

    #[test]
    fn catalog_round_trip_and_checksum() {
        let mut cat = Catalog::new(0x03);
        cat.insert("cover/meta", vec![1, 2, 3]).unwrap();
        cat.insert("piece/0", vec![]).unwrap();
        cat.insert("piece/1", vec![0xff; 100]).unwrap();
        let bytes = cat.to_bytes();
        let back = Catalog::from_bytes(&bytes).unwrap();
        assert_eq!(back, cat);
        assert_eq!(back.checksum(), cat.checksum());
        assert_eq!(cat.payload_bytes(), 103);

        let mut corrupted = bytes.clone();
        let mid = bytes.len() - 10;
        corrupted[mid] ^= 1;
        assert!(matches!(
            Catalog::from_bytes(&corrupted),
            Err(CodecError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn label_length_report_single_bucket() {
        let labels = (0..200).map(|v| label_for(v, &[0u8; 3])).collect();
        let bundle = LabelBundle::new(0x01, labels).unwrap();
        let report = bundle.report();
        // ids 0..127 take 1 varint byte, 128..199 take 2
        assert_eq!(report.histogram.len(), 2);
        assert_eq!(report.max_bits, 8 * 5);

        let labels = (0..100).map(|v| label_for(v, &[7u8; 4])).collect();
        let report = LabelBundle::new(0x01, labels).unwrap().report();
        assert_eq!(report.histogram.len(), 1);
        assert_eq!(report.mean_bits, 40.0);
    }

    proptest! {
        #[test]
        fn bundle_round_trip_random(labels in proptest::collection::vec(
            proptest::collection::vec(any::<u8>(), 0..40), 0..60))
        {
            let labels: Vec<Vec<u8>> = labels
                .into_iter()
                .enumerate()
                .map(|(v, extra)| label_for(v, &extra))
                .collect();
            let bundle = LabelBundle::new(0x05, labels).unwrap();
            let bytes = bundle.to_bytes();
            prop_assert_eq!(LabelBundle::from_bytes(&bytes).unwrap(), bundle);
        }

        #[test]
        fn catalog_round_trip_random(sections in proptest::collection::btree_map(
            "[a-z/0-9]{1,12}", proptest::collection::vec(any::<u8>(), 0..50), 0..10))
        {
            let mut cat = Catalog::new(0x04);
            for (name, bytes) in sections {
                cat.insert(name, bytes).unwrap();
            }
            let bytes = cat.to_bytes();
            prop_assert_eq!(Catalog::from_bytes(&bytes).unwrap(), cat);
        }
    }
}
