//! The `.osr` binary record file.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! header, 24 bytes
//!   0   [u8; 4]  magic "OSR1"
//!   4   u16      version (1)
//!   6   u16      flags (bit 0: every record carries a raw-input segment)
//!   8   u32      K, number of logits
//!   12  u32      D, number of features
//!   16  u32      R, raw-input length (0 unless flag bit 0 is set)
//!   20  u32      reserved, must be 0
//! record, 12 + 4 * (K + D + R) bytes
//!   0   u64      sample_id
//!   8   i32      true_label
//!   12  [f32; K] logits
//!       [f32; D] features
//!       [f32; R] raw input (only when flag bit 0 is set)
//! ```
//!
//! There is no record count; a file ends after its last complete record.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::record::InferenceRecord;

pub const MAGIC: [u8; 4] = *b"OSR1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;
pub const FLAG_RAW_INPUT: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub num_classes: usize,
    pub feature_dim: usize,
    /// Length of the raw-input segment, `None` when records carry none.
    pub raw_len: Option<usize>,
}

impl Header {
    pub fn new(num_classes: usize, feature_dim: usize, raw_len: Option<usize>) -> Result<Self> {
        let header = Header {
            num_classes,
            feature_dim,
            raw_len,
        };
        header.validate()?;
        Ok(header)
    }

    fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Invariant(format!(
                "record files need K >= 2, got {}",
                self.num_classes
            )));
        }
        if self.feature_dim < 1 {
            return Err(Error::Invariant("record files need D >= 1".into()));
        }
        if self.raw_len == Some(0) {
            return Err(Error::Invariant("raw-input segment of length 0".into()));
        }
        for v in [self.num_classes, self.feature_dim, self.raw_len.unwrap_or(0)] {
            if u32::try_from(v).is_err() {
                return Err(Error::Invariant(format!("dimension {v} does not fit in u32")));
            }
        }
        Ok(())
    }

    pub fn record_len(&self) -> usize {
        12 + 4 * (self.num_classes + self.feature_dim + self.raw_len.unwrap_or(0))
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&MAGIC);
        out[4..6].copy_from_slice(&VERSION.to_le_bytes());
        let flags = if self.raw_len.is_some() { FLAG_RAW_INPUT } else { 0 };
        out[6..8].copy_from_slice(&flags.to_le_bytes());
        out[8..12].copy_from_slice(&(self.num_classes as u32).to_le_bytes());
        out[12..16].copy_from_slice(&(self.feature_dim as u32).to_le_bytes());
        out[16..20].copy_from_slice(&(self.raw_len.unwrap_or(0) as u32).to_le_bytes());
        out
    }

    fn decode(bytes: &[u8; HEADER_LEN]) -> Result<Self> {
        if bytes[0..4] != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected \"OSR1\"",
                String::from_utf8_lossy(&bytes[0..4])
            )));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let version = u16_at(4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let flags = u16_at(6);
        if flags & !FLAG_RAW_INPUT != 0 {
            return Err(Error::Format(format!("unknown flag bits {flags:#06x}")));
        }
        if u32_at(20) != 0 {
            return Err(Error::Format("reserved header field is not zero".into()));
        }
        let raw = u32_at(16);
        let raw_len = if flags & FLAG_RAW_INPUT != 0 {
            Some(raw)
        } else if raw != 0 {
            return Err(Error::Format("raw-input length set without its flag".into()));
        } else {
            None
        };
        Header::new(u32_at(8), u32_at(12), raw_len)
    }
}

/// Streaming writer for `.osr` files.
pub struct RecordWriter<W: Write> {
    sink: W,
    header: Header,
    buf: Vec<u8>,
    bytes_written: u64,
}

impl<W: Write> RecordWriter<W> {
    /// Writes the header immediately.
    pub fn new(mut sink: W, header: Header) -> Result<Self> {
        sink.write_all(&header.encode())?;
        Ok(RecordWriter {
            sink,
            header,
            buf: Vec::with_capacity(header.record_len()),
            bytes_written: HEADER_LEN as u64,
        })
    }

    pub fn header(&self) -> Header {
        self.header
    }

    pub fn write(&mut self, record: &InferenceRecord) -> Result<()> {
        record.validate(self.header.num_classes, self.header.feature_dim)?;
        match (self.header.raw_len, &record.raw_input) {
            (None, None) => {}
            (Some(expected), Some(raw)) if raw.len() == expected => {}
            (expected, raw) => {
                return Err(Error::DimensionMismatch {
                    sample_id: record.sample_id,
                    what: "raw_input",
                    expected: expected.unwrap_or(0),
                    found: raw.as_ref().map_or(0, Vec::len),
                })
            }
        }
        self.buf.clear();
        self.buf.extend_from_slice(&record.sample_id.to_le_bytes());
        self.buf.extend_from_slice(&record.true_label.to_le_bytes());
        let values = record
            .logits
            .iter()
            .chain(&record.features)
            .chain(record.raw_input.iter().flatten());
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
        self.sink.write_all(&self.buf)?;
        self.bytes_written += self.buf.len() as u64;
        Ok(())
    }

    /// Flushes and returns the total number of bytes written, header included.
    pub fn finish(mut self) -> Result<u64> {
        self.sink.flush()?;
        Ok(self.bytes_written)
    }
}

/// Writes a whole record sequence. The raw-input segment is enabled when the
/// first record carries raw input; all records must then agree.
pub fn write_records<'a, I, W>(records: I, sink: W, num_classes: usize, feature_dim: usize) -> Result<u64>
where
    I: IntoIterator<Item = &'a InferenceRecord>,
    W: Write,
{
    let mut records = records.into_iter().peekable();
    let raw_len = records.peek().and_then(|r| r.raw_input.as_ref()).map(Vec::len);
    let mut writer = RecordWriter::new(sink, Header::new(num_classes, feature_dim, raw_len)?)?;
    for record in records {
        writer.write(record)?;
    }
    writer.finish()
}

/// Lazy reader over an `.osr` stream; yields records in file order.
pub struct RecordReader<R: Read> {
    source: R,
    header: Header,
    buf: Vec<u8>,
    offset: u64,
    index: u64,
    done: bool,
}

/// Opens a record stream; the header is read and validated eagerly.
pub fn read_records<R: Read>(source: R) -> Result<RecordReader<R>> {
    RecordReader::new(source)
}

impl<R: Read> RecordReader<R> {
    pub fn new(mut source: R) -> Result<Self> {
        let mut raw = [0u8; HEADER_LEN];
        let got = read_full(&mut source, &mut raw)?;
        if got < HEADER_LEN {
            return Err(Error::Truncated {
                offset: got as u64,
                last_complete: None,
            });
        }
        let header = Header::decode(&raw)?;
        Ok(RecordReader {
            source,
            header,
            buf: vec![0u8; header.record_len()],
            offset: HEADER_LEN as u64,
            index: 0,
            done: false,
        })
    }

    pub fn header(&self) -> Header {
        self.header
    }

    pub fn num_classes(&self) -> usize {
        self.header.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.header.feature_dim
    }

    fn next_record(&mut self) -> Result<Option<InferenceRecord>> {
        let got = read_full(&mut self.source, &mut self.buf)?;
        if got == 0 {
            return Ok(None);
        }
        if got < self.buf.len() {
            return Err(Error::Truncated {
                offset: self.offset + got as u64,
                last_complete: self.index.checked_sub(1),
            });
        }
        let record = decode_record(&self.buf, &self.header);
        record.validate(self.header.num_classes, self.header.feature_dim)?;
        self.offset += self.buf.len() as u64;
        self.index += 1;
        Ok(Some(record))
    }
}

impl<R: Read> Iterator for RecordReader<R> {
    type Item = Result<InferenceRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.next_record().transpose();
        if !matches!(item, Some(Ok(_))) {
            self.done = true;
        }
        item
    }
}

fn decode_record(buf: &[u8], header: &Header) -> InferenceRecord {
    let sample_id = u64::from_le_bytes(buf[0..8].try_into().unwrap());
    let true_label = i32::from_le_bytes(buf[8..12].try_into().unwrap());
    let mut floats = buf[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let logits = floats.by_ref().take(header.num_classes).collect();
    let features = floats.by_ref().take(header.feature_dim).collect();
    let raw_input = header.raw_len.map(|n| floats.by_ref().take(n).collect());
    InferenceRecord {
        sample_id,
        true_label,
        logits,
        features,
        raw_input,
    }
}

/// Like `read_exact`, but reports how many bytes were available instead of failing.
fn read_full<R: Read>(source: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(k: usize, d: usize, n: usize) -> Vec<InferenceRecord> {
        (0..n)
            .map(|i| {
                InferenceRecord::new(
                    i as u64,
                    (i % k) as i32,
                    (0..k).map(|j| (i * 7 + j) as f32 * 0.25).collect(),
                    (0..d).map(|j| (j as f32 - i as f32) * 0.5).collect(),
                )
            })
            .collect()
    }

    fn read_all(bytes: &[u8]) -> Result<(Header, Vec<InferenceRecord>)> {
        let reader = read_records(bytes)?;
        let header = reader.header();
        Ok((header, reader.collect::<Result<Vec<_>>>()?))
    }

    #[test]
    fn empty_sequence_is_header_only() {
        let mut out = Vec::new();
        let n = write_records(&[], &mut out, 3, 4).unwrap();
        assert_eq!(n, HEADER_LEN as u64);
        assert_eq!(out.len(), HEADER_LEN);
        let (header, records) = read_all(&out).unwrap();
        assert_eq!((header.num_classes, header.feature_dim), (3, 4));
        assert!(records.is_empty());
    }

    #[test]
    fn single_record_round_trip() {
        let rec = InferenceRecord::new(9, -1, vec![1.5, -2.25], vec![0.1, 0.2, 0.3]);
        let mut out = Vec::new();
        let n = write_records([&rec], &mut out, 2, 3).unwrap();
        assert_eq!(n as usize, HEADER_LEN + 12 + 4 * 5);
        let (_, records) = read_all(&out).unwrap();
        assert_eq!(records, vec![rec]);
    }

    #[test]
    fn header_bytes_are_pinned() {
        let mut out = Vec::new();
        write_records(&[], &mut out, 2, 3).unwrap();
        assert_eq!(
            out,
            [b'O', b'S', b'R', b'1', 1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]
        );
    }

    #[test]
    fn raw_input_segment_round_trip() {
        let records: Vec<_> = sample(2, 2, 3)
            .into_iter()
            .map(|r| r.with_raw_input(vec![1.0, 2.0, 3.0]))
            .collect();
        let mut out = Vec::new();
        write_records(&records, &mut out, 2, 2).unwrap();
        let (header, back) = read_all(&out).unwrap();
        assert_eq!(header.raw_len, Some(3));
        assert_eq!(back, records);
    }

    #[test]
    fn mixed_raw_input_is_rejected() {
        let mut records = sample(2, 2, 2);
        records[0].raw_input = Some(vec![1.0]);
        let err = write_records(&records, Vec::new(), 2, 2).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { sample_id: 1, .. }));
    }

    #[test]
    fn dimension_mismatch_names_sample() {
        let mut records = sample(2, 2, 3);
        records[2].features.push(0.0);
        match write_records(&records, Vec::new(), 2, 2) {
            Err(Error::DimensionMismatch { sample_id, what, .. }) => {
                assert_eq!(sample_id, 2);
                assert_eq!(what, "features");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn corrupted_magic() {
        let mut out = Vec::new();
        write_records(&sample(2, 2, 1), &mut out, 2, 2).unwrap();
        out[0] = b'X';
        assert!(matches!(read_records(out.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn bad_version() {
        let mut out = Vec::new();
        write_records(&[], &mut out, 2, 2).unwrap();
        out[4] = 2;
        assert!(matches!(read_records(out.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn single_class_header_rejected() {
        let mut out = Vec::new();
        write_records(&[], &mut out, 2, 2).unwrap();
        out[8] = 1;
        assert!(matches!(read_records(out.as_slice()), Err(Error::Invariant(_))));
    }

    #[test]
    fn truncation_reports_offset_and_last_complete_record() {
        let (k, d) = (3, 5);
        let records = sample(k, d, 10);
        let mut out = Vec::new();
        write_records(&records, &mut out, k, d).unwrap();
        let record_len = 12 + 4 * (k + d);
        // cut seven records in, part-way through the eighth (index 7)
        let cut = HEADER_LEN + 7 * record_len + 13;
        let mut reader = read_records(&out[..cut]).unwrap();
        for _ in 0..7 {
            reader.next().unwrap().unwrap();
        }
        match reader.next() {
            Some(Err(Error::Truncated { offset, last_complete })) => {
                assert_eq!(offset, cut as u64);
                assert_eq!(last_complete, Some(6));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(reader.next().is_none());
    }

    #[test]
    fn truncated_inside_first_record_and_header() {
        let mut out = Vec::new();
        write_records(&sample(2, 2, 1), &mut out, 2, 2).unwrap();
        let mut reader = read_records(&out[..HEADER_LEN + 3]).unwrap();
        assert!(matches!(
            reader.next(),
            Some(Err(Error::Truncated {
                last_complete: None,
                ..
            }))
        ));
        assert!(matches!(
            read_records(&out[..10]),
            Err(Error::Truncated {
                offset: 10,
                last_complete: None
            })
        ));
    }

    #[test]
    fn non_finite_payload_rejected_on_read() {
        let mut out = Vec::new();
        write_records(&sample(2, 2, 1), &mut out, 2, 2).unwrap();
        out[HEADER_LEN + 12..HEADER_LEN + 16].copy_from_slice(&f32::INFINITY.to_le_bytes());
        let mut reader = read_records(out.as_slice()).unwrap();
        assert!(matches!(reader.next(), Some(Err(Error::Invariant(_)))));
    }

    fn arb_record(k: usize, d: usize) -> impl Strategy<Value = InferenceRecord> {
        (
            any::<u64>(),
            -2i32..1000,
            prop::collection::vec(-1e30f32..1e30, k),
            prop::collection::vec(-1e30f32..1e30, d),
        )
            .prop_map(|(id, label, logits, features)| InferenceRecord::new(id, label, logits, features))
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(records in prop::collection::vec(arb_record(4, 3), 0..50)) {
            let mut out = Vec::new();
            write_records(&records, &mut out, 4, 3).unwrap();
            let (_, back) = read_all(&out).unwrap();
            prop_assert_eq!(&back, &records);
            let mut again = Vec::new();
            write_records(&back, &mut again, 4, 3).unwrap();
            prop_assert_eq!(again, out);
        }
    }
}
