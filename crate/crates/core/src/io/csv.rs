//! CSV form of the record file.
//!
//! Header row: `sample_id,true_label,logit_0..logit_{K-1},feat_0..feat_{D-1}`,
//! optionally followed by `raw_0..raw_{R-1}`. Values are written in shortest
//! round-trip form, so binary -> CSV -> binary is lossless.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::io::binary::Header;
use crate::record::InferenceRecord;

fn header_names(header: &Header) -> Vec<String> {
    let mut names = vec!["sample_id".to_string(), "true_label".to_string()];
    names.extend((0..header.num_classes).map(|i| format!("logit_{i}")));
    names.extend((0..header.feature_dim).map(|i| format!("feat_{i}")));
    names.extend((0..header.raw_len.unwrap_or(0)).map(|i| format!("raw_{i}")));
    names
}

fn count_prefixed(names: &[&str], start: usize, prefix: &str) -> usize {
    names[start.min(names.len())..]
        .iter()
        .take_while(|n| n.starts_with(prefix))
        .count()
}

fn parse_header(names: &[&str]) -> Result<Header> {
    let missing = |column: &str| Error::Parse {
        row: 1,
        column: column.to_string(),
        message: "missing or misplaced column".into(),
    };
    if names.first() != Some(&"sample_id") {
        return Err(missing("sample_id"));
    }
    if names.get(1) != Some(&"true_label") {
        return Err(missing("true_label"));
    }
    let k = count_prefixed(names, 2, "logit_");
    let d = count_prefixed(names, 2 + k, "feat_");
    let r = count_prefixed(names, 2 + k + d, "raw_");
    if k == 0 {
        return Err(missing("logit_0"));
    }
    if d == 0 {
        return Err(missing("feat_0"));
    }
    let header = Header::new(k, d, (r > 0).then_some(r))?;
    let expected = header_names(&header);
    for (i, name) in expected.iter().enumerate() {
        if names.get(i) != Some(&name.as_str()) {
            return Err(missing(name));
        }
    }
    if names.len() > expected.len() {
        return Err(Error::Parse {
            row: 1,
            column: names[expected.len()].to_string(),
            message: "unexpected column".into(),
        });
    }
    Ok(header)
}

/// Streaming CSV record reader, semantically identical to the binary reader.
pub struct CsvRecordReader<R: Read> {
    reader: csv::Reader<R>,
    header: Header,
    columns: Vec<String>,
    row: csv::StringRecord,
    done: bool,
}

pub fn read_records_csv<R: Read>(source: R) -> Result<CsvRecordReader<R>> {
    CsvRecordReader::new(source)
}

impl<R: Read> CsvRecordReader<R> {
    pub fn new(source: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
        let names = reader.headers().map_err(csv_error)?.clone();
        let names: Vec<&str> = names.iter().map(str::trim).collect();
        let header = parse_header(&names)?;
        Ok(CsvRecordReader {
            reader,
            header,
            columns: header_names(&header),
            row: csv::StringRecord::new(),
            done: false,
        })
    }

    pub fn header(&self) -> Header {
        self.header
    }

    fn next_record(&mut self) -> Result<Option<InferenceRecord>> {
        if !self.reader.read_record(&mut self.row).map_err(csv_error)? {
            return Ok(None);
        }
        let line = self.row.position().map_or(0, |p| p.line());
        let cell = |i: usize| self.row.get(i).unwrap_or("").trim();
        let parse_err = |i: usize, message: String| Error::Parse {
            row: line,
            column: self.columns[i].clone(),
            message,
        };
        let sample_id = cell(0)
            .parse::<u64>()
            .map_err(|e| parse_err(0, format!("{:?}: {e}", cell(0))))?;
        let true_label = cell(1)
            .parse::<i32>()
            .map_err(|e| parse_err(1, format!("{:?}: {e}", cell(1))))?;
        let floats = |start: usize, len: usize| -> Result<Vec<f32>> {
            (start..start + len)
                .map(|i| {
                    cell(i)
                        .parse::<f32>()
                        .map_err(|e| parse_err(i, format!("{:?}: {e}", cell(i))))
                })
                .collect()
        };
        let (k, d) = (self.header.num_classes, self.header.feature_dim);
        let logits = floats(2, k)?;
        let features = floats(2 + k, d)?;
        let raw_input = match self.header.raw_len {
            Some(r) => Some(floats(2 + k + d, r)?),
            None => None,
        };
        let record = InferenceRecord {
            sample_id,
            true_label,
            logits,
            features,
            raw_input,
        };
        record.validate(k, d)?;
        Ok(Some(record))
    }
}

impl<R: Read> Iterator for CsvRecordReader<R> {
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

fn csv_error(err: csv::Error) -> Error {
    let row = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            row,
            column: String::new(),
            message: format!("row has {len} cells, header has {expected_len}"),
        },
        other => Error::Parse {
            row,
            column: String::new(),
            message: format!("{other:?}"),
        },
    }
}

/// Streaming CSV record writer.
pub struct CsvRecordWriter<W: Write> {
    writer: csv::Writer<W>,
    header: Header,
    row: Vec<String>,
    count: u64,
}

impl<W: Write> CsvRecordWriter<W> {
    pub fn new(sink: W, header: Header) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(header_names(&header)).map_err(csv_error)?;
        Ok(CsvRecordWriter {
            writer,
            header,
            row: Vec::new(),
            count: 0,
        })
    }

    pub fn write(&mut self, record: &InferenceRecord) -> Result<()> {
        let header = &self.header;
        record.validate(header.num_classes, header.feature_dim)?;
        if record.raw_input.as_ref().map(Vec::len) != header.raw_len {
            return Err(Error::DimensionMismatch {
                sample_id: record.sample_id,
                what: "raw_input",
                expected: header.raw_len.unwrap_or(0),
                found: record.raw_input.as_ref().map_or(0, Vec::len),
            });
        }
        self.row.clear();
        self.row.push(record.sample_id.to_string());
        self.row.push(record.true_label.to_string());
        self.row.extend(
            record
                .logits
                .iter()
                .chain(&record.features)
                .chain(record.raw_input.iter().flatten())
                .map(f32::to_string),
        );
        self.writer.write_record(&self.row).map_err(csv_error)?;
        self.count += 1;
        Ok(())
    }

    /// Flushes and returns the number of records written.
    pub fn finish(mut self) -> Result<u64> {
        self.writer.flush()?;
        Ok(self.count)
    }
}

/// Writes records as CSV; returns the number of records written.
pub fn write_records_csv<'a, I, W>(records: I, sink: W, header: Header) -> Result<u64>
where
    I: IntoIterator<Item = &'a InferenceRecord>,
    W: Write,
{
    let mut writer = CsvRecordWriter::new(sink, header)?;
    for record in records {
        writer.write(record)?;
    }
    writer.finish()
}
