//! Record file formats: the `.osr` binary layout and its CSV equivalent.

pub mod binary;
pub mod csv;

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

pub use self::binary::{read_records, write_records, Header, RecordReader, RecordWriter};
pub use self::csv::{read_records_csv, write_records_csv, CsvRecordReader, CsvRecordWriter};

use crate::error::Result;
use crate::record::InferenceRecord;

/// Either reader, picked from the stream's first bytes.
pub enum RecordSource<R: Read> {
    Binary(RecordReader<R>),
    Csv(CsvRecordReader<R>),
}

impl RecordSource<Box<dyn Read>> {
    /// Opens a record file, recognizing the binary format by its magic.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let mut file = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        let mut n = 0;
        while n < 4 {
            match file.read(&mut magic[n..])? {
                0 => break,
                got => n += got,
            }
        }
        let rest: Box<dyn Read> = Box::new(std::io::Cursor::new(magic[..n].to_vec()).chain(file));
        Self::from_reader(rest, magic[..n] == binary::MAGIC)
    }
}

impl<R: Read> RecordSource<R> {
    pub fn from_reader(source: R, binary: bool) -> Result<Self> {
        Ok(if binary {
            RecordSource::Binary(read_records(source)?)
        } else {
            RecordSource::Csv(read_records_csv(source)?)
        })
    }

    pub fn header(&self) -> Header {
        match self {
            RecordSource::Binary(r) => r.header(),
            RecordSource::Csv(r) => r.header(),
        }
    }
}

impl<R: Read> Iterator for RecordSource<R> {
    type Item = Result<InferenceRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            RecordSource::Binary(r) => r.next(),
            RecordSource::Csv(r) => r.next(),
        }
    }
}
