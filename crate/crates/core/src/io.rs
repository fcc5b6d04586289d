//! File plumbing shared by the stage readers and writers: transparent gzip
//! on `.gz` paths and outputs that only appear under their final name once
//! fully written.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};

pub fn is_gzip_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

pub fn open_reader(path: &Path) -> Result<Box<dyn BufRead + Send>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if is_gzip_path(path) {
        Ok(Box::new(BufReader::with_capacity(1 << 16, MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::with_capacity(1 << 16, file)))
    }
}

/// Iterates the lines of a text file with 1-based line numbers, stripping
/// the line terminator. I/O errors carry the path.
pub struct Lines {
    reader: Box<dyn BufRead + Send>,
    path: PathBuf,
    line: u64,
    buf: String,
}

impl Lines {
    pub fn open(path: &Path) -> Result<Self> {
        Ok(Lines {
            reader: open_reader(path)?,
            path: path.to_path_buf(),
            line: 0,
            buf: String::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Advances to the next line, returning it with its number, or `None`
    /// at end of file.
    pub fn next_line(&mut self) -> Result<Option<(u64, &str)>> {
        self.buf.clear();
        let n = self
            .reader
            .read_line(&mut self.buf)
            .map_err(|e| Error::io(&self.path, e))?;
        if n == 0 {
            return Ok(None);
        }
        self.line += 1;
        let trimmed = self.buf.trim_end_matches(['\n', '\r']);
        Ok(Some((self.line, trimmed)))
    }
}

/// Writes to `<path>.partial` and renames onto `path` on [`finish`].
/// Dropping without finishing leaves the `.partial` file behind.
///
/// [`finish`]: AtomicWriter::finish
pub struct AtomicWriter {
    inner: Option<Sink>,
    partial: PathBuf,
    target: PathBuf,
}

enum Sink {
    Plain(BufWriter<File>),
    Gzip(GzEncoder<BufWriter<File>>),
}

impl AtomicWriter {
    pub fn create(path: &Path, gzip: bool) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let partial = partial_path(path);
        let file = File::create(&partial).map_err(|e| Error::io(&partial, e))?;
        let buf = BufWriter::with_capacity(1 << 16, file);
        let inner = if gzip || is_gzip_path(path) {
            Sink::Gzip(GzEncoder::new(buf, Compression::default()))
        } else {
            Sink::Plain(buf)
        };
        Ok(AtomicWriter {
            inner: Some(inner),
            partial,
            target: path.to_path_buf(),
        })
    }

    pub fn write_line(&mut self, line: &str) -> Result<()> {
        let r = self.write_all(line.as_bytes()).and_then(|_| self.write_all(b"\n"));
        r.map_err(|e| Error::io(&self.partial, e))
    }

    pub fn finish(mut self) -> Result<()> {
        let sink = self.inner.take().expect("finish called once");
        let buf = match sink {
            Sink::Plain(b) => b,
            Sink::Gzip(gz) => gz.finish().map_err(|e| Error::io(&self.partial, e))?,
        };
        let file = buf.into_inner().map_err(|e| Error::io(&self.partial, e.into_error()))?;
        file.sync_all().map_err(|e| Error::io(&self.partial, e))?;
        drop(file);
        fs::rename(&self.partial, &self.target).map_err(|e| Error::io(&self.target, e))
    }
}

impl Write for AtomicWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self.inner.as_mut() {
            Some(Sink::Plain(w)) => w.write(buf),
            Some(Sink::Gzip(w)) => w.write(buf),
            None => Err(io::Error::other("writer already finished")),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self.inner.as_mut() {
            Some(Sink::Plain(w)) => w.flush(),
            Some(Sink::Gzip(w)) => w.flush(),
            None => Ok(()),
        }
    }
}

pub fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Reads a `A;B` two-column file, calling `f` with the line number and both
/// fields. Blank lines and lines starting with `#` are skipped.
pub fn read_two_column(path: &Path, mut f: impl FnMut(u64, &str, &str) -> Result<()>) -> Result<()> {
    let mut lines = Lines::open(path)?;
    let shown = path.display().to_string();
    while let Some((no, line)) = lines.next_line()? {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((a, b)) = line.split_once(';') else {
            return Err(Error::Parse {
                path: shown,
                line: no,
                message: "expected two ';'-separated fields".into(),
            });
        };
        f(no, a, b).map_err(|e| match e {
            Error::InvalidName(n) => Error::Parse {
                path: shown.clone(),
                line: no,
                message: format!("invalid repository name {n:?}"),
            },
            other => other,
        })?;
    }
    Ok(())
}
