//! Transcript and labels files.
//!
//! Transcripts are UTF-8 text files, one document per file, tokens separated
//! by whitespace; the source id is the file stem. A labels file has one line
//! per document: `source_id<TAB>p1,p2,...` listing SPLIT positions with
//! position 0 omitted (an empty list after the tab means one segment).

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::transcript::{normalize_text, Delimiter, SegmentationLabels, Transcript, TranscriptError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Transcript {
        path: PathBuf,
        #[source]
        source: TranscriptError,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("document {source_id:?} appears more than once")]
    Duplicate { source_id: String },
    #[error("document {source_id:?}: split position {position} out of range for {tokens} tokens")]
    OutOfRange {
        source_id: String,
        position: usize,
        tokens: usize,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn source_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

/// Expands directories into their `*.txt` files (sorted); files pass through.
pub fn collect_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CorpusError> {
    let mut out = Vec::new();
    for p in paths {
        let meta = fs::metadata(p).map_err(io_err(p))?;
        if meta.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .map_err(io_err(p))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "txt"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Reads one transcript. With `normalize`, tokens are lowercased and
/// stripped of punctuation first.
pub fn read_transcript(path: &Path, normalize: bool, delimiter: &Delimiter) -> Result<Transcript, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let id = source_id_of(path);
    let transcript = if normalize {
        normalize_text(id, &text)
    } else {
        Transcript::with_delimiter(id, text.split_whitespace().map(str::to_string).collect(), delimiter).map_err(
            |source| CorpusError::Transcript {
                path: path.to_path_buf(),
                source,
            },
        )?
    };
    Ok(transcript)
}

pub fn format_labels_line(source_id: &str, labels: &SegmentationLabels) -> String {
    let positions: Vec<String> = labels.boundaries().iter().map(|p| p.to_string()).collect();
    format!("{source_id}\t{}", positions.join(","))
}

pub fn format_labels<'a, I>(docs: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a SegmentationLabels)>,
{
    let mut out = String::new();
    for (id, labels) in docs {
        let _ = writeln!(out, "{}", format_labels_line(id, labels));
    }
    out
}

/// Boundary positions of one document as read from a labels file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelsEntry {
    pub source_id: String,
    pub boundaries: Vec<usize>,
}

impl LabelsEntry {
    /// Labels over `n` tokens.
    pub fn to_labels(&self, n: usize) -> Result<SegmentationLabels, CorpusError> {
        SegmentationLabels::from_splits(n, &self.boundaries).map_err(|_| CorpusError::OutOfRange {
            source_id: self.source_id.clone(),
            position: self.boundaries.iter().copied().max().unwrap_or(0),
            tokens: n,
        })
    }

    /// Smallest length that holds every boundary.
    pub fn min_len(&self) -> usize {
        self.boundaries.iter().copied().max().map_or(1, |m| m + 1)
    }
}

pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<LabelsEntry>, CorpusError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| CorpusError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected source_id<TAB>positions".into()))?;
        let mut boundaries = rest
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<usize>().map_err(|e| parse_err(format!("bad position {s:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        boundaries.sort_unstable();
        boundaries.dedup();
        boundaries.retain(|&p| p != 0);
        if !seen.insert(id.to_string()) {
            return Err(CorpusError::Duplicate { source_id: id.into() });
        }
        out.push(LabelsEntry {
            source_id: id.to_string(),
            boundaries,
        });
    }
    Ok(out)
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelsEntry>, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_labels(&text, path)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CorpusError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}
