//! Run-trace ingestion.
//!
//! A run trace is a UTF-8 text file with one executed assembly instruction
//! per line (LF or CRLF), no header and no comments, exactly as a debugger
//! emits it. Parsing splits each line into a lowercase opcode token and the
//! remaining text split on top-level commas; memory expressions such as
//! `dword ptr ss:[ebp-0x48]` stay single operands because commas never
//! appear inside them.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

/// Default limit on instructions loaded from a single file.
pub const DEFAULT_INSTRUCTION_CAP: usize = 10_000_000;

/// Class label of a trace. Malicious is the positive class everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Malicious,
    Benign,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Malicious => "malicious",
            Label::Benign => "benign",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "malicious" => Ok(Label::Malicious),
            "benign" => Ok(Label::Benign),
            other => Err(format!(
                "unknown label {other:?} (expected malicious|benign)"
            )),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("empty line")]
    EmptyLine,
    #[error("no alphanumeric opcode token in {0:?}")]
    MalformedLine(String),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        source: ParseError,
    },
    #[error("empty trace: {path} contains no instructions")]
    EmptyTrace { path: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One decoded instruction line.
///
/// Equality compares the parsed content (opcode and operands); `raw` keeps
/// the trimmed source line for diagnostics and is excluded so that a trace
/// re-parsed from its own rendering compares equal to the original.
#[derive(Clone, Debug)]
pub struct Instruction {
    pub opcode: String,
    pub operands: Vec<String>,
    pub raw: String,
}

impl PartialEq for Instruction {
    fn eq(&self, other: &Self) -> bool {
        self.opcode == other.opcode && self.operands == other.operands
    }
}

impl Eq for Instruction {}

impl Instruction {
    /// Canonical text form: opcode, one space, operands joined by ", ".
    pub fn render(&self) -> String {
        if self.operands.is_empty() {
            self.opcode.clone()
        } else {
            format!("{} {}", self.opcode, self.operands.join(", "))
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Parses one trace line into an [`Instruction`].
///
/// The opcode is the first whitespace-delimited token, lowercased; the rest
/// of the line is split on commas, each operand trimmed with inner
/// whitespace preserved. Operands are kept verbatim.
pub fn parse_line(line: &str) -> Result<Instruction, ParseError> {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return Err(ParseError::EmptyLine);
    }
    let (first, rest) = match trimmed.split_once(char::is_whitespace) {
        Some((f, r)) => (f, r),
        None => (trimmed, ""),
    };
    if !first.chars().any(|c| c.is_ascii_alphanumeric()) || first.contains(',') {
        return Err(ParseError::MalformedLine(trimmed.to_string()));
    }
    let opcode = first.to_ascii_lowercase();
    let rest = rest.trim();
    let operands: Vec<String> = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(',').map(|op| op.trim().to_string()).collect()
    };
    Ok(Instruction {
        opcode,
        operands,
        raw: trimmed.to_string(),
    })
}

/// A parsed run trace with its file-level label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunTrace {
    pub source_id: String,
    pub label: Label,
    pub instructions: Vec<Instruction>,
    /// Set when the source held more lines than the configured cap.
    pub truncated: bool,
}

impl RunTrace {
    /// Serializes back to trace-file text, one instruction per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for ins in &self.instructions {
            out.push_str(&ins.render());
            out.push('\n');
        }
        out
    }
}

/// Parses in-memory trace text. Blank lines are skipped; any other
/// unparseable line is a hard error carrying its 1-based line number.
pub fn parse_trace(
    text: &str,
    source_id: &str,
    label: Label,
    cap: usize,
) -> Result<RunTrace, TraceError> {
    let mut instructions = Vec::new();
    let mut truncated = false;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if instructions.len() == cap {
            truncated = true;
            break;
        }
        match parse_line(line) {
            Ok(ins) => instructions.push(ins),
            Err(source) => {
                return Err(TraceError::Parse {
                    path: source_id.to_string(),
                    line: idx + 1,
                    source,
                })
            }
        }
    }
    if instructions.is_empty() {
        return Err(TraceError::EmptyTrace {
            path: source_id.to_string(),
        });
    }
    Ok(RunTrace {
        source_id: source_id.to_string(),
        label,
        instructions,
        truncated,
    })
}

/// Loads and parses a run-trace file, truncating at `cap` instructions.
/// Truncation sets the flag on the returned trace rather than erroring,
/// mirroring how collection itself stops at an instruction limit.
pub fn load_trace(path: &Path, label: Label, cap: usize) -> Result<RunTrace, TraceError> {
    let source_id = path.to_string_lossy().into_owned();
    let reader = BufReader::new(File::open(path)?);
    let mut instructions = Vec::new();
    let mut truncated = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if instructions.len() == cap {
            truncated = true;
            break;
        }
        match parse_line(&line) {
            Ok(ins) => instructions.push(ins),
            Err(source) => {
                return Err(TraceError::Parse {
                    path: source_id,
                    line: idx + 1,
                    source,
                })
            }
        }
    }
    if instructions.is_empty() {
        return Err(TraceError::EmptyTrace { path: source_id });
    }
    Ok(RunTrace {
        source_id,
        label,
        instructions,
        truncated,
    })
}
