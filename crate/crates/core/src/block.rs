//! Basic-block segmentation of instruction streams.
//!
//! A basic block is a maximal straight-line run of instructions with a
//! single entry and a single exit. Three opcode categories end a block:
//! branches (`jmp` and the whole conditional-jump family), returns, and
//! calls. A greedy left-to-right scan closes the current block at each
//! terminator, keeping the terminator as the block's last instruction; a
//! trailing run without a terminator becomes a final unterminated block.

use crate::trace::{Instruction, RunTrace};
use thiserror::Error;

/// Control-transfer category of an opcode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminatorClass {
    Branch,
    Return,
    Call,
    None,
}

/// Total classification over lowercase mnemonics.
///
/// Every mnemonic beginning with `j` counts as a branch so the full x86
/// conditional-jump family (jne, jc, jo, jp, jecxz, ...) is covered, not
/// just the common members. `retn`/`retf` are debugger spellings of `ret`.
/// Interrupt-style transfers (int, sysenter, iret) are not terminators.
pub fn classify_terminator(opcode: &str) -> TerminatorClass {
    if opcode.starts_with('j') {
        return TerminatorClass::Branch;
    }
    match opcode {
        "ret" | "retn" | "retf" => TerminatorClass::Return,
        "call" => TerminatorClass::Call,
        _ => TerminatorClass::None,
    }
}

/// A non-empty straight-line instruction run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicBlock {
    pub instructions: Vec<Instruction>,
}

impl BasicBlock {
    /// Single-line text form: instructions space-joined, each rendered as
    /// opcode plus ", "-joined operands.
    pub fn render(&self) -> String {
        let parts: Vec<String> = self.instructions.iter().map(|i| i.render()).collect();
        parts.join(" ")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SegmentError {
    #[error("cannot segment an empty trace")]
    EmptyTrace,
}

/// Splits a trace into basic blocks at terminator instructions.
pub fn segment(trace: &RunTrace) -> Result<Vec<BasicBlock>, SegmentError> {
    segment_instructions(&trace.instructions)
}

/// Splits an instruction slice into basic blocks at terminator instructions.
pub fn segment_instructions(instructions: &[Instruction]) -> Result<Vec<BasicBlock>, SegmentError> {
    if instructions.is_empty() {
        return Err(SegmentError::EmptyTrace);
    }
    let mut blocks = Vec::new();
    let mut current: Vec<Instruction> = Vec::new();
    for ins in instructions {
        current.push(ins.clone());
        if classify_terminator(&ins.opcode) != TerminatorClass::None {
            blocks.push(BasicBlock {
                instructions: std::mem::take(&mut current),
            });
        }
    }
    if !current.is_empty() {
        blocks.push(BasicBlock {
            instructions: current,
        });
    }
    Ok(blocks)
}

/// Renders blocks one per line, LF-terminated.
pub fn render_bsm(blocks: &[BasicBlock]) -> String {
    let mut out = String::new();
    for block in blocks {
        out.push_str(&block.render());
        out.push('\n');
    }
    out
}
