//! Deterministic synthetic run-trace corpus generation.
//!
//! Two first-order Markov grammars over shared instruction templates stand
//! in for real malicious and benign traces. The classes differ in their
//! template transition matrices, register and immediate sampling weights,
//! and terminator mix; each class also owns twelve pool immediates the
//! other never emits, which gives the embedding layer signal beyond opcode
//! statistics. Generation is pure per (grammar, seed): trace i draws from
//! a substream derived as seed + i, so corpora are byte-identical across
//! runs and machines.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::rng::{derive_seed, Rng};
use crate::trace::{Instruction, Label, RunTrace};

/// Default corpus size per class for desk-scale experiments.
pub const DEFAULT_TRACES_PER_CLASS: usize = 2000;
/// Default trace length range (instructions, inclusive).
pub const DEFAULT_LEN_RANGE: (usize, usize) = (200, 400);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("invalid length range {min}..={max}")]
    InvalidRange { min: usize, max: usize },
    #[error("io error: {0}")]
    Io(String),
}

/// Operand slot of an instruction template.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    /// register from the shared pool, class-weighted
    Reg,
    /// immediate from the class pool, class-weighted
    Imm,
    /// `dword ptr ds:[imm]`
    Mem,
    /// `dword ptr ss:[ebp-off]`
    StackPtr,
    /// `ss:[ebp-off]`
    StackAddr,
}

#[derive(Clone, Copy, Debug)]
struct Template {
    opcode: &'static str,
    slots: &'static [Slot],
}

const REGISTERS: [&str; 8] = ["eax", "ebx", "ecx", "edx", "esi", "edi", "ebp", "esp"];

const STACK_OFFSETS: [&str; 6] = ["0x8", "0x10", "0x2C", "0x30", "0x34", "0x48"];

// Template shapes are shared between the classes so opcode identity alone
// does not separate them; transitions and operand pools do.
const TEMPLATES: [Template; 12] = [
    Template {
        opcode: "mov",
        slots: &[Slot::Reg, Slot::Reg],
    },
    Template {
        opcode: "mov",
        slots: &[Slot::Reg, Slot::Imm],
    },
    Template {
        opcode: "mov",
        slots: &[Slot::Reg, Slot::Mem],
    },
    Template {
        opcode: "mov",
        slots: &[Slot::StackPtr, Slot::Reg],
    },
    Template {
        opcode: "add",
        slots: &[Slot::Reg, Slot::Imm],
    },
    Template {
        opcode: "sub",
        slots: &[Slot::Reg, Slot::Imm],
    },
    Template {
        opcode: "xor",
        slots: &[Slot::Reg, Slot::Reg],
    },
    Template {
        opcode: "test",
        slots: &[Slot::Reg, Slot::Reg],
    },
    Template {
        opcode: "cmp",
        slots: &[Slot::Reg, Slot::Imm],
    },
    Template {
        opcode: "lea",
        slots: &[Slot::Reg, Slot::StackAddr],
    },
    Template {
        opcode: "push",
        slots: &[Slot::Reg],
    },
    Template {
        opcode: "pop",
        slots: &[Slot::Reg],
    },
];

const TERMINATORS: [Template; 7] = [
    Template {
        opcode: "jmp",
        slots: &[Slot::Imm],
    },
    Template {
        opcode: "jne",
        slots: &[Slot::Imm],
    },
    Template {
        opcode: "je",
        slots: &[Slot::Imm],
    },
    Template {
        opcode: "jz",
        slots: &[Slot::Imm],
    },
    Template {
        opcode: "call",
        slots: &[Slot::Mem],
    },
    Template {
        opcode: "call",
        slots: &[Slot::Reg],
    },
    Template {
        opcode: "ret",
        slots: &[],
    },
];

/// Markov grammar over instruction templates with class-skewed operand
/// pools and terminator injection.
#[derive(Clone, Debug)]
pub struct TraceGrammar {
    pub label: Label,
    /// row-stochastic transitions over the non-terminator templates
    transition: Vec<Vec<f64>>,
    start: Vec<f64>,
    terminator_weights: Vec<f64>,
    /// probability of injecting a terminator after each walk instruction
    pub terminator_rate: f64,
    register_weights: Vec<f64>,
    immediates: Vec<String>,
    immediate_weights: Vec<f64>,
}

impl TraceGrammar {
    /// Rows of the transition matrix (each sums to 1).
    pub fn transition_rows(&self) -> &[Vec<f64>] {
        &self.transition
    }

    fn pick_register(&self, rng: &mut Rng) -> &'static str {
        REGISTERS[rng.pick_weighted(&self.register_weights)]
    }

    fn pick_immediate(&self, rng: &mut Rng) -> String {
        self.immediates[rng.pick_weighted(&self.immediate_weights)].clone()
    }

    fn render_slot(&self, slot: Slot, rng: &mut Rng) -> String {
        match slot {
            Slot::Reg => self.pick_register(rng).to_string(),
            Slot::Imm => self.pick_immediate(rng),
            Slot::Mem => format!("dword ptr ds:[{}]", self.pick_immediate(rng)),
            Slot::StackPtr => format!(
                "dword ptr ss:[ebp-{}]",
                STACK_OFFSETS[rng.next_below(STACK_OFFSETS.len())]
            ),
            Slot::StackAddr => format!(
                "ss:[ebp-{}]",
                STACK_OFFSETS[rng.next_below(STACK_OFFSETS.len())]
            ),
        }
    }

    fn emit(&self, template: Template, rng: &mut Rng) -> Instruction {
        let operands: Vec<String> = template
            .slots
            .iter()
            .map(|&slot| self.render_slot(slot, rng))
            .collect();
        let raw = if operands.is_empty() {
            template.opcode.to_string()
        } else {
            format!("{} {}", template.opcode, operands.join(", "))
        };
        Instruction {
            opcode: template.opcode.to_string(),
            operands,
            raw,
        }
    }
}

/// Builds a row-stochastic matrix from per-row preference lists: every
/// successor gets a small base mass, preferred successors get extra.
fn build_transition(prefs: &[&[(usize, f64)]]) -> Vec<Vec<f64>> {
    let n = prefs.len();
    let base = 0.15;
    prefs
        .iter()
        .map(|row_prefs| {
            let mut row = vec![base; n];
            for &(j, w) in row_prefs.iter() {
                row[j] += w;
            }
            let total: f64 = row.iter().sum();
            row.iter().map(|w| w / total).collect()
        })
        .collect()
}

/// The two grammars shipped with the artifact. Constants are fixed; the
/// pair is measurably different in transitions and operand marginals and
/// separable by the default classifier at desk scale.
pub fn default_grammars() -> (TraceGrammar, TraceGrammar) {
    // template indices, for readability of the preference tables:
    // 0 mov r,r   1 mov r,imm  2 mov r,mem  3 mov stack,r
    // 4 add r,imm 5 sub r,imm  6 xor r,r    7 test r,r
    // 8 cmp r,imm 9 lea r,ss   10 push r    11 pop r
    let malicious_prefs: [&[(usize, f64)]; 12] = [
        &[(6, 2.5), (10, 1.5)],
        &[(6, 2.0), (5, 1.5)],
        &[(6, 1.5), (4, 1.5)],
        &[(10, 2.0)],
        &[(5, 2.0), (6, 1.5)],
        &[(4, 2.0), (6, 1.0)],
        &[(2, 2.0), (6, 1.5), (7, 1.0)],
        &[(6, 1.5), (10, 1.0)],
        &[(6, 1.0), (1, 1.0)],
        &[(2, 1.5)],
        &[(11, 2.0), (10, 1.0), (1, 1.0)],
        &[(10, 2.0), (6, 1.0)],
    ];
    let benign_prefs: [&[(usize, f64)]; 12] = [
        &[(1, 2.0), (4, 2.0), (2, 1.5)],
        &[(3, 2.0), (8, 1.5), (4, 1.0)],
        &[(7, 2.0), (0, 1.5)],
        &[(2, 1.5), (9, 1.5)],
        &[(0, 2.0), (8, 1.5)],
        &[(3, 1.5), (9, 1.0)],
        &[(1, 1.5)],
        &[(0, 2.0)],
        &[(0, 1.0), (9, 1.0)],
        &[(10, 2.0), (0, 1.0)],
        &[(10, 2.0), (9, 1.5)],
        &[(11, 2.0), (0, 1.0)],
    ];

    let shared_imms = ["0x0", "0x1", "0x4", "0x10"];
    let malicious_imms = [
        "0x3",
        "0x7",
        "0xFF",
        "0x00413370",
        "0x0041A2C4",
        "0x00414E08",
        "0x0041700C",
        "0x00418BB4",
        "0x00412660",
        "0x0041D940",
        "0x0041B17C",
        "0x00419A50",
    ];
    let benign_imms = [
        "0x2",
        "0x8",
        "0xC",
        "0x00401180",
        "0x0040112C",
        "0x00402387",
        "0x004031B0",
        "0x00404550",
        "0x00405F70",
        "0x004061A8",
        "0x00407210",
        "0x004080FF",
    ];

    let build_imms = |unique: &[&str]| -> (Vec<String>, Vec<f64>) {
        let mut pool: Vec<String> = shared_imms.iter().map(|s| s.to_string()).collect();
        let mut weights = vec![1.5, 1.5, 1.0, 1.0];
        for (i, imm) in unique.iter().enumerate() {
            pool.push(imm.to_string());
            // small constants lighter, addresses heavier
            weights.push(if i < 3 { 1.0 } else { 2.5 });
        }
        (pool, weights)
    };

    let (mal_pool, mal_imm_weights) = build_imms(&malicious_imms);
    let (ben_pool, ben_imm_weights) = build_imms(&benign_imms);

    let malicious = TraceGrammar {
        label: Label::Malicious,
        transition: build_transition(&malicious_prefs),
        start: vec![1.0; TEMPLATES.len()],
        terminator_weights: vec![2.5, 0.6, 0.5, 0.6, 2.2, 1.4, 0.8],
        terminator_rate: 0.18,
        register_weights: vec![1.0, 3.0, 1.0, 1.0, 4.0, 4.0, 1.0, 1.0],
        immediates: mal_pool,
        immediate_weights: mal_imm_weights,
    };
    let benign = TraceGrammar {
        label: Label::Benign,
        transition: build_transition(&benign_prefs),
        start: vec![1.0; TEMPLATES.len()],
        terminator_weights: vec![0.8, 2.5, 1.5, 0.5, 1.2, 0.3, 1.8],
        terminator_rate: 0.18,
        register_weights: vec![4.0, 1.0, 3.0, 3.0, 1.0, 1.0, 2.0, 1.0],
        immediates: ben_pool,
        immediate_weights: ben_imm_weights,
    };
    (malicious, benign)
}

/// Generates `n_traces` traces with lengths drawn uniformly from the
/// inclusive range. Trace i seeds its own generator from (seed, i), so any
/// prefix of the corpus is independent of the requested count.
pub fn generate(
    grammar: &TraceGrammar,
    n_traces: usize,
    len_range: (usize, usize),
    seed: u64,
) -> Result<Vec<RunTrace>, SynthError> {
    let (min, max) = len_range;
    if min < 1 || max < min {
        return Err(SynthError::InvalidRange { min, max });
    }
    Ok((0..n_traces)
        .map(|i| {
            let mut rng = Rng::seed_from(derive_seed(seed, i as u64));
            let len = rng.next_range(min, max);
            let mut instructions = Vec::with_capacity(len + 1);
            let mut state = rng.pick_weighted(&grammar.start);
            while instructions.len() < len {
                instructions.push(grammar.emit(TEMPLATES[state], &mut rng));
                if instructions.len() < len && rng.next_f64() < grammar.terminator_rate {
                    let term = TERMINATORS[rng.pick_weighted(&grammar.terminator_weights)];
                    instructions.push(grammar.emit(term, &mut rng));
                }
                state = rng.pick_weighted(&grammar.transition[state]);
            }
            RunTrace {
                source_id: format!("synth/{}/{:05}", grammar.label, i),
                label: grammar.label,
                instructions,
                truncated: false,
            }
        })
        .collect())
}

/// Writes a generated corpus under `<out>/<label>/trace_#####.txt` and
/// returns the file paths in order.
pub fn write_corpus(
    out_dir: &Path,
    grammar: &TraceGrammar,
    n_traces: usize,
    len_range: (usize, usize),
    seed: u64,
) -> Result<Vec<PathBuf>, SynthError> {
    let traces = generate(grammar, n_traces, len_range, seed)?;
    let class_dir = out_dir.join(grammar.label.as_str());
    fs::create_dir_all(&class_dir).map_err(|e| SynthError::Io(e.to_string()))?;
    let mut paths = Vec::with_capacity(traces.len());
    for (i, trace) in traces.iter().enumerate() {
        let path = class_dir.join(format!("trace_{i:05}.txt"));
        fs::write(&path, trace.render()).map_err(|e| SynthError::Io(e.to_string()))?;
        paths.push(path);
    }
    Ok(paths)
}
