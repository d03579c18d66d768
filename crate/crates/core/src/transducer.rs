//! Deterministic sequential transducers: one output symbol per input
//! symbol, every state accepting.
//!
//! Transitions live in a dense `states x inputs` table. The two tagging
//! machines are built here from the context decisions, pruned to the states
//! reachable from the initial state, and minimized by partition refinement
//! over `(input, output)` arc labels.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use crate::classes::{ClassInventory, ReducedInventory};
use crate::context::{select_tag, t1_decision, LeftContext, RightContext};
use crate::corpus::CorpusStats;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SEQTFST\0";
const BINARY_VERSION: u32 = 1;
const TEXT_HEADER: &str = "# seqtag fst text v1";
const NO_ARC: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

impl Direction {
    fn flipped(self) -> Self {
        match self {
            Direction::LeftToRight => Direction::RightToLeft,
            Direction::RightToLeft => Direction::LeftToRight,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Direction::LeftToRight => "ltr",
            Direction::RightToLeft => "rtl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Arc {
    output: u32,
    target: u32,
}

const MISSING: Arc = Arc {
    output: NO_ARC,
    target: NO_ARC,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequentialTransducer {
    input_alphabet: Vec<String>,
    input_index: HashMap<String, u32>,
    output_alphabet: Vec<String>,
    num_states: u32,
    initial: u32,
    table: Vec<Arc>,
    direction: Direction,
}

fn index_of(symbols: &[String]) -> Result<HashMap<String, u32>> {
    let mut index = HashMap::with_capacity(symbols.len());
    for (i, s) in symbols.iter().enumerate() {
        if index.insert(s.clone(), i as u32).is_some() {
            return Err(Error::Inconsistent(format!("duplicate symbol {s}")));
        }
    }
    Ok(index)
}

impl SequentialTransducer {
    /// Assembles a machine from `(source, input, output, target)` arcs.
    pub fn from_arcs(
        input_alphabet: Vec<String>,
        output_alphabet: Vec<String>,
        num_states: u32,
        initial: u32,
        arcs: impl IntoIterator<Item = (u32, u32, u32, u32)>,
        direction: Direction,
    ) -> Result<Self> {
        if initial >= num_states {
            return Err(Error::DanglingState {
                index: initial,
                count: num_states,
            });
        }
        let n_in = input_alphabet.len() as u32;
        let n_out = output_alphabet.len() as u32;
        let mut table = vec![MISSING; num_states as usize * n_in as usize];
        for (src, input, output, target) in arcs {
            for s in [src, target] {
                if s >= num_states {
                    return Err(Error::DanglingState {
                        index: s,
                        count: num_states,
                    });
                }
            }
            if input >= n_in {
                return Err(Error::DanglingSymbol {
                    index: input,
                    count: n_in,
                });
            }
            if output >= n_out {
                return Err(Error::DanglingSymbol {
                    index: output,
                    count: n_out,
                });
            }
            let slot = &mut table[(src * n_in + input) as usize];
            if *slot != MISSING {
                return Err(Error::Inconsistent(format!(
                    "two arcs leave state {src} on {}",
                    input_alphabet[input as usize]
                )));
            }
            *slot = Arc { output, target };
        }
        Ok(SequentialTransducer {
            input_index: index_of(&input_alphabet)?,
            input_alphabet,
            output_alphabet,
            num_states,
            initial,
            table,
            direction,
        })
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn num_states(&self) -> u32 {
        self.num_states
    }

    pub fn initial(&self) -> u32 {
        self.initial
    }

    pub fn num_arcs(&self) -> usize {
        self.table.iter().filter(|a| a.target != NO_ARC).count()
    }

    pub fn input_alphabet(&self) -> &[String] {
        &self.input_alphabet
    }

    pub fn output_alphabet(&self) -> &[String] {
        &self.output_alphabet
    }

    pub fn input_id(&self, symbol: &str) -> Option<u32> {
        self.input_index.get(symbol).copied()
    }

    /// `(output, target)` of the arc leaving `state` on `input`.
    pub fn arc(&self, state: u32, input: u32) -> Option<(u32, u32)> {
        let a = self.table[(state as usize) * self.input_alphabet.len() + input as usize];
        (a.target != NO_ARC).then_some((a.output, a.target))
    }

    /// All arcs as `(source, input, output, target)`, ordered by source then input.
    pub fn arcs(&self) -> impl Iterator<Item = (u32, u32, u32, u32)> + '_ {
        let n_in = self.input_alphabet.len().max(1);
        self.table
            .iter()
            .enumerate()
            .filter(|(_, a)| a.target != NO_ARC)
            .map(move |(i, a)| ((i / n_in) as u32, (i % n_in) as u32, a.output, a.target))
    }

    /// The same arcs read in the opposite direction.
    pub fn with_direction_flipped(&self) -> Self {
        let mut t = self.clone();
        t.direction = self.direction.flipped();
        t
    }

    fn missing_arc(&self, state: u32, input: u32) -> Error {
        Error::MissingArc {
            state,
            symbol: self
                .input_alphabet
                .get(input as usize)
                .cloned()
                .unwrap_or_else(|| format!("#{input}")),
        }
    }

    /// Runs the machine over input ids in reading order, appending outputs.
    fn run_forward(&self, input: impl Iterator<Item = u32>, out: &mut Vec<u32>) -> Result<()> {
        let n_in = self.input_alphabet.len();
        let mut state = self.initial;
        for sym in input {
            if sym as usize >= n_in {
                return Err(Error::DanglingSymbol {
                    index: sym,
                    count: n_in as u32,
                });
            }
            let a = self.table[state as usize * n_in + sym as usize];
            if a.target == NO_ARC {
                return Err(self.missing_arc(state, sym));
            }
            out.push(a.output);
            state = a.target;
        }
        Ok(())
    }

    /// Transduces a sequence of input ids, honoring the machine's direction.
    /// Outputs are appended to `out` in sequence order.
    pub fn apply_ids_into(&self, input: &[u32], out: &mut Vec<u32>) -> Result<()> {
        match self.direction {
            Direction::LeftToRight => self.run_forward(input.iter().copied(), out),
            Direction::RightToLeft => {
                let start = out.len();
                self.run_forward(input.iter().rev().copied(), out)?;
                out[start..].reverse();
                Ok(())
            }
        }
    }

    pub fn apply_ids(&self, input: &[u32]) -> Result<Vec<u32>> {
        let mut out = Vec::with_capacity(input.len());
        self.apply_ids_into(input, &mut out)?;
        Ok(out)
    }

    fn encode<S: AsRef<str>>(&self, input: &[S]) -> Result<Vec<u32>> {
        input
            .iter()
            .enumerate()
            .map(|(position, s)| {
                self.input_id(s.as_ref())
                    .ok_or_else(|| Error::UnknownInput {
                        symbol: s.as_ref().to_string(),
                        position,
                    })
            })
            .collect()
    }

    /// Transduces symbols in whichever direction the machine runs.
    pub fn apply<S: AsRef<str>>(&self, input: &[S]) -> Result<Vec<String>> {
        let ids = self.encode(input)?;
        Ok(self
            .apply_ids(&ids)?
            .into_iter()
            .map(|o| self.output_alphabet[o as usize].clone())
            .collect())
    }

    fn expect_direction(&self, expected: Direction) -> Result<()> {
        if self.direction != expected {
            return Err(Error::WrongDirection {
                expected,
                found: self.direction,
            });
        }
        Ok(())
    }

    pub fn apply_ltr<S: AsRef<str>>(&self, input: &[S]) -> Result<Vec<String>> {
        self.expect_direction(Direction::LeftToRight)?;
        self.apply(input)
    }

    /// Reads the input right to left; the output is returned in input order.
    pub fn apply_rtl<S: AsRef<str>>(&self, input: &[S]) -> Result<Vec<String>> {
        self.expect_direction(Direction::RightToLeft)?;
        self.apply(input)
    }

    /// States reachable from the initial state, renumbered in breadth-first
    /// order (inputs visited in alphabet order). Returns the new machine and
    /// the old-to-new state map.
    fn renumber_reachable(&self) -> (Self, Vec<Option<u32>>) {
        let n_in = self.input_alphabet.len();
        let mut map = vec![None; self.num_states as usize];
        let mut order = Vec::new();
        let mut queue = VecDeque::from([self.initial]);
        map[self.initial as usize] = Some(0);
        order.push(self.initial);
        while let Some(s) = queue.pop_front() {
            for i in 0..n_in {
                let a = self.table[s as usize * n_in + i];
                if a.target != NO_ARC && map[a.target as usize].is_none() {
                    map[a.target as usize] = Some(order.len() as u32);
                    order.push(a.target);
                    queue.push_back(a.target);
                }
            }
        }
        let mut table = Vec::with_capacity(order.len() * n_in);
        for &old in &order {
            for i in 0..n_in {
                let a = self.table[old as usize * n_in + i];
                table.push(if a.target == NO_ARC {
                    MISSING
                } else {
                    Arc {
                        output: a.output,
                        target: map[a.target as usize].expect("target visited"),
                    }
                });
            }
        }
        let t = SequentialTransducer {
            input_alphabet: self.input_alphabet.clone(),
            input_index: self.input_index.clone(),
            output_alphabet: self.output_alphabet.clone(),
            num_states: order.len() as u32,
            initial: 0,
            table,
            direction: self.direction,
        };
        (t, map)
    }

    /// Drops states with no path from the initial state.
    pub fn prune_unreachable(&self) -> Self {
        self.renumber_reachable().0
    }

    /// Shrinks the output alphabet to symbols that label some arc, keeping order.
    pub fn retain_used_outputs(&self) -> Self {
        let mut used = vec![false; self.output_alphabet.len()];
        for a in self.table.iter().filter(|a| a.target != NO_ARC) {
            used[a.output as usize] = true;
        }
        let mut remap = vec![NO_ARC; used.len()];
        let mut alphabet = Vec::new();
        for (i, sym) in self.output_alphabet.iter().enumerate() {
            if used[i] {
                remap[i] = alphabet.len() as u32;
                alphabet.push(sym.clone());
            }
        }
        let mut t = self.clone();
        t.output_alphabet = alphabet;
        for a in t.table.iter_mut().filter(|a| a.target != NO_ARC) {
            a.output = remap[a.output as usize];
        }
        t
    }

    /// Moore-style partition refinement over composite `(input, output)`
    /// labels. Since every state accepts, two states are equivalent exactly
    /// when they emit the same outputs and move to equivalent states on
    /// every input. The result is numbered canonically from the initial state.
    pub fn minimize(&self) -> Self {
        let n = self.num_states as usize;
        let n_in = self.input_alphabet.len();
        let row = |s: usize| &self.table[s * n_in..(s + 1) * n_in];

        let mut block = vec![0u32; n];
        let mut num_blocks = assign_blocks(&mut block, |s| {
            row(s).iter().map(|a| a.output as u64).collect()
        });
        loop {
            let prev = block.clone();
            let refined = assign_blocks(&mut block, |s| {
                let mut sig = Vec::with_capacity(n_in + 1);
                sig.push(prev[s] as u64);
                sig.extend(row(s).iter().map(|a| {
                    let target = if a.target == NO_ARC {
                        NO_ARC
                    } else {
                        prev[a.target as usize]
                    };
                    ((a.output as u64) << 32) | target as u64
                }));
                sig
            });
            if refined == num_blocks {
                break;
            }
            num_blocks = refined;
        }

        let mut table = vec![MISSING; num_blocks as usize * n_in];
        for s in 0..n {
            let b = block[s] as usize;
            for (i, a) in row(s).iter().enumerate() {
                if a.target != NO_ARC {
                    table[b * n_in + i] = Arc {
                        output: a.output,
                        target: block[a.target as usize],
                    };
                }
            }
        }
        let quotient = SequentialTransducer {
            input_alphabet: self.input_alphabet.clone(),
            input_index: self.input_index.clone(),
            output_alphabet: self.output_alphabet.clone(),
            num_states: num_blocks,
            initial: block[self.initial as usize],
            table,
            direction: self.direction,
        };
        quotient.prune_unreachable()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        put_u32(&mut buf, BINARY_VERSION);
        buf.push(match self.direction {
            Direction::LeftToRight => 0,
            Direction::RightToLeft => 1,
        });
        for alphabet in [&self.input_alphabet, &self.output_alphabet] {
            put_u32(&mut buf, alphabet.len() as u32);
            for s in alphabet {
                put_u32(&mut buf, s.len() as u32);
                buf.extend_from_slice(s.as_bytes());
            }
        }
        put_u32(&mut buf, self.num_states);
        put_u32(&mut buf, self.initial);
        put_u32(&mut buf, self.num_arcs() as u32);
        for (src, input, output, target) in self.arcs() {
            for v in [src, input, output, target] {
                put_u32(&mut buf, v);
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        let magic = r.take(MAGIC.len())?;
        if magic != MAGIC {
            return Err(Error::Version {
                expected: String::from_utf8_lossy(&MAGIC[..7]).into_owned(),
                found: String::from_utf8_lossy(magic).into_owned(),
            });
        }
        let version = r.u32()?;
        if version != BINARY_VERSION {
            return Err(Error::Version {
                expected: BINARY_VERSION.to_string(),
                found: version.to_string(),
            });
        }
        let direction = match r.take(1)?[0] {
            0 => Direction::LeftToRight,
            1 => Direction::RightToLeft,
            d => return Err(Error::Inconsistent(format!("bad direction byte {d}"))),
        };
        let input_alphabet = r.symbols()?;
        let output_alphabet = r.symbols()?;
        let num_states = r.u32()?;
        let initial = r.u32()?;
        let num_arcs = r.u32()? as usize;
        if r.remaining() < num_arcs.saturating_mul(16) {
            return Err(Error::Truncated);
        }
        let mut arcs = Vec::with_capacity(num_arcs);
        for _ in 0..num_arcs {
            arcs.push((r.u32()?, r.u32()?, r.u32()?, r.u32()?));
        }
        if r.remaining() != 0 {
            return Err(Error::Inconsistent("trailing bytes after arcs".into()));
        }
        Self::from_arcs(
            input_alphabet,
            output_alphabet,
            num_states,
            initial,
            arcs,
            direction,
        )
    }

    /// Human-readable dump: alphabets, then one `src<TAB>in<TAB>out<TAB>dst` line per arc.
    pub fn to_text(&self) -> String {
        let mut out = String::from(TEXT_HEADER);
        out.push('\n');
        let _ = writeln!(out, "direction\t{}", self.direction.as_str());
        let _ = writeln!(out, "states\t{}", self.num_states);
        let _ = writeln!(out, "initial\t{}", self.initial);
        for s in &self.input_alphabet {
            let _ = writeln!(out, "input\t{s}");
        }
        for s in &self.output_alphabet {
            let _ = writeln!(out, "output\t{s}");
        }
        for (src, i, o, dst) in self.arcs() {
            let _ = writeln!(
                out,
                "{src}\t{}\t{}\t{dst}",
                self.input_alphabet[i as usize], self.output_alphabet[o as usize]
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut direction = None;
        let mut num_states = None;
        let mut initial = None;
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        let mut raw_arcs = Vec::new();
        for (line_no, line) in crate::classes::body_lines(text, TEXT_HEADER)? {
            let cols: Vec<&str> = line.split('\t').collect();
            let num = |s: &str| {
                s.parse::<u32>()
                    .map_err(|_| Error::format(line_no, format!("bad number {s:?}")))
            };
            match cols.as_slice() {
                ["direction", "ltr"] => direction = Some(Direction::LeftToRight),
                ["direction", "rtl"] => direction = Some(Direction::RightToLeft),
                ["states", n] => num_states = Some(num(n)?),
                ["initial", n] => initial = Some(num(n)?),
                ["input", s] => inputs.push(s.to_string()),
                ["output", s] => outputs.push(s.to_string()),
                [src, i, o, dst] => raw_arcs.push((num(src)?, *i, *o, num(dst)?, line_no)),
                _ => return Err(Error::format(line_no, "unrecognized line")),
            }
        }
        let in_index = index_of(&inputs)?;
        let out_index = index_of(&outputs)?;
        let arcs = raw_arcs
            .into_iter()
            .map(|(src, i, o, dst, line_no)| {
                let i = *in_index
                    .get(i)
                    .ok_or_else(|| Error::format(line_no, format!("unknown input {i}")))?;
                let o = *out_index
                    .get(o)
                    .ok_or_else(|| Error::format(line_no, format!("unknown output {o}")))?;
                Ok((src, i, o, dst))
            })
            .collect::<Result<Vec<_>>>()?;
        let missing = |what: &str| Error::format(1, format!("missing {what} line"));
        Self::from_arcs(
            inputs,
            outputs,
            num_states.ok_or_else(|| missing("states"))?,
            initial.ok_or_else(|| missing("initial"))?,
            arcs,
            direction.ok_or_else(|| missing("direction"))?,
        )
    }
}

/// Numbers states by signature in order of first occurrence.
fn assign_blocks(block: &mut [u32], signature: impl Fn(usize) -> Vec<u64>) -> u32 {
    let mut ids: HashMap<Vec<u64>, u32> = HashMap::new();
    for (s, slot) in block.iter_mut().enumerate() {
        let next = ids.len() as u32;
        *slot = *ids.entry(signature(s)).or_insert(next);
    }
    ids.len() as u32
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated)?;
        let slice = self.bytes.get(self.pos..end).ok_or(Error::Truncated)?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn symbols(&mut self) -> Result<Vec<String>> {
        let n = self.u32()? as usize;
        if self.remaining() < n.saturating_mul(4) {
            return Err(Error::Truncated);
        }
        (0..n)
            .map(|_| {
                let len = self.u32()? as usize;
                let raw = self.take(len)?;
                String::from_utf8(raw.to_vec())
                    .map_err(|_| Error::Inconsistent("symbol is not UTF-8".into()))
            })
            .collect()
    }
}

/// What a state stood for during construction. Erased by minimization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateLabel {
    Initial,
    Reduced(String),
    Tag(String),
}

/// A freshly built machine together with the label of each state.
#[derive(Debug, Clone)]
pub struct LabeledTransducer {
    pub fst: SequentialTransducer,
    pub labels: Vec<StateLabel>,
}

impl LabeledTransducer {
    fn pruned(fst: SequentialTransducer, labels: Vec<StateLabel>) -> Self {
        let (pruned, map) = fst.renumber_reachable();
        let mut kept = vec![StateLabel::Initial; pruned.num_states() as usize];
        for (old, new) in map.iter().enumerate() {
            if let Some(new) = new {
                kept[*new as usize] = labels[old].clone();
            }
        }
        LabeledTransducer {
            fst: pruned,
            labels: kept,
        }
    }
}

/// Builds the left-to-right machine from ambiguity classes to reduced classes.
///
/// There is one state per reduced class plus the initial state. Each state
/// has an arc for every ambiguity class, leading to the state of the
/// reduced class chosen in that left context. Unreachable states are then
/// removed and the output alphabet trimmed to the reduced classes still used.
pub fn build_t1(
    classes: &ClassInventory,
    reduced: &ReducedInventory,
    stats: &CorpusStats,
    tau: f64,
) -> Result<LabeledTransducer> {
    let inputs: Vec<String> = classes.iter().map(|c| c.symbol.clone()).collect();
    let outputs: Vec<String> = reduced.iter().map(|r| r.symbol.clone()).collect();
    let num_states = reduced.len() as u32 + 1;
    let mut labels = vec![StateLabel::Initial];
    labels.extend(
        reduced
            .iter()
            .map(|r| StateLabel::Reduced(r.symbol.clone())),
    );

    let mut arcs = Vec::with_capacity(num_states as usize * inputs.len());
    for state in 0..num_states {
        let left = match state {
            0 => LeftContext::Boundary,
            s => LeftContext::Reduced(reduced.by_id(s as usize - 1)),
        };
        for (ci, class) in classes.iter().enumerate() {
            let r = t1_decision(class, left, stats, reduced, tau)?;
            let rid = reduced.id(&r.symbol).expect("selected from inventory") as u32;
            arcs.push((state, ci as u32, rid, rid + 1));
        }
    }
    let fst = SequentialTransducer::from_arcs(
        inputs,
        outputs,
        num_states,
        0,
        arcs,
        Direction::LeftToRight,
    )?;
    let mut built = LabeledTransducer::pruned(fst, labels);
    built.fst = built.fst.retain_used_outputs();
    Ok(built)
}

/// Builds the right-to-left machine from reduced classes to tags.
///
/// One state per tag plus the initial state; each state has an arc for
/// every reduced class in `reduced_used`, leading to the state of the tag
/// chosen given the following tag (the source state's label).
pub fn build_t2(
    reduced: &ReducedInventory,
    reduced_used: &[String],
    stats: &CorpusStats,
) -> Result<LabeledTransducer> {
    let tags: Vec<String> = stats.tagset.iter().map(str::to_string).collect();
    let num_states = tags.len() as u32 + 1;
    let mut labels = vec![StateLabel::Initial];
    labels.extend(tags.iter().map(|t| StateLabel::Tag(t.clone())));
    let used: Vec<_> = reduced_used
        .iter()
        .map(|s| {
            reduced
                .get(s)
                .ok_or_else(|| Error::UnknownSymbol(s.clone()))
        })
        .collect::<Result<_>>()?;

    let mut arcs = Vec::with_capacity(num_states as usize * used.len());
    for state in 0..num_states {
        let right = match state {
            0 => RightContext::Boundary,
            s => RightContext::Tag(&tags[s as usize - 1]),
        };
        for (ri, r) in used.iter().enumerate() {
            let tag = select_tag(r, right, stats)?;
            let tid = stats.tag_id(tag)? as u32;
            arcs.push((state, ri as u32, tid, tid + 1));
        }
    }
    let fst = SequentialTransducer::from_arcs(
        reduced_used.to_vec(),
        tags,
        num_states,
        0,
        arcs,
        Direction::RightToLeft,
    )?;
    Ok(LabeledTransducer::pruned(fst, labels))
}
