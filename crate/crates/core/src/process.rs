//! Process matrices: party bookkeeping, term-type classification and the
//! validity decision.
//!
//! A process on parties `A, B, ...` is an operator on
//! `a1 (x) a2 (x) b1 (x) b2 (x) ...` (input then output per party). It is
//! valid when it is positive semidefinite, has trace `d_O` (the product of
//! all output dimensions), and every nontrivial Hilbert–Schmidt term is of
//! pure input type on at least one party.
//!
//! A party may be composed of several sub-parties (for example the merged
//! party `A = A'A''` of a product). Its input is then `a1' (x) a1'' (x) ...`
//! and its output `a2' (x) a2'' (x) ...`, and every sub-party factor is its own
//! subsystem in the Hilbert–Schmidt expansion.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hsbasis::{self, HSTerm, TermTolerance};
use crate::linalg::{self, CMatrix, SubsystemShape};

/// Input/output dimensions of one laboratory slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubParty {
    pub d_in: usize,
    pub d_out: usize,
}

impl SubParty {
    pub fn new(d_in: usize, d_out: usize) -> Self {
        Self { d_in, d_out }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Party {
    name: String,
    subparties: Vec<SubParty>,
}

impl Party {
    pub fn new(name: impl Into<String>, d_in: usize, d_out: usize) -> Self {
        Self { name: name.into(), subparties: vec![SubParty::new(d_in, d_out)] }
    }

    pub fn with_subparties(name: impl Into<String>, subparties: Vec<SubParty>) -> Self {
        Self { name: name.into(), subparties }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn subparties(&self) -> &[SubParty] {
        &self.subparties
    }

    pub fn d_in(&self) -> usize {
        self.subparties.iter().map(|s| s.d_in).product()
    }

    pub fn d_out(&self) -> usize {
        self.subparties.iter().map(|s| s.d_out).product()
    }

    /// Number of subsystems this party contributes to the expansion shape.
    fn subsystem_count(&self) -> usize {
        2 * self.subparties.len()
    }
}

/// Ordered parties; fixes the global tensor-factor order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartyLayout {
    parties: Vec<Party>,
}

impl PartyLayout {
    pub fn new(parties: Vec<Party>) -> Result<Self> {
        for (i, p) in parties.iter().enumerate() {
            if p.name.is_empty() {
                return Err(Error::InvalidLayout(format!("party {i} has an empty name")));
            }
            if parties[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidLayout(format!("duplicate party name `{}`", p.name)));
            }
            if p.subparties.is_empty() {
                return Err(Error::InvalidLayout(format!("party `{}` has no sub-parties", p.name)));
            }
            if p.subparties.iter().any(|s| s.d_in == 0 || s.d_out == 0) {
                return Err(Error::InvalidLayout(format!("party `{}` has a zero dimension", p.name)));
            }
        }
        let layout = Self { parties };
        let mut total: usize = 1;
        for p in &layout.parties {
            for s in &p.subparties {
                total = total
                    .checked_mul(s.d_in)
                    .and_then(|t| t.checked_mul(s.d_out))
                    .ok_or_else(|| Error::InvalidLayout("total dimension overflows".into()))?;
            }
        }
        Ok(layout)
    }

    /// Convenience constructor from `(name, d_in, d_out)` triples.
    pub fn simple<S: Into<String>>(parties: impl IntoIterator<Item = (S, usize, usize)>) -> Result<Self> {
        Self::new(parties.into_iter().map(|(n, i, o)| Party::new(n, i, o)).collect())
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn len(&self) -> usize {
        self.parties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parties.is_empty()
    }

    pub fn party_index(&self, name: &str) -> Result<usize> {
        self.parties
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| Error::UnknownParty(name.to_string()))
    }

    /// Total Hilbert-space dimension `D`.
    pub fn total_dim(&self) -> usize {
        self.parties.iter().map(|p| p.d_in() * p.d_out()).product()
    }

    /// Product of all output dimensions, the required trace of a process.
    pub fn output_dim(&self) -> usize {
        self.parties.iter().map(Party::d_out).product()
    }

    /// Subsystem dimensions in expansion order.
    pub fn shape(&self) -> SubsystemShape {
        let mut dims = Vec::new();
        for p in &self.parties {
            dims.extend(p.subparties.iter().map(|s| s.d_in));
            dims.extend(p.subparties.iter().map(|s| s.d_out));
        }
        SubsystemShape::new(dims).expect("layout dimensions are validated")
    }

    /// Subsystem index ranges `(inputs, outputs)` of party `p`.
    pub fn party_subsystems(&self, p: usize) -> (Range<usize>, Range<usize>) {
        let start: usize = self.parties[..p].iter().map(Party::subsystem_count).sum();
        let m = self.parties[p].subparties.len();
        (start..start + m, start + m..start + 2 * m)
    }

    /// Human-readable subsystem labels, e.g. `x1`, `x2` or `a1'`, `a1''`.
    pub fn subsystem_labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        for p in &self.parties {
            let base = p.name.to_lowercase();
            let m = p.subparties.len();
            for side in ["1", "2"] {
                for k in 0..m {
                    let primes = if m == 1 { String::new() } else { "'".repeat(k + 1) };
                    out.push(format!("{base}{side}{primes}"));
                }
            }
        }
        out
    }

    /// Replaces the sub-party structure of one party with a finer (or
    /// coarser) factorization of the same total input and output dimensions.
    pub fn refine(&self, party: &str, subparties: Vec<SubParty>) -> Result<Self> {
        let idx = self.party_index(party)?;
        let old = &self.parties[idx];
        let new = Party::with_subparties(old.name.clone(), subparties);
        if new.d_in() != old.d_in() || new.d_out() != old.d_out() {
            return Err(Error::InvalidLayout(format!(
                "split of `{party}` has dims {}x{} but the party has {}x{}",
                new.d_in(),
                new.d_out(),
                old.d_in(),
                old.d_out()
            )));
        }
        let mut parties = self.parties.clone();
        parties[idx] = new;
        Self::new(parties)
    }
}

/// Per-party type of a Hilbert–Schmidt term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartyTag {
    Trivial,
    In,
    Out,
    InOut,
}

impl PartyTag {
    pub fn from_flags(input: bool, output: bool) -> Self {
        match (input, output) {
            (false, false) => PartyTag::Trivial,
            (true, false) => PartyTag::In,
            (false, true) => PartyTag::Out,
            (true, true) => PartyTag::InOut,
        }
    }

    pub fn has_in(self) -> bool {
        matches!(self, PartyTag::In | PartyTag::InOut)
    }

    pub fn has_out(self) -> bool {
        matches!(self, PartyTag::Out | PartyTag::InOut)
    }

    /// Tag of the tensor product of two terms on a merged party.
    pub fn merge(self, other: Self) -> Self {
        Self::from_flags(self.has_in() || other.has_in(), self.has_out() || other.has_out())
    }

    /// Numeric code: 0 trivial, 1 in, 2 out, 12 in-out.
    pub fn code(self) -> u8 {
        match self {
            PartyTag::Trivial => 0,
            PartyTag::In => 1,
            PartyTag::Out => 2,
            PartyTag::InOut => 12,
        }
    }
}

/// Per-party tags of one term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TermSignature {
    pub tags: Vec<PartyTag>,
}

impl TermSignature {
    pub fn is_trivial(&self) -> bool {
        self.tags.iter().all(|&t| t == PartyTag::Trivial)
    }

    /// True if the term is of pure input type on at least one party.
    pub fn has_pure_in(&self) -> bool {
        self.tags.contains(&PartyTag::In)
    }

    /// A nontrivial term that is pure-input on no party.
    pub fn is_forbidden(&self) -> bool {
        !self.is_trivial() && !self.has_pure_in()
    }

    /// Type notation such as `a1a2b1`, using lowercase party names.
    pub fn notation(&self, layout: &PartyLayout) -> String {
        if self.is_trivial() {
            return "trivial".to_string();
        }
        let mut s = String::new();
        for (tag, party) in self.tags.iter().zip(layout.parties()) {
            let base = party.name().to_lowercase();
            if tag.has_in() {
                s.push_str(&base);
                s.push('1');
            }
            if tag.has_out() {
                s.push_str(&base);
                s.push('2');
            }
        }
        s
    }
}

/// Classifies a term party by party.
pub fn classify_term(t: &HSTerm, layout: &PartyLayout) -> Result<TermSignature> {
    let n = layout.shape().len();
    if t.indices.len() != n {
        return Err(Error::TermLength { expected: n, found: t.indices.len() });
    }
    let tags = (0..layout.len())
        .map(|p| {
            let (ins, outs) = layout.party_subsystems(p);
            let input = t.indices[ins].iter().any(|&i| i != 0);
            let output = t.indices[outs].iter().any(|&i| i != 0);
            PartyTag::from_flags(input, output)
        })
        .collect();
    Ok(TermSignature { tags })
}

/// A Hermitian operator together with its party layout.
#[derive(Clone, PartialEq)]
pub struct ProcessMatrix {
    layout: PartyLayout,
    op: CMatrix,
}

impl fmt::Debug for ProcessMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProcessMatrix")
            .field("layout", &self.layout)
            .field("dim", &self.op.dim())
            .finish()
    }
}

impl ProcessMatrix {
    /// Pairs an operator with a layout. Hermiticity and validity are checked
    /// later; only the dimension and finiteness are enforced here.
    pub fn new(layout: PartyLayout, op: CMatrix) -> Result<Self> {
        if op.dim() != layout.total_dim() {
            return Err(Error::ShapeMismatch { expected: layout.total_dim(), found: op.dim() });
        }
        if !op.is_finite() {
            return Err(Error::InvalidDimension("operator has non-finite entries".into()));
        }
        Ok(Self { layout, op })
    }

    pub fn layout(&self) -> &PartyLayout {
        &self.layout
    }

    pub fn op(&self) -> &CMatrix {
        &self.op
    }

    pub fn into_parts(self) -> (PartyLayout, CMatrix) {
        (self.layout, self.op)
    }

    pub fn shape(&self) -> SubsystemShape {
        self.layout.shape()
    }

    pub fn decompose(&self, tol: TermTolerance) -> Result<Vec<HSTerm>> {
        hsbasis::decompose(&self.op, &self.shape(), tol)
    }

    /// Decomposed terms with their signatures.
    pub fn classified_terms(&self, tol: TermTolerance) -> Result<Vec<(HSTerm, TermSignature)>> {
        self.decompose(tol)?
            .into_iter()
            .map(|t| {
                let sig = classify_term(&t, &self.layout)?;
                Ok((t, sig))
            })
            .collect()
    }

    /// Same operator under a different sub-party factorization.
    pub fn with_layout(&self, layout: PartyLayout) -> Result<Self> {
        if layout.total_dim() != self.layout.total_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.layout.total_dim(),
                found: layout.total_dim(),
            });
        }
        Ok(Self { layout, op: self.op.clone() })
    }

    pub fn refine(&self, party: &str, subparties: Vec<SubParty>) -> Result<Self> {
        self.with_layout(self.layout.refine(party, subparties)?)
    }

    /// Entrywise transpose in the computational basis.
    pub fn transpose(&self) -> Self {
        Self { layout: self.layout.clone(), op: self.op.transpose() }
    }
}

/// Tolerances for the validity decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// PSD slack relative to `||W||_F`.
    pub psd_rel: f64,
    /// Trace slack relative to `d_O`.
    pub trace_rel: f64,
    pub terms: TermTolerance,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { psd_rel: 1e-9, trace_rel: 1e-9, terms: TermTolerance::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForbiddenTerm {
    pub term: HSTerm,
    pub signature: TermSignature,
    pub notation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub verdict: bool,
    pub min_eigenvalue: f64,
    pub psd_defect: f64,
    pub psd_tolerance: f64,
    pub trace: f64,
    pub expected_trace: f64,
    pub trace_defect: f64,
    pub trace_tolerance: f64,
    pub term_count: usize,
    pub forbidden_terms: Vec<ForbiddenTerm>,
}

impl ValidityReport {
    pub fn psd_ok(&self) -> bool {
        self.psd_defect <= self.psd_tolerance
    }

    pub fn trace_ok(&self) -> bool {
        self.trace_defect <= self.trace_tolerance
    }

    pub fn terms_ok(&self) -> bool {
        self.forbidden_terms.is_empty()
    }
}

/// Nontrivial terms that are pure-input on no party.
pub fn forbidden_terms(w: &ProcessMatrix, tol: TermTolerance) -> Result<Vec<ForbiddenTerm>> {
    Ok(collect_forbidden(w.classified_terms(tol)?, w.layout()))
}

fn collect_forbidden(terms: Vec<(HSTerm, TermSignature)>, layout: &PartyLayout) -> Vec<ForbiddenTerm> {
    terms
        .into_iter()
        .filter(|(_, sig)| sig.is_forbidden())
        .map(|(term, signature)| {
            let notation = signature.notation(layout);
            ForbiddenTerm { term, signature, notation }
        })
        .collect()
}

/// Decides whether `w` is a valid process: PSD, trace `d_O`, and only
/// allowed term types.
pub fn is_valid_process(w: &ProcessMatrix, tol: &Tolerances) -> Result<ValidityReport> {
    w.op.check_hermitian()?;
    let min_eigenvalue = linalg::min_eigenvalue(&w.op)?;
    let psd_defect = (-min_eigenvalue).max(0.0);
    let psd_tolerance = tol.psd_rel * w.op.frobenius_norm();
    let trace = w.op.trace().re;
    let expected_trace = w.layout.output_dim() as f64;
    let trace_defect = (trace - expected_trace).abs();
    let trace_tolerance = tol.trace_rel * expected_trace;
    let terms = w.classified_terms(tol.terms)?;
    let term_count = terms.len();
    let forbidden_terms = collect_forbidden(terms, w.layout());
    let verdict = psd_defect <= psd_tolerance && trace_defect <= trace_tolerance && forbidden_terms.is_empty();
    Ok(ValidityReport {
        verdict,
        min_eigenvalue,
        psd_defect,
        psd_tolerance,
        trace,
        expected_trace,
        trace_defect,
        trace_tolerance,
        term_count,
        forbidden_terms,
    })
}

/// True if `sig` carries signalling from party `from` to party `to`: output
/// type on `from` and pure input type on `to`. Other parties are ignored.
pub fn signature_signals(sig: &TermSignature, from: usize, to: usize) -> bool {
    from != to && sig.tags[from].has_out() && sig.tags[to] == PartyTag::In
}

/// Whether `w` contains a term signalling from `from` to `to`.
pub fn signalling_directions(w: &ProcessMatrix, from: &str, to: &str) -> Result<bool> {
    signals_with(w, from, to, TermTolerance::default())
}

pub fn signals_with(w: &ProcessMatrix, from: &str, to: &str, tol: TermTolerance) -> Result<bool> {
    let f = w.layout.party_index(from)?;
    let t = w.layout.party_index(to)?;
    Ok(w.classified_terms(tol)?
        .iter()
        .any(|(_, sig)| signature_signals(sig, f, t)))
}

/// Every ordered `(from, to)` party pair with signalling terms.
pub fn signalling_pairs(w: &ProcessMatrix, tol: TermTolerance) -> Result<Vec<(String, String)>> {
    let terms = w.classified_terms(tol)?;
    let names: Vec<&str> = w.layout.parties().iter().map(Party::name).collect();
    let mut out = Vec::new();
    for f in 0..names.len() {
        for t in 0..names.len() {
            if terms.iter().any(|(_, sig)| signature_signals(sig, f, t)) {
                out.push((names[f].to_string(), names[t].to_string()));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    In,
    Out,
}

/// One subsystem of the layout, addressed by party, sub-party and side.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsystemRef {
    pub party: String,
    pub subparty: usize,
    pub side: Side,
}

impl SubsystemRef {
    pub fn new(party: impl Into<String>, subparty: usize, side: Side) -> Self {
        Self { party: party.into(), subparty, side }
    }

    /// Both the input and the output of one sub-party.
    pub fn both(party: &str, subparty: usize) -> [Self; 2] {
        [Self::new(party, subparty, Side::In), Self::new(party, subparty, Side::Out)]
    }
}

/// Traces out every sub-party not selected by `keep` and renormalizes by the
/// discarded output dimension, so the result again has trace `d_O`.
///
/// Parties left with no sub-parties disappear from the layout.
pub fn reduced_process(w: &ProcessMatrix, keep: &[SubsystemRef]) -> Result<ProcessMatrix> {
    let layout = &w.layout;
    let mut kept: Vec<Vec<[bool; 2]>> = layout
        .parties()
        .iter()
        .map(|p| vec![[false; 2]; p.subparties().len()])
        .collect();
    for r in keep {
        let p = layout.party_index(&r.party)?;
        let m = layout.parties()[p].subparties().len();
        if r.subparty >= m {
            return Err(Error::InvalidLayout(format!(
                "party `{}` has {m} sub-parties, no sub-party {}",
                r.party, r.subparty
            )));
        }
        kept[p][r.subparty][(r.side == Side::Out) as usize] = true;
    }

    let mut discard = Vec::new();
    let mut discarded_out: usize = 1;
    let mut parties = Vec::new();
    for (p, party) in layout.parties().iter().enumerate() {
        let (ins, outs) = layout.party_subsystems(p);
        let mut subs = Vec::new();
        for (k, flags) in kept[p].iter().enumerate() {
            match *flags {
                [true, true] => subs.push(party.subparties()[k]),
                [false, false] => {
                    discard.push(ins.start + k);
                    discard.push(outs.start + k);
                    discarded_out *= party.subparties()[k].d_out;
                }
                [true, false] => {
                    return Err(Error::SplitInputOutput {
                        party: party.name().to_string(),
                        subparty: k,
                        kept: "input",
                        dropped: "output",
                    })
                }
                [false, true] => {
                    return Err(Error::SplitInputOutput {
                        party: party.name().to_string(),
                        subparty: k,
                        kept: "output",
                        dropped: "input",
                    })
                }
            }
        }
        if !subs.is_empty() {
            parties.push(Party::with_subparties(party.name().to_string(), subs));
        }
    }
    let reduced = linalg::partial_trace(&w.op, &layout.shape(), &discard)?;
    ProcessMatrix::new(PartyLayout::new(parties)?, reduced.scale(1.0 / discarded_out as f64))
}
