//! Tensor products of processes and the blocking-pair decision.
//!
//! Two processes `W` (on parties `A', B', ...`) and `Z` (on `A'', B'', ...`)
//! combine into `P = W (x) Z` on merged parties `A = A'A''`, ... whose input
//! is `a1' a1''` and output `a2' a2''`. Both factors being valid, `P` is
//! automatically positive with the right trace, so it fails to be a process
//! exactly when some pair of nontrivial terms (one from each factor) merges
//! into a term that is pure-input on no party. Such a pair is a blocking
//! pair.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hsbasis::{HSTerm, TermTolerance};
use crate::linalg::{self, permute_subsystems};
use crate::process::{
    is_valid_process, signature_signals, Party, PartyLayout, PartyTag, ProcessMatrix, TermSignature, Tolerances,
};

/// Which party of `W` merges with which party of `Z`, and the merged name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartyPairing {
    pairs: Vec<(String, String, String)>,
}

impl PartyPairing {
    pub fn new<S: Into<String>>(pairs: impl IntoIterator<Item = (S, S, S)>) -> Self {
        Self { pairs: pairs.into_iter().map(|(a, b, c)| (a.into(), b.into(), c.into())).collect() }
    }

    /// Pairs parties with equal names, keeping the name.
    pub fn by_name(w: &PartyLayout, z: &PartyLayout) -> Result<Self> {
        let pairing = Self::new(w.parties().iter().map(|p| (p.name(), p.name(), p.name())));
        pairing.resolve(w, z)?;
        Ok(pairing)
    }

    /// Pairs parties by position. Equal names are kept, otherwise the merged
    /// name is the concatenation.
    pub fn by_position(w: &PartyLayout, z: &PartyLayout) -> Result<Self> {
        if w.len() != z.len() {
            return Err(Error::PairingMismatch(format!(
                "first process has {} parties, second has {}",
                w.len(),
                z.len()
            )));
        }
        Ok(Self::new(w.parties().iter().zip(z.parties()).map(|(a, b)| {
            let merged = if a.name() == b.name() {
                a.name().to_string()
            } else {
                format!("{}{}", a.name(), b.name())
            };
            (a.name().to_string(), b.name().to_string(), merged)
        })))
    }

    pub fn pairs(&self) -> &[(String, String, String)] {
        &self.pairs
    }

    /// Index pairs `(party of W, party of Z)` in merged-party order.
    pub fn resolve(&self, w: &PartyLayout, z: &PartyLayout) -> Result<Vec<(usize, usize)>> {
        if self.pairs.len() != w.len() || self.pairs.len() != z.len() {
            return Err(Error::PairingMismatch(format!(
                "pairing has {} entries for processes with {} and {} parties",
                self.pairs.len(),
                w.len(),
                z.len()
            )));
        }
        let mut used_w = vec![false; w.len()];
        let mut used_z = vec![false; z.len()];
        let mut out = Vec::with_capacity(self.pairs.len());
        for (k, (a, b, merged)) in self.pairs.iter().enumerate() {
            let i = w.party_index(a).map_err(|_| Error::PairingMismatch(format!("no party `{a}` in the first process")))?;
            let j = z.party_index(b).map_err(|_| Error::PairingMismatch(format!("no party `{b}` in the second process")))?;
            if std::mem::replace(&mut used_w[i], true) || std::mem::replace(&mut used_z[j], true) {
                return Err(Error::PairingMismatch(format!("party paired twice in entry {k}")));
            }
            if self.pairs[..k].iter().any(|(_, _, m)| m == merged) {
                return Err(Error::PairingMismatch(format!("duplicate merged name `{merged}`")));
            }
            out.push((i, j));
        }
        Ok(out)
    }

    /// Layout of the merged parties.
    pub fn merged_layout(&self, w: &PartyLayout, z: &PartyLayout) -> Result<PartyLayout> {
        let idx = self.resolve(w, z)?;
        let parties = idx
            .iter()
            .zip(&self.pairs)
            .map(|(&(i, j), (_, _, name))| {
                let mut subs = w.parties()[i].subparties().to_vec();
                subs.extend_from_slice(z.parties()[j].subparties());
                Party::with_subparties(name.clone(), subs)
            })
            .collect();
        PartyLayout::new(parties)
    }

    /// Pairing with the roles of the two factors exchanged.
    pub fn reversed(&self) -> Self {
        Self::new(self.pairs.iter().map(|(a, b, c)| (b.clone(), a.clone(), c.clone())))
    }
}

/// Destination slot of every subsystem of `W (x) Z` in the merged layout.
fn merge_permutation(w: &PartyLayout, z: &PartyLayout, idx: &[(usize, usize)]) -> Vec<usize> {
    let nw = w.shape().len();
    let nz = z.shape().len();
    let mut perm = vec![0; nw + nz];
    let mut slot = 0;
    for &(i, j) in idx {
        let (wi, wo) = w.party_subsystems(i);
        let (zi, zo) = z.party_subsystems(j);
        for s in wi {
            perm[s] = slot;
            slot += 1;
        }
        for s in zi {
            perm[nw + s] = slot;
            slot += 1;
        }
        for s in wo {
            perm[s] = slot;
            slot += 1;
        }
        for s in zo {
            perm[nw + s] = slot;
            slot += 1;
        }
    }
    perm
}

/// Builds `P = W (x) Z` on the merged parties. The result is not checked.
pub fn tensor_product(w: &ProcessMatrix, z: &ProcessMatrix, pairing: &PartyPairing) -> Result<ProcessMatrix> {
    let idx = pairing.resolve(w.layout(), z.layout())?;
    let layout = pairing.merged_layout(w.layout(), z.layout())?;
    let joint = linalg::tensor(w.op(), z.op());
    let mut dims = w.shape().dims().to_vec();
    dims.extend_from_slice(z.shape().dims());
    let shape = linalg::SubsystemShape::new(dims)?;
    let perm = merge_permutation(w.layout(), z.layout(), &idx);
    ProcessMatrix::new(layout, permute_subsystems(&joint, &shape, &perm)?)
}

/// Merges two per-factor signatures into the signature of their product term.
fn merge_signatures(a: &TermSignature, b: &TermSignature, idx: &[(usize, usize)]) -> TermSignature {
    TermSignature { tags: idx.iter().map(|&(i, j)| a.tags[i].merge(b.tags[j])).collect() }
}

/// A pair of nontrivial terms whose product is pure-input on no party.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockingPair {
    pub w_term: HSTerm,
    pub z_term: HSTerm,
    pub w_signature: TermSignature,
    pub z_signature: TermSignature,
    /// Unordered tag-code pair per merged party, smaller code first.
    pub cases: Vec<(u8, u8)>,
    /// Type notation of the merged term on the merged parties.
    pub merged_notation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductReport {
    /// True when no blocking pair exists.
    pub verdict: bool,
    pub blocking_pairs: Vec<BlockingPair>,
    pub w_valid: bool,
    pub z_valid: bool,
}

impl ProductReport {
    /// Both factors passed the validity check, so the verdict is exactly the
    /// validity of the product.
    pub fn inputs_valid(&self) -> bool {
        self.w_valid && self.z_valid
    }
}

/// The merged party keeps pure input type only for the combinations
/// (trivial, in) and (in, in); every other unordered pair is compatible with
/// a blocking pair.
pub fn case_blocks(a: PartyTag, b: PartyTag) -> bool {
    use PartyTag::*;
    !matches!((a, b), (Trivial, In) | (In, Trivial) | (In, In))
}

fn unordered_case(a: PartyTag, b: PartyTag) -> (u8, u8) {
    let (x, y) = (a.code(), b.code());
    (x.min(y), x.max(y))
}

/// Enumerates all pairs of nontrivial terms of `W` and `Z` and reports the
/// pairs that block the product from being a process.
pub fn find_blocking_pairs(w: &ProcessMatrix, z: &ProcessMatrix, pairing: &PartyPairing) -> Result<ProductReport> {
    find_blocking_pairs_with(w, z, pairing, &Tolerances::default())
}

pub fn find_blocking_pairs_with(
    w: &ProcessMatrix,
    z: &ProcessMatrix,
    pairing: &PartyPairing,
    tol: &Tolerances,
) -> Result<ProductReport> {
    let idx = pairing.resolve(w.layout(), z.layout())?;
    let merged = pairing.merged_layout(w.layout(), z.layout())?;
    let w_valid = is_valid_process(w, tol)?.verdict;
    let z_valid = is_valid_process(z, tol)?.verdict;
    let nontrivial = |p: &ProcessMatrix| -> Result<Vec<(HSTerm, TermSignature)>> {
        Ok(p.classified_terms(tol.terms)?
            .into_iter()
            .filter(|(_, s)| !s.is_trivial())
            .collect())
    };
    let w_terms = nontrivial(w)?;
    let z_terms = nontrivial(z)?;

    let mut blocking_pairs = Vec::new();
    for (wt, ws) in &w_terms {
        for (zt, zs) in &z_terms {
            let blocks = idx.iter().all(|&(i, j)| case_blocks(ws.tags[i], zs.tags[j]));
            if !blocks {
                continue;
            }
            let merged_sig = merge_signatures(ws, zs, &idx);
            debug_assert!(merged_sig.is_forbidden());
            blocking_pairs.push(BlockingPair {
                w_term: wt.clone(),
                z_term: zt.clone(),
                w_signature: ws.clone(),
                z_signature: zs.clone(),
                cases: idx.iter().map(|&(i, j)| unordered_case(ws.tags[i], zs.tags[j])).collect(),
                merged_notation: merged_sig.notation(&merged),
            });
        }
    }
    Ok(ProductReport { verdict: blocking_pairs.is_empty(), blocking_pairs, w_valid, z_valid })
}

/// Two-party shortcut: the product is invalid iff both factors signal and
/// together they signal in both directions. Parties pair by position.
///
/// Returns `true` when the product is *invalid*.
pub fn corollary_check(w: &ProcessMatrix, z: &ProcessMatrix) -> Result<bool> {
    corollary_check_with(w, z, &PartyPairing::by_position(w.layout(), z.layout())?, TermTolerance::default())
}

pub fn corollary_check_with(
    w: &ProcessMatrix,
    z: &ProcessMatrix,
    pairing: &PartyPairing,
    tol: TermTolerance,
) -> Result<bool> {
    for p in [w, z] {
        if p.layout().len() != 2 {
            return Err(Error::NotBipartite(p.layout().len()));
        }
    }
    let idx = pairing.resolve(w.layout(), z.layout())?;
    // Directions in merged-party order: (0 -> 1, 1 -> 0).
    let directions = |p: &ProcessMatrix, first: usize, second: usize| -> Result<(bool, bool)> {
        let sigs = p.classified_terms(tol)?;
        Ok((
            sigs.iter().any(|(_, s)| signature_signals(s, first, second)),
            sigs.iter().any(|(_, s)| signature_signals(s, second, first)),
        ))
    };
    let (w_fwd, w_bwd) = directions(w, idx[0].0, idx[1].0)?;
    let (z_fwd, z_bwd) = directions(z, idx[0].1, idx[1].1)?;
    let both_signal = (w_fwd || w_bwd) && (z_fwd || z_bwd);
    let both_directions = (w_fwd || z_fwd) && (w_bwd || z_bwd);
    Ok(both_signal && both_directions)
}

/// Term-signature summary of a (possibly merged) process, used to fold long
/// products without forming the dense operator.
#[derive(Debug, Clone)]
struct SignatureSet {
    layout: PartyLayout,
    sigs: BTreeSet<TermSignature>,
}

impl SignatureSet {
    fn of(p: &ProcessMatrix, tol: TermTolerance) -> Result<Self> {
        Ok(Self {
            layout: p.layout().clone(),
            sigs: p.classified_terms(tol)?.into_iter().map(|(_, s)| s).collect(),
        })
    }

    fn is_valid_terms(&self) -> bool {
        self.sigs.iter().all(|s| !s.is_forbidden())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceStep {
    /// Position (in the given sequence) of the factor joined at this step.
    pub joined: usize,
    pub verdict: bool,
    /// Number of distinct blocking signature pairs found at this step.
    pub blocking_signature_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceReport {
    pub verdict: bool,
    pub inputs_valid: Vec<bool>,
    pub steps: Vec<SequenceStep>,
    /// Index into `steps` of the first failing step.
    pub first_failure: Option<usize>,
}

/// Folds `ps` left to right with `pairings[k]` joining the running product
/// to `ps[k + 1]`, checking validity after every step.
pub fn check_sequence(ps: &[ProcessMatrix], pairings: &[PartyPairing]) -> Result<SequenceReport> {
    check_sequence_with(ps, pairings, &Tolerances::default())
}

pub fn check_sequence_with(ps: &[ProcessMatrix], pairings: &[PartyPairing], tol: &Tolerances) -> Result<SequenceReport> {
    if ps.len() < 2 {
        return Err(Error::PairingMismatch(format!("need at least two processes, got {}", ps.len())));
    }
    if pairings.len() != ps.len() - 1 {
        return Err(Error::PairingMismatch(format!(
            "{} processes need {} pairings, got {}",
            ps.len(),
            ps.len() - 1,
            pairings.len()
        )));
    }
    let inputs_valid = ps
        .iter()
        .map(|p| is_valid_process(p, tol).map(|r| r.verdict))
        .collect::<Result<Vec<_>>>()?;

    let mut acc = SignatureSet::of(&ps[0], tol.terms)?;
    let mut steps = Vec::new();
    let mut first_failure = None;
    for (k, (next, pairing)) in ps[1..].iter().zip(pairings).enumerate() {
        let next_set = SignatureSet::of(next, tol.terms)?;
        let idx = pairing.resolve(&acc.layout, &next_set.layout)?;
        let layout = pairing.merged_layout(&acc.layout, &next_set.layout)?;
        let mut sigs = BTreeSet::new();
        let mut blocking = 0;
        for a in &acc.sigs {
            for b in &next_set.sigs {
                let m = merge_signatures(a, b, &idx);
                if !a.is_trivial() && !b.is_trivial() && m.is_forbidden() {
                    blocking += 1;
                }
                sigs.insert(m);
            }
        }
        acc = SignatureSet { layout, sigs };
        let verdict = acc.is_valid_terms();
        if !verdict && first_failure.is_none() {
            first_failure = Some(k);
        }
        steps.push(SequenceStep { joined: k + 1, verdict, blocking_signature_pairs: blocking });
    }
    Ok(SequenceReport { verdict: first_failure.is_none(), inputs_valid, steps, first_failure })
}

/// Runs [`check_sequence`] with name-based pairings.
pub fn check_sequence_by_name(ps: &[ProcessMatrix]) -> Result<SequenceReport> {
    let pairings = ps
        .windows(2)
        .map(|w| PartyPairing::by_name(w[0].layout(), w[1].layout()))
        .collect::<Result<Vec<_>>>()?;
    check_sequence(ps, &pairings)
}

/// Default cap on the number of factors whose fold orders are enumerated
/// exhaustively.
pub const MAX_EXHAUSTIVE_ORDERS: usize = 4;

/// Checks the name-paired product in every fold order (all permutations up
/// to [`MAX_EXHAUSTIVE_ORDERS`] factors; rotations and their reversals
/// beyond that).
pub fn check_all_orders(ps: &[ProcessMatrix]) -> Result<Vec<(Vec<usize>, SequenceReport)>> {
    let orders = if ps.len() <= MAX_EXHAUSTIVE_ORDERS {
        permutations(ps.len())
    } else {
        let n = ps.len();
        (0..n)
            .flat_map(|r| {
                let rot: Vec<usize> = (0..n).map(|i| (i + r) % n).collect();
                let rev: Vec<usize> = rot.iter().rev().copied().collect();
                [rot, rev]
            })
            .collect()
    };
    orders
        .into_iter()
        .map(|order| {
            let seq: Vec<ProcessMatrix> = order.iter().map(|&i| ps[i].clone()).collect();
            check_sequence_by_name(&seq).map(|r| (order, r))
        })
        .collect()
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = vec![current.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).expect("pivot exists");
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
}
