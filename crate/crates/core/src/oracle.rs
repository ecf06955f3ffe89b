//! Brute-force normalization oracle.
//!
//! A process maps one channel per party to a probability,
//! `p = trace(W (C_A (x) C_B (x) ...)^T)`, where each `C` is the Choi operator
//! `sum_ij |i><j| (x) N(|i><j|)` ordered input then output. A valid process
//! returns `p = 1` for every tuple of trace-preserving channels. The oracle
//! evaluates a deterministic battery of channels plus random Stinespring
//! channels and reports the worst deviation from 1.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gallery::maximally_mixed;
use crate::linalg::{self, partial_trace, tensor, CMatrix, SubsystemShape, ZERO};
use crate::process::{Party, ProcessMatrix};

/// Tolerance for the PSD and trace-preservation checks on channels.
pub const CHANNEL_TOL: f64 = 1e-10;

/// Largest `d_in * d_out * env` accepted by the random sampler.
pub const MAX_DILATION_DIM: usize = 1 << 16;

/// Largest number of tuples drawn from the deterministic battery.
pub const MAX_BATTERY_TUPLES: usize = 4096;

pub const DEFAULT_SAMPLES: usize = 200;

/// Choi operator of a CPTP map, ordered input (x) output.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiChannel {
    pub d_in: usize,
    pub d_out: usize,
    pub choi: CMatrix,
    pub label: String,
}

impl ChoiChannel {
    /// Wraps a Choi operator after checking positivity and trace
    /// preservation.
    pub fn new(d_in: usize, d_out: usize, choi: CMatrix, label: impl Into<String>) -> Result<Self> {
        let ch = Self::new_unchecked(d_in, d_out, choi, label);
        ch.check()?;
        Ok(ch)
    }

    fn new_unchecked(d_in: usize, d_out: usize, choi: CMatrix, label: impl Into<String>) -> Self {
        Self { d_in, d_out, choi, label: label.into() }
    }

    /// PSD within [`CHANNEL_TOL`] and `trace_out(C) = I` within the same.
    pub fn check(&self) -> Result<()> {
        if self.choi.dim() != self.d_in * self.d_out {
            return Err(Error::InvalidChannel(format!(
                "Choi operator has dimension {}, expected {}",
                self.choi.dim(),
                self.d_in * self.d_out
            )));
        }
        let min = linalg::min_eigenvalue(&self.choi).map_err(|e| Error::InvalidChannel(e.to_string()))?;
        if min < -CHANNEL_TOL {
            return Err(Error::InvalidChannel(format!("Choi operator has eigenvalue {min:e}")));
        }
        let shape = SubsystemShape::new(vec![self.d_in, self.d_out])?;
        let marginal = partial_trace(&self.choi, &shape, &[1])?;
        let dev = marginal.max_abs_diff(&CMatrix::identity(self.d_in));
        if dev > CHANNEL_TOL {
            return Err(Error::InvalidChannel(format!("not trace preserving (deviation {dev:e})")));
        }
        Ok(())
    }

    /// Choi operator of `rho -> V rho V^dagger` traced over the environment,
    /// for an isometry `V` given as a row-major `(d_out * env) x d_in` matrix
    /// with rows indexed `out * env + e`.
    pub fn from_isometry(d_in: usize, d_out: usize, env: usize, v: &[C64], label: impl Into<String>) -> Result<Self> {
        if v.len() != d_out * env * d_in {
            return Err(Error::InvalidChannel(format!(
                "isometry has {} entries, expected {}",
                v.len(),
                d_out * env * d_in
            )));
        }
        let at = |o: usize, e: usize, i: usize| v[(o * env + e) * d_in + i];
        let n = d_in * d_out;
        let mut choi = CMatrix::zeros(n);
        for i in 0..d_in {
            for j in 0..d_in {
                for o in 0..d_out {
                    for p in 0..d_out {
                        let mut acc = ZERO;
                        for e in 0..env {
                            acc += at(o, e, i) * at(p, e, j).conj();
                        }
                        choi[(i * d_out + o, j * d_out + p)] = acc;
                    }
                }
            }
        }
        Self::new(d_in, d_out, choi, label)
    }

    /// Unitary channel `rho -> U rho U^dagger`.
    pub fn unitary(u: &CMatrix, label: impl Into<String>) -> Result<Self> {
        let d = u.dim();
        Self::from_isometry(d, d, 1, u.entries(), label)
    }

    pub fn identity(d: usize) -> Self {
        let mut choi = CMatrix::zeros(d * d);
        for i in 0..d {
            for j in 0..d {
                choi[(i * d + i, j * d + j)] = C64::new(1.0, 0.0);
            }
        }
        Self::new_unchecked(d, d, choi, "identity")
    }

    /// `rho -> trace(rho) I / d_out`.
    pub fn depolarizing(d_in: usize, d_out: usize) -> Self {
        let choi = tensor(&CMatrix::identity(d_in), &maximally_mixed(d_out));
        Self::new_unchecked(d_in, d_out, choi, "depolarize")
    }

    /// `rho -> trace(rho) sigma`.
    pub fn trace_and_prepare(d_in: usize, sigma: &CMatrix, label: impl Into<String>) -> Result<Self> {
        Self::new(d_in, sigma.dim(), tensor(&CMatrix::identity(d_in), sigma), label)
    }

    /// Measure in the computational basis and forward the outcome:
    /// `rho -> sum_i <i|rho|i> |i><i|`.
    pub fn classical_identity(d: usize) -> Self {
        let mut choi = CMatrix::zeros(d * d);
        for i in 0..d {
            choi[(i * d + i, i * d + i)] = C64::new(1.0, 0.0);
        }
        Self::new_unchecked(d, d, choi, "classical-identity")
    }

    /// Unitary permuting computational basis states, `|i> -> |perm[i]>`.
    pub fn basis_permutation(perm: &[usize], label: impl Into<String>) -> Result<Self> {
        linalg::check_permutation(perm, perm.len())?;
        let d = perm.len();
        let mut u = CMatrix::zeros(d);
        for (i, &p) in perm.iter().enumerate() {
            u[(p, i)] = C64::new(1.0, 0.0);
        }
        Self::unitary(&u, label)
    }
}

/// Random channel from a Haar-like isometry into `output (x) environment`.
pub fn random_cptp(d_in: usize, d_out: usize, env: usize, seed: u64) -> Result<ChoiChannel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_cptp_with(d_in, d_out, env, &mut rng)
}

pub fn random_cptp_with<R: Rng + ?Sized>(d_in: usize, d_out: usize, env: usize, rng: &mut R) -> Result<ChoiChannel> {
    if d_in == 0 || d_out == 0 || env == 0 {
        return Err(Error::InvalidChannel("channel dimensions must be positive".into()));
    }
    let rows = d_out
        .checked_mul(env)
        .filter(|r| r.checked_mul(d_in).is_some_and(|t| t <= MAX_DILATION_DIM))
        .ok_or_else(|| Error::InvalidChannel(format!("dilation {d_in}x{d_out}x{env} exceeds {MAX_DILATION_DIM}")))?;
    if rows < d_in {
        return Err(Error::InvalidChannel(format!(
            "no isometry from dimension {d_in} into {d_out}x{env}"
        )));
    }
    // Columns of a complex Gaussian matrix, orthonormalized.
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d_in);
    while cols.len() < d_in {
        let mut v: Vec<C64> = (0..rows)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        for _ in 0..2 {
            for c in &cols {
                let overlap: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                v.iter_mut().zip(c).for_each(|(x, a)| *x -= overlap * a);
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        cols.push(v);
    }
    let mut iso = vec![ZERO; rows * d_in];
    for (i, c) in cols.iter().enumerate() {
        for (r, &x) in c.iter().enumerate() {
            iso[r * d_in + i] = x;
        }
    }
    ChoiChannel::from_isometry(d_in, d_out, env, &iso, "random")
}

fn check_channels(w: &ProcessMatrix, channels: &[ChoiChannel]) -> Result<()> {
    let parties = w.layout().parties();
    if channels.len() != parties.len() {
        return Err(Error::InvalidChannel(format!(
            "{} channels for {} parties",
            channels.len(),
            parties.len()
        )));
    }
    for (p, c) in parties.iter().zip(channels) {
        if (p.d_in(), p.d_out()) != (c.d_in, c.d_out) {
            return Err(Error::InvalidChannel(format!(
                "party `{}` is {}x{} but channel `{}` is {}x{}",
                p.name(),
                p.d_in(),
                p.d_out(),
                c.label,
                c.d_in,
                c.d_out
            )));
        }
    }
    Ok(())
}

/// `trace(W C^T)` with `C` the tensor product of the channels, as a complex
/// number.
pub fn probability_complex(w: &ProcessMatrix, channels: &[ChoiChannel]) -> Result<C64> {
    check_channels(w, channels)?;
    let joint = linalg::tensor_all(channels.iter().map(|c| &c.choi));
    // trace(W C^T) = sum_ij W_ij C_ij
    Ok(w.op().entries().iter().zip(joint.entries()).map(|(a, b)| a * b).sum())
}

/// Outcome probability of the channel tuple (real part).
pub fn probability(w: &ProcessMatrix, channels: &[ChoiChannel]) -> Result<f64> {
    Ok(probability_complex(w, channels)?.re)
}

/// Deterministic channels for one party: depolarizer, state preparation
/// and, for matching input and output, the quantum and classical identity,
/// a cyclic shift, and every routing of sub-party inputs onto sub-party
/// outputs of equal dimension.
pub fn party_battery(party: &Party) -> Vec<ChoiChannel> {
    let (d_in, d_out) = (party.d_in(), party.d_out());
    let mut out = vec![ChoiChannel::depolarizing(d_in, d_out)];
    let ground = CMatrix::ket_bra(d_out, 0, 0);
    out.push(ChoiChannel::trace_and_prepare(d_in, &ground, "prepare-0").expect("pure state"));
    if d_in == d_out {
        out.push(ChoiChannel::identity(d_in));
        if d_in > 1 {
            out.push(ChoiChannel::classical_identity(d_in));
            let shift: Vec<usize> = (0..d_in).map(|i| (i + 1) % d_in).collect();
            out.push(ChoiChannel::basis_permutation(&shift, "shift").expect("cyclic shift"));
        }
    }
    let subs = party.subparties();
    if subs.len() > 1 && subs.len() <= 4 {
        for route in crate::product::permutations(subs.len()) {
            if route.iter().enumerate().all(|(k, &r)| k == r) {
                continue;
            }
            if route.iter().enumerate().any(|(k, &r)| subs[k].d_in != subs[r].d_out) {
                continue;
            }
            out.push(routing_channel(party, &route));
        }
    }
    out
}

/// Identity channel sending input factor `k` to output factor `route[k]`.
fn routing_channel(party: &Party, route: &[usize]) -> ChoiChannel {
    let in_dims: Vec<usize> = party.subparties().iter().map(|s| s.d_in).collect();
    let shape = SubsystemShape::new(in_dims.clone()).expect("positive dims");
    let in_strides = shape.strides();
    let out_dims: Vec<usize> = party.subparties().iter().map(|s| s.d_out).collect();
    let out_shape = SubsystemShape::new(out_dims).expect("positive dims");
    let out_strides = out_shape.strides();
    let d = shape.total();
    let mut perm = vec![0; d];
    for (i, slot) in perm.iter_mut().enumerate() {
        let mut rest = i;
        let mut target = 0;
        for k in 0..in_dims.len() {
            let digit = rest / in_strides[k];
            rest %= in_strides[k];
            target += digit * out_strides[route[k]];
        }
        *slot = target;
    }
    let label = format!(
        "route[{}]",
        route.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",")
    );
    ChoiChannel::basis_permutation(&perm, label).expect("routing is a basis permutation")
}

/// Worst normalization deviation found by the oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleVerdict {
    pub max_deviation: f64,
    /// Labels of the channels attaining `max_deviation`, one per party.
    pub witness: Vec<String>,
    #[serde(skip)]
    pub witness_channels: Vec<ChoiChannel>,
    pub witness_probability: f64,
    pub battery_tuples: usize,
    pub samples: usize,
    pub seed: u64,
}

/// Candidate with its position in evaluation order, for deterministic
/// tie-breaking.
struct Candidate {
    order: usize,
    deviation: f64,
    probability: f64,
    channels: Vec<ChoiChannel>,
}

fn better(a: Candidate, b: Candidate) -> Candidate {
    match a.deviation.total_cmp(&b.deviation) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            if a.order <= b.order {
                a
            } else {
                b
            }
        }
    }
}

fn evaluate(w: &ProcessMatrix, order: usize, channels: Vec<ChoiChannel>) -> Result<Candidate> {
    let p = probability(w, &channels)?;
    let deviation = if p.is_nan() { f64::INFINITY } else { (p - 1.0).abs() };
    Ok(Candidate { order, deviation, probability: p, channels })
}

/// Random channel tuple number `index` for `seed`; each tuple draws from its
/// own ChaCha stream.
pub fn sample_tuple(w: &ProcessMatrix, seed: u64, index: u64) -> Result<Vec<ChoiChannel>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    w.layout()
        .parties()
        .iter()
        .map(|p| {
            let mut ch = random_cptp_with(p.d_in(), p.d_out(), p.d_in() * p.d_out(), &mut rng)?;
            ch.label = format!("random#{index}");
            Ok(ch)
        })
        .collect()
}

/// Tuples of the deterministic battery, in mixed-radix order, capped at
/// [`MAX_BATTERY_TUPLES`].
pub fn battery_tuples(w: &ProcessMatrix) -> Vec<Vec<ChoiChannel>> {
    let per_party: Vec<Vec<ChoiChannel>> = w.layout().parties().iter().map(party_battery).collect();
    let mut out = vec![Vec::new()];
    for options in &per_party {
        let mut next = Vec::new();
        for prefix in &out {
            for ch in options {
                if next.len() >= MAX_BATTERY_TUPLES {
                    break;
                }
                let mut t: Vec<ChoiChannel> = prefix.clone();
                t.push(ch.clone());
                next.push(t);
            }
        }
        out = next;
    }
    out
}

/// Evaluates the battery and `samples` random tuples; returns the maximum
/// `|p - 1|` and the tuple attaining it.
pub fn normalization_oracle(w: &ProcessMatrix, samples: usize, seed: u64) -> Result<OracleVerdict> {
    let battery = battery_tuples(w);
    let battery_len = battery.len();
    let from_battery = battery
        .into_par_iter()
        .enumerate()
        .map(|(i, t)| evaluate(w, i, t));
    let from_samples = (0..samples).into_par_iter().map(|i| {
        let t = sample_tuple(w, seed, i as u64)?;
        evaluate(w, battery_len + i, t)
    });
    let best = from_battery
        .chain(from_samples)
        .try_reduce_with(|a, b| Ok(better(a, b)))
        .transpose()?;
    let best = match best {
        Some(b) => b,
        None => Candidate { order: 0, deviation: 0.0, probability: 1.0, channels: Vec::new() },
    };
    Ok(OracleVerdict {
        max_deviation: best.deviation,
        witness: best.channels.iter().map(|c| c.label.clone()).collect(),
        witness_probability: best.probability,
        witness_channels: best.channels,
        battery_tuples: battery_len,
        samples,
        seed,
    })
}
