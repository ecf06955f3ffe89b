//! Named fixture processes.
//!
//! Two-party fixtures use parties `X` and `Y` with subsystems
//! `x1 x2 y1 y2`. The central example is the equal-weight mixture of a
//! classical identity channel from `X` to `Y` and one from `Y` to `X`:
//!
//! `W = d_O/2 (w(x1) (x) r(x2 y1) (x) w(y2) + w(x2) (x) r(x1 y2) (x) w(y1))`
//!
//! where `w` is maximally mixed and `r` is the maximally correlated
//! classical state.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hsbasis::{self, HSTerm};
use crate::linalg::{self, permute_subsystems, tensor, tensor_all, CMatrix, SubsystemShape};
use crate::process::{classify_term, signature_signals, PartyLayout, ProcessMatrix, TermSignature};
use crate::product::{tensor_product, PartyPairing};

/// `I_d / d`.
pub fn maximally_mixed(d: usize) -> CMatrix {
    CMatrix::identity(d).scale(1.0 / d as f64)
}

/// `(1/d) sum_i |ii><ii|` on `d (x) d`; equals `(I + Z (x) Z)/4` for `d = 2`.
pub fn classical_corr(d: usize) -> Result<CMatrix> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("classical correlation needs d >= 2, got {d}")));
    }
    let mut m = CMatrix::zeros(d * d);
    for i in 0..d {
        m[(i * d + i, i * d + i)] = C64::new(1.0 / d as f64, 0.0);
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    XToY,
    YToX,
}

fn xy_layout(d: usize) -> PartyLayout {
    PartyLayout::simple([("X", d, d), ("Y", d, d)]).expect("static layout")
}

/// Normalized one-way branch on `x1 x2 y1 y2`, trace 1.
fn branch(d: usize, dir: Direction) -> Result<CMatrix> {
    let corr = classical_corr(d)?;
    let mixed = maximally_mixed(d);
    Ok(match dir {
        Direction::XToY => tensor_all([&mixed, &corr, &mixed]),
        Direction::YToX => {
            // Built as x1 y2 x2 y1, then reordered.
            let raw = tensor_all([&corr, &mixed, &mixed]);
            let shape = SubsystemShape::new(vec![d; 4])?;
            permute_subsystems(&raw, &shape, &[0, 3, 1, 2])?
        }
    })
}

/// The two-way classical mixture with per-system dimension `d`.
pub fn eq3_process(d: usize) -> Result<ProcessMatrix> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("per-system dimension must be >= 2, got {d}")));
    }
    let d_o = (d * d) as f64;
    let op = (&branch(d, Direction::XToY)? + &branch(d, Direction::YToX)?).scale(d_o / 2.0);
    ProcessMatrix::new(xy_layout(d), op)
}

/// A single classical identity channel from one party to the other.
pub fn oneway_channel_process(d: usize, dir: Direction) -> Result<ProcessMatrix> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("per-system dimension must be >= 2, got {d}")));
    }
    let op = branch(d, dir)?.scale((d * d) as f64);
    ProcessMatrix::new(xy_layout(d), op)
}

/// `rho` on all inputs, identity on all outputs.
pub fn state_process(rho: &CMatrix, layout: &PartyLayout) -> Result<ProcessMatrix> {
    let d_in: usize = layout.parties().iter().map(|p| p.d_in()).product();
    if rho.dim() != d_in {
        return Err(Error::InvalidState(format!(
            "state has dimension {} but the inputs have dimension {d_in}",
            rho.dim()
        )));
    }
    rho.check_hermitian()
        .map_err(|e| Error::InvalidState(e.to_string()))?;
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
    }
    let min = linalg::min_eigenvalue(rho)?;
    if min < -1e-10 {
        return Err(Error::InvalidState(format!("state has negative eigenvalue {min:e}")));
    }
    let d_out = layout.output_dim();
    let joint = tensor(rho, &CMatrix::identity(d_out));

    // Source order: every party's input subsystems, then every party's
    // output subsystems.
    let mut in_dims = Vec::new();
    let mut out_dims = Vec::new();
    let mut in_slots = Vec::new();
    let mut out_slots = Vec::new();
    for p in 0..layout.len() {
        let (ins, outs) = layout.party_subsystems(p);
        let subs = layout.parties()[p].subparties();
        in_dims.extend(subs.iter().map(|s| s.d_in));
        out_dims.extend(subs.iter().map(|s| s.d_out));
        in_slots.extend(ins);
        out_slots.extend(outs);
    }
    in_dims.extend(out_dims);
    in_slots.extend(out_slots);
    let shape = SubsystemShape::new(in_dims)?;
    ProcessMatrix::new(layout.clone(), permute_subsystems(&joint, &shape, &in_slots)?)
}

/// `|Phi+><Phi+|` on `d (x) d`.
pub fn maximally_entangled(d: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + i, j * d + j)] = C64::new(1.0 / d as f64, 0.0);
        }
    }
    m
}

/// Verdicts a fixture is expected to produce.
#[derive(Debug, Clone, PartialEq)]
pub struct Expected {
    pub valid: bool,
    /// Ordered `(from, to)` party pairs with signalling terms.
    pub signalling: Vec<(String, String)>,
    pub notes: &'static str,
}

#[derive(Debug, Clone)]
pub struct GalleryEntry {
    pub name: &'static str,
    pub process: ProcessMatrix,
    pub expected: Expected,
}

/// Stable fixture names.
pub const NAMES: &[&str] = &[
    "state-mixed-d2",
    "state-product-d2",
    "state-bell-d2",
    "oneway-xy-d2",
    "oneway-yx-d2",
    "oneway-xy-d3",
    "eq3-d2",
    "eq3-d3",
    "eq3-d4",
    "oneway-xy-squared-d2",
    "oneway-xy-yx-d2",
    "eq3-d2-squared",
];

fn pairs(list: &[(&str, &str)]) -> Vec<(String, String)> {
    list.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

fn self_product(a: &ProcessMatrix, b: &ProcessMatrix) -> Result<ProcessMatrix> {
    tensor_product(a, b, &PartyPairing::by_name(a.layout(), b.layout())?)
}

/// Builds the named fixture.
pub fn entry(name: &str) -> Result<GalleryEntry> {
    let both = pairs(&[("X", "Y"), ("Y", "X")]);
    let (name, process, expected) = match name {
        "state-mixed-d2" => (
            "state-mixed-d2",
            state_process(&maximally_mixed(2), &PartyLayout::simple([("A", 2, 2)])?)?,
            Expected { valid: true, signalling: vec![], notes: "maximally mixed qubit input, one party" },
        ),
        "state-product-d2" => (
            "state-product-d2",
            state_process(&maximally_mixed(4), &xy_layout(2))?,
            Expected { valid: true, signalling: vec![], notes: "uncorrelated maximally mixed inputs" },
        ),
        "state-bell-d2" => (
            "state-bell-d2",
            state_process(&maximally_entangled(2), &xy_layout(2))?,
            Expected { valid: true, signalling: vec![], notes: "shared Bell state on x1 y1" },
        ),
        "oneway-xy-d2" => (
            "oneway-xy-d2",
            oneway_channel_process(2, Direction::XToY)?,
            Expected { valid: true, signalling: pairs(&[("X", "Y")]), notes: "classical identity channel x2 -> y1" },
        ),
        "oneway-yx-d2" => (
            "oneway-yx-d2",
            oneway_channel_process(2, Direction::YToX)?,
            Expected { valid: true, signalling: pairs(&[("Y", "X")]), notes: "classical identity channel y2 -> x1" },
        ),
        "oneway-xy-d3" => (
            "oneway-xy-d3",
            oneway_channel_process(3, Direction::XToY)?,
            Expected { valid: true, signalling: pairs(&[("X", "Y")]), notes: "qutrit classical identity channel x2 -> y1" },
        ),
        "eq3-d2" => (
            "eq3-d2",
            eq3_process(2)?,
            Expected { valid: true, signalling: both, notes: "equal mixture of X->Y and Y->X classical channels" },
        ),
        "eq3-d3" => (
            "eq3-d3",
            eq3_process(3)?,
            Expected { valid: true, signalling: both, notes: "qutrit two-way classical mixture" },
        ),
        "eq3-d4" => (
            "eq3-d4",
            eq3_process(4)?,
            Expected {
                valid: true,
                signalling: both,
                notes: "two-way mixture on 4-dimensional systems; its marginals are two eq3-d2 copies",
            },
        ),
        "oneway-xy-squared-d2" => {
            let w = oneway_channel_process(2, Direction::XToY)?;
            (
                "oneway-xy-squared-d2",
                self_product(&w, &w)?,
                Expected { valid: true, signalling: pairs(&[("X", "Y")]), notes: "same-direction channels compose" },
            )
        }
        "oneway-xy-yx-d2" => {
            let w = oneway_channel_process(2, Direction::XToY)?;
            let z = oneway_channel_process(2, Direction::YToX)?;
            (
                "oneway-xy-yx-d2",
                self_product(&w, &z)?,
                Expected { valid: false, signalling: both, notes: "opposite-direction channels close a loop" },
            )
        }
        "eq3-d2-squared" => {
            let w = eq3_process(2)?;
            (
                "eq3-d2-squared",
                self_product(&w, &w)?,
                Expected { valid: false, signalling: both, notes: "product of two eq3-d2 copies; not a process" },
            )
        }
        other => return Err(Error::InvalidLayout(format!("no gallery entry named `{other}`"))),
    };
    Ok(GalleryEntry { name, process, expected })
}

pub fn all() -> Result<Vec<GalleryEntry>> {
    NAMES.iter().map(|n| entry(n)).collect()
}

/// Random process whose nontrivial terms all satisfy `allowed` (and are
/// never forbidden). Each admissible term is kept with probability
/// `keep_prob` and given a Gaussian coefficient; the traceless part is then
/// scaled against the identity so the result stays positive semidefinite.
pub fn random_projected_process<R: Rng + ?Sized>(
    layout: &PartyLayout,
    allowed: impl Fn(&TermSignature) -> bool,
    keep_prob: f64,
    rng: &mut R,
) -> Result<ProcessMatrix> {
    let shape = layout.shape();
    let n_terms: usize = shape.dims().iter().map(|d| d * d).product();
    let mut terms = Vec::new();
    for flat in 1..n_terms {
        let indices = hsbasis::unravel(flat, &shape);
        let sig = classify_term(&HSTerm::new(indices.clone(), 0.0), layout)?;
        if sig.is_forbidden() || !allowed(&sig) {
            continue;
        }
        if rng.random::<f64>() < keep_prob {
            terms.push(HSTerm::new(indices, rng.sample(StandardNormal)));
        }
    }
    let base = layout.output_dim() as f64 / layout.total_dim() as f64;
    let mut op = CMatrix::identity(layout.total_dim()).scale(base);
    if !terms.is_empty() {
        let traceless = hsbasis::reconstruct(&terms, &shape)?;
        let min = linalg::min_eigenvalue(&traceless.hermitian_part())?;
        if min < 0.0 {
            let strength = rng.random_range(0.2..1.0);
            op = &op + &traceless.scale(strength * base / -min);
        }
    }
    ProcessMatrix::new(layout.clone(), op.hermitian_part())
}

/// Which signalling directions a random two-party process may contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignalClass {
    NonSignalling,
    XToY,
    YToX,
    Both,
}

impl SignalClass {
    pub const ALL: [SignalClass; 4] = [Self::NonSignalling, Self::XToY, Self::YToX, Self::Both];

    fn admits(self, sig: &TermSignature) -> bool {
        let xy = signature_signals(sig, 0, 1);
        let yx = signature_signals(sig, 1, 0);
        match self {
            Self::NonSignalling => !xy && !yx,
            Self::XToY => !yx,
            Self::YToX => !xy,
            Self::Both => true,
        }
    }
}

/// Random valid process on parties `X`, `Y` with per-system dimension `d`.
pub fn random_bipartite_process(d: usize, class: SignalClass, keep_prob: f64, seed: u64) -> Result<ProcessMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_projected_process(&xy_layout(d), |s| class.admits(s), keep_prob, &mut rng)
}

/// Convex combination `t a + (1 - t) b` of two processes on the same layout.
pub fn mixture(a: &ProcessMatrix, b: &ProcessMatrix, t: f64) -> Result<ProcessMatrix> {
    if a.layout() != b.layout() {
        return Err(Error::InvalidLayout("mixture of processes on different layouts".into()));
    }
    ProcessMatrix::new(a.layout().clone(), &a.op().scale(t) + &b.op().scale(1.0 - t))
}

/// Mixed suite of valid two-party qubit processes: the qubit fixtures,
/// random mixtures of them, and random projected processes of every
/// signalling class.
pub fn bipartite_qubit_suite(random_count: usize, mixture_count: usize, seed: u64) -> Result<Vec<(String, ProcessMatrix)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fixtures: Vec<(String, ProcessMatrix)> = ["state-product-d2", "state-bell-d2", "oneway-xy-d2", "oneway-yx-d2", "eq3-d2"]
        .iter()
        .map(|n| Ok((n.to_string(), entry(n)?.process)))
        .collect::<Result<_>>()?;
    let mut out = fixtures.clone();
    for k in 0..mixture_count {
        let i = rng.random_range(0..fixtures.len());
        let j = rng.random_range(0..fixtures.len());
        let t = rng.random_range(0.05..0.95);
        out.push((
            format!("mix{k}({},{},{t:.3})", fixtures[i].0, fixtures[j].0),
            mixture(&fixtures[i].1, &fixtures[j].1, t)?,
        ));
    }
    for k in 0..random_count {
        let class = SignalClass::ALL[k % 4];
        let keep = [0.05, 0.2, 0.6][rng.random_range(0..3)];
        let s = rng.random::<u64>();
        out.push((format!("random{k}-{class:?}-{keep}"), random_bipartite_process(2, class, keep, s)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hsbasis::{HSTerm, TermTolerance};

    #[test]
    fn maximally_mixed_basics() {
        assert_eq!(maximally_mixed(2), CMatrix::from_real_diagonal(&[0.5, 0.5]));
        assert_eq!(maximally_mixed(4), CMatrix::identity(4).scale(0.25));
        for d in 1..=8 {
            assert!((maximally_mixed(d).trace().re - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn qubit_classical_corr_matches_pauli_form() {
        let z = CMatrix::from_real_diagonal(&[1.0, -1.0]);
        let want = (&CMatrix::identity(4) + &tensor(&z, &z)).scale(0.25);
        assert_eq!(classical_corr(2).unwrap(), want);
        assert!(classical_corr(1).is_err());
    }

    #[test]
    fn classical_corr_marginals() {
        for d in 2..=4 {
            let shape = SubsystemShape::new(vec![d, d]).unwrap();
            let c = classical_corr(d).unwrap();
            for k in 0..2 {
                let m = linalg::partial_trace(&c, &shape, &[k]).unwrap();
                assert!(m.max_abs_diff(&maximally_mixed(d)) < 1e-15);
            }
        }
    }

    #[test]
    fn qubit_classical_corr_terms() {
        let shape = SubsystemShape::new(vec![2, 2]).unwrap();
        let terms = crate::hsbasis::decompose(&classical_corr(2).unwrap(), &shape, TermTolerance::default()).unwrap();
        assert_eq!(terms, vec![HSTerm::new(vec![0, 0], 0.25), HSTerm::new(vec![3, 3], 0.25)]);
    }

    #[test]
    fn eq3_needs_two_levels() {
        assert!(eq3_process(1).is_err());
        assert!(oneway_channel_process(1, Direction::XToY).is_err());
    }

    #[test]
    fn traces() {
        for d in 2..=3 {
            assert!((eq3_process(d).unwrap().op().trace().re - (d * d) as f64).abs() < 1e-12);
            let w = oneway_channel_process(d, Direction::YToX).unwrap();
            assert!((w.op().trace().re - (d * d) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn state_process_rejects_bad_states() {
        let l = PartyLayout::simple([("A", 2, 2)]).unwrap();
        assert!(state_process(&CMatrix::identity(2), &l).is_err());
        assert!(state_process(&maximally_mixed(3), &l).is_err());
        let neg = CMatrix::from_real_diagonal(&[1.5, -0.5]);
        assert!(state_process(&neg, &l).is_err());
    }

    #[test]
    fn state_process_places_inputs() {
        let l = PartyLayout::simple([("A", 2, 3), ("B", 2, 1)]).unwrap();
        let rho = CMatrix::from_real_diagonal(&[0.1, 0.2, 0.3, 0.4]);
        let w = state_process(&rho, &l).unwrap();
        assert!((w.op().trace().re - 3.0).abs() < 1e-12);
        // Tracing the outputs (a2 at slot 1, b2 at slot 3) gives d_O * rho.
        let r = linalg::partial_trace(w.op(), &l.shape(), &[1, 3]).unwrap();
        assert!(r.max_abs_diff(&rho.scale(3.0)) < 1e-14);
    }

    #[test]
    fn unknown_entry() {
        assert!(entry("nope").is_err());
        assert_eq!(NAMES.len(), all().unwrap().len());
    }

    #[test]
    fn random_processes_are_valid_and_respect_class() {
        use crate::process::{is_valid_process, signalling_directions, Tolerances};
        for (k, class) in SignalClass::ALL.into_iter().enumerate() {
            for seed in 0..5 {
                let w = random_bipartite_process(2, class, 0.3, seed * 10 + k as u64).unwrap();
                let r = is_valid_process(&w, &Tolerances::default()).unwrap();
                assert!(r.verdict, "{class:?} {seed}: {r:?}");
                let xy = signalling_directions(&w, "X", "Y").unwrap();
                let yx = signalling_directions(&w, "Y", "X").unwrap();
                match class {
                    SignalClass::NonSignalling => assert!(!xy && !yx),
                    SignalClass::XToY => assert!(!yx),
                    SignalClass::YToX => assert!(!xy),
                    SignalClass::Both => {}
                }
            }
        }
    }

    #[test]
    fn mixture_requires_same_layout() {
        let a = entry("state-mixed-d2").unwrap().process;
        let b = eq3_process(2).unwrap();
        assert!(mixture(&a, &b, 0.5).is_err());
    }
}
