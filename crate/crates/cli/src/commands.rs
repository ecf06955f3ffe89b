use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use procval_core::gallery;
use procval_core::io_format::{self, serialize};
use procval_core::oracle::normalization_oracle;
use procval_core::product::{corollary_check_with, find_blocking_pairs_with};
use procval_core::{
    decompose as hs_decompose, is_valid_process, reduced_process, tensor_product, HSTerm, PartyLayout, PartyPairing,
    ProcessMatrix, Side, SubParty, SubsystemRef, TermTolerance, Tolerances,
};

use crate::args::{DecomposeArgs, GalleryAction, GalleryArgs, OracleArgs, ProductArgs, ReduceArgs, ValidateArgs};
use crate::render::{layout_string, matrix_rows, verdict_word, TermView};
use crate::Outcome;

/// Deviation below which the oracle counts a process as normalized.
pub const ORACLE_PASS_THRESHOLD: f64 = 1e-9;

fn load(path: &Path) -> Result<ProcessMatrix> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    io_format::parse(&text).with_context(|| format!("cannot parse {}", path.display()))
}

fn write_text(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => out.write_all(text.as_bytes()).context("cannot write to stdout"),
    }
}

fn emit_json<T: Serialize>(report: &T, out: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, report)?;
    writeln!(out)?;
    Ok(())
}

fn tolerances(rel: f64) -> Result<Tolerances> {
    if !(rel.is_finite() && rel >= 0.0) {
        bail!("tolerance must be a non-negative number, got {rel}");
    }
    Ok(Tolerances { psd_rel: rel, trace_rel: rel, terms: TermTolerance::Relative(rel) })
}

#[derive(Serialize)]
struct PsdView {
    ok: bool,
    min_eigenvalue: f64,
    tolerance: f64,
}

#[derive(Serialize)]
struct TraceView {
    ok: bool,
    value: f64,
    expected: f64,
    tolerance: f64,
}

#[derive(Serialize)]
struct TermsView {
    ok: bool,
    count: usize,
    forbidden: Vec<TermView>,
}

#[derive(Serialize)]
struct ValidateReport {
    command: &'static str,
    file: String,
    parties: String,
    valid: bool,
    psd: PsdView,
    trace: TraceView,
    terms: TermsView,
    exit_code: u8,
}

pub fn validate(a: &ValidateArgs, out: &mut dyn Write) -> Result<Outcome> {
    let w = load(&a.file)?;
    let tol = tolerances(a.tol)?;
    let r = is_valid_process(&w, &tol)?;
    let forbidden = r
        .forbidden_terms
        .iter()
        .map(|f| TermView::new(&f.term, w.layout()))
        .collect::<Result<Vec<_>>>()?;
    let outcome = Outcome::from_bool(r.verdict);
    let report = ValidateReport {
        command: "validate",
        file: a.file.display().to_string(),
        parties: layout_string(w.layout()),
        valid: r.verdict,
        psd: PsdView { ok: r.psd_ok(), min_eigenvalue: r.min_eigenvalue, tolerance: r.psd_tolerance },
        trace: TraceView { ok: r.trace_ok(), value: r.trace, expected: r.expected_trace, tolerance: r.trace_tolerance },
        terms: TermsView { ok: r.terms_ok(), count: r.term_count, forbidden },
        exit_code: outcome.code(),
    };
    if a.json {
        emit_json(&report, out)?;
        return Ok(outcome);
    }
    writeln!(out, "file:      {}", report.file)?;
    writeln!(out, "parties:   {}", report.parties)?;
    writeln!(
        out,
        "positive:  {} (min eigenvalue {:.3e}, tolerance {:.1e})",
        verdict_word(report.psd.ok, "ok", "FAIL"),
        report.psd.min_eigenvalue,
        report.psd.tolerance
    )?;
    writeln!(
        out,
        "trace:     {} ({} expected {})",
        verdict_word(report.trace.ok, "ok", "FAIL"),
        report.trace.value,
        report.trace.expected
    )?;
    writeln!(
        out,
        "terms:     {} ({} terms, {} forbidden)",
        verdict_word(report.terms.ok, "ok", "FAIL"),
        report.terms.count,
        report.terms.forbidden.len()
    )?;
    for t in &report.terms.forbidden {
        writeln!(out, "  forbidden {}", t.line())?;
    }
    writeln!(out, "verdict:   {}", verdict_word(report.valid, "VALID", "INVALID"))?;
    Ok(outcome)
}

/// Parses `W:Z=M,...`.
fn parse_pairing(spec: &str) -> Result<PartyPairing> {
    let mut pairs = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (lhs, merged) = match item.split_once('=') {
            Some((l, m)) => (l, Some(m.trim())),
            None => (item, None),
        };
        let (w, z) = lhs
            .split_once(':')
            .ok_or_else(|| anyhow!("pairing entry `{item}` is not of the form W:Z or W:Z=MERGED"))?;
        let (w, z) = (w.trim(), z.trim());
        let merged = match merged {
            Some(m) => m.to_string(),
            None if w == z => w.to_string(),
            None => format!("{w}{z}"),
        };
        pairs.push((w.to_string(), z.to_string(), merged));
    }
    if pairs.is_empty() {
        bail!("empty pairing");
    }
    Ok(PartyPairing::new(pairs))
}

fn default_pairing(w: &PartyLayout, z: &PartyLayout) -> Result<PartyPairing> {
    PartyPairing::by_name(w, z).or_else(|_| PartyPairing::by_position(w, z)).map_err(Into::into)
}

#[derive(Serialize)]
struct BlockingView {
    w_term: TermView,
    z_term: TermView,
    /// Per merged party, the unordered pair of type codes.
    cases: Vec<(u8, u8)>,
    product_notation: String,
}

#[derive(Serialize)]
struct CorollaryView {
    product_invalid: bool,
    agrees: bool,
}

#[derive(Serialize)]
struct DirectView {
    checked: bool,
    dim: usize,
    valid: Option<bool>,
    agrees: Option<bool>,
}

#[derive(Serialize)]
struct ProductCliReport {
    command: &'static str,
    files: [String; 2],
    pairing: Vec<String>,
    merged_parties: String,
    inputs_valid: [bool; 2],
    blocking_pairs: Vec<BlockingView>,
    valid: bool,
    corollary: Option<CorollaryView>,
    direct: DirectView,
    consistent: bool,
    exit_code: u8,
}

pub fn product(a: &ProductArgs, out: &mut dyn Write) -> Result<Outcome> {
    let w = load(&a.file_w)?;
    let z = load(&a.file_z)?;
    let tol = tolerances(a.tol)?;
    let pairing = match &a.pairing {
        Some(s) => parse_pairing(s)?,
        None => default_pairing(w.layout(), z.layout())?,
    };
    let merged = pairing.merged_layout(w.layout(), z.layout())?;
    let report = find_blocking_pairs_with(&w, &z, &pairing, &tol)?;
    let valid = report.verdict && report.inputs_valid();

    let blocking_pairs = report
        .blocking_pairs
        .iter()
        .map(|b| {
            Ok(BlockingView {
                w_term: TermView::new(&b.w_term, w.layout())?,
                z_term: TermView::new(&b.z_term, z.layout())?,
                cases: b.cases.clone(),
                product_notation: b.merged_notation.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let corollary = if w.layout().len() == 2 && z.layout().len() == 2 {
        let invalid = corollary_check_with(&w, &z, &pairing, tol.terms)?;
        Some(CorollaryView { product_invalid: invalid, agrees: invalid == !report.verdict })
    } else {
        None
    };

    let dim = merged.total_dim();
    let built = if dim <= a.max_direct_dim || a.output.is_some() {
        Some(tensor_product(&w, &z, &pairing)?)
    } else {
        None
    };
    let direct = match built.as_ref().filter(|_| dim <= a.max_direct_dim) {
        Some(p) => {
            let v = is_valid_process(p, &tol)?.verdict;
            DirectView { checked: true, dim, valid: Some(v), agrees: Some(v == valid) }
        }
        None => DirectView { checked: false, dim, valid: None, agrees: None },
    };
    if let (Some(path), Some(p)) = (&a.output, &built) {
        write_text(Some(path), &serialize(p), out)?;
    }

    let consistent = corollary.as_ref().is_none_or(|c| c.agrees) && direct.agrees.unwrap_or(true);
    let outcome = Outcome::from_bool(valid && consistent);
    let cli = ProductCliReport {
        command: "product",
        files: [a.file_w.display().to_string(), a.file_z.display().to_string()],
        pairing: pairing.pairs().iter().map(|(x, y, m)| format!("{x}:{y}={m}")).collect(),
        merged_parties: layout_string(&merged),
        inputs_valid: [report.w_valid, report.z_valid],
        blocking_pairs,
        valid,
        corollary,
        direct,
        consistent,
        exit_code: outcome.code(),
    };
    if a.json {
        emit_json(&cli, out)?;
        return Ok(outcome);
    }
    writeln!(out, "factors:   {} (x) {}", cli.files[0], cli.files[1])?;
    writeln!(out, "pairing:   {}", cli.pairing.join(", "))?;
    writeln!(out, "merged:    {}", cli.merged_parties)?;
    writeln!(
        out,
        "inputs:    {} / {}",
        verdict_word(cli.inputs_valid[0], "valid", "INVALID"),
        verdict_word(cli.inputs_valid[1], "valid", "INVALID")
    )?;
    writeln!(out, "blocking:  {} pair(s)", cli.blocking_pairs.len())?;
    for b in &cli.blocking_pairs {
        let cases: Vec<String> = b.cases.iter().map(|(x, y)| format!("({x},{y})")).collect();
        writeln!(out, "  W {}", b.w_term.line())?;
        writeln!(out, "  Z {}", b.z_term.line())?;
        writeln!(out, "    cases {}  product type {}", cases.join(" "), b.product_notation)?;
    }
    if let Some(c) = &cli.corollary {
        writeln!(
            out,
            "two-party: {} ({})",
            verdict_word(c.product_invalid, "loop", "no loop"),
            verdict_word(c.agrees, "agrees", "DISAGREES")
        )?;
    }
    match (cli.direct.valid, cli.direct.agrees) {
        (Some(v), Some(ag)) => writeln!(
            out,
            "direct:    {} at dim {} ({})",
            verdict_word(v, "valid", "invalid"),
            cli.direct.dim,
            verdict_word(ag, "agrees", "DISAGREES")
        )?,
        _ => writeln!(out, "direct:    skipped (dim {} > {})", cli.direct.dim, a.max_direct_dim)?,
    }
    writeln!(out, "verdict:   {}", verdict_word(cli.valid, "VALID", "INVALID"))?;
    Ok(outcome)
}

#[derive(Serialize)]
struct DecomposeReport {
    command: &'static str,
    file: String,
    parties: String,
    tolerance: String,
    terms: Vec<TermView>,
    exit_code: u8,
}

pub fn decompose(a: &DecomposeArgs, out: &mut dyn Write) -> Result<Outcome> {
    let w = load(&a.file)?;
    let tol = match a.tol {
        Some(t) if t.is_finite() && t >= 0.0 => TermTolerance::Absolute(t),
        Some(t) => bail!("tolerance must be a non-negative number, got {t}"),
        None => TermTolerance::default(),
    };
    let mut terms = hs_decompose(w.op(), &w.shape(), tol)?;
    if terms.first().is_none_or(|t| !t.is_trivial()) {
        let d = w.layout().total_dim() as f64;
        terms.insert(0, HSTerm::new(vec![0; w.shape().len()], w.op().trace().re / d));
    }
    let views = terms.iter().map(|t| TermView::new(t, w.layout())).collect::<Result<Vec<_>>>()?;
    let report = DecomposeReport {
        command: "decompose",
        file: a.file.display().to_string(),
        parties: layout_string(w.layout()),
        tolerance: match tol {
            TermTolerance::Absolute(t) => format!("absolute {t}"),
            TermTolerance::Relative(f) => format!("relative {f}"),
        },
        terms: views,
        exit_code: 0,
    };
    if a.json {
        emit_json(&report, out)?;
        return Ok(Outcome::Pass);
    }
    writeln!(out, "file:      {}", report.file)?;
    writeln!(out, "parties:   {}", report.parties)?;
    writeln!(out, "subsystems: {}", w.layout().subsystem_labels().join(" "))?;
    writeln!(out, "cut-off:   {}", report.tolerance)?;
    writeln!(out, "terms:     {}", report.terms.len())?;
    for t in &report.terms {
        writeln!(out, "  {}", t.line())?;
    }
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct ChannelView {
    label: String,
    d_in: usize,
    d_out: usize,
    /// Choi operator rows, input factor first, as `[re, im]` pairs.
    choi: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
struct OracleReport {
    command: &'static str,
    file: String,
    samples: usize,
    seed: u64,
    battery_tuples: usize,
    max_deviation: f64,
    threshold: f64,
    pass: bool,
    witness: Vec<String>,
    witness_probability: f64,
    witness_channels: Vec<ChannelView>,
    exit_code: u8,
}

pub fn oracle(a: &OracleArgs, out: &mut dyn Write) -> Result<Outcome> {
    let w = load(&a.file)?;
    let v = normalization_oracle(&w, a.samples, a.seed)?;
    let pass = v.max_deviation < ORACLE_PASS_THRESHOLD;
    let outcome = Outcome::from_bool(pass);
    let channels = if pass {
        Vec::new()
    } else {
        v.witness_channels
            .iter()
            .map(|c| ChannelView { label: c.label.clone(), d_in: c.d_in, d_out: c.d_out, choi: matrix_rows(&c.choi) })
            .collect()
    };
    let report = OracleReport {
        command: "oracle",
        file: a.file.display().to_string(),
        samples: v.samples,
        seed: v.seed,
        battery_tuples: v.battery_tuples,
        max_deviation: v.max_deviation,
        threshold: ORACLE_PASS_THRESHOLD,
        pass,
        witness: v.witness.clone(),
        witness_probability: v.witness_probability,
        witness_channels: channels,
        exit_code: outcome.code(),
    };
    if a.json {
        emit_json(&report, out)?;
        return Ok(outcome);
    }
    writeln!(out, "file:      {}", report.file)?;
    writeln!(
        out,
        "tuples:    {} deterministic + {} random (seed {})",
        report.battery_tuples, report.samples, report.seed
    )?;
    writeln!(out, "deviation: {:.3e} (threshold {:.0e})", report.max_deviation, report.threshold)?;
    let parties: Vec<&str> = w.layout().parties().iter().map(|p| p.name()).collect();
    let witness: Vec<String> = parties.iter().zip(&report.witness).map(|(p, l)| format!("{p}={l}")).collect();
    writeln!(out, "witness:   {} (p = {})", witness.join(" "), report.witness_probability)?;
    for (p, c) in parties.iter().zip(&report.witness_channels) {
        writeln!(out, "  {p}: {} ({} -> {}), nonzero Choi entries:", c.label, c.d_in, c.d_out)?;
        let cells: Vec<String> = c
            .choi
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, z)| (i, j, z)))
            .filter(|(_, _, [re, im])| re.abs() > 1e-12 || im.abs() > 1e-12)
            .map(|(i, j, [re, im])| {
                if im.abs() > 1e-12 {
                    format!("({i},{j})={re:.4}{im:+.4}i")
                } else {
                    format!("({i},{j})={re:.4}")
                }
            })
            .collect();
        for chunk in cells.chunks(6) {
            writeln!(out, "    {}", chunk.join(" "))?;
        }
    }
    writeln!(out, "verdict:   {}", verdict_word(pass, "NORMALIZED", "NOT NORMALIZED"))?;
    Ok(outcome)
}

/// Parses `NAME=DIN:DOUT,DIN:DOUT,...`.
fn parse_split(spec: &str) -> Result<(String, Vec<SubParty>)> {
    let (name, rest) = spec.split_once('=').ok_or_else(|| anyhow!("split `{spec}` is not of the form NAME=DIN:DOUT,..."))?;
    let subs = rest
        .split(',')
        .map(|s| {
            let (i, o) = s.split_once(':').ok_or_else(|| anyhow!("sub-party `{s}` is not of the form DIN:DOUT"))?;
            let parse = |x: &str| x.trim().parse::<usize>().with_context(|| format!("bad dimension `{x}` in `{spec}`"));
            Ok(SubParty::new(parse(i)?, parse(o)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((name.trim().to_string(), subs))
}

/// Parses one keep item against the (refined) layout.
fn parse_keep(item: &str, layout: &PartyLayout) -> Result<Vec<SubsystemRef>> {
    let parts: Vec<&str> = item.trim().split('.').collect();
    let party = parts[0];
    let p = layout.party_index(party)?;
    let count = layout.parties()[p].subparties().len();
    let sub = |s: &str| -> Result<usize> {
        let k: usize = s.parse().with_context(|| format!("bad sub-party index in `{item}`"))?;
        if k >= count {
            bail!("party `{party}` has {count} sub-parties, no sub-party {k}");
        }
        Ok(k)
    };
    Ok(match parts.as_slice() {
        [_] => (0..count).flat_map(|k| SubsystemRef::both(party, k)).collect(),
        [_, k] => SubsystemRef::both(party, sub(k)?).to_vec(),
        [_, k, "in"] => vec![SubsystemRef::new(party, sub(k)?, Side::In)],
        [_, k, "out"] => vec![SubsystemRef::new(party, sub(k)?, Side::Out)],
        _ => bail!("keep item `{item}` is not NAME, NAME.K, NAME.K.in or NAME.K.out"),
    })
}

pub fn reduce(a: &ReduceArgs, out: &mut dyn Write) -> Result<Outcome> {
    let mut w = load(&a.file)?;
    for spec in &a.splits {
        let (name, subs) = parse_split(spec)?;
        w = w.refine(&name, subs)?;
    }
    let mut keep = Vec::new();
    for item in &a.keep {
        keep.extend(parse_keep(item, w.layout())?);
    }
    let r = reduced_process(&w, &keep)?;
    write_text(a.output.as_deref(), &serialize(&r), out)?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct GalleryItem {
    name: &'static str,
    parties: String,
    dim: usize,
    valid: bool,
    signalling: Vec<String>,
    notes: &'static str,
}

pub fn gallery(a: &GalleryArgs, out: &mut dyn Write) -> Result<Outcome> {
    match &a.action {
        GalleryAction::List { json } => {
            let items = gallery::all()?
                .into_iter()
                .map(|e| GalleryItem {
                    name: e.name,
                    parties: layout_string(e.process.layout()),
                    dim: e.process.layout().total_dim(),
                    valid: e.expected.valid,
                    signalling: e.expected.signalling.iter().map(|(f, t)| format!("{f}->{t}")).collect(),
                    notes: e.expected.notes,
                })
                .collect::<Vec<_>>();
            if *json {
                emit_json(&serde_json::json!({ "command": "gallery list", "entries": items, "exit_code": 0 }), out)?;
            } else {
                for i in &items {
                    writeln!(
                        out,
                        "{:<22} {:<7} dim {:<4} {:<20} {}",
                        i.name,
                        verdict_word(i.valid, "valid", "invalid"),
                        i.dim,
                        i.parties,
                        i.notes
                    )?;
                }
            }
        }
        GalleryAction::Export { name, output } => {
            let e = gallery::entry(name).map_err(|_| {
                anyhow!("no gallery entry named `{name}`; available: {}", gallery::NAMES.join(", "))
            })?;
            write_text(output.as_deref(), &serialize(&e.process), out)?;
        }
    }
    Ok(Outcome::Pass)
}
