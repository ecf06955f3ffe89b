//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::Command;
use std::time::Instant;

use procval_core::gallery::{self, Direction};
use procval_core::hsbasis::unravel;
use procval_core::io_format::{parse, serialize};
use procval_core::linalg::eigenvalues;
use procval_core::oracle::normalization_oracle;
use procval_core::product::check_all_orders;
use procval_core::{
    corollary_check, find_blocking_pairs, is_valid_process, min_eigenvalue, partial_trace, permute_subsystems,
    reduced_process, tensor, tensor_product, CMatrix, HSTerm, PartyPairing, ProcessMatrix, SubParty, SubsystemRef,
    SubsystemShape, TermTolerance, Tolerances, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    };
}

fn valid(w: &ProcessMatrix) -> Result<bool, String> {
    is_valid_process(w, &Tolerances::default()).map(|r| r.verdict).map_err(|e| e.to_string())
}

fn by_name(w: &ProcessMatrix, z: &ProcessMatrix) -> PartyPairing {
    PartyPairing::by_name(w.layout(), z.layout()).expect("same party names")
}

/// Applies `f` to every item on all available cores, keeping order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).max(1);
    let chunk = items.len().div_ceil(threads).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Suite of two-party qubit processes shared by criteria 3 to 5.
fn qubit_suite() -> Vec<(String, ProcessMatrix)> {
    gallery::bipartite_qubit_suite(10, 5, 2024).expect("suite builds")
}

fn qubit_pairs(suite: &[(String, ProcessMatrix)]) -> Vec<(usize, usize)> {
    (0..suite.len()).flat_map(|i| (0..suite.len()).map(move |j| (i, j))).collect()
}

fn two_way_mixture() -> Outcome {
    let w = gallery::eq3_process(2).map_err(|e| e.to_string())?;
    let r = is_valid_process(&w, &Tolerances::default()).map_err(|e| e.to_string())?;
    ensure!(r.trace == 4.0, "trace {}", r.trace);
    ensure!(r.min_eigenvalue >= -1e-12, "min eigenvalue {}", r.min_eigenvalue);
    let terms = w.classified_terms(TermTolerance::default()).map_err(|e| e.to_string())?;
    let got: Vec<(Vec<usize>, String)> =
        terms.iter().map(|(t, s)| (t.indices.clone(), s.notation(w.layout()))).collect();
    let want = vec![
        (vec![0, 0, 0, 0], "trivial".to_string()),
        (vec![0, 3, 3, 0], "x2y1".to_string()),
        (vec![3, 0, 0, 3], "x1y2".to_string()),
    ];
    ensure!(got == want, "terms {got:?}");
    ensure!(r.verdict, "rejected");
    Ok(format!("trace 4, min eigenvalue {:.1e}, terms I, ZZ@x2y1, ZZ@x1y2, valid", r.min_eigenvalue))
}

fn squared_mixture() -> Outcome {
    let w = gallery::eq3_process(2).map_err(|e| e.to_string())?;
    let p = tensor_product(&w, &w, &by_name(&w, &w)).map_err(|e| e.to_string())?;
    let r = is_valid_process(&p, &Tolerances::default()).map_err(|e| e.to_string())?;
    ensure!(!r.verdict, "product accepted");
    // Z on x2' x1'' y1' y2'' in subsystem order x1' x1'' x2' x2'' y1' y1'' y2' y2''.
    let loop_term = r
        .forbidden_terms
        .iter()
        .find(|f| f.term.indices == [0, 3, 3, 0, 3, 0, 0, 3])
        .ok_or("loop term missing")?;
    ensure!(loop_term.notation == "x1x2y1y2", "notation {}", loop_term.notation);

    let report = find_blocking_pairs(&w, &w, &by_name(&w, &w)).map_err(|e| e.to_string())?;
    ensure!(report.blocking_pairs.len() == 2, "{} blocking pairs", report.blocking_pairs.len());
    let mut dirs: Vec<(String, String)> = report
        .blocking_pairs
        .iter()
        .map(|b| (b.w_signature.notation(w.layout()), b.z_signature.notation(w.layout())))
        .collect();
    dirs.sort();
    let want = vec![("x1y2".to_string(), "x2y1".to_string()), ("x2y1".to_string(), "x1y2".to_string())];
    ensure!(dirs == want, "blocking pairs {dirs:?}");
    Ok(format!("{} forbidden terms of type x1x2y1y2; blocking pairs (x2y1, x1y2) and (x1y2, x2y1)", r.forbidden_terms.len()))
}

fn blocking_vs_direct(suite: &[(String, ProcessMatrix)]) -> Outcome {
    let pairs = qubit_pairs(suite);
    ensure!(pairs.len() >= 200, "only {} pairs", pairs.len());
    let results = par_map(&pairs, |&(i, j)| -> Result<(bool, bool), String> {
        let (a, b) = (&suite[i].1, &suite[j].1);
        let pairing = by_name(a, b);
        let fast = find_blocking_pairs(a, b, &pairing).map_err(|e| e.to_string())?.verdict;
        let direct = valid(&tensor_product(a, b, &pairing).map_err(|e| e.to_string())?)?;
        Ok((fast, direct))
    });
    let mut invalid = 0;
    for ((i, j), r) in pairs.iter().zip(results) {
        let (fast, direct) = r?;
        ensure!(fast == direct, "{} x {}: blocking pairs say {fast}, direct check {direct}", suite[*i].0, suite[*j].0);
        invalid += usize::from(!fast);
    }
    Ok(format!("{} pairs agree ({} valid products, {invalid} invalid)", pairs.len(), pairs.len() - invalid))
}

fn corollary_vs_blocking(suite: &[(String, ProcessMatrix)]) -> Outcome {
    let pairs = qubit_pairs(suite);
    for &(i, j) in &pairs {
        let (a, b) = (&suite[i].1, &suite[j].1);
        let fast = find_blocking_pairs(a, b, &by_name(a, b)).map_err(|e| e.to_string())?.verdict;
        let loop_ = corollary_check(a, b).map_err(|e| e.to_string())?;
        ensure!(loop_ == !fast, "{} x {} disagree", suite[i].0, suite[j].0);
    }
    let xy = gallery::oneway_channel_process(2, Direction::XToY).map_err(|e| e.to_string())?;
    let yx = gallery::oneway_channel_process(2, Direction::YToX).map_err(|e| e.to_string())?;
    for (a, b, invalid) in [(&xy, &xy, false), (&xy, &yx, true), (&yx, &xy, true), (&yx, &yx, false)] {
        ensure!(corollary_check(a, b).map_err(|e| e.to_string())? == invalid, "truth table entry wrong");
    }
    Ok(format!("{} pairs agree; same direction valid, opposite directions invalid", pairs.len()))
}

fn oracle_agreement(suite: &[(String, ProcessMatrix)]) -> Outcome {
    let deviations = par_map(suite, |(_, w)| normalization_oracle(w, 200, 7).map(|v| v.max_deviation));
    let mut worst: f64 = 0.0;
    for ((name, w), d) in suite.iter().zip(deviations) {
        ensure!(valid(w)?, "{name} is not valid");
        let d = d.map_err(|e| e.to_string())?;
        ensure!(d < 1e-9, "{name}: deviation {d:e}");
        worst = worst.max(d);
    }
    let eq3 = gallery::eq3_process(2).map_err(|e| e.to_string())?;
    let sq = tensor_product(&eq3, &eq3, &by_name(&eq3, &eq3)).map_err(|e| e.to_string())?;
    let v = normalization_oracle(&sq, 0, 7).map_err(|e| e.to_string())?;
    ensure!(v.max_deviation > 1e-6, "squared mixture deviation {:e}", v.max_deviation);
    ensure!(v.witness_channels.len() == 2, "no witness tuple");
    Ok(format!(
        "{} valid processes below {worst:.1e}; squared mixture deviates by {} with witness ({})",
        suite.len(),
        v.max_deviation,
        v.witness.join(", ")
    ))
}

fn marginals() -> Outcome {
    let big = gallery::eq3_process(4).map_err(|e| e.to_string())?;
    let halves = vec![SubParty::new(2, 2), SubParty::new(2, 2)];
    let refined = big
        .refine("X", halves.clone())
        .and_then(|w| w.refine("Y", halves))
        .map_err(|e| e.to_string())?;
    let small = gallery::eq3_process(2).map_err(|e| e.to_string())?;
    let mut errs = Vec::new();
    for k in 0..2 {
        let keep: Vec<SubsystemRef> = ["X", "Y"].iter().flat_map(|p| SubsystemRef::both(p, k)).collect();
        let r = reduced_process(&refined, &keep).map_err(|e| e.to_string())?;
        ensure!(r.layout() == small.layout(), "layout {:?}", r.layout());
        let err = r.op().frobenius_distance(small.op());
        ensure!(err < 1e-10, "sub-party {k}: Frobenius error {err:e}");
        errs.push(err);
    }
    Ok(format!("primed error {:.1e}, double-primed error {:.1e}", errs[0], errs[1]))
}

fn order_independence() -> Outcome {
    let get = |n: &str| gallery::entry(n).map(|e| e.process).map_err(|e| e.to_string());
    let (eq3, xy, yx, state) = (get("eq3-d2")?, get("oneway-xy-d2")?, get("oneway-yx-d2")?, get("state-bell-d2")?);
    let cases = [
        ("eq3, eq3, state", vec![eq3.clone(), eq3, state.clone()], false),
        ("xy, yx, state", vec![xy.clone(), yx, state], false),
        ("xy, xy, xy", vec![xy.clone(), xy.clone(), xy], true),
    ];
    let mut orders = 0;
    for (label, triple, want) in cases {
        let reports = check_all_orders(&triple).map_err(|e| e.to_string())?;
        ensure!(reports.len() == 6, "{label}: {} orders", reports.len());
        for (order, r) in reports {
            ensure!(r.verdict == want, "{label} in order {order:?}: verdict {}", r.verdict);
            orders += 1;
        }
    }
    Ok(format!("{orders} fold orders: two invalid triples, one valid triple, no order dependence"))
}

fn random_matrix(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(dim, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn numerical_kernel() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = [0.0f64; 5];
    for _ in 0..50 {
        let (a, b, c, d) = (random_matrix(2, &mut rng), random_matrix(3, &mut rng), random_matrix(2, &mut rng), random_matrix(3, &mut rng));
        let mixed = tensor(&a, &b).matmul(&tensor(&c, &d)).max_abs_diff(&tensor(&a.matmul(&c), &b.matmul(&d)));
        worst[0] = worst[0].max(mixed);

        let shape = SubsystemShape::new(vec![2, 3, 2]).unwrap();
        let (m, n) = (random_matrix(12, &mut rng), random_matrix(12, &mut rng));
        let s = rng.random_range(-2.0..2.0);
        let k = rng.random_range(0..3);
        let pt = |x: &CMatrix| partial_trace(x, &shape, &[k]).unwrap();
        let linear = pt(&(&m.scale(s) + &n)).max_abs_diff(&(&pt(&m).scale(s) + &pt(&n)));
        let trace = (pt(&m).trace() - m.trace()).norm();
        worst[1] = worst[1].max(linear);
        worst[2] = worst[2].max(trace);

        let perm = [2, 0, 1];
        let moved = permute_subsystems(&m, &shape, &perm).unwrap();
        let back = permute_subsystems(&moved, &shape.permuted(&perm).unwrap(), &[1, 2, 0]).unwrap();
        worst[3] = worst[3].max(back.max_abs_diff(&m));

        let h = m.hermitian_part();
        let hp = permute_subsystems(&h, &shape, &perm).unwrap();
        let spec = eigenvalues(&h).unwrap().iter().zip(eigenvalues(&hp).unwrap()).fold(0.0f64, |w, (x, y)| w.max((x - y).abs()));
        worst[4] = worst[4].max(spec);
    }
    ensure!(worst[0] < 1e-12, "mixed product error {:e}", worst[0]);
    ensure!(worst[1] < 1e-12, "partial trace linearity error {:e}", worst[1]);
    ensure!(worst[2] < 1e-12, "partial trace changes the trace by {:e}", worst[2]);
    ensure!(worst[3] < 1e-14, "permutation round trip error {:e}", worst[3]);
    ensure!(worst[4] < 1e-10, "spectrum changed by {:e}", worst[4]);

    let shape = SubsystemShape::new(vec![2, 2]).unwrap();
    let ops: Vec<CMatrix> = (0..16).map(|f| HSTerm::new(unravel(f, &shape), 1.0).operator(&shape).unwrap()).collect();
    let mut gram = 0.0f64;
    for (i, x) in ops.iter().enumerate() {
        for (j, y) in ops.iter().enumerate() {
            let want = if i == j { 4.0 } else { 0.0 };
            gram = gram.max((x.trace_product(y) - C64::new(want, 0.0)).norm());
        }
    }
    ensure!(gram < 1e-12, "product basis Gram error {gram:e}");
    let eq3 = gallery::eq3_process(2).unwrap();
    ensure!(min_eigenvalue(eq3.op()).unwrap().abs() < 1e-12, "eigensolver misses the zero eigenvalue");
    Ok(format!(
        "max errors: mixed product {:.0e}, linearity {:.0e}, trace {:.0e}, round trip {:.0e}, spectrum {:.0e}, Gram {gram:.0e}",
        worst[0], worst[1], worst[2], worst[3], worst[4]
    ))
}

fn format_and_cli() -> Outcome {
    let entries = gallery::all().map_err(|e| e.to_string())?;
    for e in &entries {
        let text = serialize(&e.process);
        let back = parse(&text).map_err(|err| format!("{}: {err}", e.name))?;
        let bits = |w: &ProcessMatrix| -> Vec<(u64, u64)> {
            w.op().entries().iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect()
        };
        ensure!(bits(&back) == bits(&e.process), "{}: entries changed", e.name);
        ensure!(back.layout() == e.process.layout(), "{}: layout changed", e.name);
        ensure!(serialize(&back) == text, "{}: not a fixed point", e.name);
    }

    let dir = std::path::PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("procval-acceptance");
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_procval");
    let path = |name: &str| dir.join(format!("{name}.procmat.json")).to_string_lossy().into_owned();
    for name in gallery::NAMES {
        let s = Command::new(bin).args(["gallery", "export", name, "-o", &path(name)]).status().map_err(|e| e.to_string())?;
        ensure!(s.code() == Some(0), "export {name} exited {s}");
    }
    let golden = include_str!("golden/exit_codes.txt");
    let mut checked = 0;
    for line in golden.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        let [cmd, files, want] = cols[..] else { return Err(format!("bad golden line `{line}`")) };
        let mut args = vec![cmd.to_string()];
        args.extend(files.split(',').map(path));
        let status = Command::new(bin).args(&args).env_remove("PROCVAL_SEED").output().map_err(|e| e.to_string())?.status;
        ensure!(status.code().map(|c| c.to_string()).as_deref() == Some(want), "`{line}` exited {status}");
        checked += 1;
    }
    let truncated = dir.join("truncated.procmat.json");
    let text = std::fs::read_to_string(path("eq3-d2")).map_err(|e| e.to_string())?;
    std::fs::write(&truncated, &text[..text.len() / 2]).map_err(|e| e.to_string())?;
    let status = Command::new(bin).arg("validate").arg(&truncated).output().map_err(|e| e.to_string())?.status;
    ensure!(status.code() == Some(2), "truncated file exited {status}");
    Ok(format!("{} fixtures round-trip bit for bit; {} golden exit codes match", entries.len(), checked + 1))
}

fn main() {
    let suite = qubit_suite();
    let criteria: Vec<Criterion<'_>> = vec![
        ("two-way mixture fidelity", Box::new(two_way_mixture)),
        ("squared mixture rejected", Box::new(squared_mixture)),
        ("blocking pairs match direct check", Box::new(|| blocking_vs_direct(&suite))),
        ("two-party shortcut matches blocking pairs", Box::new(|| corollary_vs_blocking(&suite))),
        ("oracle agreement", Box::new(|| oracle_agreement(&suite))),
        ("marginal recovery", Box::new(marginals)),
        ("order independence", Box::new(order_independence)),
        ("numerical kernel", Box::new(numerical_kernel)),
        ("format round trip and CLI exit codes", Box::new(format_and_cli)),
    ];
    let mut failed = 0;
    for (k, (title, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {} {title} ({secs:.1}s): {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {title} ({secs:.1}s): {why}", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
