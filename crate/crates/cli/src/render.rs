use serde::Serialize;

use procval_core::{classify_term, CMatrix, HSTerm, PartyLayout};

/// One Hilbert-Schmidt term as printed in reports.
#[derive(Debug, Clone, Serialize)]
pub struct TermView {
    pub indices: Vec<usize>,
    pub coeff: f64,
    /// Type notation such as `x1x2y1y2`.
    pub notation: String,
    /// Per-party type codes: 0 trivial, 1 input, 2 output, 12 both.
    pub types: Vec<u8>,
    /// Nontrivial factors, e.g. `Z@x2 Z@y1`.
    pub operators: String,
}

impl TermView {
    pub fn new(term: &HSTerm, layout: &PartyLayout) -> anyhow::Result<Self> {
        let sig = classify_term(term, layout)?;
        Ok(Self {
            indices: term.indices.clone(),
            coeff: term.coeff,
            notation: sig.notation(layout),
            types: sig.tags.iter().map(|t| t.code()).collect(),
            operators: operator_string(&term.indices, layout),
        })
    }

    pub fn line(&self) -> String {
        let idx: Vec<String> = self.indices.iter().map(usize::to_string).collect();
        format!("[{}]  {:<12} {:>+.6e}  {}", idx.join(","), self.notation, self.coeff, self.operators)
    }
}

/// Basis element name: Pauli letters for qubits, `g<k>` otherwise.
fn basis_name(index: usize, dim: usize) -> String {
    if dim == 2 {
        ["I", "X", "Y", "Z"][index].to_string()
    } else if index == 0 {
        "I".to_string()
    } else {
        format!("g{index}")
    }
}

pub fn operator_string(indices: &[usize], layout: &PartyLayout) -> String {
    let labels = layout.subsystem_labels();
    let dims = layout.shape().dims().to_vec();
    let parts: Vec<String> = indices
        .iter()
        .enumerate()
        .filter(|(_, &i)| i != 0)
        .map(|(k, &i)| format!("{}@{}", basis_name(i, dims[k]), labels[k]))
        .collect();
    if parts.is_empty() {
        "I".to_string()
    } else {
        parts.join(" ")
    }
}

pub fn layout_string(layout: &PartyLayout) -> String {
    layout
        .parties()
        .iter()
        .map(|p| {
            if p.subparties().len() > 1 {
                let subs: Vec<String> = p.subparties().iter().map(|s| format!("{}:{}", s.d_in, s.d_out)).collect();
                format!("{}[{}]", p.name(), subs.join(","))
            } else {
                format!("{}({}->{})", p.name(), p.d_in(), p.d_out())
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn matrix_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.dim())
        .map(|i| (0..m.dim()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn verdict_word(ok: bool, yes: &'static str, no: &'static str) -> &'static str {
    if ok {
        yes
    } else {
        no
    }
}
