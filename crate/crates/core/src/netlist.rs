//! Netlist parsing, canonicalization, validation, and emission.
//!
//! Grammar (one element per line, `#` starts a comment):
//!
//! ```text
//! cap  <id> <nodeA> <nodeB> <fF>
//! ind  <id> <nodeA> <nodeB> <pH>   [flux=<Φ₀>]
//! jj   <id> <nodeA> <nodeB> <GHz>  [cj=<fF>]
//! mut  <id> <indA> <indB> <pH>
//! qoff <node> <2e>
//! ```
//!
//! Node `0` is ground. Parsing is total: every line either contributes to the
//! circuit or produces a [`Diagnostic`] carrying its line number. After a
//! successful parse the circuit is canonical — nodes and branches are sorted
//! by natural id order — so circuits built from permuted netlists compare
//! equal and [`emit_netlist`] ∘ [`parse_netlist`] is a fixed point.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

pub const GROUND: &str = "0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchKind {
    Capacitor,
    Inductor,
    Junction,
}

impl fmt::Display for BranchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BranchKind::Capacitor => write!(f, "cap"),
            BranchKind::Inductor => write!(f, "ind"),
            BranchKind::Junction => write!(f, "jj"),
        }
    }
}

/// A two-terminal element. `value` is fF for capacitors, pH for inductors,
/// and the Josephson energy E_J in GHz for junctions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: String,
    pub kind: BranchKind,
    pub from: String,
    pub to: String,
    pub value: f64,
    /// External flux threaded through this branch, in Φ₀ (inductors only).
    pub external_flux: f64,
    /// Junction shunt capacitance in fF (junctions only).
    pub shunt_cap: f64,
}

/// Mutual inductance between two inductor branches, in pH (signed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mutual {
    pub id: String,
    pub a: String,
    pub b: String,
    pub value: f64,
}

/// A validated-grammar circuit in canonical (id-sorted) order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Circuit {
    /// Non-ground node ids, naturally ordered.
    pub nodes: Vec<String>,
    /// All branches, naturally ordered by id.
    pub branches: Vec<Branch>,
    pub mutuals: Vec<Mutual>,
    /// Node charge offsets in 2e.
    pub qoffs: BTreeMap<String, f64>,
}

impl Circuit {
    pub fn node_index(&self, node: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == node)
    }

    pub fn branch(&self, id: &str) -> Option<&Branch> {
        self.branches.iter().find(|b| b.id == id)
    }

    pub fn branches_of(&self, kind: BranchKind) -> impl Iterator<Item = &Branch> {
        self.branches.iter().filter(move |b| b.kind == kind)
    }

    /// Inductive + Josephson branches (the superconducting subgraph 𝒢_L),
    /// in canonical order.
    pub fn galvanic_branches(&self) -> impl Iterator<Item = &Branch> {
        self.branches
            .iter()
            .filter(|b| matches!(b.kind, BranchKind::Inductor | BranchKind::Junction))
    }
}

/// A dated complaint about the netlist. `line` is `None` for circuit-level
/// (semantic) findings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Diagnostic { line: Some(line), message: message.into() }
    }
    fn circuit(message: impl Into<String>) -> Self {
        Diagnostic { line: None, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {}: {}", n, self.message),
            None => write!(f, "circuit: {}", self.message),
        }
    }
}

/// Natural ordering key: numeric ids sort as numbers, everything else
/// lexicographically after them.
fn natural_key(s: &str) -> (u8, u128, String) {
    match s.parse::<u128>() {
        Ok(n) => (0, n, String::new()),
        Err(_) => (1, 0, s.to_string()),
    }
}

fn parse_value(tok: &str, what: &str, line: usize, errs: &mut Vec<Diagnostic>) -> Option<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => {
            errs.push(Diagnostic::at(line, format!("{what} `{tok}` is not a finite number")));
            None
        }
    }
}

fn parse_positive(tok: &str, what: &str, line: usize, errs: &mut Vec<Diagnostic>) -> Option<f64> {
    let v = parse_value(tok, what, line, errs)?;
    if v <= 0.0 {
        errs.push(Diagnostic::at(line, format!("{what} must be positive, got {v}")));
        return None;
    }
    Some(v)
}

/// Parse netlist text into a canonical [`Circuit`].
///
/// All lines are examined even after the first error; the result is the
/// complete list of diagnostics or a circuit that passed every grammar-level
/// check. Semantic checks live in [`validate_circuit`].
pub fn parse_netlist(text: &str) -> Result<Circuit, Vec<Diagnostic>> {
    let mut errs: Vec<Diagnostic> = Vec::new();
    let mut branches: Vec<Branch> = Vec::new();
    let mut mutuals: Vec<Mutual> = Vec::new();
    let mut qoffs: BTreeMap<String, f64> = BTreeMap::new();
    let mut ids: HashSet<String> = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        match toks[0] {
            kw @ ("cap" | "ind" | "jj") => {
                if toks.len() < 5 {
                    errs.push(Diagnostic::at(
                        lineno,
                        format!("`{kw}` needs <id> <nodeA> <nodeB> <value>"),
                    ));
                    continue;
                }
                let (id, from, to) = (toks[1], toks[2], toks[3]);
                if !ids.insert(id.to_string()) {
                    errs.push(Diagnostic::at(lineno, format!("duplicate id `{id}`")));
                    continue;
                }
                if from == to {
                    errs.push(Diagnostic::at(
                        lineno,
                        format!("branch `{id}` connects node `{from}` to itself"),
                    ));
                    continue;
                }
                let what = match kw {
                    "cap" => "capacitance (fF)",
                    "ind" => "inductance (pH)",
                    _ => "Josephson energy (GHz)",
                };
                let Some(value) = parse_positive(toks[4], what, lineno, &mut errs) else {
                    continue;
                };
                let mut external_flux = 0.0;
                let mut shunt_cap = 0.0;
                let mut bad_opt = false;
                for opt in &toks[5..] {
                    match opt.split_once('=') {
                        Some(("flux", v)) if kw == "ind" => {
                            if let Some(x) = parse_value(v, "flux (Φ₀)", lineno, &mut errs) {
                                external_flux = x;
                            } else {
                                bad_opt = true;
                            }
                        }
                        Some(("cj", v)) if kw == "jj" => {
                            match parse_value(v, "cj (fF)", lineno, &mut errs) {
                                Some(x) if x >= 0.0 => shunt_cap = x,
                                Some(x) => {
                                    errs.push(Diagnostic::at(
                                        lineno,
                                        format!("cj must be nonnegative, got {x}"),
                                    ));
                                    bad_opt = true;
                                }
                                None => bad_opt = true,
                            }
                        }
                        _ => {
                            errs.push(Diagnostic::at(
                                lineno,
                                format!("unknown option `{opt}` for `{kw}`"),
                            ));
                            bad_opt = true;
                        }
                    }
                }
                if bad_opt {
                    continue;
                }
                let kind = match kw {
                    "cap" => BranchKind::Capacitor,
                    "ind" => BranchKind::Inductor,
                    _ => BranchKind::Junction,
                };
                branches.push(Branch {
                    id: id.to_string(),
                    kind,
                    from: from.to_string(),
                    to: to.to_string(),
                    value,
                    external_flux,
                    shunt_cap,
                });
            }
            "mut" => {
                if toks.len() != 5 {
                    errs.push(Diagnostic::at(lineno, "`mut` needs <id> <indA> <indB> <pH>"));
                    continue;
                }
                let id = toks[1];
                if !ids.insert(id.to_string()) {
                    errs.push(Diagnostic::at(lineno, format!("duplicate id `{id}`")));
                    continue;
                }
                if toks[2] == toks[3] {
                    errs.push(Diagnostic::at(
                        lineno,
                        format!("mutual `{id}` couples branch `{}` to itself", toks[2]),
                    ));
                    continue;
                }
                let Some(value) = parse_value(toks[4], "mutual inductance (pH)", lineno, &mut errs)
                else {
                    continue;
                };
                mutuals.push(Mutual {
                    id: id.to_string(),
                    a: toks[2].to_string(),
                    b: toks[3].to_string(),
                    value,
                });
            }
            "qoff" => {
                if toks.len() != 3 {
                    errs.push(Diagnostic::at(lineno, "`qoff` needs <node> <2e>"));
                    continue;
                }
                let node = toks[1];
                if node == GROUND {
                    errs.push(Diagnostic::at(lineno, "charge offset on ground is meaningless"));
                    continue;
                }
                let Some(value) = parse_value(toks[2], "charge offset (2e)", lineno, &mut errs)
                else {
                    continue;
                };
                if qoffs.insert(node.to_string(), value).is_some() {
                    errs.push(Diagnostic::at(
                        lineno,
                        format!("duplicate charge offset for node `{node}`"),
                    ));
                }
            }
            kw => {
                errs.push(Diagnostic::at(lineno, format!("unknown element `{kw}`")));
            }
        }
    }

    if !errs.is_empty() {
        return Err(errs);
    }

    let mut nodes: Vec<String> = branches
        .iter()
        .flat_map(|b| [b.from.clone(), b.to.clone()])
        .filter(|n| n != GROUND)
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    nodes.sort_by_key(|n| natural_key(n));
    branches.sort_by_key(|b| natural_key(&b.id));
    mutuals.sort_by_key(|m| natural_key(&m.id));

    Ok(Circuit { nodes, branches, mutuals, qoffs })
}

/// Semantic checks beyond the grammar. Empty result means the circuit is
/// ready for [`crate::modes::build_node_matrices`].
pub fn validate_circuit(c: &Circuit) -> Vec<Diagnostic> {
    let mut errs = Vec::new();
    let inductors: HashMap<&str, f64> = c
        .branches_of(BranchKind::Inductor)
        .map(|b| (b.id.as_str(), b.value))
        .collect();

    let mut pairs: HashSet<(String, String)> = HashSet::new();
    for m in &c.mutuals {
        let (la, lb) = match (inductors.get(m.a.as_str()), inductors.get(m.b.as_str())) {
            (Some(&la), Some(&lb)) => (la, lb),
            _ => {
                errs.push(Diagnostic::circuit(format!(
                    "mutual `{}` references `{}`/`{}`, both must be inductor branches",
                    m.id, m.a, m.b
                )));
                continue;
            }
        };
        let key = if m.a <= m.b {
            (m.a.clone(), m.b.clone())
        } else {
            (m.b.clone(), m.a.clone())
        };
        if !pairs.insert(key) {
            errs.push(Diagnostic::circuit(format!(
                "more than one mutual couples `{}` and `{}`",
                m.a, m.b
            )));
        }
        if m.value.abs() > (la * lb).sqrt() {
            errs.push(Diagnostic::circuit(format!(
                "mutual `{}` violates passivity: |{}| > √({la}·{lb})",
                m.id, m.value
            )));
        }
    }

    // Full branch inductance matrix must be positive definite; pairwise
    // passivity does not guarantee it once three or more coils interact.
    if errs.is_empty() && !inductors.is_empty() {
        let l_ids: Vec<&str> =
            c.branches_of(BranchKind::Inductor).map(|b| b.id.as_str()).collect();
        let n = l_ids.len();
        let mut l_full = vec![vec![0.0f64; n]; n];
        for (i, id) in l_ids.iter().enumerate() {
            l_full[i][i] = inductors[id];
        }
        for m in &c.mutuals {
            let i = l_ids.iter().position(|&x| x == m.a).unwrap();
            let j = l_ids.iter().position(|&x| x == m.b).unwrap();
            l_full[i][j] = m.value;
            l_full[j][i] = m.value;
        }
        if !cholesky_ok(&l_full) {
            errs.push(Diagnostic::circuit(
                "branch inductance matrix (L_b + M) is not positive definite".to_string(),
            ));
        }
    }

    for node in c.qoffs.keys() {
        if c.node_index(node).is_none() {
            errs.push(Diagnostic::circuit(format!(
                "charge offset on `{node}`, which no branch touches"
            )));
        }
    }

    errs
}

fn cholesky_ok(a: &[Vec<f64>]) -> bool {
    let n = a.len();
    let mut l = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}

/// Render a circuit back to netlist text in canonical form.
pub fn emit_netlist(c: &Circuit) -> String {
    let mut out = String::new();
    for b in &c.branches {
        match b.kind {
            BranchKind::Capacitor => {
                out.push_str(&format!("cap {} {} {} {}\n", b.id, b.from, b.to, b.value));
            }
            BranchKind::Inductor => {
                out.push_str(&format!("ind {} {} {} {}", b.id, b.from, b.to, b.value));
                if b.external_flux != 0.0 {
                    out.push_str(&format!(" flux={}", b.external_flux));
                }
                out.push('\n');
            }
            BranchKind::Junction => {
                out.push_str(&format!("jj {} {} {} {}", b.id, b.from, b.to, b.value));
                if b.shunt_cap != 0.0 {
                    out.push_str(&format!(" cj={}", b.shunt_cap));
                }
                out.push('\n');
            }
        }
    }
    for m in &c.mutuals {
        out.push_str(&format!("mut {} {} {} {}\n", m.id, m.a, m.b, m.value));
    }
    for (node, q) in &c.qoffs {
        out.push_str(&format!("qoff {node} {q}\n"));
    }
    out
}
