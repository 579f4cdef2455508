//! Hierarchical diagonalization: partition the modes into subsystems,
//! diagonalize each, keep a handful of low states, and re-assemble the
//! couplings in the retained product basis. Levels stack: groups of modes,
//! then groups of subsystems, and so on; the last assembly is solved densely.
//!
//! The same term list drives every stage. A term whose factors fall inside
//! one group is consumed by that subsystem's Hamiltonian; a term that
//! straddles groups is carried forward as a product of per-subsystem
//! projected operators and re-enters at whichever level finally contains it.

use crate::hamiltonian::{self, BasisDim, Factor, ModeBasis, Term};
use crate::linalg::eigh_complex;
use crate::modes::{BiasState, ModeSystem};
use crate::solver::{lowest_eigenpairs, SolveError, SolveOptions};
use crate::sparse::SparseMatrix;
use ndarray::Array2;
use num_complex::Complex64;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HierError {
    #[error("level {level}: groups must partition {want} units exactly (got {got:?})")]
    BadPartition { level: usize, want: usize, got: Vec<usize> },
    #[error("level {level}: {got} retain entries for {want} groups")]
    RetainCount { level: usize, want: usize, got: usize },
    #[error("effective dimension {0} too large for dense assembly (cap {1})")]
    EffectiveTooLarge(usize, usize),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Hamiltonian(#[from] hamiltonian::HamError),
    #[error("linear algebra backend: {0}")]
    Linalg(#[from] crate::linalg::LinalgError),
}

/// How many states a subsystem keeps after diagonalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Retain {
    /// Lowest `n` eigenstates.
    Count(usize),
    /// All states within `ghz` of the subsystem ground state.
    Window(f64),
}

#[derive(Debug, Clone)]
pub struct Level {
    /// Partition of the previous level's units (modes at level 0).
    pub groups: Vec<Vec<usize>>,
    /// Retention rule per group.
    pub retain: Vec<Retain>,
    /// Optional display names per group.
    pub labels: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub levels: Vec<Level>,
}

/// Cap on the final dense assembly.
pub const EFFECTIVE_DIM_CAP: usize = 16_384;

/// A diagonalized cluster of modes with its retained states and the
/// projected within-cluster pieces of every term that still crosses its
/// boundary (keyed by term index).
#[derive(Debug, Clone)]
pub struct Subsystem {
    pub label: String,
    pub modes: Vec<usize>,
    pub energies: Vec<f64>,
    pub ops: BTreeMap<usize, Array2<Complex64>>,
    /// Hilbert dimension before retention (for reporting).
    pub full_dim: usize,
}

impl Subsystem {
    pub fn retained(&self) -> usize {
        self.energies.len()
    }
}

#[derive(Debug, Clone)]
pub struct SubsystemReport {
    pub label: String,
    pub full_dim: usize,
    pub retained: usize,
    pub e0: f64,
    pub span_ghz: f64,
}

#[derive(Debug, Clone)]
pub struct EffectiveProblem {
    pub units: Vec<Subsystem>,
    pub terms: Vec<Term>,
    /// Indices of terms that straddle the final units.
    pub straddling: Vec<usize>,
    pub reports: Vec<Vec<SubsystemReport>>,
}

#[derive(Debug, Clone)]
pub struct HierarchyOutcome {
    pub values: Vec<f64>,
    /// Final eigenvectors in the retained product basis.
    pub vectors: Vec<Vec<Complex64>>,
    pub final_dim: usize,
    pub reports: Vec<Vec<SubsystemReport>>,
}

fn check_partition(level: usize, groups: &[Vec<usize>], want: usize) -> Result<(), HierError> {
    let mut seen = vec![false; want];
    let mut flat: Vec<usize> = Vec::new();
    for g in groups {
        for &u in g {
            flat.push(u);
            if u >= want || seen[u] {
                return Err(HierError::BadPartition { level, want, got: flat });
            }
            seen[u] = true;
        }
    }
    if flat.len() != want {
        return Err(HierError::BadPartition { level, want, got: flat });
    }
    Ok(())
}

/// Which of `unit_modes` a term touches.
fn touched(term: &Term, unit_modes: &[Vec<usize>]) -> Vec<usize> {
    let mut out = Vec::new();
    for (u, modes) in unit_modes.iter().enumerate() {
        if term.factors.iter().any(|(m, _)| modes.contains(m)) {
            out.push(u);
        }
    }
    out
}

/// Solve a subsystem Hamiltonian and keep states per the retain rule.
fn solve_retained(
    h: &SparseMatrix,
    retain: Retain,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, Vec<Vec<Complex64>>), SolveError> {
    let dim = h.dim();
    match retain {
        Retain::Count(n) => {
            let sol = lowest_eigenpairs(h, &SolveOptions { n_eig: n.min(dim), ..opts.clone() })?;
            Ok((sol.values, sol.vectors))
        }
        Retain::Window(w) => {
            let mut n = 8usize.min(dim);
            loop {
                let sol = lowest_eigenpairs(h, &SolveOptions { n_eig: n, ..opts.clone() })?;
                let e0 = sol.values[0];
                let cut = sol.values.iter().take_while(|&&e| e - e0 <= w).count();
                if cut < n || n == dim {
                    let keep = cut.max(1);
                    return Ok((
                        sol.values[..keep].to_vec(),
                        sol.vectors[..keep].to_vec(),
                    ));
                }
                n = (n * 2).min(dim);
            }
        }
    }
}

/// ⟨ψ_i|A|ψ_j⟩ for all retained pairs.
fn project(a: &SparseMatrix, states: &[Vec<Complex64>]) -> Array2<Complex64> {
    let n = states.len();
    let mut out = Array2::zeros((n, n));
    let mut y = vec![Complex64::new(0.0, 0.0); a.dim()];
    for j in 0..n {
        a.matvec(&states[j], &mut y);
        for i in 0..n {
            out[[i, j]] = states[i].iter().zip(&y).map(|(p, q)| p.conj() * q).sum();
        }
    }
    out
}

fn default_label(names: &[String], modes: &[usize]) -> String {
    modes.iter().map(|&m| names[m].as_str()).collect::<Vec<_>>().join("+")
}

/// Diagonalize the level-0 groups of modes.
fn leaf_level(
    ms: &ModeSystem,
    bases: &[ModeBasis],
    terms: &[Term],
    level: &Level,
    opts: &SolveOptions,
) -> Result<Vec<Subsystem>, HierError> {
    let unit_modes: Vec<Vec<usize>> = level
        .groups
        .iter()
        .map(|g| {
            let mut g = g.clone();
            g.sort_unstable();
            g
        })
        .collect();

    let mut subs = Vec::with_capacity(unit_modes.len());
    for (gi, modes) in unit_modes.iter().enumerate() {
        let local_bases: Vec<ModeBasis> = modes.iter().map(|&m| bases[m].clone()).collect();
        let to_local = |m: usize| modes.iter().position(|&x| x == m).unwrap();

        // internal terms, remapped to local mode indices
        let mut internal: Vec<Term> = Vec::new();
        for t in terms {
            if !t.factors.is_empty() && t.factors.iter().all(|(m, _)| modes.contains(m)) {
                internal.push(Term {
                    coeff: t.coeff,
                    factors: t.factors.iter().map(|(m, f)| (to_local(*m), f.clone())).collect(),
                    label: t.label.clone(),
                });
            }
        }
        let h = hamiltonian::assemble(&local_bases, &internal)?;
        let (energies, states) = solve_retained(&h, level.retain[gi], opts)?;

        // projected pieces of straddling terms
        let mut ops = BTreeMap::new();
        for (ti, t) in terms.iter().enumerate() {
            let mine: Vec<(usize, Factor)> = t
                .factors
                .iter()
                .filter(|(m, _)| modes.contains(m))
                .map(|(m, f)| (to_local(*m), f.clone()))
                .collect();
            if mine.is_empty() || mine.len() == t.factors.len() {
                continue; // untouched or fully internal
            }
            let a = hamiltonian::assemble_operator(&local_bases, &mine)?;
            ops.insert(ti, project(&a, &states));
        }

        let label = if level.labels.len() > gi && !level.labels[gi].is_empty() {
            level.labels[gi].clone()
        } else {
            default_label(&ms.transform.names, modes)
        };
        subs.push(Subsystem {
            label,
            modes: modes.clone(),
            energies,
            ops,
            full_dim: hamiltonian::hilbert_dim(&local_bases)?,
        });
    }
    Ok(subs)
}

/// Dense Kronecker accumulation: h += coeff · ⊗_u (mats[u] or I).
fn add_kron(
    h: &mut Array2<Complex64>,
    coeff: Complex64,
    mats: &[Option<&Array2<Complex64>>],
    dims: &[usize],
) {
    let n = dims.len();
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    fn walk(
        h: &mut Array2<Complex64>,
        mats: &[Option<&Array2<Complex64>>],
        dims: &[usize],
        strides: &[usize],
        u: usize,
        row: usize,
        col: usize,
        acc: Complex64,
    ) {
        if acc.norm_sqr() == 0.0 {
            return;
        }
        if u == dims.len() {
            h[[row, col]] += acc;
            return;
        }
        match mats[u] {
            None => {
                for k in 0..dims[u] {
                    let off = k * strides[u];
                    walk(h, mats, dims, strides, u + 1, row + off, col + off, acc);
                }
            }
            Some(m) => {
                for r in 0..dims[u] {
                    for c in 0..dims[u] {
                        let v = m[[r, c]];
                        if v.norm_sqr() > 0.0 {
                            walk(
                                h,
                                mats,
                                dims,
                                strides,
                                u + 1,
                                row + r * strides[u],
                                col + c * strides[u],
                                acc * v,
                            );
                        }
                    }
                }
            }
        }
    }
    walk(h, mats, dims, &strides, 0, 0, 0, coeff);
}

/// Effective Hamiltonian of a set of units: retained energies on the
/// diagonal plus every term internal to the set, then Hermitized.
fn effective_matrix(
    units: &[&Subsystem],
    terms: &[Term],
    term_ids: &[usize],
) -> Result<Array2<Complex64>, HierError> {
    let dims: Vec<usize> = units.iter().map(|u| u.retained()).collect();
    let dim: usize = dims.iter().product();
    if dim > EFFECTIVE_DIM_CAP {
        return Err(HierError::EffectiveTooLarge(dim, EFFECTIVE_DIM_CAP));
    }
    let mut h = Array2::<Complex64>::zeros((dim, dim));

    // diagonal: sum of unit energies, mixed-radix decode
    for idx in 0..dim {
        let mut rem = idx;
        let mut e = 0.0;
        for (u, unit) in units.iter().enumerate().rev() {
            let k = rem % dims[u];
            rem /= dims[u];
            e += unit.energies[k];
        }
        h[[idx, idx]] += Complex64::new(e, 0.0);
    }

    for &ti in term_ids {
        let t = &terms[ti];
        let mats: Vec<Option<&Array2<Complex64>>> =
            units.iter().map(|u| u.ops.get(&ti).map(|m| m as _)).collect();
        if mats.iter().all(Option::is_none) {
            continue;
        }
        add_kron(&mut h, t.coeff, &mats, &dims);
    }

    // (H + H†)/2
    let ht = h.t().mapv(|x| x.conj());
    Ok((&h + &ht).mapv(|x| x * 0.5))
}

/// Merge groups of units into bigger diagonalized units.
fn combine_level(
    units: Vec<Subsystem>,
    terms: &[Term],
    level: &Level,
    level_idx: usize,
) -> Result<Vec<Subsystem>, HierError> {
    check_partition(level_idx, &level.groups, units.len())?;
    if level.retain.len() != level.groups.len() {
        return Err(HierError::RetainCount {
            level: level_idx,
            want: level.groups.len(),
            got: level.retain.len(),
        });
    }
    let unit_modes: Vec<Vec<usize>> = units.iter().map(|u| u.modes.clone()).collect();

    let mut out = Vec::with_capacity(level.groups.len());
    for (gi, group) in level.groups.iter().enumerate() {
        let members: Vec<&Subsystem> = group.iter().map(|&u| &units[u]).collect();
        let dims: Vec<usize> = members.iter().map(|u| u.retained()).collect();
        let dim: usize = dims.iter().product();
        let group_modes: Vec<usize> = {
            let mut m: Vec<usize> = group.iter().flat_map(|&u| unit_modes[u].clone()).collect();
            m.sort_unstable();
            m
        };

        // terms whose touched units are all inside this group and that
        // were straddling before (internal ones are already consumed)
        let mut internal_ids = Vec::new();
        let mut crossing_ids = Vec::new();
        for (ti, t) in terms.iter().enumerate() {
            let tu = touched(t, &unit_modes);
            if tu.is_empty() || tu.len() < 2 && unit_modes[tu[0]].len() == t.factors.len() {
                // fully consumed at a lower level unless it straddles there
            }
            let in_group = tu.iter().filter(|u| group.contains(u)).count();
            if in_group == 0 {
                continue;
            }
            // a term matters here only if some member holds a projected op
            let held = members.iter().any(|m| m.ops.contains_key(&ti));
            if !held {
                continue;
            }
            if in_group == tu.len() {
                internal_ids.push(ti);
            } else {
                crossing_ids.push(ti);
            }
        }

        let h = effective_matrix(&members, terms, &internal_ids)?;
        let (vals, vecs) = eigh_complex(&h)?;
        let keep = match level.retain[gi] {
            Retain::Count(n) => n.min(dim),
            Retain::Window(w) => {
                vals.iter().take_while(|&&e| e - vals[0] <= w).count().max(1)
            }
        };
        let energies = vals.iter().take(keep).copied().collect::<Vec<_>>();
        let states: Vec<Vec<Complex64>> =
            (0..keep).map(|k| vecs.column(k).to_vec()).collect();

        // lift still-crossing term pieces into the new retained basis
        let mut ops = BTreeMap::new();
        for &ti in &crossing_ids {
            let mats: Vec<Option<&Array2<Complex64>>> =
                members.iter().map(|u| u.ops.get(&ti).map(|m| m as _)).collect();
            let mut lifted = Array2::<Complex64>::zeros((dim, dim));
            add_kron(&mut lifted, Complex64::new(1.0, 0.0), &mats, &dims);
            // project: P† lifted P
            let mut proj = Array2::<Complex64>::zeros((keep, keep));
            for j in 0..keep {
                let y = lifted.dot(&ndarray::Array1::from_vec(states[j].clone()));
                for i in 0..keep {
                    proj[[i, j]] = states[i].iter().zip(y.iter()).map(|(p, q)| p.conj() * q).sum();
                }
            }
            ops.insert(ti, proj);
        }

        let label = if level.labels.len() > gi && !level.labels[gi].is_empty() {
            level.labels[gi].clone()
        } else {
            members.iter().map(|m| m.label.as_str()).collect::<Vec<_>>().join("|")
        };
        out.push(Subsystem { label, modes: group_modes, energies, ops, full_dim: dim });
    }
    Ok(out)
}

fn report(units: &[Subsystem]) -> Vec<SubsystemReport> {
    units
        .iter()
        .map(|u| SubsystemReport {
            label: u.label.clone(),
            full_dim: u.full_dim,
            retained: u.retained(),
            e0: u.energies.first().copied().unwrap_or(0.0),
            span_ghz: match (u.energies.first(), u.energies.last()) {
                (Some(a), Some(b)) => b - a,
                _ => 0.0,
            },
        })
        .collect()
}

/// Run all hierarchy levels, stopping just before the final assembly.
pub fn build_problem(
    ms: &ModeSystem,
    bias: &BiasState,
    dims: &[BasisDim],
    spec: &Hierarchy,
    opts: &SolveOptions,
) -> Result<EffectiveProblem, HierError> {
    let bases = hamiltonian::mode_bases(ms, bias, dims)?;
    let terms = hamiltonian::circuit_terms(ms, bias);
    let n_modes = bases.len();

    let mut levels = spec.levels.iter();
    let first = levels.next().expect("hierarchy needs at least one level");
    check_partition(0, &first.groups, n_modes)?;
    if first.retain.len() != first.groups.len() {
        return Err(HierError::RetainCount {
            level: 0,
            want: first.groups.len(),
            got: first.retain.len(),
        });
    }

    let mut units = leaf_level(ms, &bases, &terms, first, opts)?;
    let mut reports = vec![report(&units)];
    for (k, level) in levels.enumerate() {
        units = combine_level(units, &terms, level, k + 1)?;
        reports.push(report(&units));
    }

    let unit_modes: Vec<Vec<usize>> = units.iter().map(|u| u.modes.clone()).collect();
    let straddling = terms
        .iter()
        .enumerate()
        .filter(|(_, t)| touched(t, &unit_modes).len() >= 2)
        .map(|(i, _)| i)
        .collect();

    Ok(EffectiveProblem { units, terms, straddling, reports })
}

/// Final dense solve over the retained product basis.
pub fn solve_problem(p: &EffectiveProblem, n_eig: usize) -> Result<HierarchyOutcome, HierError> {
    let members: Vec<&Subsystem> = p.units.iter().collect();
    let ids: Vec<usize> = p.straddling.clone();
    let h = effective_matrix(&members, &p.terms, &ids)?;
    let dim = h.nrows();
    let (vals, vecs) = eigh_complex(&h)?;
    let n = n_eig.min(dim);
    Ok(HierarchyOutcome {
        values: vals.iter().take(n).copied().collect(),
        vectors: (0..n).map(|k| vecs.column(k).to_vec()).collect(),
        final_dim: dim,
        reports: p.reports.clone(),
    })
}

/// Partition + diagonalize end to end.
pub fn solve_hierarchical(
    ms: &ModeSystem,
    bias: &BiasState,
    dims: &[BasisDim],
    spec: &Hierarchy,
    n_eig: usize,
    opts: &SolveOptions,
) -> Result<HierarchyOutcome, HierError> {
    let p = build_problem(ms, bias, dims, spec, opts)?;
    solve_problem(&p, n_eig)
}

/// Agglomerative grouping suggestion from coupling weights. Never applied
/// automatically — callers print it for the user to adopt.
pub fn suggest_partition(ms: &ModeSystem, bias: &BiasState, n_groups: usize) -> Vec<Vec<usize>> {
    let n = ms.transform.n_modes();
    let terms = hamiltonian::circuit_terms(ms, bias);
    let mut w = Array2::<f64>::zeros((n, n));
    for t in &terms {
        let modes: Vec<usize> = t.factors.iter().map(|&(m, _)| m).collect();
        for i in 0..modes.len() {
            for j in i + 1..modes.len() {
                // junction factors weight by their oscillator amplitude
                let strength = |k: usize| match &t.factors[k].1 {
                    Factor::Displace(a) => a.abs().min(1.0),
                    _ => 1.0,
                };
                let v = t.coeff.norm() * strength(i) * strength(j);
                w[[modes[i], modes[j]]] += v;
                w[[modes[j], modes[i]]] += v;
            }
        }
    }

    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    while clusters.len() > n_groups.max(1) {
        let mut best = (0usize, 1usize);
        let mut best_w = f64::NEG_INFINITY;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut s = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        s += w[[i, j]];
                    }
                }
                // prefer strongest per-pair coupling, discourage giants
                s /= (clusters[a].len() * clusters[b].len()) as f64;
                if s > best_w {
                    best_w = s;
                    best = (a, b);
                }
            }
        }
        let merged = clusters.remove(best.1);
        clusters[best.0].extend(merged);
        clusters[best.0].sort_unstable();
    }
    clusters.sort_by_key(|c| c[0]);
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{analyze, bias_state};
    use crate::netlist::parse_netlist;
    use crate::solver::lowest_eigenpairs;
    use approx::assert_abs_diff_eq;

    fn setup(net: &str) -> (crate::modes::ModeSystem, BiasState) {
        let c = parse_netlist(net).unwrap();
        let (t, ms) = analyze(&c).unwrap();
        let bias = bias_state(&c, &t, &ms);
        (ms, bias)
    }

    // transmon capacitively coupled to an LC: charge coupling straddles
    const TRANSMON_LC: &str =
        "jj J1 1 0 20 cj=60\ncap CC 1 2 5\nind L2 2 0 900\ncap C2 2 0 70\n";

    // two grounded oscillators with a junction across: the cosine straddles
    const JJ_BRIDGE: &str = "ind L1 1 0 300\ncap C1 1 0 50\nind L2 2 0 300\ncap C2 2 0 50\njj J1 1 2 25 cj=3\nind LB 1 2 4000 flux=0.3\n";

    #[test]
    fn untruncated_hierarchy_is_exact_charge_coupling() {
        let (ms, bias) = setup(TRANSMON_LC);
        assert_eq!(ms.transform.counts(), (1, 0, 1));
        let dims = [BasisDim::Levels(6), BasisDim::Charge(6)];
        // order: modes are [oscillator, josephson]
        let dims = if ms.transform.kinds[0] == crate::modes::ModeKind::Oscillator {
            dims
        } else {
            [BasisDim::Charge(6), BasisDim::Levels(6)]
        };
        let bases = hamiltonian::mode_bases(&ms, &bias, &dims).unwrap();
        let h = hamiltonian::assemble(&bases, &hamiltonian::circuit_terms(&ms, &bias)).unwrap();
        let brute = lowest_eigenpairs(&h, &SolveOptions { n_eig: 6, ..Default::default() }).unwrap();

        let full: Vec<Retain> = bases.iter().map(|b| Retain::Count(b.dim)).collect();
        let spec = Hierarchy {
            levels: vec![Level {
                groups: vec![vec![0], vec![1]],
                retain: full,
                labels: vec![],
            }],
        };
        let hier = solve_hierarchical(&ms, &bias, &dims, &spec, 6, &Default::default()).unwrap();
        for i in 0..6 {
            assert_abs_diff_eq!(hier.values[i], brute.values[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn untruncated_hierarchy_is_exact_junction_straddle() {
        let (ms, bias) = setup(JJ_BRIDGE);
        assert_eq!(ms.transform.counts(), (2, 0, 0));
        let dims = [BasisDim::Levels(7), BasisDim::Levels(7)];
        let bases = hamiltonian::mode_bases(&ms, &bias, &dims).unwrap();
        let h = hamiltonian::assemble(&bases, &hamiltonian::circuit_terms(&ms, &bias)).unwrap();
        let brute = lowest_eigenpairs(&h, &SolveOptions { n_eig: 5, ..Default::default() }).unwrap();

        let spec = Hierarchy {
            levels: vec![Level {
                groups: vec![vec![0], vec![1]],
                retain: vec![Retain::Count(7), Retain::Count(7)],
                labels: vec![],
            }],
        };
        let hier = solve_hierarchical(&ms, &bias, &dims, &spec, 5, &Default::default()).unwrap();
        for i in 0..5 {
            assert_abs_diff_eq!(hier.values[i], brute.values[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn truncated_hierarchy_tracks_brute() {
        let (ms, bias) = setup(TRANSMON_LC);
        let osc_first = ms.transform.kinds[0] == crate::modes::ModeKind::Oscillator;
        let dims = if osc_first {
            [BasisDim::Levels(10), BasisDim::Charge(8)]
        } else {
            [BasisDim::Charge(8), BasisDim::Levels(10)]
        };
        let bases = hamiltonian::mode_bases(&ms, &bias, &dims).unwrap();
        let h = hamiltonian::assemble(&bases, &hamiltonian::circuit_terms(&ms, &bias)).unwrap();
        let brute = lowest_eigenpairs(&h, &SolveOptions { n_eig: 4, ..Default::default() }).unwrap();

        let spec = Hierarchy {
            levels: vec![Level {
                groups: vec![vec![0], vec![1]],
                retain: vec![Retain::Count(7), Retain::Count(7)],
                labels: vec!["a".into(), "b".into()],
            }],
        };
        let hier = solve_hierarchical(&ms, &bias, &dims, &spec, 4, &Default::default()).unwrap();
        let b01 = brute.values[1] - brute.values[0];
        for i in 0..4 {
            let db = brute.values[i] - brute.values[0];
            let dh = hier.values[i] - hier.values[0];
            assert!((db - dh).abs() < 2e-3 * b01.max(1.0), "state {i}: {db} vs {dh}");
        }
        assert_eq!(hier.reports.len(), 1);
        assert_eq!(hier.reports[0][0].retained, 7);
    }

    #[test]
    fn two_level_stack_matches_single_level() {
        // three modes: the JJ_BRIDGE pair plus a readout LC hanging off
        let net = "ind L1 1 0 300\ncap C1 1 0 50\nind L2 2 0 300\ncap C2 2 0 50\n\
                   jj J1 1 2 25 cj=3\nind LB 1 2 4000 flux=0.3\n\
                   cap CR 2 3 4\nind L3 3 0 700\ncap C3 3 0 80\n";
        let (ms, bias) = setup(net);
        assert_eq!(ms.transform.counts(), (3, 0, 0));
        let dims = [BasisDim::Levels(5), BasisDim::Levels(5), BasisDim::Levels(5)];

        let flat = Hierarchy {
            levels: vec![Level {
                groups: vec![vec![0], vec![1], vec![2]],
                retain: vec![Retain::Count(5); 3],
                labels: vec![],
            }],
        };
        let stacked = Hierarchy {
            levels: vec![
                Level {
                    groups: vec![vec![0], vec![1], vec![2]],
                    retain: vec![Retain::Count(5); 3],
                    labels: vec![],
                },
                Level {
                    // which osc pairs with which depends on mode ordering;
                    // grouping units 0,1 and leaving 2 is valid either way
                    groups: vec![vec![0, 1], vec![2]],
                    retain: vec![Retain::Count(25), Retain::Count(5)],
                    labels: vec![],
                },
            ],
        };
        let a = solve_hierarchical(&ms, &bias, &dims, &flat, 5, &Default::default()).unwrap();
        let b = solve_hierarchical(&ms, &bias, &dims, &stacked, 5, &Default::default()).unwrap();
        for i in 0..5 {
            assert_abs_diff_eq!(a.values[i], b.values[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn window_retention_bounds_the_span() {
        let (ms, bias) = setup(TRANSMON_LC);
        let osc_first = ms.transform.kinds[0] == crate::modes::ModeKind::Oscillator;
        let dims = if osc_first {
            [BasisDim::Levels(8), BasisDim::Charge(6)]
        } else {
            [BasisDim::Charge(6), BasisDim::Levels(8)]
        };
        let spec = Hierarchy {
            levels: vec![Level {
                groups: vec![vec![0], vec![1]],
                retain: vec![Retain::Window(30.0), Retain::Window(30.0)],
                labels: vec![],
            }],
        };
        let p = build_problem(&ms, &bias, &dims, &spec, &Default::default()).unwrap();
        for u in &p.units {
            let span = u.energies.last().unwrap() - u.energies[0];
            assert!(span <= 30.0 + 1e-9, "window violated: {span}");
            assert!(u.retained() >= 1);
        }
    }

    #[test]
    fn suggestion_groups_strongly_coupled_pair() {
        // strong junction bridge between osc 1,2; weak cap to osc 3
        let net = "ind L1 1 0 300\ncap C1 1 0 50\nind L2 2 0 300\ncap C2 2 0 50\n\
                   jj J1 1 2 25 cj=3\nind LB 1 2 4000\n\
                   cap CR 2 3 1\nind L3 3 0 700\ncap C3 3 0 80\n";
        let (ms, bias) = setup(net);
        let groups = suggest_partition(&ms, &bias, 2);
        assert_eq!(groups.len(), 2);
        // the lone mode must be the weakly attached one
        let lone = groups.iter().find(|g| g.len() == 1).expect("one singleton");
        let pair = groups.iter().find(|g| g.len() == 2).unwrap();
        assert_eq!(pair.len(), 2);
        assert_eq!(lone.len(), 1);
    }
}
