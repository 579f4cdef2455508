//! Canonical mode construction: node capacitance/inductance matrices, the
//! linear transform from node coordinates to oscillator / island / Josephson
//! modes, and static bias (flux and offset-charge) bookkeeping.
//!
//! The transform is a pair of matrices (𝓡, S) with S = (𝓡ᵀ)⁻¹: rows of 𝓡
//! are flux functionals (Φ_mode = 𝓡 Φ_node), rows of S are the conjugate
//! charge functionals (Q_mode = S Q_node). The automatic construction picks
//!
//! * oscillator rows: orthonormal eigenvectors of the node inductance matrix
//!   L_n⁻¹ with nonzero eigenvalue, ascending;
//! * island charge rows: indicators of superconducting components with no
//!   path to ground;
//! * Josephson charge rows: cut indicators of a spanning tree over the
//!   inductively-connected components, which makes every junction's phase
//!   coefficient on every Josephson mode an exact 0 or ±1;
//! * island/Josephson flux rows: the unique completion inside null(L_n⁻¹)
//!   that is biorthogonal to the charge rows, which leaves the oscillator
//!   rows untouched and the inductive energy block-diagonal.
//!
//! User-supplied transforms are validated operationally: the same structural
//! facts are checked on the matrices rather than on how they were built.

use crate::linalg::{eigh_real, inv_real, LinalgError};
use crate::netlist::{BranchKind, Circuit, GROUND};
use crate::topology::Topology;
use crate::units::FLUX_E;
use ndarray::{Array1, Array2};
use thiserror::Error;

/// Relative eigenvalue threshold separating oscillating from frozen
/// directions of the node inductance matrix.
const NULL_SPACE_CUTOFF: f64 = 1e-10;
/// Diagonal capacitance (fF) granted to nodes with no capacitive coupling.
const CAP_REGULARIZATION: f64 = 1e-6;
/// Tolerance for structural checks on mode transforms.
const STRUCT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModeError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("capacitance matrix is singular: a node group has no capacitive path to the rest of the circuit")]
    SingularCapacitance,
    #[error("branch inductance matrix is not positive definite")]
    BadInductance,
    #[error("mode transform is singular")]
    SingularTransform,
    #[error("transform has {got:?} (oscillator, island, josephson) modes, circuit structure requires {want:?}")]
    ModeCount { got: (usize, usize, usize), want: (usize, usize, usize) },
    #[error("mode `{mode}` is not an oscillator but its charge functional carries inductive energy (|row| = {norm:.3e})")]
    FrozenModeInductive { mode: String, norm: f64 },
    #[error("junction `{branch}` couples to island mode `{mode}` with coefficient {value:.3e}")]
    IslandCoupling { branch: String, mode: String, value: f64 },
    #[error("junction `{branch}` has non-integer coefficient {value} on Josephson mode `{mode}`")]
    NonIntegerCoupling { branch: String, mode: String, value: f64 },
    #[error("oscillator mode `{mode}` has no inductive energy on its diagonal")]
    OscillatorWithoutInductance { mode: String },
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ModeKind {
    Oscillator,
    Island,
    Josephson,
}

/// Node-space quadratic forms of the circuit, in fF and pH.
#[derive(Debug, Clone)]
pub struct NodeMatrices {
    /// Capacitance Laplacian over non-ground nodes (fF).
    pub c_n: Array2<f64>,
    pub c_inv_n: Array2<f64>,
    /// Node inductance matrix R_Lᵀ (L_b + M)⁻¹ R_L (pH⁻¹).
    pub l_inv_n: Array2<f64>,
    /// Branch inductance matrix with mutuals (pH), inductor canonical order.
    pub l_full: Array2<f64>,
    pub l_full_inv: Array2<f64>,
    /// Galvanic-row indices (into `Topology::galvanic`) of the inductors.
    pub inductor_rows: Vec<usize>,
    /// Eigendecomposition of `l_inv_n`, ascending.
    pub l_eigvals: Array1<f64>,
    pub l_eigvecs: Array2<f64>,
}

impl NodeMatrices {
    fn null_cutoff(&self) -> f64 {
        let lam_max = self.l_eigvals.iter().cloned().fold(0.0, f64::max);
        if lam_max > 0.0 {
            NULL_SPACE_CUTOFF * lam_max
        } else {
            f64::INFINITY
        }
    }

    /// Number of oscillating directions (rank of L_n⁻¹).
    pub fn n_oscillators(&self) -> usize {
        let eps = self.null_cutoff();
        self.l_eigvals.iter().filter(|&&l| l > eps).count()
    }

    /// Apply the pseudo-inverse of L_n⁻¹ (pH) to a node vector.
    pub fn l_pseudo_apply(&self, b: &Array1<f64>) -> Array1<f64> {
        let eps = self.null_cutoff();
        let mut out = Array1::zeros(b.len());
        for (i, &lam) in self.l_eigvals.iter().enumerate() {
            if lam > eps {
                let u = self.l_eigvecs.column(i);
                let w = u.dot(b) / lam;
                out.scaled_add(w, &u);
            }
        }
        out
    }
}

fn ext_index(c: &Circuit, name: &str) -> usize {
    if name == GROUND {
        c.nodes.len()
    } else {
        c.node_index(name).expect("endpoint must be a circuit node")
    }
}

/// Symmetric inverse through the eigendecomposition; errors if any
/// eigenvalue is not safely positive.
fn spd_inverse(a: &Array2<f64>, reltol: f64) -> Result<Array2<f64>, Option<()>> {
    let (lam, v) = eigh_real(a).map_err(|_| None)?;
    let lam_max = lam.iter().cloned().fold(0.0, f64::max);
    if lam_max <= 0.0 || lam.iter().any(|&l| l <= reltol * lam_max) {
        return Err(Some(()));
    }
    let n = a.nrows();
    let mut inv = Array2::zeros((n, n));
    for i in 0..n {
        let u = v.column(i);
        let w = 1.0 / lam[i];
        for r in 0..n {
            for c in 0..n {
                inv[[r, c]] += w * u[r] * u[c];
            }
        }
    }
    Ok(inv)
}

/// Assemble the node capacitance and inductance matrices of a validated
/// circuit.
pub fn build_node_matrices(c: &Circuit, t: &Topology) -> Result<NodeMatrices, ModeError> {
    let n = c.nodes.len();
    let ground = n;

    let mut c_n: Array2<f64> = Array2::zeros((n, n));
    let mut add_cap = |f: usize, t_: usize, v: f64| {
        if f != ground {
            c_n[[f, f]] += v;
        }
        if t_ != ground {
            c_n[[t_, t_]] += v;
        }
        if f != ground && t_ != ground {
            c_n[[f, t_]] -= v;
            c_n[[t_, f]] -= v;
        }
    };
    for b in &c.branches {
        let (f, t_) = (ext_index(c, &b.from), ext_index(c, &b.to));
        match b.kind {
            BranchKind::Capacitor => add_cap(f, t_, b.value),
            BranchKind::Junction if b.shunt_cap > 0.0 => add_cap(f, t_, b.shunt_cap),
            _ => {}
        }
    }
    for i in 0..n {
        if c_n.row(i).iter().all(|&x| x == 0.0) {
            c_n[[i, i]] = CAP_REGULARIZATION;
        }
    }
    let c_inv_n = spd_inverse(&c_n, 1e-12).map_err(|_| ModeError::SingularCapacitance)?;

    let inductor_rows: Vec<usize> = t
        .galvanic
        .iter()
        .enumerate()
        .filter(|(_, id)| c.branch(id).map(|b| b.kind == BranchKind::Inductor).unwrap_or(false))
        .map(|(i, _)| i)
        .collect();
    let nl = inductor_rows.len();

    let mut l_full: Array2<f64> = Array2::zeros((nl, nl));
    let l_ids: Vec<&str> = inductor_rows.iter().map(|&r| t.galvanic[r].as_str()).collect();
    for (i, id) in l_ids.iter().enumerate() {
        l_full[[i, i]] = c.branch(id).unwrap().value;
    }
    for m in &c.mutuals {
        let i = l_ids.iter().position(|&x| x == m.a);
        let j = l_ids.iter().position(|&x| x == m.b);
        if let (Some(i), Some(j)) = (i, j) {
            l_full[[i, j]] = m.value;
            l_full[[j, i]] = m.value;
        }
    }
    let (l_full_inv, l_inv_n) = if nl > 0 {
        let inv = spd_inverse(&l_full, 1e-14).map_err(|_| ModeError::BadInductance)?;
        let mut r_l = Array2::zeros((nl, n));
        for (i, &row) in inductor_rows.iter().enumerate() {
            r_l.row_mut(i).assign(&t.r_bn.row(row));
        }
        let l_inv_n = r_l.t().dot(&inv).dot(&r_l);
        (inv, l_inv_n)
    } else {
        (Array2::zeros((0, 0)), Array2::zeros((n, n)))
    };

    let (l_eigvals, l_eigvecs) = eigh_real(&l_inv_n)?;
    Ok(NodeMatrices {
        c_n,
        c_inv_n,
        l_inv_n,
        l_full,
        l_full_inv,
        inductor_rows,
        l_eigvals,
        l_eigvecs,
    })
}

/// The linear canonical transform. Rows of `r` are flux functionals, rows of
/// `s` the conjugate charge functionals; `s = (rᵀ)⁻¹` always holds.
#[derive(Debug, Clone)]
pub struct ModeTransform {
    pub r: Array2<f64>,
    pub s: Array2<f64>,
    pub kinds: Vec<ModeKind>,
    pub names: Vec<String>,
}

impl ModeTransform {
    /// Build from user-supplied flux rows; the charge rows are derived.
    pub fn from_flux_rows(
        r: Array2<f64>,
        kinds: Vec<ModeKind>,
        names: Vec<String>,
    ) -> Result<Self, ModeError> {
        let s = inv_real(&r).map_err(|_| ModeError::SingularTransform)?.t().to_owned();
        Ok(ModeTransform { r, s, kinds, names })
    }

    pub fn n_modes(&self) -> usize {
        self.kinds.len()
    }

    pub fn indices_of(&self, kind: ModeKind) -> Vec<usize> {
        (0..self.kinds.len()).filter(|&i| self.kinds[i] == kind).collect()
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (
            self.indices_of(ModeKind::Oscillator).len(),
            self.indices_of(ModeKind::Island).len(),
            self.indices_of(ModeKind::Josephson).len(),
        )
    }
}

/// Expected (oscillator, island, josephson) counts from graph structure.
fn expected_counts(c: &Circuit, t: &Topology) -> (usize, usize, usize) {
    let n = c.nodes.len();
    let frozen = t.inductor_comps.count - 1; // every non-grounded inductive component
    (n - frozen, t.islands.len(), t.forest_junctions(c).len())
}

/// Construct the automatic canonical transform.
pub fn auto_transform(
    c: &Circuit,
    t: &Topology,
    nm: &NodeMatrices,
) -> Result<ModeTransform, ModeError> {
    let n = c.nodes.len();
    let eps = nm.null_cutoff();
    let osc_idx: Vec<usize> = (0..n).filter(|&i| nm.l_eigvals[i] > eps).collect();
    let null_idx: Vec<usize> = (0..n).filter(|&i| nm.l_eigvals[i] <= eps).collect();

    let (want_o, want_i, want_j) = expected_counts(c, t);
    if osc_idx.len() != want_o || null_idx.len() != want_i + want_j {
        return Err(ModeError::Internal(format!(
            "rank of L_n⁻¹ ({}) disagrees with graph structure ({} oscillators expected)",
            osc_idx.len(),
            want_o
        )));
    }

    // Charge functionals of the frozen directions: island indicators, then
    // spanning-tree cut indicators over inductively-connected components.
    let mut charge_rows: Vec<Array1<f64>> = Vec::new();
    for island in &t.islands {
        let mut chi = Array1::zeros(n);
        for &v in island {
            chi[v] = 1.0;
        }
        charge_rows.push(chi);
    }

    let forest_j = t.forest_junctions(c);
    let ic = &t.inductor_comps;
    let n_comps = ic.count;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_comps];
    for (ei, id) in forest_j.iter().enumerate() {
        let b = c.branch(id).unwrap();
        let ca = ic.of[ext_index(c, &b.from)];
        let cb = ic.of[ext_index(c, &b.to)];
        adj[ca].push((cb, ei));
        adj[cb].push((ca, ei));
    }
    // Roots: the grounded component, plus each island's lowest-node component.
    let mut roots = vec![ic.ground];
    for island in &t.islands {
        roots.push(ic.of[island[0]]);
    }
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n_comps];
    let mut seen = vec![false; n_comps];
    let mut queue: std::collections::VecDeque<usize> = Default::default();
    for r in roots {
        if !seen[r] {
            seen[r] = true;
            queue.push_back(r);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &(w, ei) in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some((v, ei));
                queue.push_back(w);
            }
        }
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n_comps];
    for (v, p) in parent.iter().enumerate() {
        if let Some((pv, _)) = p {
            children[*pv].push(v);
        }
    }
    for (ei, id) in forest_j.iter().enumerate() {
        let child = (0..n_comps)
            .find(|&v| matches!(parent[v], Some((_, e)) if e == ei))
            .ok_or_else(|| {
                ModeError::Internal(format!("forest junction `{id}` is not a super-tree edge"))
            })?;
        let mut in_sub = vec![false; n_comps];
        let mut stack = vec![child];
        while let Some(v) = stack.pop() {
            in_sub[v] = true;
            stack.extend(children[v].iter().copied());
        }
        let mut chi = Array1::zeros(n);
        for v in 0..n {
            if in_sub[ic.of[v]] {
                chi[v] = 1.0;
            }
        }
        let b = c.branch(id).unwrap();
        let val = |name: &str| -> f64 {
            let e = ext_index(c, name);
            if e < n {
                chi[e]
            } else {
                0.0
            }
        };
        let diff = val(&b.from) - val(&b.to);
        if (diff.abs() - 1.0).abs() > 1e-12 {
            return Err(ModeError::Internal(format!(
                "tree junction `{id}` does not cross its own cut (got {diff})"
            )));
        }
        if diff < 0.0 {
            chi.mapv_inplace(|x| -x);
        }
        charge_rows.push(chi);
    }

    // Flux rows for the frozen modes: the unique null-space completion
    // biorthogonal to the charge functionals.
    let d = null_idx.len();
    let mut w = Array2::zeros((n, d));
    for (k, &i) in null_idx.iter().enumerate() {
        w.column_mut(k).assign(&nm.l_eigvecs.column(i));
    }
    let mut cmat = Array2::zeros((n, d));
    for (k, chi) in charge_rows.iter().enumerate() {
        cmat.column_mut(k).assign(chi);
    }
    let g = w.t().dot(&cmat);
    let g_inv = inv_real(&g).map_err(|_| {
        ModeError::Internal("frozen-direction charge functionals are degenerate".into())
    })?;
    let s_rows = g_inv.dot(&w.t()); // d × n

    let mut r = Array2::zeros((n, n));
    let mut s = Array2::zeros((n, n));
    let mut kinds = Vec::with_capacity(n);
    let mut names = Vec::with_capacity(n);
    for (row, &i) in osc_idx.iter().enumerate() {
        r.row_mut(row).assign(&nm.l_eigvecs.column(i));
        s.row_mut(row).assign(&nm.l_eigvecs.column(i));
        kinds.push(ModeKind::Oscillator);
        names.push(format!("O{}", row + 1));
    }
    for k in 0..d {
        let row = osc_idx.len() + k;
        r.row_mut(row).assign(&s_rows.row(k));
        s.row_mut(row).assign(&charge_rows[k]);
        if k < want_i {
            kinds.push(ModeKind::Island);
            names.push(format!("I{}", k + 1));
        } else {
            kinds.push(ModeKind::Josephson);
            names.push(format!("J{}", k - want_i + 1));
        }
    }

    let check = r.dot(&s.t());
    let err = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (check[[i, j]] - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    if err > 1e-8 {
        return Err(ModeError::Internal(format!(
            "constructed transform fails biorthogonality (max deviation {err:.3e})"
        )));
    }

    Ok(ModeTransform { r, s, kinds, names })
}

/// Phase/charge participation of one junction across the modes.
#[derive(Debug, Clone)]
pub struct JunctionModes {
    pub branch: String,
    /// Josephson energy in GHz.
    pub e_j: f64,
    /// Real flux coefficient per oscillator mode (order of oscillator modes).
    pub osc: Array1<f64>,
    /// Integer coefficient per Josephson mode.
    pub jos: Vec<i64>,
}

/// A circuit expressed in canonical modes, ready for operator assembly.
#[derive(Debug, Clone)]
pub struct ModeSystem {
    pub node: NodeMatrices,
    pub transform: ModeTransform,
    /// Mode-space inverse capacitance 𝓡 C_n⁻¹ 𝓡ᵀ (fF⁻¹).
    pub c_inv: Array2<f64>,
    /// Mode-space inverse inductance S L_n⁻¹ Sᵀ (pH⁻¹); nonzero only on the
    /// oscillator block.
    pub l_inv: Array2<f64>,
    pub junctions: Vec<JunctionModes>,
    /// Dimensionless mode impedance, oscillators only.
    pub impedance: Vec<Option<f64>>,
    /// Diagonal-estimate mode frequency in GHz, oscillators only.
    pub frequency: Vec<Option<f64>>,
}

/// Validate a transform against the circuit and assemble the mode-space
/// quadratic forms and junction coefficients.
pub fn build_mode_system(
    c: &Circuit,
    t: &Topology,
    nm: NodeMatrices,
    tf: ModeTransform,
) -> Result<ModeSystem, ModeError> {
    let want = expected_counts(c, t);
    let got = tf.counts();
    if got != want {
        return Err(ModeError::ModeCount { got, want });
    }

    let c_inv = tf.r.dot(&nm.c_inv_n).dot(&tf.r.t());
    let l_inv = tf.s.dot(&nm.l_inv_n).dot(&tf.s.t());

    let l_scale = nm
        .l_inv_n
        .iter()
        .fold(0.0f64, |a, &x| a.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    for (i, kind) in tf.kinds.iter().enumerate() {
        if *kind != ModeKind::Oscillator {
            let norm = l_inv.row(i).iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            if norm > STRUCT_TOL * l_scale {
                return Err(ModeError::FrozenModeInductive {
                    mode: tf.names[i].clone(),
                    norm,
                });
            }
        }
    }

    let osc_idx = tf.indices_of(ModeKind::Oscillator);
    let isl_idx = tf.indices_of(ModeKind::Island);
    let jos_idx = tf.indices_of(ModeKind::Josephson);

    let mut junctions = Vec::new();
    for b in c.branches_of(BranchKind::Junction) {
        let row = t.galvanic.iter().position(|id| *id == b.id).unwrap();
        let r_b = t.r_bn.row(row).to_owned();
        let w = tf.s.dot(&r_b); // per-mode coefficient of the branch flux
        for &i in &isl_idx {
            if w[i].abs() > STRUCT_TOL {
                return Err(ModeError::IslandCoupling {
                    branch: b.id.clone(),
                    mode: tf.names[i].clone(),
                    value: w[i],
                });
            }
        }
        let mut jos = Vec::with_capacity(jos_idx.len());
        for &i in &jos_idx {
            let rounded = w[i].round();
            if (w[i] - rounded).abs() > STRUCT_TOL {
                return Err(ModeError::NonIntegerCoupling {
                    branch: b.id.clone(),
                    mode: tf.names[i].clone(),
                    value: w[i],
                });
            }
            jos.push(rounded as i64);
        }
        let osc = Array1::from_iter(osc_idx.iter().map(|&i| w[i]));
        junctions.push(JunctionModes { branch: b.id.clone(), e_j: b.value, osc, jos });
    }

    let n = tf.n_modes();
    let mut impedance = vec![None; n];
    let mut frequency = vec![None; n];
    for &i in &osc_idx {
        if l_inv[[i, i]] <= 0.0 {
            return Err(ModeError::OscillatorWithoutInductance { mode: tf.names[i].clone() });
        }
        impedance[i] = Some(crate::units::mode_impedance(c_inv[[i, i]], l_inv[[i, i]]));
        frequency[i] = Some(crate::units::mode_frequency_ghz(c_inv[[i, i]], l_inv[[i, i]]));
    }

    Ok(ModeSystem { node: nm, transform: tf, c_inv, l_inv, junctions, impedance, frequency })
}

/// Static bias configuration resolved into mode space.
#[derive(Debug, Clone)]
pub struct BiasState {
    /// Flux displacement per mode in Φ₀; zero on island/Josephson modes.
    pub dphi: Array1<f64>,
    /// Charge offset per mode in 2e; zero on oscillator modes.
    pub dq: Array1<f64>,
    /// Static phase offset per junction (radians), aligned with
    /// `ModeSystem::junctions`.
    pub junction_phase: Vec<f64>,
    /// Classical inductive frustration energy in GHz (dropped constant).
    pub frustration_ghz: f64,
}

/// Resolve branch fluxes, loop fluxoid numbers, and node charge offsets into
/// oscillator displacements, junction phase offsets, and mode charge offsets.
pub fn bias_state(c: &Circuit, t: &Topology, ms: &ModeSystem) -> BiasState {
    let n = c.nodes.len();
    let nm = &ms.node;
    let nl = nm.inductor_rows.len();

    // Effective flux per inductor branch: declared flux minus the fluxoid
    // number when the branch closes a (purely inductive) loop.
    let mut phi_eff = Array1::zeros(nl);
    for (i, &row) in nm.inductor_rows.iter().enumerate() {
        let id = &t.galvanic[row];
        let b = c.branch(id).unwrap();
        let m = t
            .closures
            .iter()
            .find(|l| l.closure == *id)
            .map(|l| l.fluxoid)
            .unwrap_or(0);
        phi_eff[i] = b.external_flux - m as f64;
    }

    let n_modes = ms.transform.n_modes();
    let mut dphi = Array1::zeros(n_modes);
    let mut frustration = 0.0;
    if phi_eff.iter().any(|&x| x != 0.0) && nl > 0 {
        let mut r_l = Array2::zeros((nl, n));
        for (i, &row) in nm.inductor_rows.iter().enumerate() {
            r_l.row_mut(i).assign(&t.r_bn.row(row));
        }
        let b = r_l.t().dot(&nm.l_full_inv).dot(&phi_eff);
        let dphi_node = nm.l_pseudo_apply(&b);
        let full = ms.transform.r.dot(&dphi_node);
        for &i in &ms.transform.indices_of(ModeKind::Oscillator) {
            dphi[i] = full[i];
        }
        let resid = r_l.dot(&dphi_node) - &phi_eff;
        frustration = 0.5 * FLUX_E * resid.dot(&nm.l_full_inv.dot(&resid));
    }

    // Junction phase offsets from the oscillator displacements.
    let osc_idx = ms.transform.indices_of(ModeKind::Oscillator);
    let junction_phase = ms
        .junctions
        .iter()
        .map(|j| {
            let mut s = 0.0;
            for (k, &i) in osc_idx.iter().enumerate() {
                s += j.osc[k] * dphi[i];
            }
            std::f64::consts::TAU * s
        })
        .collect();

    let mut dq_node = Array1::zeros(n);
    for (node, &q) in &c.qoffs {
        if let Some(i) = c.node_index(node) {
            dq_node[i] = q;
        }
    }
    let mut dq = ms.transform.s.dot(&dq_node);
    for &i in &osc_idx {
        dq[i] = 0.0;
    }

    BiasState { dphi, dq, junction_phase, frustration_ghz: frustration }
}

/// Convenience: run the full chain netlist → validated mode system with the
/// automatic transform.
pub fn analyze(c: &Circuit) -> Result<(Topology, ModeSystem), ModeError> {
    let t = crate::topology::build_topology(c);
    let nm = build_node_matrices(c, &t)?;
    let tf = auto_transform(c, &t, &nm)?;
    let ms = build_mode_system(c, &t, nm, tf)?;
    Ok((t, ms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;
    use crate::topology::build_topology;
    use approx::assert_abs_diff_eq;

    const RF_SQUID: &str = "\
ind L1 1 0 800 flux=0.5
jj  J1 1 0 35 cj=4
cap C1 1 0 60
";

    const PHASE_SLIP: &str = "\
cap CS1 1 0 40
cap CS7 7 0 40
cap CI2 2 0 9
ind LTL 1 3 300
ind LBL 1 4 300
ind LL  1 7 1500 flux=0.5
ind LTR 7 5 300
ind LBR 7 6 300
jj JTL 2 3 60 cj=3
jj JTR 5 2 60 cj=3
jj JBL 2 4 60 cj=3
jj JBR 2 6 60 cj=3
qoff 2 0.25
";

    fn system(net: &str) -> (crate::netlist::Circuit, Topology, ModeSystem) {
        let c = parse_netlist(net).unwrap();
        let t = build_topology(&c);
        let nm = build_node_matrices(&c, &t).unwrap();
        let tf = auto_transform(&c, &t, &nm).unwrap();
        let ms = build_mode_system(&c, &t, nm, tf).unwrap();
        (c, t, ms)
    }

    #[test]
    fn rf_squid_single_oscillator() {
        let (_, _, ms) = system(RF_SQUID);
        assert_eq!(ms.transform.counts(), (1, 0, 0));
        // One junction, full participation in the only mode.
        assert_eq!(ms.junctions.len(), 1);
        assert_abs_diff_eq!(ms.junctions[0].osc[0].abs(), 1.0, epsilon = 1e-12);
        // f = 1/(2π√(LC)) with C = 60 + 4 (shunt plus junction cj).
        let f = ms.frequency[0].unwrap();
        let expect = 1.0 / (std::f64::consts::TAU * (800e-12 * 64e-15f64).sqrt()) / 1e9;
        assert_abs_diff_eq!(f, expect, epsilon = 1e-9);
        let z = ms.impedance[0].unwrap();
        assert_abs_diff_eq!(z, 4.9003e-3 * (800.0f64 / 64.0).sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn rf_squid_bias_lands_on_junction() {
        let (c, t, ms) = system(RF_SQUID);
        let bias = bias_state(&c, &t, &ms);
        // Half a flux quantum through the loop displaces the oscillator by
        // exactly 0.5 Φ₀ (sign tracks the eigenvector's) and puts a phase of
        // π across the junction.
        let i = ms.transform.indices_of(ModeKind::Oscillator)[0];
        assert_abs_diff_eq!(bias.dphi[i].abs(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            bias.junction_phase[0].abs(),
            std::f64::consts::PI,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(bias.frustration_ghz, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn transmon_is_pure_josephson() {
        let (c, t, ms) = system("jj J1 1 0 20 cj=80\n");
        assert_eq!(ms.transform.counts(), (0, 0, 1));
        assert_eq!(ms.junctions[0].jos, vec![1]);
        let bias = bias_state(&c, &t, &ms);
        assert_eq!(bias.junction_phase, vec![0.0]);
    }

    #[test]
    fn seven_node_auto_structure() {
        let (_, _, ms) = system(PHASE_SLIP);
        assert_eq!(ms.transform.counts(), (5, 1, 1));
        // Junction coefficients on the Josephson mode are exact ±1, and no
        // junction touches the island mode (enforced during construction).
        let n: std::collections::HashMap<_, _> =
            ms.junctions.iter().map(|j| (j.branch.clone(), j.jos[0])).collect();
        assert_eq!(n["JTL"], 1);
        assert_eq!(n["JBL"], 1);
        assert_eq!(n["JBR"], 1);
        assert_eq!(n["JTR"], -1);
        for f in ms.frequency.iter().flatten() {
            assert!(*f > 0.0);
        }
    }

    #[test]
    fn seven_node_island_charge_offset() {
        let (c, t, ms) = system(PHASE_SLIP);
        let bias = bias_state(&c, &t, &ms);
        let isl = ms.transform.indices_of(ModeKind::Island)[0];
        let jos = ms.transform.indices_of(ModeKind::Josephson)[0];
        // qoff sits on node 2 — the Josephson mode's own node. The island
        // charge functional (indicator of all seven nodes) also sees it.
        assert_abs_diff_eq!(bias.dq[isl], 0.25, epsilon = 1e-9);
        assert_abs_diff_eq!(bias.dq[jos], 0.25, epsilon = 1e-9);
        for &i in &ms.transform.indices_of(ModeKind::Oscillator) {
            assert_eq!(bias.dq[i], 0.0);
        }
    }

    /// The documented hand-built transform for the seven-node device: five
    /// symmetry-adapted oscillators, total-charge island, single-node
    /// Josephson mode. Columns are nodes 1..7.
    fn seven_node_user_rows() -> Array2<f64> {
        ndarray::arr2(&[
            [0.0, 0.0, 0.5, 0.5, -0.5, -0.5, 0.0],
            [-1.0, 0.0, 0.5, 0.5, -0.5, -0.5, 1.0],
            [0.5, 0.0, -0.25, -0.25, -0.25, -0.25, 0.5],
            [0.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0],
            [0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, -0.25, -0.25, -0.25, -0.25, 0.0],
        ])
    }

    #[test]
    fn seven_node_user_transform_validates() {
        let c = parse_netlist(PHASE_SLIP).unwrap();
        let t = build_topology(&c);
        let nm = build_node_matrices(&c, &t).unwrap();
        let kinds = vec![
            ModeKind::Oscillator,
            ModeKind::Oscillator,
            ModeKind::Oscillator,
            ModeKind::Oscillator,
            ModeKind::Oscillator,
            ModeKind::Island,
            ModeKind::Josephson,
        ];
        let names = ["d", "l", "p", "R", "L", "I", "J"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let tf = ModeTransform::from_flux_rows(seven_node_user_rows(), kinds, names).unwrap();
        let ms = build_mode_system(&c, &t, nm, tf).unwrap();

        // Charge functionals follow from biorthogonality: the island mode
        // reads the total charge, the Josephson mode the node-2 charge minus
        // the total.
        let s_i = ms.transform.s.row(5);
        let s_j = ms.transform.s.row(6);
        for k in 0..7 {
            assert_abs_diff_eq!(s_i[k], 1.0, epsilon = 1e-9);
            let expect = if k == 1 { 0.0 } else { -1.0 };
            assert_abs_diff_eq!(s_j[k], expect, epsilon = 1e-9);
        }
        let n: std::collections::HashMap<_, _> =
            ms.junctions.iter().map(|j| (j.branch.clone(), j.jos[0])).collect();
        assert_eq!(n["JTL"], 1);
        assert_eq!(n["JTR"], -1);
        assert_eq!(n["JBL"], 1);
        assert_eq!(n["JBR"], 1);
    }

    #[test]
    fn user_transform_bad_kind_rejected() {
        let c = parse_netlist(PHASE_SLIP).unwrap();
        let t = build_topology(&c);
        let nm = build_node_matrices(&c, &t).unwrap();
        let kinds = vec![
            ModeKind::Oscillator,
            ModeKind::Oscillator,
            ModeKind::Oscillator,
            ModeKind::Oscillator,
            ModeKind::Island, // wrongly frozen: this row carries inductive energy
            ModeKind::Oscillator,
            ModeKind::Josephson,
        ];
        let names = (0..7).map(|i| format!("m{i}")).collect();
        let tf = ModeTransform::from_flux_rows(seven_node_user_rows(), kinds, names).unwrap();
        let err = build_mode_system(&c, &t, nm, tf).unwrap_err();
        assert!(matches!(err, ModeError::FrozenModeInductive { .. }));
    }

    #[test]
    fn floating_pair_is_an_error() {
        // Nodes 2–3 form a capacitive pair with no tie to anything else.
        let c = parse_netlist("cap C1 1 0 10\ncap C2 2 3 5\njj J1 2 3 11\n").unwrap();
        let t = build_topology(&c);
        assert!(matches!(
            build_node_matrices(&c, &t),
            Err(ModeError::SingularCapacitance)
        ));
    }

    #[test]
    fn lone_node_regularized_not_fatal() {
        // Node 2 has a junction but no capacitance at all: regularized.
        let c = parse_netlist("cap C1 1 0 10\njj J1 1 2 9\n").unwrap();
        let t = build_topology(&c);
        let nm = build_node_matrices(&c, &t).unwrap();
        let i2 = c.node_index("2").unwrap();
        assert_eq!(nm.c_n[[i2, i2]], CAP_REGULARIZATION);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        /// Random galvanic graphs with per-node ground caps (keeps C_n
        /// regular) plus junction shunts.
        fn arb_netlist() -> impl Strategy<Value = String> {
            (
                2usize..=5,
                proptest::collection::vec(
                    (0usize..=5, 0usize..=5, prop::bool::ANY, 50.0f64..2000.0),
                    1..9,
                ),
            )
                .prop_map(|(n, edges)| {
                    let mut s = String::new();
                    let mut touched = std::collections::BTreeSet::new();
                    for (i, (a, b, is_jj, val)) in edges.into_iter().enumerate() {
                        let (a, b) = (a % (n + 1), b % (n + 1));
                        if a == b {
                            continue;
                        }
                        touched.insert(a);
                        touched.insert(b);
                        if is_jj {
                            s.push_str(&format!("jj b{i:02} {a} {b} 30 cj=2\n"));
                        } else {
                            s.push_str(&format!("ind b{i:02} {a} {b} {val}\n"));
                        }
                    }
                    for v in touched {
                        if v != 0 {
                            s.push_str(&format!("cap g{v} {v} 0 20\n"));
                        }
                    }
                    s
                })
                .prop_filter("need a branch", |s| s.contains("b0"))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn auto_transform_structure(net in arb_netlist()) {
                let c = parse_netlist(&net).unwrap();
                let t = build_topology(&c);
                let nm = build_node_matrices(&c, &t).unwrap();
                let tf = auto_transform(&c, &t, &nm).unwrap();
                let n = c.nodes.len();
                let (o, i, j) = tf.counts();
                prop_assert_eq!(o + i + j, n);
                // Biorthogonality.
                let eye = tf.r.dot(&tf.s.t());
                for r in 0..n {
                    for cc in 0..n {
                        let want = if r == cc { 1.0 } else { 0.0 };
                        prop_assert!((eye[[r, cc]] - want).abs() < 1e-8);
                    }
                }
                // Structural validation passes, junction integers included.
                let ms = build_mode_system(&c, &t, nm, tf).unwrap();
                for jm in &ms.junctions {
                    for &nn in &jm.jos {
                        prop_assert!(nn.abs() <= 1, "tree-cut functional must give |n| ≤ 1");
                    }
                }
            }
        }
    }
}
