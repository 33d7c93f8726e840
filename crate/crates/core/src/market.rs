//! Finite-state markets, multi-period trees and the martingale-measure
//! primitives built on them.
//!
//! A [`FiniteMarket`] describes a static market: `K` states with positive
//! probabilities, a `K × J` matrix whose column `j` is the terminal gain of
//! one unit of traded (synthetic) asset `j`, and a `K × m` matrix of claim
//! payoffs. Terminal wealth from initial capital `x` and holdings `H` is
//! `x + gains·H`. Every constructed market carries a strictly positive
//! equivalent martingale density as its no-arbitrage certificate.
//!
//! Multi-period trees are reduced exactly to static markets by
//! [`reduce_tree`]: one gain column per (non-terminal node, asset).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{invalid, invariant, Error, Result};
use crate::linalg;
use crate::lp::{self, LpStatus};

/// Largest state space for which EMM vertices are enumerated.
pub const DEFAULT_VERTEX_CAP: usize = 16;
/// Leaf cap for tree reduction.
pub const MAX_TREE_LEAVES: usize = 8192;
/// Minimum slack of the certificate density for an arbitrage-free verdict.
pub const MIN_SLACK: f64 = 1e-10;

const PROB_SUM_TOL: f64 = 1e-12;
const EMM_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct FiniteMarket {
    probs: Vec<f64>,
    gains: DMatrix<f64>,
    claims: DMatrix<f64>,
    certificate: Vec<f64>,
    pub state_labels: Vec<String>,
    pub asset_labels: Vec<String>,
}

/// Outcome of [`check_no_arbitrage`].
#[derive(Debug, Clone, PartialEq)]
pub enum NoArbitrage {
    /// A strictly positive martingale density `z` (`Σ p z = 1`, `Σ p z g_j = 0`)
    /// whose smallest entry is `min_slack`.
    Free { density: Vec<f64>, min_slack: f64 },
    /// Holdings whose payoff `gains·strategy` is nonnegative and positive in
    /// some state.
    Arbitrage { strategy: Vec<f64>, payoff: Vec<f64> },
}

impl NoArbitrage {
    pub fn is_free(&self) -> bool {
        matches!(self, NoArbitrage::Free { .. })
    }
}

fn validate_parts(probs: &[f64], gains: &DMatrix<f64>, claims: &DMatrix<f64>) -> Result<()> {
    let k = probs.len();
    if k == 0 {
        return Err(invalid!("market needs at least one state"));
    }
    if gains.nrows() != k || claims.nrows() != k {
        return Err(invalid!(
            "shape mismatch: {k} probabilities, {} gain rows, {} claim rows",
            gains.nrows(),
            claims.nrows()
        ));
    }
    if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(invalid!("state probabilities must be strictly positive, got {p}"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(invalid!("state probabilities sum to {sum}, expected 1"));
    }
    if gains.iter().chain(claims.iter()).any(|v| !v.is_finite()) {
        return Err(invalid!("payoff entries must be finite"));
    }
    Ok(())
}

impl FiniteMarket {
    /// Validates the inputs and requires absence of arbitrage.
    pub fn new(probs: Vec<f64>, gains: DMatrix<f64>, claims: DMatrix<f64>) -> Result<Self> {
        validate_parts(&probs, &gains, &claims)?;
        match check_no_arbitrage(&probs, &gains)? {
            NoArbitrage::Free { density, .. } => Ok(FiniteMarket {
                probs,
                gains,
                claims,
                certificate: density,
                state_labels: Vec::new(),
                asset_labels: Vec::new(),
            }),
            NoArbitrage::Arbitrage { strategy, .. } => {
                Err(Error::Arbitrage(alloc::format!("arbitrage strategy {strategy:?}")))
            }
        }
    }

    /// Column-wise constructor: `gain_cols[j]` and `claim_cols[i]` are K-vectors.
    pub fn from_columns(probs: Vec<f64>, gain_cols: &[Vec<f64>], claim_cols: &[Vec<f64>]) -> Result<Self> {
        let k = probs.len();
        let gains = columns_to_matrix(k, gain_cols)?;
        let claims = columns_to_matrix(k, claim_cols)?;
        Self::new(probs, gains, claims)
    }

    /// Builds a market from a density already known to be an equivalent
    /// martingale density; the density is verified, not trusted.
    pub fn with_certificate(
        probs: Vec<f64>,
        gains: DMatrix<f64>,
        claims: DMatrix<f64>,
        density: Vec<f64>,
    ) -> Result<Self> {
        validate_parts(&probs, &gains, &claims)?;
        let min = density.iter().cloned().fold(f64::INFINITY, f64::min);
        if density.len() != probs.len() || !(min > MIN_SLACK) {
            return Err(invariant!("certificate density is not strictly positive"));
        }
        let defect = emm_defect(&probs, &gains, &density);
        if defect > EMM_TOL {
            return Err(invariant!("certificate density violates the martingale equalities by {defect:e}"));
        }
        Ok(FiniteMarket {
            probs,
            gains,
            claims,
            certificate: density,
            state_labels: Vec::new(),
            asset_labels: Vec::new(),
        })
    }

    /// Same states and traded assets with a different claim matrix.
    pub fn with_claims(&self, claims: DMatrix<f64>) -> Result<Self> {
        validate_parts(&self.probs, &self.gains, &claims)?;
        let mut out = self.clone();
        out.claims = claims;
        Ok(out)
    }

    pub fn with_claim_columns(&self, claim_cols: &[Vec<f64>]) -> Result<Self> {
        self.with_claims(columns_to_matrix(self.n_states(), claim_cols)?)
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }
    pub fn n_assets(&self) -> usize {
        self.gains.ncols()
    }
    pub fn n_claims(&self) -> usize {
        self.claims.ncols()
    }
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
    pub fn gains(&self) -> &DMatrix<f64> {
        &self.gains
    }
    pub fn claims(&self) -> &DMatrix<f64> {
        &self.claims
    }
    /// The strictly positive EMM density found at construction.
    pub fn certificate(&self) -> &[f64] {
        &self.certificate
    }

    pub fn claim_column(&self, i: usize) -> Vec<f64> {
        self.claims.column(i).iter().cloned().collect()
    }

    pub fn gain_column(&self, j: usize) -> Vec<f64> {
        self.gains.column(j).iter().cloned().collect()
    }

    /// `Σₖ pₖ zₖ vₖ`.
    pub fn expectation(&self, density: &[f64], v: &[f64]) -> f64 {
        linalg::weighted_dot(&self.probs, density, v)
    }

    /// `Σₖ pₖ vₖ`.
    pub fn mean(&self, v: &[f64]) -> f64 {
        self.probs.iter().zip(v).map(|(p, v)| p * v).sum()
    }

    /// `gains · holdings`.
    pub fn gain_of(&self, holdings: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states()];
        for (j, h) in holdings.iter().enumerate() {
            if *h == 0.0 {
                continue;
            }
            for (k, o) in out.iter_mut().enumerate() {
                *o += self.gains[(k, j)] * h;
            }
        }
        out
    }

    /// `claims · q`.
    pub fn endowment(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states()];
        for (i, qi) in q.iter().enumerate() {
            if *qi == 0.0 {
                continue;
            }
            for (k, o) in out.iter_mut().enumerate() {
                *o += self.claims[(k, i)] * qi;
            }
        }
        out
    }

    /// Maximum violation of the EMM equalities by `density`.
    pub fn emm_defect(&self, density: &[f64]) -> f64 {
        emm_defect(&self.probs, &self.gains, density)
    }
}

fn columns_to_matrix(k: usize, cols: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if let Some(c) = cols.iter().find(|c| c.len() != k) {
        return Err(invalid!("column of length {} in a {k}-state market", c.len()));
    }
    Ok(DMatrix::from_fn(k, cols.len(), |r, c| cols[c][r]))
}

fn emm_defect(probs: &[f64], gains: &DMatrix<f64>, density: &[f64]) -> f64 {
    let mass: f64 = probs.iter().zip(density).map(|(p, z)| p * z).sum();
    let mut defect = (mass - 1.0).abs();
    for j in 0..gains.ncols() {
        let m: f64 = (0..probs.len()).map(|k| probs[k] * density[k] * gains[(k, j)]).sum();
        defect = defect.max(m.abs());
    }
    defect
}

/// Decides absence of arbitrage.
///
/// Solves `max t` over densities `z = t + s`, `s ≥ 0`, satisfying the EMM
/// equalities. The market is arbitrage-free when the optimal `t` exceeds
/// [`MIN_SLACK`]; otherwise a second LP produces holdings with nonnegative,
/// nonzero payoff.
pub fn check_no_arbitrage(probs: &[f64], gains: &DMatrix<f64>) -> Result<NoArbitrage> {
    validate_parts(probs, gains, &DMatrix::zeros(probs.len(), 0))?;
    let (k, j) = gains.shape();
    if j == 0 {
        return Ok(NoArbitrage::Free { density: vec![1.0; k], min_slack: 1.0 });
    }
    // Variables: t, s_1..s_K.
    let mut a = DMatrix::zeros(1 + j, 1 + k);
    let mut b = vec![0.0; 1 + j];
    a[(0, 0)] = 1.0;
    b[0] = 1.0;
    for s in 0..k {
        a[(0, 1 + s)] = probs[s];
    }
    for col in 0..j {
        let mut pg = 0.0;
        for s in 0..k {
            let v = probs[s] * gains[(s, col)];
            a[(1 + col, 1 + s)] = v;
            pg += v;
        }
        a[(1 + col, 0)] = pg;
    }
    let mut c = vec![0.0; 1 + k];
    c[0] = 1.0;
    let sol = lp::maximize(&c, &a, &b)?;
    if sol.status == LpStatus::Optimal && sol.x[0] > MIN_SLACK {
        let t = sol.x[0];
        let mut density: Vec<f64> = (0..k).map(|s| t + sol.x[1 + s]).collect();
        // Re-normalize away LP roundoff.
        let mass: f64 = probs.iter().zip(&density).map(|(p, z)| p * z).sum();
        density.iter_mut().for_each(|z| *z /= mass);
        return Ok(NoArbitrage::Free { density, min_slack: t / mass });
    }
    arbitrage_certificate(probs, gains)
}

fn arbitrage_certificate(probs: &[f64], gains: &DMatrix<f64>) -> Result<NoArbitrage> {
    let (k, j) = gains.shape();
    // Variables: H+ (j), H- (j), v (k), u (k).
    let n = 2 * j + 2 * k;
    let mut a = DMatrix::zeros(2 * k, n);
    let mut b = vec![0.0; 2 * k];
    for s in 0..k {
        for col in 0..j {
            a[(s, col)] = gains[(s, col)];
            a[(s, j + col)] = -gains[(s, col)];
        }
        a[(s, 2 * j + s)] = -1.0;
        a[(k + s, 2 * j + s)] = 1.0;
        a[(k + s, 2 * j + k + s)] = 1.0;
        b[k + s] = 1.0;
    }
    let mut c = vec![0.0; n];
    for s in 0..k {
        c[2 * j + s] = probs[s];
    }
    let sol = lp::maximize(&c, &a, &b)?;
    let strategy: Vec<f64> = (0..j).map(|col| sol.x[col] - sol.x[j + col]).collect();
    let payoff: Vec<f64> = (0..k).map(|s| (0..j).map(|col| gains[(s, col)] * strategy[col]).sum()).collect();
    Ok(NoArbitrage::Arbitrage { strategy, payoff })
}

/// Vertices of the closed EMM polytope `{z ≥ 0, Σ p z = 1, Σ p z g_j = 0}`.
#[derive(Debug, Clone)]
pub struct EmmPolytope {
    pub vertices: Vec<Vec<f64>>,
    pub feasible: bool,
}

/// Enumerates the basic feasible solutions of the EMM system.
///
/// Supports of every size up to the rank of the equality system are tried;
/// a support contributes a vertex when its columns are independent and the
/// unique solution is nonnegative. Duplicates are merged at 1e-9.
pub fn emm_vertices(market: &FiniteMarket, cap: usize) -> Result<EmmPolytope> {
    let k = market.n_states();
    if k > cap {
        return Err(invalid!("vertex enumeration capped at {cap} states, market has {k}"));
    }
    let j = market.n_assets();
    let probs = market.probs();
    let eq = DMatrix::from_fn(1 + j, k, |r, s| if r == 0 { probs[s] } else { probs[s] * market.gains()[(s, r - 1)] });
    let mut rhs = vec![0.0; 1 + j];
    rhs[0] = 1.0;
    let r = linalg::rank(&eq, 1e-12);
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut support: Vec<usize> = Vec::new();
    for size in 1..=r {
        support.clear();
        support.extend(0..size);
        loop {
            let sub = DMatrix::from_fn(1 + j, size, |row, c| eq[(row, support[c])]);
            if linalg::rank(&sub, 1e-10) == size {
                let (coef, resid) = linalg::least_squares(&sub, &rhs);
                if linalg::max_abs_slice(&resid) < EMM_TOL && coef.iter().all(|v| *v > -1e-12) {
                    let mut z = vec![0.0; k];
                    for (c, &s) in support.iter().enumerate() {
                        z[s] = coef[c].max(0.0);
                    }
                    let dup = vertices.iter().any(|v| v.iter().zip(&z).all(|(a, b)| (a - b).abs() < EMM_TOL));
                    if !dup {
                        vertices.push(z);
                    }
                }
            }
            if !next_combination(&mut support, k) {
                break;
            }
        }
    }
    if vertices.is_empty() {
        return Err(Error::Arbitrage("EMM polytope is empty".into()));
    }
    Ok(EmmPolytope { vertices, feasible: true })
}

/// Advances `comb` (strictly increasing indices below `n`) to the next
/// combination in lexicographic order.
pub(crate) fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let size = comb.len();
    let mut i = size;
    while i > 0 {
        i -= 1;
        if comb[i] < n - size + i {
            comb[i] += 1;
            for t in i + 1..size {
                comb[t] = comb[t - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Result of [`is_replicable`].
#[derive(Debug, Clone)]
pub struct Replicability {
    pub replicable: bool,
    /// Arbitrage-free price when replicable.
    pub cost: Option<f64>,
    /// Euclidean norm of the least-squares residual onto `span{1, gains}`.
    pub residual_norm: f64,
    pub span_verdict: bool,
    /// `None` when the state space exceeds the vertex cap.
    pub vertex_verdict: Option<bool>,
    pub vertex_spread: Option<f64>,
}

/// Replicability by two routes: the least-squares residual onto
/// `span{1, gains}` and the spread of EMM-vertex expectations. The routes
/// must agree.
pub fn is_replicable(claim: &[f64], market: &FiniteMarket) -> Result<Replicability> {
    let k = market.n_states();
    if claim.len() != k {
        return Err(invalid!("claim has {} entries, market has {k} states", claim.len()));
    }
    let (residual_norm, span_verdict) = span_residual(claim, market);
    let (vertex_verdict, vertex_spread) = if k <= DEFAULT_VERTEX_CAP {
        let poly = emm_vertices(market, DEFAULT_VERTEX_CAP)?;
        let exps: Vec<f64> = poly.vertices.iter().map(|z| market.expectation(z, claim)).collect();
        let lo = exps.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let zmax = poly.vertices.iter().map(|z| linalg::max_abs_slice(z)).fold(0.0, f64::max);
        let tol = 1e-8 * (1.0 + linalg::norm2(claim)) * (1.0 + zmax);
        (Some(hi - lo < tol), Some(hi - lo))
    } else {
        (None, None)
    };
    if let Some(v) = vertex_verdict {
        if v != span_verdict {
            return Err(invariant!(
                "replicability tests disagree: span residual {residual_norm:e}, vertex spread {:e}",
                vertex_spread.unwrap_or(f64::NAN)
            ));
        }
    }
    let cost = span_verdict.then(|| market.expectation(market.certificate(), claim));
    Ok(Replicability { replicable: span_verdict, cost, residual_norm, span_verdict, vertex_verdict, vertex_spread })
}

/// Least-squares residual norm of `claim` onto `span{1, gains}` and the span verdict.
pub fn span_residual(claim: &[f64], market: &FiniteMarket) -> (f64, bool) {
    let design = span_design(market);
    let (_, resid) = linalg::least_squares(&design, claim);
    let norm = linalg::norm2(&resid);
    (norm, norm < 1e-9 * (1.0 + linalg::norm2(claim)))
}

/// `[1 | gains]`.
pub fn span_design(market: &FiniteMarket) -> DMatrix<f64> {
    let (k, j) = market.gains().shape();
    DMatrix::from_fn(k, j + 1, |r, c| if c == 0 { 1.0 } else { market.gains()[(r, c - 1)] })
}

/// Gains re-expressed in units of a positive numéraire.
///
/// Column 0 is the discounted bond `n0/N_T − 1`; column `j+1` is the
/// discounted synthetic asset `j`, whose initial price is zero and terminal
/// value is its gain, so it equals `n0·gain_j/N_T`.
pub fn change_numeraire(
    market: &FiniteMarket,
    numeraire_terminal: &[f64],
    numeraire_initial: f64,
) -> Result<DMatrix<f64>> {
    let (k, j) = market.gains().shape();
    if numeraire_terminal.len() != k {
        return Err(invalid!("numéraire has {} entries, market has {k} states", numeraire_terminal.len()));
    }
    if !(numeraire_initial > 0.0) || numeraire_terminal.iter().any(|v| !(*v > 0.0)) {
        return Err(invalid!("numéraire must be strictly positive"));
    }
    let g = market.gains();
    Ok(DMatrix::from_fn(k, j + 1, |r, c| {
        let ratio = numeraire_initial / numeraire_terminal[r];
        if c == 0 {
            ratio - 1.0
        } else {
            let v = g[(r, c - 1)];
            if v == 0.0 {
                0.0
            } else {
                ratio * v
            }
        }
    }))
}

/// A node of a recombination-free price tree.
///
/// `prob` is the transition probability from the parent (ignored at the
/// root); `claims` is read on leaves only.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub price: Vec<f64>,
    pub prob: f64,
    pub claims: Vec<f64>,
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    pub fn leaf(price: Vec<f64>, prob: f64, claims: Vec<f64>) -> Self {
        TreeNode { price, prob, claims, children: Vec::new() }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    fn count(&self) -> (usize, usize) {
        if self.is_leaf() {
            return (0, 1);
        }
        self.children.iter().fold((1, 0), |(i, l), c| {
            let (ci, cl) = c.count();
            (i + ci, l + cl)
        })
    }
}

/// A validated price tree.
#[derive(Debug, Clone)]
pub struct TreeModel {
    root: TreeNode,
    n_assets: usize,
    n_claims: usize,
}

impl TreeModel {
    pub fn new(root: TreeNode) -> Result<Self> {
        let n_assets = root.price.len();
        let n_claims = first_leaf(&root).claims.len();
        validate_node(&root, n_assets, n_claims)?;
        let (_, leaves) = root.count();
        if leaves > MAX_TREE_LEAVES {
            return Err(invalid!("tree has {leaves} leaves, cap is {MAX_TREE_LEAVES}"));
        }
        Ok(TreeModel { root, n_assets, n_claims })
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }
    pub fn n_assets(&self) -> usize {
        self.n_assets
    }
    pub fn n_claims(&self) -> usize {
        self.n_claims
    }
    pub fn n_leaves(&self) -> usize {
        self.root.count().1
    }
    pub fn n_internal(&self) -> usize {
        self.root.count().0
    }

    /// Expected claim payoff by backward induction under the tree's own
    /// transition probabilities.
    pub fn expected_claim(&self, i: usize) -> f64 {
        fn go(n: &TreeNode, i: usize) -> f64 {
            if n.is_leaf() {
                n.claims[i]
            } else {
                n.children.iter().map(|c| c.prob * go(c, i)).sum()
            }
        }
        go(&self.root, i)
    }
}

fn first_leaf(n: &TreeNode) -> &TreeNode {
    if n.is_leaf() {
        n
    } else {
        first_leaf(&n.children[0])
    }
}

fn validate_node(n: &TreeNode, d: usize, m: usize) -> Result<()> {
    if n.price.len() != d {
        return Err(invalid!("tree node with {} prices, expected {d}", n.price.len()));
    }
    if n.price.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(invalid!("tree prices must be strictly positive"));
    }
    if n.is_leaf() {
        if n.claims.len() != m || n.claims.iter().any(|v| !v.is_finite()) {
            return Err(invalid!("every leaf needs {m} finite claim payoffs"));
        }
        return Ok(());
    }
    let sum: f64 = n.children.iter().map(|c| c.prob).sum();
    if n.children.iter().any(|c| !(c.prob > 0.0)) || (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(invalid!("transition probabilities must be positive and sum to 1 (sum {sum})"));
    }
    n.children.iter().try_for_each(|c| validate_node(c, d, m))
}

struct LeafRecord {
    prob: f64,
    density: f64,
    claims: Vec<f64>,
    path: Vec<(usize, Vec<f64>)>,
}

/// Reduces a tree to the equivalent static market.
///
/// Column `(n, j)` is supported on the leaves below internal node `n` and
/// holds the one-step price change of asset `j` on the step leaving `n`
/// toward the leaf. Leaf probabilities are path products. Each node's
/// one-step market is checked for arbitrage; the product of node densities
/// is the certificate of the reduced market.
pub fn reduce_tree(tree: &TreeModel) -> Result<FiniteMarket> {
    let d = tree.n_assets();
    let mut leaves: Vec<LeafRecord> = Vec::new();
    let mut counter = 0usize;
    let mut path = Vec::new();
    walk(&tree.root, 1.0, 1.0, &mut counter, &mut path, &mut leaves)?;
    let k = leaves.len();
    let j = counter * d;
    let mut gains = DMatrix::zeros(k, j);
    let mut claims = DMatrix::zeros(k, tree.n_claims());
    let mut probs = Vec::with_capacity(k);
    let mut density = Vec::with_capacity(k);
    for (row, leaf) in leaves.iter().enumerate() {
        probs.push(leaf.prob);
        density.push(leaf.density);
        for (node, gain) in &leaf.path {
            for (a, g) in gain.iter().enumerate() {
                gains[(row, node * d + a)] = *g;
            }
        }
        for (i, c) in leaf.claims.iter().enumerate() {
            claims[(row, i)] = *c;
        }
    }
    // Path products sum to one only up to roundoff.
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    FiniteMarket::with_certificate(probs, gains, claims, density)
}

fn walk(
    node: &TreeNode,
    prob: f64,
    density: f64,
    counter: &mut usize,
    path: &mut Vec<(usize, Vec<f64>)>,
    out: &mut Vec<LeafRecord>,
) -> Result<()> {
    if node.is_leaf() {
        out.push(LeafRecord { prob, density, claims: node.claims.clone(), path: path.clone() });
        return Ok(());
    }
    let idx = *counter;
    *counter += 1;
    let probs: Vec<f64> = node.children.iter().map(|c| c.prob).collect();
    let total: f64 = probs.iter().sum();
    let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
    let step =
        DMatrix::from_fn(node.children.len(), node.price.len(), |r, a| node.children[r].price[a] - node.price[a]);
    let local = match check_no_arbitrage(&probs, &step)? {
        NoArbitrage::Free { density, .. } => density,
        NoArbitrage::Arbitrage { strategy, .. } => {
            return Err(Error::Arbitrage(alloc::format!(
                "one-step arbitrage at tree node {idx}: holdings {strategy:?}"
            )))
        }
    };
    for (c, child) in node.children.iter().enumerate() {
        let gain: Vec<f64> = (0..node.price.len()).map(|a| step[(c, a)]).collect();
        path.push((idx, gain));
        walk(child, prob * probs[c], density * local[c], counter, path, out)?;
        path.pop();
    }
    Ok(())
}
