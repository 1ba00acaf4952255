//! Coined walk on the direct sum of per-node coin spaces.
//!
//! Basis states are directed arcs `tail -> head`. Arcs are grouped by tail
//! with heads ascending, so the coin space of node `i` is the contiguous
//! block `block_offset[i]..block_offset[i + 1]`. One step is `U = S * C`:
//! a Grover reflection inside every block (negated on the marked block)
//! followed by the flip-flop shift that swaps each arc with its reverse.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{ApollonianGraph, NodeId};
use crate::scalar::Real;

/// Indexed arc set of a graph.
#[derive(Debug, Clone)]
pub struct ArcSpace {
    graph: Arc<ApollonianGraph>,
    tails: Vec<NodeId>,
    heads: Vec<NodeId>,
    block_offset: Vec<usize>,
    reverse: Vec<usize>,
    last_generation: Vec<bool>,
}

impl ArcSpace {
    pub fn build(graph: impl Into<Arc<ApollonianGraph>>) -> Self {
        let graph = graph.into();
        let n = graph.node_count();
        let mut block_offset = Vec::with_capacity(n + 1);
        let mut tails = Vec::new();
        let mut heads = Vec::new();
        block_offset.push(0);
        for i in graph.nodes() {
            for &j in graph.neighbors(i) {
                tails.push(i);
                heads.push(j);
            }
            block_offset.push(tails.len());
        }
        let reverse = tails
            .iter()
            .zip(&heads)
            .map(|(&i, &j)| {
                let pos = graph
                    .neighbors(j)
                    .binary_search(&i)
                    .expect("adjacency is symmetric");
                block_offset[j.index()] + pos
            })
            .collect();
        let k = graph.generation();
        let last_generation = graph
            .node_generations()
            .iter()
            .map(|&g| g == k)
            .collect();
        ArcSpace {
            graph,
            tails,
            heads,
            block_offset,
            reverse,
            last_generation,
        }
    }

    pub fn graph(&self) -> &ApollonianGraph {
        &self.graph
    }

    pub fn shared_graph(&self) -> Arc<ApollonianGraph> {
        Arc::clone(&self.graph)
    }

    /// Dimension of the walk space (`2E`).
    pub fn len(&self) -> usize {
        self.tails.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tails.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.block_offset.len() - 1
    }

    pub fn arc(&self, index: usize) -> (NodeId, NodeId) {
        (self.tails[index], self.heads[index])
    }

    pub fn tail(&self, index: usize) -> NodeId {
        self.tails[index]
    }

    pub fn head(&self, index: usize) -> NodeId {
        self.heads[index]
    }

    /// Index of the arc `tail -> head`, if the edge exists.
    pub fn arc_index(&self, tail: NodeId, head: NodeId) -> Option<usize> {
        if !self.graph.contains(tail) {
            return None;
        }
        self.graph
            .neighbors(tail)
            .binary_search(&head)
            .ok()
            .map(|p| self.block_offset[tail.index()] + p)
    }

    pub fn block(&self, node: NodeId) -> std::ops::Range<usize> {
        self.block_offset[node.index()]..self.block_offset[node.index() + 1]
    }

    pub fn block_offsets(&self) -> &[usize] {
        &self.block_offset
    }

    pub fn reverse_index(&self) -> &[usize] {
        &self.reverse
    }

    pub fn reverse(&self, index: usize) -> usize {
        self.reverse[index]
    }

    pub fn is_last_generation(&self, node: NodeId) -> bool {
        self.last_generation[node.index()]
    }

    pub fn last_generation_nodes(&self) -> Vec<NodeId> {
        self.graph.last_generation()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::Contract(format!(
                "state has {len} amplitudes, arc space has {}",
                self.len()
            )));
        }
        Ok(())
    }

    fn check_node(&self, node: NodeId) -> Result<()> {
        if !self.graph.contains(node) {
            return Err(Error::param(format!(
                "node {node} out of range 0..{}",
                self.node_count()
            )));
        }
        Ok(())
    }
}

/// Which node, if any, carries the negated coin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CoinSpec {
    pub marked: Option<NodeId>,
}

impl CoinSpec {
    pub fn unmarked() -> Self {
        CoinSpec { marked: None }
    }

    pub fn marked(node: NodeId) -> Self {
        CoinSpec { marked: Some(node) }
    }
}

/// Real amplitude vector over arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState<T> {
    amplitudes: Vec<T>,
}

impl<T: Real> WalkState<T> {
    pub fn from_amplitudes(amplitudes: Vec<T>) -> Self {
        WalkState { amplitudes }
    }

    pub fn zeros(len: usize) -> Self {
        WalkState {
            amplitudes: vec![T::zero(); len],
        }
    }

    /// Unit vector on a single arc.
    pub fn basis(len: usize, index: usize) -> Self {
        let mut s = Self::zeros(len);
        s.amplitudes[index] = T::one();
        s
    }

    pub fn amplitudes(&self) -> &[T] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [T] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<T> {
        self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|&a| a * a).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn dot(&self, other: &Self) -> T {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    /// Scale to unit norm. Returns `None` for the zero vector.
    pub fn normalized(mut self) -> Option<Self> {
        let n = self.norm();
        if n == T::zero() {
            return None;
        }
        for a in &mut self.amplitudes {
            *a = *a / n;
        }
        Some(self)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    /// Flat `(tail, head, amplitude)` listing for debugging.
    pub fn snapshot(&self, arcs: &ArcSpace) -> Vec<(NodeId, NodeId, T)> {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(k, &a)| (arcs.tail(k), arcs.head(k), a))
            .collect()
    }
}

/// Dense `d x d` Grover diffusion matrix: every entry `2/d`, minus identity.
pub fn grover_coin<T: Real>(d: usize) -> Result<DMatrix<T>> {
    if d == 0 {
        return Err(Error::param("coin dimension must be positive"));
    }
    let two_over_d = T::from_f64_lossy(2.0) / <T as Real>::from_usize(d);
    Ok(DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            two_over_d - T::one()
        } else {
            two_over_d
        }
    }))
}

/// Apply the block coin in place: `a <- 2 mean(block) - a` per block,
/// negated on the marked block.
pub fn apply_coin_in_place<T: Real>(amplitudes: &mut [T], arcs: &ArcSpace, coin: CoinSpec) {
    debug_assert_eq!(amplitudes.len(), arcs.len());
    let two = T::from_f64_lossy(2.0);
    for (i, w) in arcs.block_offset.windows(2).enumerate() {
        let block = &mut amplitudes[w[0]..w[1]];
        if block.is_empty() {
            continue;
        }
        let sum: T = block.iter().copied().sum();
        let twice_mean = two * sum / <T as Real>::from_usize(block.len());
        if coin.marked.map(|m| m.index()) == Some(i) {
            for a in block.iter_mut() {
                *a = *a - twice_mean;
            }
        } else {
            for a in block.iter_mut() {
                *a = twice_mean - *a;
            }
        }
    }
}

pub fn apply_coin<T: Real>(
    state: &WalkState<T>,
    arcs: &ArcSpace,
    coin: CoinSpec,
) -> Result<WalkState<T>> {
    arcs.check_len(state.len())?;
    if let Some(m) = coin.marked {
        arcs.check_node(m)?;
    }
    let mut out = state.clone();
    apply_coin_in_place(&mut out.amplitudes, arcs, coin);
    Ok(out)
}

/// Flip-flop shift: the amplitude of `i -> j` moves to `j -> i`.
pub fn apply_shift<T: Real>(state: &WalkState<T>, arcs: &ArcSpace) -> Result<WalkState<T>> {
    arcs.check_len(state.len())?;
    let mut out = WalkState::zeros(state.len());
    shift_into(&state.amplitudes, &mut out.amplitudes, arcs);
    Ok(out)
}

#[inline]
fn shift_into<T: Copy>(src: &[T], dst: &mut [T], arcs: &ArcSpace) {
    // S is an involution, so gathering through the reverse index equals scattering.
    for (d, &r) in dst.iter_mut().zip(&arcs.reverse) {
        *d = src[r];
    }
}

/// One walk step `S * C`.
pub fn step<T: Real>(state: &WalkState<T>, arcs: &ArcSpace, coin: CoinSpec) -> Result<WalkState<T>> {
    let coined = apply_coin(state, arcs, coin)?;
    let mut out = WalkState::zeros(state.len());
    shift_into(&coined.amplitudes, &mut out.amplitudes, arcs);
    Ok(out)
}

/// Reusable evolution buffers for repeated steps on one arc space.
#[derive(Debug, Clone)]
pub struct Walker<'a, T> {
    arcs: &'a ArcSpace,
    coin: CoinSpec,
    state: Vec<T>,
    scratch: Vec<T>,
}

impl<'a, T: Real> Walker<'a, T> {
    pub fn new(arcs: &'a ArcSpace, coin: CoinSpec, start: WalkState<T>) -> Result<Self> {
        arcs.check_len(start.len())?;
        if let Some(m) = coin.marked {
            arcs.check_node(m)?;
        }
        let scratch = vec![T::zero(); start.len()];
        Ok(Walker {
            arcs,
            coin,
            state: start.amplitudes,
            scratch,
        })
    }

    pub fn advance(&mut self) {
        apply_coin_in_place(&mut self.state, self.arcs, self.coin);
        shift_into(&self.state, &mut self.scratch, self.arcs);
        std::mem::swap(&mut self.state, &mut self.scratch);
    }

    pub fn amplitudes(&self) -> &[T] {
        &self.state
    }

    /// Squared mass on the block of `node`.
    pub fn node_probability(&self, node: NodeId) -> T {
        self.state[self.arcs.block(node)].iter().map(|&a| a * a).sum()
    }

    pub fn state(&self) -> WalkState<T> {
        WalkState::from_amplitudes(self.state.clone())
    }

    pub fn into_state(self) -> WalkState<T> {
        WalkState::from_amplitudes(self.state)
    }
}

/// Equal superposition over every arc whose tail is in `nodes`.
pub fn initial_state<T: Real>(arcs: &ArcSpace, nodes: &[NodeId]) -> Result<WalkState<T>> {
    if nodes.is_empty() {
        return Err(Error::param("initial node set is empty"));
    }
    let mut selected = vec![false; arcs.node_count()];
    for &n in nodes {
        arcs.check_node(n)?;
        selected[n.index()] = true;
    }
    let count: usize = arcs
        .graph()
        .nodes()
        .filter(|n| selected[n.index()])
        .map(|n| arcs.block(n).len())
        .sum();
    if count == 0 {
        return Err(Error::param("initial node set has no arcs"));
    }
    let amp = T::one() / <T as Real>::from_usize(count).sqrt();
    let mut state = WalkState::zeros(arcs.len());
    for n in arcs.graph().nodes().filter(|n| selected[n.index()]) {
        for a in &mut state.amplitudes[arcs.block(n)] {
            *a = amp;
        }
    }
    Ok(state)
}

/// Uniform state over all arcs.
pub fn uniform_state<T: Real>(arcs: &ArcSpace) -> WalkState<T> {
    let amp = T::one() / <T as Real>::from_usize(arcs.len()).sqrt();
    WalkState::from_amplitudes(vec![amp; arcs.len()])
}

/// Local equal superposition `|t_m>` on the block of `m`.
pub fn marked_target_state<T: Real>(arcs: &ArcSpace, m: NodeId) -> Result<WalkState<T>> {
    initial_state(arcs, &[m])
}

/// Per-node probability of the position register.
pub fn position_distribution<T: Real>(state: &WalkState<T>, arcs: &ArcSpace) -> Result<Vec<T>> {
    arcs.check_len(state.len())?;
    Ok(arcs
        .block_offset
        .windows(2)
        .map(|w| state.amplitudes[w[0]..w[1]].iter().map(|&a| a * a).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_apollonian;

    fn space(k: u32) -> ArcSpace {
        ArcSpace::build(build_apollonian(k).unwrap())
    }

    /// Dense `S * C` from explicit coin matrices and the arc pairing.
    fn dense_step(arcs: &ArcSpace, coin: CoinSpec) -> DMatrix<f64> {
        let n = arcs.len();
        let mut c = DMatrix::<f64>::zeros(n, n);
        for node in arcs.graph().nodes() {
            let r = arcs.block(node);
            let mut g = grover_coin::<f64>(r.len()).unwrap();
            if coin.marked == Some(node) {
                g = -g;
            }
            c.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&g);
        }
        let mut s = DMatrix::<f64>::zeros(n, n);
        for a in 0..n {
            let (i, j) = arcs.arc(a);
            s[(arcs.arc_index(j, i).unwrap(), a)] = 1.0;
        }
        s * c
    }

    #[test]
    fn arc_counts() {
        let a4 = space(4);
        assert_eq!(a4.len(), 246);
        let a0 = space(0);
        assert_eq!(a0.len(), 6);
        for k in 0..6 {
            assert_eq!(a0.reverse(a0.reverse(k)), k);
            assert_ne!(a0.reverse(k), k);
            let (i, j) = a0.arc(k);
            assert_eq!(a0.arc(a0.reverse(k)), (j, i));
        }
        let a2 = space(2);
        let mut sizes: Vec<usize> = a2.graph().nodes().map(|n| a2.block(n).len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 3, 5, 5, 5, 6]);
    }

    #[test]
    fn grover_coin_examples() {
        let g2 = grover_coin::<f64>(2).unwrap();
        assert_eq!(g2, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let g3 = grover_coin::<f64>(3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { -1.0 / 3.0 } else { 2.0 / 3.0 };
                assert!((g3[(i, j)] - want).abs() < 1e-15);
            }
        }
        let g5 = grover_coin::<f64>(5).unwrap();
        let u = DMatrix::from_element(5, 1, 1.0);
        assert!((&g5 * &u - &u).abs().max() < 1e-15);
        assert!((&g5 * &g5 - DMatrix::identity(5, 5)).abs().max() < 1e-14);
        assert!(grover_coin::<f64>(0).is_err());
        assert_eq!(grover_coin::<f64>(1).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn coin_on_localized_arc() {
        let arcs = space(1);
        let input = WalkState::<f64>::basis(arcs.len(), 0);
        let out = apply_coin(&input, &arcs, CoinSpec::unmarked()).unwrap();
        let g3 = grover_coin::<f64>(3).unwrap();
        let want = [g3[(0, 0)], g3[(1, 0)], g3[(2, 0)]];
        for (k, w) in want.iter().enumerate() {
            assert!((out.amplitudes()[k] - w).abs() < 1e-15);
        }
        assert!((out.amplitudes()[0] + 1.0 / 3.0).abs() < 1e-15);
        assert!(out.amplitudes()[3..].iter().all(|&a| a == 0.0));

        let marked = apply_coin(&input, &arcs, CoinSpec::marked(NodeId(0))).unwrap();
        for k in 0..3 {
            assert!((marked.amplitudes()[k] + out.amplitudes()[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_is_fixed() {
        let arcs = space(3);
        let u = uniform_state::<f64>(&arcs);
        let c = apply_coin(&u, &arcs, CoinSpec::unmarked()).unwrap();
        assert!(c.max_abs_diff(&u) < 1e-15);
        let s = apply_shift(&u, &arcs).unwrap();
        assert!(s.max_abs_diff(&u) < 1e-15);
        let st = step(&u, &arcs, CoinSpec::unmarked()).unwrap();
        assert!(st.max_abs_diff(&u) < 1e-12);
    }

    #[test]
    fn shift_moves_and_involutes() {
        let arcs = space(2);
        let a01 = arcs.arc_index(NodeId(0), NodeId(1)).unwrap();
        let a10 = arcs.arc_index(NodeId(1), NodeId(0)).unwrap();
        let s = apply_shift(&WalkState::<f64>::basis(arcs.len(), a01), &arcs).unwrap();
        assert_eq!(s, WalkState::basis(arcs.len(), a10));
        let back = apply_shift(&s, &arcs).unwrap();
        assert_eq!(back, WalkState::basis(arcs.len(), a01));
    }

    #[test]
    fn step_transports_coin_output() {
        let arcs = space(1);
        let input = WalkState::<f64>::basis(arcs.len(), 0);
        let coined = apply_coin(&input, &arcs, CoinSpec::unmarked()).unwrap();
        let out = step(&input, &arcs, CoinSpec::unmarked()).unwrap();
        for k in 0..3 {
            assert_eq!(out.amplitudes()[arcs.reverse(k)], coined.amplitudes()[k]);
        }
    }

    #[test]
    fn step_matches_dense_product() {
        for k in 0..=3 {
            let arcs = space(k);
            for coin in [CoinSpec::unmarked(), CoinSpec::marked(NodeId(arcs.node_count() as u32 - 1))] {
                let u = dense_step(&arcs, coin);
                for col in 0..arcs.len() {
                    let e = WalkState::<f64>::basis(arcs.len(), col);
                    let fast = step(&e, &arcs, coin).unwrap();
                    for row in 0..arcs.len() {
                        assert!((fast.amplitudes()[row] - u[(row, col)]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn walker_matches_step() {
        let arcs = space(3);
        let coin = CoinSpec::marked(NodeId(5));
        let start = initial_state::<f64>(&arcs, &arcs.last_generation_nodes()).unwrap();
        let mut w = Walker::new(&arcs, coin, start.clone()).unwrap();
        let mut s = start;
        for _ in 0..7 {
            w.advance();
            s = step(&s, &arcs, coin).unwrap();
        }
        assert_eq!(w.state(), s);
    }

    #[test]
    fn initial_states() {
        let arcs = space(4);
        let all: Vec<NodeId> = arcs.graph().nodes().collect();
        let full = initial_state::<f64>(&arcs, &all).unwrap();
        let amp = 1.0 / 246f64.sqrt();
        assert!(full.amplitudes().iter().all(|&a| (a - amp).abs() < 1e-15));

        let last = initial_state::<f64>(&arcs, &arcs.last_generation_nodes()).unwrap();
        let nonzero: Vec<f64> = last.amplitudes().iter().copied().filter(|&a| a != 0.0).collect();
        assert_eq!(nonzero.len(), 81);
        assert!(nonzero.iter().all(|&a| (a - 1.0 / 9.0).abs() < 1e-15));

        let a2 = space(2);
        let center = initial_state::<f64>(&a2, &[NodeId(3)]).unwrap();
        assert_eq!(center.amplitudes().iter().filter(|&&a| a != 0.0).count(), 6);
        assert!(center.amplitudes()[a2.block(NodeId(3))]
            .iter()
            .all(|&a| (a - 1.0 / 6f64.sqrt()).abs() < 1e-15));

        assert!(matches!(initial_state::<f64>(&arcs, &[]), Err(Error::Parameter(_))));
        assert!(matches!(
            initial_state::<f64>(&arcs, &[NodeId(43)]),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn target_states() {
        let arcs = space(4);
        let m = arcs.last_generation_nodes()[0];
        let t = marked_target_state::<f64>(&arcs, m).unwrap();
        let r = arcs.block(m);
        assert_eq!(r.len(), 3);
        assert!(t.amplitudes()[r].iter().all(|&a| (a - 1.0 / 3f64.sqrt()).abs() < 1e-15));

        let full = uniform_state::<f64>(&arcs);
        for node in [m, NodeId(0), NodeId(3)] {
            let t = marked_target_state::<f64>(&arcs, node).unwrap();
            let d = arcs.graph().degree(node) as f64;
            assert!((t.dot(&full) - (d / 246.0).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn position_distribution_examples() {
        let arcs = space(3);
        let full = uniform_state::<f64>(&arcs);
        let p = position_distribution(&full, &arcs).unwrap();
        for n in arcs.graph().nodes() {
            let want = arcs.graph().degree(n) as f64 / arcs.len() as f64;
            assert!((p[n.index()] - want).abs() < 1e-15);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let t = marked_target_state::<f64>(&arcs, NodeId(4)).unwrap();
        let p = position_distribution(&t, &arcs).unwrap();
        assert!((p[4] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn one_step_distribution_matches_dense() {
        let arcs = space(2);
        let coin = CoinSpec::marked(NodeId(3));
        let start = initial_state::<f64>(&arcs, &arcs.last_generation_nodes()).unwrap();
        let fast = step(&start, &arcs, coin).unwrap();
        let dense = dense_step(&arcs, coin) * nalgebra::DVector::from_column_slice(start.amplitudes());
        let dense = WalkState::from_amplitudes(dense.as_slice().to_vec());
        let pf = position_distribution(&fast, &arcs).unwrap();
        let pd = position_distribution(&dense, &arcs).unwrap();
        for (a, b) in pf.iter().zip(&pd) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch_is_contract_error() {
        let arcs = space(1);
        let bad = WalkState::<f64>::zeros(3);
        assert!(matches!(apply_coin(&bad, &arcs, CoinSpec::unmarked()), Err(Error::Contract(_))));
        assert!(matches!(apply_shift(&bad, &arcs), Err(Error::Contract(_))));
    }

    #[test]
    fn single_precision_walk() {
        let arcs = space(3);
        let mut s = uniform_state::<f32>(&arcs);
        for _ in 0..100 {
            s = step(&s, &arcs, CoinSpec::marked(NodeId(2))).unwrap();
        }
        assert!((s.norm() - 1.0).abs() < 1e-4);
    }
}
