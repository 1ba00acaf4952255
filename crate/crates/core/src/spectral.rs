//! Dense spectral checks of the walk operator.
//!
//! The step operator `U = S * C` is real orthogonal. Two independent
//! decompositions are used:
//!
//! * the real Schur form gives the eigenvalues (and so the eigenphases);
//! * an SVD of `U - I` splits the space into the `+1` eigenspace (zero
//!   singular values) and its orthogonal complement, which for a normal
//!   operator is exactly the span of the eigenvectors with eigenvalue
//!   `!= 1`. Singular values equal `2 |sin(theta / 2)|`, so the smallest
//!   nonzero one gives the gap `sigma` directly.
//!
//! The search-relevant subspace `X'` is that complement extended by the
//! start state.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::walk::{grover_coin, marked_target_state, ArcSpace, CoinSpec};

/// Largest walk dimension (`2E`) accepted for dense work.
pub const MAX_DENSE_DIM: usize = 10_000;

/// Singular values of `U - I` below this count as zero.
pub const PLUS_ONE_TOLERANCE: f64 = 1e-8;

/// Residual threshold for the invariant-subspace checks.
pub const INVARIANT_TOLERANCE: f64 = 1e-8;

const ORTHOGONALITY_TOLERANCE: f64 = 1e-10;
const HISTOGRAM_BINS: usize = 24;

/// Dense `S * C` assembled from explicit Grover blocks and the arc pairing.
pub fn dense_step_matrix(arcs: &ArcSpace, coin: CoinSpec) -> Result<DMatrix<f64>> {
    let n = arcs.len();
    if n > MAX_DENSE_DIM {
        return Err(Error::Capacity(format!(
            "dense operator of dimension {n} exceeds the cap of {MAX_DENSE_DIM}"
        )));
    }
    if let Some(m) = coin.marked {
        if !arcs.graph().contains(m) {
            return Err(Error::param(format!("marked node {m} out of range")));
        }
    }
    let mut c = DMatrix::<f64>::zeros(n, n);
    for node in arcs.graph().nodes() {
        let r = arcs.block(node);
        if r.is_empty() {
            continue;
        }
        let mut g = grover_coin::<f64>(r.len())?;
        if coin.marked == Some(node) {
            g.neg_mut();
        }
        c.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&g);
    }
    // S is the permutation e_a -> e_rev(a), so row rev(a) of S*C is row a of C.
    let mut u = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        u.row_mut(arcs.reverse(a)).copy_from(&c.row(a));
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub node: NodeId,
    /// `|P_{+1} t_m|^2`.
    pub plus_one_weight: f64,
    /// `|P_{X'} t_m|^2`.
    pub x_prime_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub dimension: usize,
    /// Eigenphases in `(-pi, pi]`, ascending, repeated by multiplicity.
    pub eigenphases: Vec<f64>,
    pub eigenphase_histogram: Vec<HistogramBin>,
    /// `max | |lambda| - 1 |` over the eigenvalues.
    pub max_modulus_deviation: f64,
    /// Smallest eigenphase magnitude on the complement of the `+1`
    /// eigenspace; 0 when that complement is empty.
    pub sigma: f64,
    /// Set when `sigma` is undefined (the operator is the identity).
    pub degenerate: bool,
    pub plus_one_dim: usize,
    /// `|U s - s|` for the start state `s`.
    pub start_fixed_residual: f64,
    /// `|P_{+1} s|^2`.
    pub start_plus_one_weight: f64,
    pub x_prime_dim: usize,
    pub overlap_table: Vec<OverlapRow>,
}

/// Decomposition of one orthogonal operator relative to a start state.
#[derive(Debug, Clone)]
pub struct SpectralAnalysis {
    matrix: DMatrix<f64>,
    plus_one_basis: DMatrix<f64>,
    x_prime_basis: DMatrix<f64>,
    start: DVector<f64>,
    pub report: SpectralReport,
}

fn check_orthogonal(u: &DMatrix<f64>) -> Result<()> {
    if !u.is_square() {
        return Err(Error::Contract(format!(
            "operator is {}x{}, expected square",
            u.nrows(),
            u.ncols()
        )));
    }
    let n = u.nrows();
    if n <= 512 {
        let dev = (u.transpose() * u - DMatrix::identity(n, n)).abs().max();
        if dev > ORTHOGONALITY_TOLERANCE {
            return Err(Error::Contract(format!(
                "operator is not orthogonal: |U^T U - I|_max = {dev:e}"
            )));
        }
    } else {
        // Large operators: seeded probes instead of the cubic Gram product.
        let mut rng = ChaCha8Rng::seed_from_u64(0x0A7E);
        for _ in 0..4 {
            let v = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
            let back = u.tr_mul(&(u * &v));
            let dev = (back - &v).norm() / v.norm();
            if dev > ORTHOGONALITY_TOLERANCE {
                return Err(Error::Contract(format!(
                    "operator is not orthogonal: probe deviation {dev:e}"
                )));
            }
        }
    }
    Ok(())
}

fn phase(z: nalgebra::Complex<f64>) -> f64 {
    let t = z.im.atan2(z.re);
    if t <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        t
    }
}

fn histogram(phases: &[f64]) -> Vec<HistogramBin> {
    let pi = std::f64::consts::PI;
    let width = 2.0 * pi / HISTOGRAM_BINS as f64;
    let mut bins: Vec<HistogramBin> = (0..HISTOGRAM_BINS)
        .map(|b| HistogramBin {
            lower: -pi + b as f64 * width,
            upper: -pi + (b + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &t in phases {
        // Bins are (lower, upper]; a phase of exactly -pi never occurs.
        let b = (((t + pi) / width).ceil() as usize).clamp(1, HISTOGRAM_BINS) - 1;
        bins[b].count += 1;
    }
    bins
}

/// Column-stack an orthonormal set.
fn stack(columns: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    if columns.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(columns)
    }
}

pub fn eigen_analysis(matrix: &DMatrix<f64>, start: &[f64]) -> Result<SpectralAnalysis> {
    check_orthogonal(matrix)?;
    let n = matrix.nrows();
    if start.len() != n {
        return Err(Error::Contract(format!(
            "start state has {} entries, operator has dimension {n}",
            start.len()
        )));
    }
    let start = DVector::from_column_slice(start);
    let start_norm = start.norm();
    if (start_norm - 1.0).abs() > 1e-10 {
        return Err(Error::Contract(format!("start state norm is {start_norm}")));
    }

    let eigenvalues = matrix.clone().complex_eigenvalues();
    let max_modulus_deviation = eigenvalues
        .iter()
        .map(|z| (z.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    let mut eigenphases: Vec<f64> = eigenvalues.iter().map(|&z| phase(z)).collect();
    eigenphases.sort_by(f64::total_cmp);

    let shifted = matrix - DMatrix::<f64>::identity(n, n);
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut fixed = Vec::new();
    let mut moving = Vec::new();
    let mut smallest_moving = f64::INFINITY;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let v = v_t.row(k).transpose();
        if s < PLUS_ONE_TOLERANCE {
            fixed.push(v);
        } else {
            smallest_moving = smallest_moving.min(s);
            moving.push(v);
        }
    }
    let plus_one_dim = fixed.len();
    let degenerate = moving.is_empty();
    let sigma = if degenerate {
        0.0
    } else {
        2.0 * (smallest_moving / 2.0).min(1.0).asin()
    };

    let plus_one_basis = stack(&fixed, n);
    let mut x_prime = moving;
    let moving_basis = stack(&x_prime, n);
    let remainder = &start - &moving_basis * moving_basis.tr_mul(&start);
    if remainder.norm() > 1e-10 {
        x_prime.push(remainder.normalize());
    }
    let x_prime_basis = stack(&x_prime, n);

    let start_fixed_residual = (matrix * &start - &start).norm();
    let start_plus_one_weight = plus_one_basis.tr_mul(&start).norm_squared();

    let report = SpectralReport {
        dimension: n,
        eigenphase_histogram: histogram(&eigenphases),
        eigenphases,
        max_modulus_deviation,
        sigma,
        degenerate,
        plus_one_dim,
        start_fixed_residual,
        start_plus_one_weight,
        x_prime_dim: x_prime_basis.ncols(),
        overlap_table: Vec::new(),
    };
    Ok(SpectralAnalysis {
        matrix: matrix.clone(),
        plus_one_basis,
        x_prime_basis,
        start,
        report,
    })
}

impl SpectralAnalysis {
    pub fn report(&self) -> &SpectralReport {
        &self.report
    }

    pub fn plus_one_basis(&self) -> &DMatrix<f64> {
        &self.plus_one_basis
    }

    pub fn x_prime_basis(&self) -> &DMatrix<f64> {
        &self.x_prime_basis
    }

    /// Norm of the part of `v` outside `X'`.
    pub fn x_prime_residual(&self, v: &DVector<f64>) -> f64 {
        (v - &self.x_prime_basis * self.x_prime_basis.tr_mul(v)).norm()
    }

    /// Fill the overlap table for the given candidate marked nodes.
    pub fn with_overlaps(mut self, arcs: &ArcSpace, nodes: &[NodeId]) -> Result<Self> {
        self.check_space(arcs)?;
        let mut rows = Vec::with_capacity(nodes.len());
        for &m in nodes {
            let t = DVector::from_vec(marked_target_state::<f64>(arcs, m)?.into_amplitudes());
            rows.push(OverlapRow {
                node: m,
                plus_one_weight: self.plus_one_basis.tr_mul(&t).norm_squared(),
                x_prime_weight: self.x_prime_basis.tr_mul(&t).norm_squared(),
            });
        }
        self.report.overlap_table = rows;
        Ok(self)
    }

    fn check_space(&self, arcs: &ArcSpace) -> Result<()> {
        if arcs.len() != self.report.dimension {
            return Err(Error::Contract(format!(
                "arc space of dimension {} does not match operator dimension {}",
                arcs.len(),
                self.report.dimension
            )));
        }
        Ok(())
    }
}

/// Residuals of the invariant-subspace checks for one marked node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub node: NodeId,
    /// (a) `|s - P_{X'} s|`.
    pub start_residual: f64,
    /// (b) `|t_m - P_{X'} t_m|`.
    pub target_residual: f64,
    /// (c) largest `|w - P_{X'} w|` over probes `w = U O_m v`, `v` in `X'`.
    pub closure_residual: f64,
    pub passed: bool,
}

/// Check that the start state and every `|t_m>` lie in `X'` and that
/// `X'` is closed under `U * O_m`, where `O_m = I - 2 |t_m><t_m|` and `U`
/// is the unmarked step operator with the full uniform state as start.
pub fn verify_fact1(
    arcs: &ArcSpace,
    marked_set: &[NodeId],
    probes: usize,
    seed: u64,
) -> Result<(SpectralAnalysis, Vec<InvariantCheck>)> {
    let u = dense_step_matrix(arcs, CoinSpec::unmarked())?;
    let start = crate::walk::uniform_state::<f64>(arcs).into_amplitudes();
    let analysis = eigen_analysis(&u, &start)?.with_overlaps(arcs, marked_set)?;
    let checks = invariant_checks(&analysis, arcs, marked_set, probes, seed)?;
    Ok((analysis, checks))
}

/// Run the three checks against an existing analysis of the unmarked operator.
pub fn invariant_checks(
    analysis: &SpectralAnalysis,
    arcs: &ArcSpace,
    marked_set: &[NodeId],
    probes: usize,
    seed: u64,
) -> Result<Vec<InvariantCheck>> {
    analysis.check_space(arcs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = &analysis.x_prime_basis;
    let start_residual = analysis.x_prime_residual(&analysis.start);
    let mut out = Vec::with_capacity(marked_set.len());
    for &m in marked_set {
        let t = DVector::from_vec(marked_target_state::<f64>(arcs, m)?.into_amplitudes());
        let target_residual = analysis.x_prime_residual(&t);
        let mut closure_residual: f64 = 0.0;
        for _ in 0..probes {
            let coeffs = DVector::from_fn(q.ncols(), |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let v = (q * coeffs).normalize();
            let flipped = &v - &t * (2.0 * t.dot(&v));
            let w = &analysis.matrix * flipped;
            closure_residual = closure_residual.max(analysis.x_prime_residual(&w));
        }
        out.push(InvariantCheck {
            node: m,
            start_residual,
            target_residual,
            closure_residual,
            passed: start_residual < INVARIANT_TOLERANCE
                && target_residual < INVARIANT_TOLERANCE
                && closure_residual < INVARIANT_TOLERANCE,
        });
    }
    Ok(out)
}
