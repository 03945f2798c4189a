//! Additive model fitting with penalized spline terms.
//!
//! A model is a list of [`TermSpec`]s over named covariate columns. The
//! design matrix is kept row-sparse with per-term deduplication over unique
//! covariate values; identifiability constraints are absorbed into the
//! normal equations through per-term orthonormal reparameterizations, so
//! sparsity of the raw rows is preserved. Smoothing weights are selected by
//! minimizing a generalized cross-validation score with an inflated
//! effective-degrees count, scanning one penalty at a time: for the scanned
//! penalty the penalized system is a low-rank update of a fixed base system,
//! so a whole grid pass costs one factorization.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::optimize::golden_section;
use crate::splines::{
    basis_row, difference_penalty, make_cyclic_knots, make_quantile_knots, tensor_penalties,
    tensor_row, Extrapolation, KnotVector,
};

/// Largest admissible tensor-product block.
const MAX_TENSOR_COLS: usize = 100_000;

/// Relative eigenvalue cutoff separating a penalty's null space from its
/// smallest genuine eigenvalue.
const NULL_SPACE_TOL: f64 = 1e-9;

/// Identifiability constraint of a smooth term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// No constraint; used for multiplier (varying-coefficient) terms whose
    /// scale is identified through the multiplier covariate.
    None,
    /// Training-sample effects sum to zero.
    SumToZero,
    /// The effect vanishes at covariate value zero.
    ZeroAtZero,
}

/// Marginal basis shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplineKind {
    /// Equidistant cyclic basis over `[0, period]`.
    Cyclic { period: f64, rank: usize },
    /// Non-cyclic basis with knots at covariate quantiles.
    Quantile { rank: usize },
}

/// Specification of one smooth term.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermSpec {
    pub name: String,
    /// One covariate for univariate smooths, two for tensor products.
    pub covariates: Vec<String>,
    pub kinds: Vec<SplineKind>,
    pub degree: usize,
    pub penalty_order: usize,
    pub constraint: Constraint,
    /// Optional covariate multiplying every basis column pointwise.
    pub multiplier: Option<String>,
}

impl TermSpec {
    pub fn cyclic(name: &str, covariate: &str, period: f64, rank: usize) -> Self {
        TermSpec {
            name: name.to_string(),
            covariates: vec![covariate.to_string()],
            kinds: vec![SplineKind::Cyclic { period, rank }],
            degree: 3,
            penalty_order: 2,
            constraint: Constraint::SumToZero,
            multiplier: None,
        }
    }

    pub fn smooth(name: &str, covariate: &str, rank: usize) -> Self {
        TermSpec {
            name: name.to_string(),
            covariates: vec![covariate.to_string()],
            kinds: vec![SplineKind::Quantile { rank }],
            degree: 3,
            penalty_order: 2,
            constraint: Constraint::SumToZero,
            multiplier: None,
        }
    }

    pub fn tensor_cyclic(
        name: &str,
        cov1: &str,
        period1: f64,
        rank1: usize,
        cov2: &str,
        period2: f64,
        rank2: usize,
    ) -> Self {
        TermSpec {
            name: name.to_string(),
            covariates: vec![cov1.to_string(), cov2.to_string()],
            kinds: vec![
                SplineKind::Cyclic { period: period1, rank: rank1 },
                SplineKind::Cyclic { period: period2, rank: rank2 },
            ],
            degree: 3,
            penalty_order: 2,
            constraint: Constraint::SumToZero,
            multiplier: None,
        }
    }

    pub fn with_constraint(mut self, c: Constraint) -> Self {
        self.constraint = c;
        self
    }

    pub fn with_multiplier(mut self, covariate: &str) -> Self {
        self.multiplier = Some(covariate.to_string());
        self
    }
}

/// Named covariate columns of equal length.
#[derive(Debug, Clone, Default)]
pub struct CovariateSet {
    cols: BTreeMap<String, Vec<f64>>,
    n: usize,
}

impl CovariateSet {
    pub fn new(n: usize) -> Self {
        CovariateSet { cols: BTreeMap::new(), n }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn insert(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n {
            return Err(Error::invalid(format!(
                "covariate `{name}` has length {}, expected {}",
                values.len(),
                self.n
            )));
        }
        self.cols.insert(name.to_string(), values);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&[f64]> {
        self.cols
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::invalid(format!("missing covariate `{name}`")))
    }
}

/// One penalty acting on a term's constrained coefficient block.
#[derive(Debug, Clone)]
pub struct Penalty {
    pub label: String,
    /// `r x k` factor with `S = factor^T factor` (already normalized).
    pub factor: DMatrix<f64>,
    /// Cached dense `S` block.
    pub matrix: DMatrix<f64>,
}

/// Assembled state of one term.
#[derive(Debug, Clone)]
pub struct TermBlock {
    pub spec: TermSpec,
    pub knots: Vec<KnotVector>,
    /// Sparse basis rows at the unique covariate values (raw columns).
    rows: Vec<Vec<(u32, f64)>>,
    /// Observation -> unique-row index.
    row_map: Vec<u32>,
    multiplier: Option<Vec<f64>>,
    /// Raw -> constrained coefficient transform (`None` when unconstrained).
    z: Option<DMatrix<f64>>,
    pub penalties: Vec<Penalty>,
    /// First constrained column of this block in the assembled design.
    pub col_offset: usize,
    /// Raw and constrained column counts.
    pub k_raw: usize,
    pub k_con: usize,
    /// All basis columns are identically zero over the data (for example a
    /// holiday that never activates in the window); the block is excluded.
    pub dropped: bool,
}

/// Assembled design: crossproducts, penalties and constraint transforms.
pub struct Design {
    pub terms: Vec<TermBlock>,
    /// Total constrained columns including the leading intercept.
    pub ncols: usize,
    pub nrows: usize,
    /// Constrained-space crossproduct `X^T X`.
    gram: DMatrix<f64>,
    /// Global (penalty index) -> (term index, within-term penalty index).
    pub penalty_map: Vec<(usize, usize)>,
}

fn key_of(v: f64) -> u64 {
    // Covariates are finite; normalize -0.0 so it dedups with 0.0.
    if v == 0.0 {
        0u64
    } else {
        v.to_bits()
    }
}

fn build_term_block(
    spec: &TermSpec,
    data: &CovariateSet,
    n: usize,
) -> Result<(TermBlock, Vec<Vec<(u32, f64)>>)> {
    if spec.covariates.is_empty() || spec.covariates.len() > 2 {
        return Err(Error::invalid(format!(
            "term `{}` must have one or two covariates",
            spec.name
        )));
    }
    for cov in &spec.covariates {
        let col = data.get(cov)?;
        if col.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid(format!(
                "covariate `{cov}` contains NaN values"
            )));
        }
    }
    let multiplier = match &spec.multiplier {
        Some(mname) => {
            let col = data.get(mname)?;
            if col.iter().any(|v| v.is_nan()) {
                return Err(Error::invalid(format!(
                    "multiplier covariate `{mname}` contains NaN values"
                )));
            }
            Some(col.to_vec())
        }
        None => None,
    };

    let mut knots = Vec::with_capacity(spec.kinds.len());
    for (kind, cov) in spec.kinds.iter().zip(&spec.covariates) {
        let kv = match kind {
            SplineKind::Cyclic { period, rank } => make_cyclic_knots(*period, *rank, spec.degree)?,
            SplineKind::Quantile { rank } => make_quantile_knots(data.get(cov)?, *rank, spec.degree)?,
        };
        knots.push(kv);
    }
    let k_raw = if knots.len() == 1 {
        knots[0].rank()
    } else {
        let k = knots[0].rank() * knots[1].rank();
        if k > MAX_TENSOR_COLS {
            return Err(Error::invalid(format!(
                "tensor term `{}` would have {k} columns (cap {MAX_TENSOR_COLS})",
                spec.name
            )));
        }
        k
    };

    // Deduplicate rows over unique covariate values.
    let mut index: HashMap<(u64, u64), u32> = HashMap::new();
    let mut rows: Vec<Vec<(u32, f64)>> = Vec::new();
    let mut row_map = Vec::with_capacity(n);
    let c1 = data.get(&spec.covariates[0])?;
    let c2 = if spec.covariates.len() == 2 {
        Some(data.get(&spec.covariates[1])?)
    } else {
        None
    };
    for t in 0..n {
        let key = (key_of(c1[t]), c2.map(|c| key_of(c[t])).unwrap_or(0));
        let idx = *index.entry(key).or_insert_with(|| {
            let row = match c2 {
                None => basis_row(&knots[0], c1[t], Extrapolation::Linear)
                    .into_iter()
                    .map(|(c, v)| (c as u32, v))
                    .collect::<Vec<_>>(),
                Some(c2v) => {
                    let r1 = basis_row(&knots[0], c1[t], Extrapolation::Linear);
                    let r2 = basis_row(&knots[1], c2v[t], Extrapolation::Linear);
                    tensor_row(&r1, &r2, knots[1].rank())
                        .into_iter()
                        .map(|(c, v)| (c as u32, v))
                        .collect::<Vec<_>>()
                }
            };
            rows.push(row);
            (rows.len() - 1) as u32
        });
        row_map.push(idx);
    }

    // Column sums over the data and per-unique-row activity flags: a row is
    // active when it ever occurs with a nonzero multiplier.
    let mut col_sums = vec![0.0f64; k_raw];
    let mut active = vec![false; rows.len()];
    let mut any_nonzero = false;
    for t in 0..n {
        let m = multiplier.as_ref().map(|mv| mv[t]).unwrap_or(1.0);
        if m == 0.0 {
            continue;
        }
        active[row_map[t] as usize] = true;
        for &(c, v) in &rows[row_map[t] as usize] {
            col_sums[c as usize] += m * v;
            if v != 0.0 {
                any_nonzero = true;
            }
        }
    }
    let mut dropped = !any_nonzero;

    // Constraint transform.
    let mut z = if dropped {
        None
    } else {
        match spec.constraint {
            Constraint::None => None,
            Constraint::SumToZero => Some(linalg::householder_complement(&col_sums)),
            Constraint::ZeroAtZero => {
                let c0 = match spec.covariates.len() {
                    1 => basis_row(&knots[0], 0.0, Extrapolation::Linear),
                    _ => {
                        let r1 = basis_row(&knots[0], 0.0, Extrapolation::Linear);
                        let r2 = basis_row(&knots[1], 0.0, Extrapolation::Linear);
                        tensor_row(&r1, &r2, knots[1].rank())
                    }
                };
                let mut dense = vec![0.0; k_raw];
                for (c, v) in c0 {
                    dense[c] += v;
                }
                Some(linalg::householder_complement(&dense))
            }
        }
    };
    // The constrained block can still be identically zero, e.g. a
    // zero-at-zero term whose covariate never leaves zero in the window:
    // every active row then equals the constraint vector.
    if !dropped {
        if let Some(zm) = &z {
            let all_null = rows.iter().zip(&active).all(|(row, &act)| {
                if !act {
                    return true;
                }
                (0..zm.ncols()).all(|j| {
                    let dot: f64 = row.iter().map(|&(c, v)| v * zm[(c as usize, j)]).sum();
                    dot.abs() < 1e-12
                })
            });
            if all_null {
                dropped = true;
                z = None;
            }
        }
    }
    let k_con = if dropped {
        0
    } else {
        z.as_ref().map(|m| m.ncols()).unwrap_or(k_raw)
    };

    // Penalty factors in raw space.
    let raw_factors: Vec<(String, DMatrix<f64>)> = if knots.len() == 1 {
        let p = difference_penalty(knots[0].rank(), spec.penalty_order, knots[0].cyclic)?;
        vec![(format!("{}", spec.name), p.factor)]
    } else {
        let p1 = difference_penalty(knots[0].rank(), spec.penalty_order, knots[0].cyclic)?;
        let p2 = difference_penalty(knots[1].rank(), spec.penalty_order, knots[1].cyclic)?;
        let (f1, f2) = tensor_penalties(&p1, knots[0].rank(), &p2, knots[1].rank());
        vec![
            (format!("{}[1]", spec.name), f1),
            (format!("{}[2]", spec.name), f2),
        ]
    };

    let mut penalties = Vec::new();
    if !dropped {
        let mut total_s: Option<DMatrix<f64>> = None;
        for (label, raw) in &raw_factors {
            let factor = match &z {
                Some(zm) => raw * zm,
                None => raw.clone(),
            };
            let s = factor.transpose() * &factor;
            total_s = Some(match total_s {
                None => s.clone(),
                Some(acc) => acc + &s,
            });
            penalties.push(Penalty {
                label: label.clone(),
                factor,
                matrix: s,
            });
        }
        // Ridge on the remaining penalty null space so the whole term can be
        // shrunk to zero.
        let null = linalg::psd_null_space(total_s.unwrap(), NULL_SPACE_TOL);
        if null.ncols() > 0 {
            let factor = null.transpose();
            let s = factor.transpose() * &factor;
            penalties.push(Penalty {
                label: format!("{}[null]", spec.name),
                factor,
                matrix: s,
            });
        }
    }

    let block = TermBlock {
        spec: spec.clone(),
        knots,
        rows,
        row_map,
        multiplier,
        z,
        penalties,
        col_offset: 0,
        k_raw,
        k_con,
        dropped,
    };
    let raw_rows = block.rows.clone();
    Ok((block, raw_rows))
}

/// Builds the model matrix structure, penalty blocks and constraint
/// transforms for a term list over a covariate table.
pub fn assemble_design(terms: &[TermSpec], data: &CovariateSet) -> Result<Design> {
    let n = data.len();
    if n == 0 {
        return Err(Error::invalid("empty covariate table"));
    }
    let mut blocks = Vec::with_capacity(terms.len());
    for spec in terms {
        let (block, _) = build_term_block(spec, data, n)?;
        if block.dropped {
            log::warn!(
                "term `{}` has no active observations in the window; dropped",
                block.spec.name
            );
        }
        blocks.push(block);
    }

    // Assign constrained column offsets (intercept at column 0).
    let mut offset = 1usize;
    for b in blocks.iter_mut() {
        b.col_offset = offset;
        offset += b.k_con;
    }
    let ncols = offset;

    // Raw-space crossproduct accumulated over sparse rows, then folded through
    // the block-diagonal constraint transform.
    let mut raw_offset = 1usize;
    let raw_offsets: Vec<usize> = blocks
        .iter()
        .map(|b| {
            let o = raw_offset;
            raw_offset += if b.dropped { 0 } else { b.k_raw };
            o
        })
        .collect();
    let p_raw = raw_offset;

    let mut g_raw = DMatrix::<f64>::zeros(p_raw, p_raw);
    let mut scratch: Vec<(u32, f64)> = Vec::with_capacity(96);
    for t in 0..n {
        scratch.clear();
        scratch.push((0, 1.0));
        for (b, &ro) in blocks.iter().zip(&raw_offsets) {
            if b.dropped {
                continue;
            }
            let m = b.multiplier.as_ref().map(|mv| mv[t]).unwrap_or(1.0);
            if m == 0.0 {
                continue;
            }
            for &(c, v) in &b.rows[b.row_map[t] as usize] {
                scratch.push((ro as u32 + c, m * v));
            }
        }
        // Accumulate each pair once, always into the lower triangle (basis
        // rows are not column-sorted, so orient every pair explicitly).
        for (ai, &(ca, va)) in scratch.iter().enumerate() {
            for &(cb, vb) in &scratch[ai..] {
                let (hi, lo) = if cb >= ca { (cb, ca) } else { (ca, cb) };
                g_raw[(hi as usize, lo as usize)] += va * vb;
            }
        }
    }
    for j in 0..p_raw {
        for i in j + 1..p_raw {
            let v = g_raw[(i, j)];
            g_raw[(j, i)] = v;
        }
    }

    // Constrained gram: G = Z^T G_raw Z with block-diagonal Z.
    let gram = fold_constraints(&g_raw, &blocks, &raw_offsets, ncols);

    // Normalize penalties so a common log-lambda grid is meaningful: scale
    // each penalty to the Frobenius norm of its term's gram block.
    let mut penalty_map = Vec::new();
    for (ti, b) in blocks.iter_mut().enumerate() {
        if b.dropped {
            continue;
        }
        let gb = gram
            .view((b.col_offset, b.col_offset), (b.k_con, b.k_con))
            .into_owned();
        let g_norm = gb.norm().max(1e-300);
        for (pi, pen) in b.penalties.iter_mut().enumerate() {
            let s_norm = pen.matrix.norm().max(1e-300);
            let scale = (g_norm / s_norm).sqrt();
            pen.factor *= scale;
            pen.matrix *= scale * scale;
            penalty_map.push((ti, pi));
        }
    }

    Ok(Design {
        terms: blocks,
        ncols,
        nrows: n,
        gram,
        penalty_map,
    })
}

fn fold_constraints(
    g_raw: &DMatrix<f64>,
    blocks: &[TermBlock],
    raw_offsets: &[usize],
    ncols: usize,
) -> DMatrix<f64> {
    let p_raw = g_raw.nrows();
    // H = G_raw * Z (columns transformed block by block).
    let mut h = DMatrix::<f64>::zeros(p_raw, ncols);
    h.column_mut(0).copy_from(&g_raw.column(0));
    for (b, &ro) in blocks.iter().zip(raw_offsets) {
        if b.dropped {
            continue;
        }
        let gslice = g_raw.view((0, ro), (p_raw, b.k_raw));
        match &b.z {
            Some(z) => {
                let prod = &gslice * z;
                h.view_mut((0, b.col_offset), (p_raw, b.k_con)).copy_from(&prod);
            }
            None => {
                h.view_mut((0, b.col_offset), (p_raw, b.k_con)).copy_from(&gslice);
            }
        }
    }
    // G = Z^T * H (rows transformed block by block).
    let mut g = DMatrix::<f64>::zeros(ncols, ncols);
    g.row_mut(0).copy_from(&h.row(0));
    for (b, &ro) in blocks.iter().zip(raw_offsets) {
        if b.dropped {
            continue;
        }
        let hslice = h.view((ro, 0), (b.k_raw, ncols));
        match &b.z {
            Some(z) => {
                let prod = z.transpose() * &hslice;
                g.view_mut((b.col_offset, 0), (b.k_con, ncols)).copy_from(&prod);
            }
            None => {
                g.view_mut((b.col_offset, 0), (b.k_con, ncols)).copy_from(&hslice);
            }
        }
    }
    // Symmetrize against round-off.
    for j in 0..ncols {
        for i in j + 1..ncols {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

impl Design {
    /// Constrained-space response projection `X^T y` (centered response).
    fn project_response(&self, y: &[f64]) -> DVector<f64> {
        let mut b = DVector::zeros(self.ncols);
        for t in 0..self.nrows {
            let yt = y[t];
            if yt == 0.0 {
                continue;
            }
            b[0] += yt;
            for block in &self.terms {
                if block.dropped {
                    continue;
                }
                let m = block.multiplier.as_ref().map(|mv| mv[t]).unwrap_or(1.0);
                if m == 0.0 {
                    continue;
                }
                let row = &block.rows[block.row_map[t] as usize];
                match &block.z {
                    Some(z) => {
                        for &(c, v) in row {
                            let w = m * v * yt;
                            let zrow = z.row(c as usize);
                            for j in 0..block.k_con {
                                b[block.col_offset + j] += w * zrow[j];
                            }
                        }
                    }
                    None => {
                        for &(c, v) in row {
                            b[block.col_offset + c as usize] += m * v * yt;
                        }
                    }
                }
            }
        }
        b
    }

    /// `A = G + sum_i lambda_i S_i` in constrained space.
    fn penalized_gram(&self, lambdas: &[f64]) -> DMatrix<f64> {
        let mut a = self.gram.clone();
        for (gi, &(ti, pi)) in self.penalty_map.iter().enumerate() {
            let lam = lambdas[gi];
            if lam == 0.0 {
                continue;
            }
            let block = &self.terms[ti];
            let s = &block.penalties[pi].matrix;
            let o = block.col_offset;
            for j in 0..block.k_con {
                for i in 0..block.k_con {
                    a[(o + i, o + j)] += lam * s[(i, j)];
                }
            }
        }
        a
    }

    /// Penalty factor lifted to global columns (`r x ncols`).
    fn global_factor(&self, gi: usize) -> (usize, &DMatrix<f64>) {
        let (ti, pi) = self.penalty_map[gi];
        let block = &self.terms[ti];
        (block.col_offset, &block.penalties[pi].factor)
    }

    /// Solves the penalized least-squares problem at fixed smoothing weights.
    ///
    /// Returns the constrained coefficient vector (intercept first). Fails
    /// with the offending term named if the penalized system is singular.
    pub fn fit_penalized(&self, y: &[f64], lambdas: &[f64]) -> Result<DVector<f64>> {
        if y.len() != self.nrows {
            return Err(Error::invalid("response length mismatch"));
        }
        if lambdas.len() != self.penalty_map.len() {
            return Err(Error::invalid(format!(
                "expected {} smoothing weights, got {}",
                self.penalty_map.len(),
                lambdas.len()
            )));
        }
        let a = self.penalized_gram(lambdas);
        let l = linalg::cholesky(&a).map_err(|e| self.name_singular_column(e))?;
        let b = self.project_response(y);
        let x = linalg::spd_solve(&l, &DMatrix::from_column_slice(self.ncols, 1, b.as_slice()));
        Ok(DVector::from_column_slice(x.as_slice()))
    }

    fn name_singular_column(&self, e: Error) -> Error {
        if let Error::Numerical { detail, .. } = &e {
            if let Some(pos) = detail.rfind("column ") {
                if let Ok(col) = detail[pos + 7..].trim().parse::<usize>() {
                    let term = self
                        .terms
                        .iter()
                        .find(|b| !b.dropped && col >= b.col_offset && col < b.col_offset + b.k_con)
                        .map(|b| b.spec.name.clone())
                        .unwrap_or_else(|| "intercept".to_string());
                    return Error::numerical(
                        "fit_penalized",
                        format!("singular system in term `{term}`: {detail}"),
                    );
                }
            }
        }
        e
    }
}

/// Diagnostics of a smoothing-parameter search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionInfo {
    pub gcv: f64,
    pub edf: f64,
    pub rss: f64,
    pub sweeps: usize,
    pub gamma_eff: f64,
}

/// Smoothing selection: minimizes `n * RSS / (n - gamma * edf)^2` over a
/// log10 grid from -4 to 8 in steps of 0.5, one penalty at a time, with
/// golden-section refinement around the best grid point.
pub fn select_smoothing(
    design: &Design,
    y: &[f64],
    gamma_eff: f64,
    max_sweeps: usize,
) -> Result<(Vec<f64>, SelectionInfo)> {
    let npen = design.penalty_map.len();
    let n = design.nrows as f64;
    let p = design.ncols;
    let b = design.project_response(y);
    let yty: f64 = y.iter().map(|v| v * v).sum();
    let w = linalg::psd_sqrt(design.gram.clone(), 1e-14);

    let grid: Vec<f64> = (0..25).map(|i| -4.0 + 0.5 * i as f64).collect();
    let t_min = 10f64.powf(grid[0]);

    let mut lambdas = vec![1.0f64; npen];
    let mut best_gcv = f64::INFINITY;
    let mut info = SelectionInfo {
        gcv: f64::INFINITY,
        edf: f64::NAN,
        rss: f64::NAN,
        sweeps: 0,
        gamma_eff,
    };
    if npen == 0 {
        let a = design.penalized_gram(&[]);
        let l = linalg::cholesky(&a)?;
        let (rss, edf) = exact_rss_edf(design, &l, &w, &b, yty);
        info.gcv = gcv_score(n, rss, edf, gamma_eff);
        info.rss = rss;
        info.edf = edf;
        return Ok((lambdas, info));
    }

    for sweep in 0..max_sweeps {
        let start_gcv = best_gcv;
        for gi in 0..npen {
            // Base system with the scanned penalty held at the grid floor.
            let mut base = lambdas.clone();
            base[gi] = t_min;
            let a = design.penalized_gram(&base);
            let l = match linalg::cholesky(&a) {
                Ok(l) => l,
                Err(_) => {
                    // Near-singular base; retry with the scanned penalty at
                    // its current value and skip the scan for this sweep.
                    continue;
                }
            };

            let (offset, factor) = design.global_factor(gi);
            let r = factor.nrows();
            // V = L^{-1} D^T
            let mut v = DMatrix::<f64>::zeros(p, r);
            for j in 0..r {
                for c in 0..factor.ncols() {
                    v[(offset + c, j)] = factor[(j, c)];
                }
            }
            linalg::solve_lower_inplace(&l, &mut v);
            let c_small = v.transpose() * &v;
            let (evals, u) = linalg::sym_eigen(c_small);

            // M = L^{-1} W^T, base effective dof and response projections.
            let mut m = w.transpose();
            linalg::solve_lower_inplace(&l, &mut m);
            let base_edf: f64 = m.iter().map(|x| x * x).sum();
            let nmat = v.transpose() * &m; // r x p
            let ntil = u.transpose() * &nmat; // r x p
            let d_diag: Vec<f64> = (0..r)
                .map(|k| ntil.row(k).iter().map(|x| x * x).sum())
                .collect();
            let phat = &ntil * ntil.transpose(); // r x r

            let mut c0 = DMatrix::from_column_slice(p, 1, b.as_slice());
            linalg::solve_lower_inplace(&l, &mut c0);
            let beta0tb: f64 = c0.iter().map(|x| x * x).sum();
            let mut beta0 = c0.clone();
            linalg::solve_lower_transpose_inplace(&l, &mut beta0);
            let w0 = &w * &beta0; // p x 1
            let b0gb0: f64 = w0.iter().map(|x| x * x).sum();
            let q1 = &nmat * &w0; // r x 1
            let qhat = u.transpose() * &q1;
            let g_small = v.transpose() * &c0; // r x 1
            let ghat = u.transpose() * &g_small;

            let eval_gcv = |log10_t: f64| -> f64 {
                let t = 10f64.powf(log10_t);
                let s = (t - t_min).max(0.0);
                let mut edf = base_edf;
                let mut btb = beta0tb;
                let mut h_q = 0.0; // h^T qhat
                let mut h_p_h = 0.0; // h^T Phat h
                if s > 0.0 {
                    let mut h = vec![0.0; r];
                    for k in 0..r {
                        let denom = 1.0 + s * evals[k];
                        edf -= s * d_diag[k] / denom;
                        btb -= s * ghat[k] * ghat[k] / denom;
                        h[k] = s * ghat[k] / denom;
                        h_q += h[k] * qhat[k];
                    }
                    for k in 0..r {
                        let mut acc = 0.0;
                        for j in 0..r {
                            acc += phat[(k, j)] * h[j];
                        }
                        h_p_h += h[k] * acc;
                    }
                }
                let bgb = b0gb0 - 2.0 * h_q + h_p_h;
                let rss = (yty - 2.0 * btb + bgb).max(0.0);
                gcv_score(n, rss, edf, gamma_eff)
            };

            let mut best_log = grid[0];
            let mut best_val = f64::INFINITY;
            for &g10 in &grid {
                let v = eval_gcv(g10);
                if v < best_val {
                    best_val = v;
                    best_log = g10;
                }
            }
            let (refined_log, refined_val) =
                golden_section(eval_gcv, best_log - 0.5, best_log + 0.5, 14);
            let (chosen_log, chosen_val) = if refined_val < best_val {
                (refined_log, refined_val)
            } else {
                (best_log, best_val)
            };
            lambdas[gi] = 10f64.powf(chosen_log).max(t_min);
            if chosen_val < best_gcv {
                best_gcv = chosen_val;
            }
        }
        info.sweeps = sweep + 1;
        let improved = start_gcv - best_gcv > 1e-5 * (1.0 + best_gcv.abs());
        if sweep > 0 && !improved {
            break;
        }
    }

    // Exact score at the selected weights.
    let a = design.penalized_gram(&lambdas);
    let l = linalg::cholesky(&a)?;
    let (rss, edf) = exact_rss_edf(design, &l, &w, &b, yty);
    info.gcv = gcv_score(n, rss, edf, gamma_eff);
    info.rss = rss;
    info.edf = edf;
    Ok((lambdas, info))
}

fn gcv_score(n: f64, rss: f64, edf: f64, gamma_eff: f64) -> f64 {
    let denom = n - gamma_eff * edf;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    n * rss / (denom * denom)
}

fn exact_rss_edf(
    design: &Design,
    l: &DMatrix<f64>,
    w: &DMatrix<f64>,
    b: &DVector<f64>,
    yty: f64,
) -> (f64, f64) {
    let p = design.ncols;
    let mut m = w.transpose();
    linalg::solve_lower_inplace(l, &mut m);
    let edf: f64 = m.iter().map(|x| x * x).sum();
    let mut c0 = DMatrix::from_column_slice(p, 1, b.as_slice());
    linalg::solve_lower_inplace(l, &mut c0);
    let btb: f64 = c0.iter().map(|x| x * x).sum();
    let mut beta = c0;
    linalg::solve_lower_transpose_inplace(l, &mut beta);
    let w0 = w * &beta;
    let bgb: f64 = w0.iter().map(|x| x * x).sum();
    let rss = (yty - 2.0 * btb + bgb).max(0.0);
    (rss, edf)
}

/// A fitted term ready for prediction: raw-space coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedTerm {
    pub spec: TermSpec,
    pub knots: Vec<KnotVector>,
    /// Raw basis coefficients (already mapped through the constraint).
    pub coefficients: Vec<f64>,
    /// Selected smoothing weight per penalty (normalized scale).
    pub lambdas: Vec<f64>,
    pub penalty_labels: Vec<String>,
    pub dropped: bool,
}

/// A fitted additive model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GamModel {
    pub intercept: f64,
    pub terms: Vec<FittedTerm>,
    pub selection: SelectionInfo,
    pub train_n: usize,
    #[serde(skip)]
    pub fitted: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

/// Fitting options.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Effective-degrees inflation in the selection score; defaults to
    /// `ln(n) / 2`.
    pub gamma_eff: Option<f64>,
    pub max_sweeps: usize,
    /// Fixed smoothing weights (skips selection) in penalty-map order.
    pub fixed_lambdas: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            gamma_eff: None,
            max_sweeps: 3,
            fixed_lambdas: None,
        }
    }
}

/// Fits an additive model: assembles the design, selects smoothing weights,
/// solves the penalized system and stores per-term raw coefficients.
pub fn fit(terms: &[TermSpec], data: &CovariateSet, y: &[f64], opts: &FitOptions) -> Result<GamModel> {
    let design = assemble_design(terms, data)?;
    fit_with_design(&design, data, y, opts)
}

/// Fits against a pre-assembled design (the covariates must be those used
/// for assembly).
pub fn fit_with_design(
    design: &Design,
    data: &CovariateSet,
    y: &[f64],
    opts: &FitOptions,
) -> Result<GamModel> {
    let n = design.nrows;
    if y.len() != n {
        return Err(Error::invalid("response length mismatch"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("response contains non-finite values"));
    }
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - mean_y).collect();

    let gamma_eff = opts.gamma_eff.unwrap_or_else(|| (n as f64).ln() / 2.0);
    let (lambdas, mut selection) = match &opts.fixed_lambdas {
        Some(ls) => {
            let info = SelectionInfo {
                gcv: f64::NAN,
                edf: f64::NAN,
                rss: f64::NAN,
                sweeps: 0,
                gamma_eff,
            };
            (ls.clone(), info)
        }
        None => select_smoothing(design, &yc, gamma_eff, opts.max_sweeps)?,
    };
    let coef = design.fit_penalized(&yc, &lambdas)?;

    // Map constrained coefficients back to raw basis space per term.
    let mut fitted_terms = Vec::with_capacity(design.terms.len());
    for (bi, block) in design.terms.iter().enumerate() {
        let coefficients = if block.dropped {
            vec![0.0; block.k_raw]
        } else {
            let gamma = coef.rows(block.col_offset, block.k_con).into_owned();
            match &block.z {
                Some(z) => (z * gamma).as_slice().to_vec(),
                None => gamma.as_slice().to_vec(),
            }
        };
        let mut term_lambdas = Vec::new();
        let mut labels = Vec::new();
        for (gi, &(ti, pi)) in design.penalty_map.iter().enumerate() {
            if ti == bi {
                term_lambdas.push(lambdas[gi]);
                labels.push(block.penalties[pi].label.clone());
            }
        }
        fitted_terms.push(FittedTerm {
            spec: block.spec.clone(),
            knots: block.knots.clone(),
            coefficients,
            lambdas: term_lambdas,
            penalty_labels: labels,
            dropped: block.dropped,
        });
    }

    let mut model = GamModel {
        intercept: mean_y + coef[0],
        terms: fitted_terms,
        selection: SelectionInfo {
            gcv: selection.gcv,
            edf: selection.edf,
            rss: selection.rss,
            sweeps: selection.sweeps,
            gamma_eff,
        },
        train_n: n,
        fitted: Vec::new(),
        residuals: Vec::new(),
    };
    let fitted = model.predict(data)?;
    model.residuals = y.iter().zip(&fitted).map(|(a, f)| a - f).collect();
    selection.rss = model.residuals.iter().map(|r| r * r).sum();
    model.selection.rss = selection.rss;
    model.fitted = fitted;
    Ok(model)
}

impl GamModel {
    /// Predicted values at new covariates: intercept plus all term effects.
    pub fn predict(&self, data: &CovariateSet) -> Result<Vec<f64>> {
        let (intercept, effects) = self.term_effects(data)?;
        let n = data.len();
        let mut out = vec![intercept; n];
        for (_, eff) in &effects {
            for (o, e) in out.iter_mut().zip(eff) {
                *o += e;
            }
        }
        Ok(out)
    }

    /// Per-term effect series plus the intercept; their sum reproduces
    /// `predict` exactly.
    pub fn term_effects(&self, data: &CovariateSet) -> Result<(f64, Vec<(String, Vec<f64>)>)> {
        let n = data.len();
        let mut effects = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let mut eff = vec![0.0; n];
            if !term.dropped {
                let c1 = data.get(&term.spec.covariates[0])?;
                let c2 = if term.spec.covariates.len() == 2 {
                    Some(data.get(&term.spec.covariates[1])?)
                } else {
                    None
                };
                let mult = match &term.spec.multiplier {
                    Some(mname) => Some(data.get(mname)?),
                    None => None,
                };
                let k2 = term.knots.get(1).map(|kv| kv.rank()).unwrap_or(0);
                let mut cache: HashMap<(u64, u64), f64> = HashMap::new();
                for t in 0..n {
                    let key = (key_of(c1[t]), c2.map(|c| key_of(c[t])).unwrap_or(0));
                    let base = *cache.entry(key).or_insert_with(|| {
                        let row = match c2 {
                            None => basis_row(&term.knots[0], c1[t], Extrapolation::Linear),
                            Some(c2v) => {
                                let r1 = basis_row(&term.knots[0], c1[t], Extrapolation::Linear);
                                let r2 = basis_row(&term.knots[1], c2v[t], Extrapolation::Linear);
                                tensor_row(&r1, &r2, k2)
                            }
                        };
                        row.iter().map(|&(c, v)| v * term.coefficients[c]).sum()
                    });
                    eff[t] = base * mult.map(|m| m[t]).unwrap_or(1.0);
                }
            }
            effects.push((term.spec.name.clone(), eff));
        }
        Ok((self.intercept, effects))
    }
}
