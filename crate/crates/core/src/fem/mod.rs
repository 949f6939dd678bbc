//! P1 finite element layer: sparse operators, assembly on triangulations and
//! polygonal curves, periodic reduction, SPD solvers and discrete norms.

mod assemble;
mod factor;
mod pcg;
mod periodic;

use crate::error::{Error, Result};
use crate::mesh::{CurveMesh, Point, TriMesh};

pub use assemble::{
    assemble_consistent_mass, assemble_curve_consistent_mass, assemble_curve_lumped_mass,
    assemble_curve_stiffness, assemble_lumped_mass, assemble_stiffness, local_stiffness,
    segment_stiffness, Tensor2,
};
pub use factor::{reverse_cuthill_mckee, FactoredSpd, DEFAULT_ENVELOPE_BUDGET};
pub use pcg::{solve_spd, solve_spd_semidefinite, DEFAULT_TOLERANCE};
pub use periodic::{
    apply_periodic_constraints, expand_vector, periodic_index_map, restrict_vector, Constrainable,
};

/// Square sparse matrix in compressed-row form with sorted, unique columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dimension: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    /// Build from `(row, col, value)` triplets; duplicates are summed in input order.
    pub fn from_triplets(dimension: usize, triplets: &[(usize, usize, f64)], symmetric: bool) -> Self {
        let mut counts = vec![0usize; dimension + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..dimension {
            counts[i + 1] += counts[i];
        }
        // stable bucket by row, then stable sort by column within each row
        let mut order = vec![0usize; triplets.len()];
        let mut fill = counts.clone();
        for (k, &(r, _, _)) in triplets.iter().enumerate() {
            order[fill[r]] = k;
            fill[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(dimension + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..dimension {
            let slice = &mut order[counts[r]..counts[r + 1]];
            slice.sort_by_key(|&k| triplets[k].1);
            let mut last = usize::MAX;
            for &k in slice.iter() {
                let (_, c, v) = triplets[k];
                if c == last {
                    *values.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    values.push(v);
                    last = c;
                }
            }
            row_ptr.push(cols.len());
        }
        let mut op = SparseOperator {
            dimension,
            row_ptr,
            cols,
            values,
            symmetric,
        };
        if symmetric {
            op.mirror_upper();
        }
        op
    }

    /// Copy upper-triangle values onto their lower-triangle mirrors so that
    /// symmetry holds bit-exactly regardless of summation order.
    fn mirror_upper(&mut self) {
        for i in 0..self.dimension {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                if j < i {
                    self.values[k] = self.get(j, i);
                }
            }
        }
    }

    pub fn identity(dimension: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dimension])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SparseOperator {
            dimension: d.len(),
            row_ptr: (0..=d.len()).collect(),
            cols: (0..d.len()).collect(),
            values: d.to_vec(),
            symmetric: true,
        }
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let n = a.len();
        let mut t = Vec::new();
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        let symmetric = (0..n).all(|i| (0..n).all(|j| a[i][j] == a[j][i]));
        Self::from_triplets(n, &t, symmetric)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map(|k| v[k]).unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dimension).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.dimension) {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dimension];
        self.apply_into(x, &mut y);
        y
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.dimension)
            .map(|i| {
                let (c, v) = self.row(i);
                x[i] * c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum::<f64>()
            })
            .sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dimension).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `a A + b B` for operators of equal dimension.
    pub fn linear_combination(a: f64, lhs: &Self, b: f64, rhs: &Self) -> Result<Self> {
        if lhs.dimension != rhs.dimension {
            return Err(Error::SizeMismatch {
                expected: lhs.dimension,
                actual: rhs.dimension,
            });
        }
        let mut t = Vec::with_capacity(lhs.nnz() + rhs.nnz());
        for (s, m) in [(a, lhs), (b, rhs)] {
            for i in 0..m.dimension {
                let (c, v) = m.row(i);
                t.extend(c.iter().zip(v).map(|(&j, &x)| (i, j, s * x)));
            }
        }
        Ok(Self::from_triplets(
            lhs.dimension,
            &t,
            lhs.symmetric && rhs.symmetric,
        ))
    }

    /// `s A + diag(d)`.
    pub fn scaled_plus_diagonal(&self, s: f64, d: &[f64]) -> Result<Self> {
        Self::linear_combination(s, self, 1.0, &Self::from_diagonal(d))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.dimension]; self.dimension];
        for (i, row) in a.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                row[j] = x;
            }
        }
        a
    }
}

/// Diagonal operator holding per-node quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOperator {
    pub values: Vec<f64>,
}

impl DiagonalOperator {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.values.iter().zip(x).map(|(m, v)| m * v).collect()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `sum_i m_i x_i`.
    pub fn integrate(&self, x: &[f64]) -> f64 {
        self.values.iter().zip(x).map(|(m, v)| m * v).sum()
    }
}

/// A P1 discretisation: bulk triangulation or polygonal curve.
pub trait P1Space {
    fn nodes(&self) -> &[Point];
    fn lumped_mass(&self) -> DiagonalOperator;
    fn consistent_mass(&self) -> SparseOperator;
    /// Stiffness with unit coefficient.
    fn unit_stiffness(&self) -> Result<SparseOperator>;
}

impl P1Space for TriMesh {
    fn nodes(&self) -> &[Point] {
        &self.nodes
    }
    fn lumped_mass(&self) -> DiagonalOperator {
        assemble_lumped_mass(self)
    }
    fn consistent_mass(&self) -> SparseOperator {
        assemble_consistent_mass(self)
    }
    fn unit_stiffness(&self) -> Result<SparseOperator> {
        assemble_stiffness(self, Tensor2::identity())
    }
}

impl P1Space for CurveMesh {
    fn nodes(&self) -> &[Point] {
        &self.nodes
    }
    fn lumped_mass(&self) -> DiagonalOperator {
        assemble_curve_lumped_mass(self)
    }
    fn consistent_mass(&self) -> SparseOperator {
        assemble_curve_consistent_mass(self)
    }
    fn unit_stiffness(&self) -> Result<SparseOperator> {
        assemble_curve_stiffness(self, 1.0)
    }
}

/// Nodal values of `f`; a non-finite value is an input error naming the node.
pub fn interpolate(nodes: &[Point], f: impl Fn(Point) -> f64) -> Result<Vec<f64>> {
    nodes
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let v = f(p);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Input(format!(
                    "non-finite value {v} at node {i} ({}, {})",
                    p[0], p[1]
                )))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1_semi: f64,
}

/// L2 norm with the consistent mass and H1 seminorm with the unit stiffness.
pub fn discrete_norms<S: P1Space + ?Sized>(u: &[f64], space: &S) -> Result<Norms> {
    let n = space.nodes().len();
    if u.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            actual: u.len(),
        });
    }
    let m = space.consistent_mass();
    let k = space.unit_stiffness()?;
    Ok(Norms {
        l2: m.quadratic_form(u).max(0.0).sqrt(),
        h1_semi: k.quadratic_form(u).max(0.0).sqrt(),
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
