use super::{DiagonalOperator, SparseOperator};
use crate::error::{Error, Result};

/// Old-to-new index map collapsing each class onto one reduced index.
/// Reduced indices follow the order of first appearance by old index.
pub fn periodic_index_map(dimension: usize, classes: &[Vec<usize>]) -> Result<(Vec<usize>, usize)> {
    let mut owner = vec![usize::MAX; dimension];
    for (c, class) in classes.iter().enumerate() {
        for &v in class {
            if v >= dimension {
                return Err(Error::Constraint(format!(
                    "class {c} references index {v} beyond dimension {dimension}"
                )));
            }
            if owner[v] != usize::MAX {
                return Err(Error::Constraint(format!(
                    "index {v} belongs to classes {} and {c}",
                    owner[v]
                )));
            }
            owner[v] = c;
        }
    }
    let mut class_index = vec![usize::MAX; classes.len()];
    let mut map = Vec::with_capacity(dimension);
    let mut next = 0;
    for &o in owner.iter() {
        if o == usize::MAX {
            map.push(next);
            next += 1;
        } else {
            if class_index[o] == usize::MAX {
                class_index[o] = next;
                next += 1;
            }
            map.push(class_index[o]);
        }
    }
    Ok((map, next))
}

/// `P^T v`: sum entries of each class onto its reduced index.
pub fn restrict_vector(v: &[f64], map: &[usize], reduced: usize) -> Vec<f64> {
    let mut out = vec![0.0; reduced];
    for (i, &x) in v.iter().enumerate() {
        out[map[i]] += x;
    }
    out
}

/// `P u`: copy each reduced value back to every member of its class.
pub fn expand_vector(u: &[f64], map: &[usize]) -> Vec<f64> {
    map.iter().map(|&k| u[k]).collect()
}

/// Operators that can be reduced by summing rows and columns of identified nodes.
pub trait Constrainable: Sized {
    fn constrain(&self, map: &[usize], reduced: usize) -> Self;
    fn dim(&self) -> usize;
}

impl Constrainable for SparseOperator {
    fn constrain(&self, map: &[usize], reduced: usize) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.dimension() {
            let (c, v) = self.row(i);
            t.extend(c.iter().zip(v).map(|(&j, &x)| (map[i], map[j], x)));
        }
        SparseOperator::from_triplets(reduced, &t, self.is_symmetric())
    }
    fn dim(&self) -> usize {
        self.dimension()
    }
}

impl Constrainable for DiagonalOperator {
    fn constrain(&self, map: &[usize], reduced: usize) -> Self {
        DiagonalOperator {
            values: restrict_vector(&self.values, map, reduced),
        }
    }
    fn dim(&self) -> usize {
        self.dimension()
    }
}

/// `P^T A P` for the identification given by `classes`, with the old-to-new map.
pub fn apply_periodic_constraints<T: Constrainable>(
    op: &T,
    classes: &[Vec<usize>],
) -> Result<(T, Vec<usize>)> {
    let (map, reduced) = periodic_index_map(op.dim(), classes)?;
    Ok((op.constrain(&map, reduced), map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_stiffness, Tensor2};
    use crate::mesh::{default_tolerance, generate_mesh, match_periodic_nodes, GeometrySpec};

    #[test]
    fn no_classes_is_identity() {
        let d = DiagonalOperator {
            values: vec![1.0, 2.0, 3.0],
        };
        let (r, map) = apply_periodic_constraints(&d, &[]).unwrap();
        assert_eq!(r, d);
        assert_eq!(map, vec![0, 1, 2]);
    }

    #[test]
    fn two_nodes_identified() {
        let d = DiagonalOperator {
            values: vec![0.25, 0.5],
        };
        let (r, map) = apply_periodic_constraints(&d, &[vec![0, 1]]).unwrap();
        assert_eq!(r.values, vec![0.75]);
        assert_eq!(map, vec![0, 0]);
    }

    #[test]
    fn overlapping_classes_rejected() {
        let d = DiagonalOperator {
            values: vec![1.0; 3],
        };
        assert!(matches!(
            apply_periodic_constraints(&d, &[vec![0, 1], vec![1, 2]]),
            Err(Error::Constraint(_))
        ));
    }

    #[test]
    fn periodic_stiffness_keeps_constants_in_kernel() {
        let m = generate_mesh(
            &GeometrySpec::Square {
                lower: [0.0, 0.0],
                upper: [1.0, 1.0],
                divisions: 5,
            },
            0,
        )
        .unwrap();
        let m = match_periodic_nodes(&m, [[1.0, 0.0], [0.0, 1.0]], default_tolerance(&m)).unwrap();
        let k = assemble_stiffness(&m, Tensor2::identity()).unwrap();
        let (kr, map) = apply_periodic_constraints(&k, &m.periodic_classes).unwrap();
        assert_eq!(kr.dimension(), 25);
        assert_eq!(map.len(), 36);
        assert!(kr.is_symmetric());
        let y = kr.apply(&vec![1.0; 25]);
        assert!(y.iter().all(|v| v.abs() < 1e-14));
        // the reduced stiffness equals P^T K P computed densely
        let p = |i: usize, k: usize| if map[i] == k { 1.0 } else { 0.0 };
        let kd = k.to_dense();
        for a in 0..25 {
            for b in 0..25 {
                let mut s = 0.0;
                for i in 0..36 {
                    for j in 0..36 {
                        s += p(i, a) * kd[i][j] * p(j, b);
                    }
                }
                assert!((s - kr.get(a, b)).abs() < 1e-13);
            }
        }
    }
}
