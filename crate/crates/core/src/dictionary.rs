//! Candidate-function matrix of multivariate monomials.
//!
//! Column ordering is part of the on-disk interface (term indices appear in
//! result files): terms are sorted by total degree ascending, then by
//! exponent vector in lexicographically *descending* order within a degree,
//! so for d = 3, max_degree = 2 the columns are
//! `1, x, y, z, x², xy, xz, y², yz, z²`. The ordering is stable across
//! versions.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("non-finite state entry at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// A single monomial, identified by its exponent vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct TermSpec {
    pub exponents: Vec<u32>,
}

impl TermSpec {
    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    /// Evaluate the monomial at a state vector.
    pub fn eval(&self, state: &[f64]) -> f64 {
        let mut v = 1.0;
        for (x, &e) in state.iter().zip(&self.exponents) {
            if e > 0 {
                v *= x.powi(e as i32);
            }
        }
        v
    }
}

/// Feature matrix Θ plus per-column term descriptors.
#[derive(Debug, Clone)]
pub struct DictionaryMatrix {
    pub matrix: DMatrix<f64>,
    pub terms: Vec<TermSpec>,
    pub max_degree: usize,
    pub dimension: usize,
}

impl DictionaryMatrix {
    /// Largest absolute value per column, for optional PSO conditioning.
    pub fn column_abs_max(&self) -> Vec<f64> {
        (0..self.matrix.ncols())
            .map(|j| self.matrix.column(j).iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect()
    }
}

/// Number of monomials of degree <= max_degree in `dimension` variables:
/// C(dimension + max_degree, max_degree).
pub fn monomial_count(dimension: usize, max_degree: usize) -> usize {
    let mut c: usize = 1;
    for i in 1..=max_degree {
        c = c * (dimension + i) / i;
    }
    c
}

fn push_terms(prefix: &mut Vec<u32>, remaining_dims: usize, degree: u32, out: &mut Vec<TermSpec>) {
    if remaining_dims == 1 {
        prefix.push(degree);
        out.push(TermSpec {
            exponents: prefix.clone(),
        });
        prefix.pop();
        return;
    }
    // highest power on the leftmost variable first => lex-descending
    for e in (0..=degree).rev() {
        prefix.push(e);
        push_terms(prefix, remaining_dims - 1, degree - e, out);
        prefix.pop();
    }
}

/// All terms for the given dimension and degree bound, in column order.
pub fn enumerate_terms(dimension: usize, max_degree: usize) -> Vec<TermSpec> {
    let mut terms = Vec::with_capacity(monomial_count(dimension, max_degree));
    for degree in 0..=max_degree as u32 {
        push_terms(&mut Vec::new(), dimension, degree, &mut terms);
    }
    terms
}

/// Build Θ from an n×d state matrix.
pub fn build_dictionary(
    states: &DMatrix<f64>,
    max_degree: usize,
) -> Result<DictionaryMatrix, DictionaryError> {
    let (n, d) = states.shape();
    if n == 0 || d == 0 {
        return Err(DictionaryError::InvalidConfig(
            "states must be non-empty".into(),
        ));
    }
    if max_degree == 0 {
        return Err(DictionaryError::InvalidConfig(
            "max_degree must be >= 1".into(),
        ));
    }
    for i in 0..n {
        for j in 0..d {
            if !states[(i, j)].is_finite() {
                return Err(DictionaryError::NonFiniteInput { row: i, col: j });
            }
        }
    }

    let terms = enumerate_terms(d, max_degree);
    let mut matrix = DMatrix::zeros(n, terms.len());
    let mut state = vec![0.0; d];
    for i in 0..n {
        for (j, s) in state.iter_mut().enumerate() {
            *s = states[(i, j)];
        }
        for (j, term) in terms.iter().enumerate() {
            matrix[(i, j)] = term.eval(&state);
        }
    }

    Ok(DictionaryMatrix {
        matrix,
        terms,
        max_degree,
        dimension: d,
    })
}

/// Human-readable monomial, e.g. exponents (1,0,2) with names (x,y,z) → "x*z^2".
pub fn term_label(term: &TermSpec, var_names: &[&str]) -> String {
    assert_eq!(term.exponents.len(), var_names.len());
    let mut parts = Vec::new();
    for (&e, name) in term.exponents.iter().zip(var_names) {
        match e {
            0 => {}
            1 => parts.push(name.to_string()),
            _ => parts.push(format!("{name}^{e}")),
        }
    }
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join("*")
    }
}

/// Default variable names: x, y, z for d <= 3, otherwise x1..xd.
pub fn default_var_names(dimension: usize) -> Vec<String> {
    if dimension <= 3 {
        ["x", "y", "z"][..dimension]
            .iter()
            .map(|s| s.to_string())
            .collect()
    } else {
        (1..=dimension).map(|i| format!("x{i}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(d: usize, m: usize) -> Vec<String> {
        let names = default_var_names(d);
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        enumerate_terms(d, m)
            .iter()
            .map(|t| term_label(t, &refs))
            .collect()
    }

    #[test]
    fn one_dimensional_powers() {
        let states = DMatrix::from_row_slice(1, 1, &[2.0]);
        let dict = build_dictionary(&states, 3).unwrap();
        assert_eq!(dict.matrix.as_slice().len(), 4);
        assert_eq!(dict.matrix.row(0).iter().copied().collect::<Vec<_>>(), vec![
            1.0, 2.0, 4.0, 8.0
        ]);
    }

    #[test]
    fn degree_two_three_vars_ordering() {
        assert_eq!(
            labels(3, 2),
            vec!["1", "x", "y", "z", "x^2", "x*y", "x*z", "y^2", "y*z", "z^2"]
        );
    }

    #[test]
    fn column_count_matches_binomial() {
        for d in 1..=4 {
            for m in 1..=5 {
                let terms = enumerate_terms(d, m);
                assert_eq!(terms.len(), monomial_count(d, m), "d={d} m={m}");
                // and the counting formula itself against the closed form
                let binom = |n: usize, k: usize| -> usize {
                    (1..=k).fold(1usize, |acc, i| acc * (n - k + i) / i)
                };
                assert_eq!(monomial_count(d, m), binom(d + m, m));
            }
        }
    }

    #[test]
    fn zero_states_constant_column_only() {
        let states = DMatrix::zeros(4, 3);
        let dict = build_dictionary(&states, 3).unwrap();
        for i in 0..4 {
            assert_eq!(dict.matrix[(i, 0)], 1.0);
            for j in 1..dict.terms.len() {
                assert_eq!(dict.matrix[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn row_independence() {
        let stacked = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -0.5, 3.0, 0.25, -4.0]);
        let dict = build_dictionary(&stacked, 3).unwrap();
        for i in 0..3 {
            let single = build_dictionary(&stacked.rows(i, 1).into_owned(), 3).unwrap();
            assert_eq!(
                dict.matrix.row(i).iter().copied().collect::<Vec<_>>(),
                single.matrix.row(0).iter().copied().collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn rejects_non_finite() {
        let states = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, f64::NAN, 0.0]);
        match build_dictionary(&states, 2) {
            Err(DictionaryError::NonFiniteInput { row: 1, col: 0 }) => {}
            other => panic!("expected NonFiniteInput, got {other:?}"),
        }
    }

    #[test]
    fn term_labels() {
        let names = ["x", "y", "z"];
        let label = |e: [u32; 3]| {
            term_label(
                &TermSpec {
                    exponents: e.to_vec(),
                },
                &names,
            )
        };
        assert_eq!(label([0, 0, 0]), "1");
        assert_eq!(label([1, 0, 1]), "x*z");
        assert_eq!(label([0, 2, 0]), "y^2");
        assert_eq!(label([2, 1, 0]), "x^2*y");
    }
}
