//! M-spline and I-spline basis evaluation and design-matrix construction.
//!
//! M-splines of order `q` are piecewise-polynomial densities supported on `q`
//! consecutive knot intervals, built from the order-1 indicator densities via
//! the standard order recursion. I-splines are their running integrals,
//! evaluated through the closed partial-sum form over order-`p+1` M-splines;
//! with nonnegative coefficients a sum of I-splines is monotone
//! non-decreasing, which is what makes the basis suitable for power curves.
//!
//! Knot handling: the curve domain `[L, U]` carries `K` strictly increasing
//! interior knots, and both boundary knots are replicated `p + 1` times in
//! the augmented sequence, giving a basis of dimension `K + p + 1`. Basis
//! index 0 degenerates to the constant function 1 (its nominal support sits
//! entirely on the replicated left boundary), so the family contains an
//! intercept. Evaluation at `x = U` is defined by right-limit, i.e. the last
//! non-degenerate interval's polynomial piece is used, so the basis is
//! well-defined on the closed interval.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knot layout and order of an I-spline basis.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SplineBasisSpec {
    /// Strictly increasing interior knots, all inside `[boundary[0], boundary[1]]`.
    pub interior_knots: Vec<f64>,
    /// Curve domain `[L, U]`.
    pub boundary: [f64; 2],
    /// Degree `p` of the I-spline basis (positive).
    pub order: usize,
    #[serde(skip)]
    augmented: Vec<f64>,
}

impl SplineBasisSpec {
    pub fn new(interior_knots: Vec<f64>, boundary: [f64; 2], order: usize) -> Result<Self> {
        let [lo, hi] = boundary;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::config(format!("invalid boundary [{lo}, {hi}]")));
        }
        if order == 0 {
            return Err(Error::config("spline order must be positive"));
        }
        for w in interior_knots.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::config(format!(
                    "interior knots must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let (Some(first), Some(last)) = (interior_knots.first(), interior_knots.last()) {
            if *first < lo || *last > hi {
                return Err(Error::config(
                    "interior knots must lie inside the boundary",
                ));
            }
        }
        let mut spec = SplineBasisSpec {
            interior_knots,
            boundary,
            order,
            augmented: Vec::new(),
        };
        spec.rebuild_augmented();
        Ok(spec)
    }

    /// Default layout for a normalized power curve: interior knots at
    /// 3, 4, ..., 14 m/s (cut-in to rated, 1 m/s step), cubic basis, domain
    /// from standstill to cut-out.
    pub fn default_power_curve() -> Self {
        let interior: Vec<f64> = (3..=14).map(|k| k as f64).collect();
        SplineBasisSpec::new(interior, [0.0, 25.0], 3).expect("default spec is valid")
    }

    /// Rebuilds the cached augmented knot sequence; needed after
    /// deserialization, which skips the cache.
    pub fn rebuild_augmented(&mut self) {
        let p = self.order;
        let mut t = Vec::with_capacity(self.interior_knots.len() + 2 * (p + 1));
        t.extend(std::iter::repeat(self.boundary[0]).take(p + 1));
        t.extend_from_slice(&self.interior_knots);
        t.extend(std::iter::repeat(self.boundary[1]).take(p + 1));
        self.augmented = t;
    }

    /// Augmented knot sequence: boundary knots replicated `order + 1` times.
    pub fn augmented_knots(&self) -> &[f64] {
        &self.augmented
    }

    /// Basis dimension `K + p + 1`.
    pub fn dim(&self) -> usize {
        self.interior_knots.len() + self.order + 1
    }

    pub fn lower(&self) -> f64 {
        self.boundary[0]
    }

    pub fn upper(&self) -> f64 {
        self.boundary[1]
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower() && x <= self.upper()
    }

    /// Index `l` of the non-degenerate augmented-knot interval holding `x`,
    /// with `x = U` assigned to the last interval (right-limit convention).
    fn interval_index(&self, x: f64) -> usize {
        let p = self.order;
        let last = p + self.interior_knots.len();
        let t = &self.augmented;
        let mut l = last;
        for i in p..last {
            if x < t[i + 1] {
                l = i;
                break;
            }
        }
        l
    }
}

/// Order-`p` M-spline at `x` over an explicit knot sequence, by the direct
/// recursion. Zero-width supports yield 0; `x` equal to the sequence's top
/// value is evaluated by right-limit.
pub fn m_spline_raw(knots: &[f64], j: usize, p: usize, x: f64) -> f64 {
    debug_assert!(j + p < knots.len());
    let top = *knots.last().expect("knot sequence is nonempty");
    if p == 1 {
        let (lo, hi) = (knots[j], knots[j + 1]);
        if lo >= hi {
            return 0.0;
        }
        let inside = (x >= lo && x < hi) || (x == hi && hi == top);
        if inside {
            1.0 / (hi - lo)
        } else {
            0.0
        }
    } else {
        let (lo, hi) = (knots[j], knots[j + p]);
        if lo >= hi {
            return 0.0;
        }
        let in_support = (x >= lo && x < hi) || (x == hi && hi == top);
        if !in_support {
            return 0.0;
        }
        let a = (x - lo) * m_spline_raw(knots, j, p - 1, x);
        let b = (hi - x) * m_spline_raw(knots, j + 1, p - 1, x);
        (p as f64) * (a + b) / ((p as f64 - 1.0) * (hi - lo))
    }
}

/// Order-`p` M-spline value `M_j^p(x)` on the spec's augmented knots.
///
/// `p` may exceed the spec's own order by one, which is what the I-spline
/// partial-sum form needs.
pub fn m_spline(spec: &SplineBasisSpec, j: usize, p: usize, x: f64) -> Result<f64> {
    if p == 0 || p > spec.order + 1 {
        return Err(Error::domain(format!(
            "M-spline order {p} outside 1..={}",
            spec.order + 1
        )));
    }
    let t = spec.augmented_knots();
    if j + p >= t.len() {
        return Err(Error::domain(format!(
            "basis index {j} out of range for order {p}"
        )));
    }
    if !spec.contains(x) {
        return Err(Error::domain(format!(
            "x = {x} outside boundary [{}, {}]",
            spec.lower(),
            spec.upper()
        )));
    }
    Ok(m_spline_raw(t, j, p, x))
}

/// I-spline value `I_j(x)` of degree `spec.order`, via the closed piecewise
/// form: exactly 0 before the underlying support, exactly 1 past it, and a
/// partial sum of order-`p+1` M-splines in between.
pub fn i_spline(spec: &SplineBasisSpec, j: usize, x: f64) -> Result<f64> {
    if j >= spec.dim() {
        return Err(Error::domain(format!(
            "I-spline index {j} out of range for dimension {}",
            spec.dim()
        )));
    }
    if !spec.contains(x) {
        return Err(Error::domain(format!(
            "x = {x} outside boundary [{}, {}]",
            spec.lower(),
            spec.upper()
        )));
    }
    let p = spec.order;
    let l = spec.interval_index(x);
    if j > l {
        return Ok(0.0);
    }
    if (j as isize) < (l as isize) - (p as isize) + 1 {
        return Ok(1.0);
    }
    let t = spec.augmented_knots();
    let mut sum = 0.0;
    for m in j..=l {
        sum += (t[m + p + 1] - t[m]) * m_spline_raw(t, m, p + 1, x) / (p as f64 + 1.0);
    }
    Ok(sum.clamp(0.0, 1.0))
}

/// All I-spline values at `x`, computed with a bottom-up order table instead
/// of the pointwise recursion.
pub fn eval_basis(spec: &SplineBasisSpec, x: f64) -> Result<Vec<f64>> {
    if !spec.contains(x) {
        return Err(Error::domain(format!(
            "x = {x} outside boundary [{}, {}]",
            spec.lower(),
            spec.upper()
        )));
    }
    let p = spec.order;
    let t = spec.augmented_knots();
    let l = spec.interval_index(x);

    // values[j] holds M_j^q(x); only indices l-q+1..=l can be nonzero.
    let n_m = t.len() - (p + 1);
    let mut values = vec![0.0; n_m.max(l + 1)];
    values[l] = 1.0 / (t[l + 1] - t[l]);
    for q in 2..=(p + 1) {
        let j_lo = l.saturating_sub(q - 1);
        for j in j_lo..=l {
            let (lo, hi) = (t[j], t[j + q]);
            if lo >= hi {
                values[j] = 0.0;
                continue;
            }
            let a = (x - lo) * values[j];
            let b = if j + 1 <= l {
                (hi - x) * values[j + 1]
            } else {
                0.0
            };
            values[j] = (q as f64) * (a + b) / ((q as f64 - 1.0) * (hi - lo));
        }
        // The window's upper neighbor from the previous order is consumed.
        if l + 1 < values.len() {
            values[l + 1] = 0.0;
        }
    }

    let dim = spec.dim();
    let mut basis = vec![0.0; dim];
    let mut suffix = 0.0;
    // Walk j downward so each value is the suffix partial sum of Eq-style
    // contributions m = j..=l.
    for j in (0..dim).rev() {
        if j > l {
            basis[j] = 0.0;
        } else if (j as isize) < (l as isize) - (p as isize) + 1 {
            basis[j] = 1.0;
        } else {
            suffix += (t[j + p + 1] - t[j]) * values[j] / (p as f64 + 1.0);
            basis[j] = suffix.clamp(0.0, 1.0);
        }
    }
    Ok(basis)
}

/// Design matrix `Z` with `Z[i, j] = I_j(x_i)`; shape `N × (K + p + 1)`.
pub fn design_matrix(spec: &SplineBasisSpec, xs: &[f64]) -> Result<DMatrix<f64>> {
    let dim = spec.dim();
    let mut z = DMatrix::zeros(xs.len(), dim);
    for (i, &x) in xs.iter().enumerate() {
        let row = eval_basis(spec, x)?;
        for (j, v) in row.into_iter().enumerate() {
            z[(i, j)] = v;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn toy_spec() -> SplineBasisSpec {
        // One interior knot so every Eq-branch is exercised.
        SplineBasisSpec::new(vec![1.0], [0.0, 2.0], 1).unwrap()
    }

    #[test]
    fn order_one_indicator_density() {
        // Unit-width interval: density 1 inside, 0 outside.
        assert_abs_diff_eq!(m_spline_raw(&[0.0, 1.0], 0, 1, 0.5), 1.0);
        assert_abs_diff_eq!(m_spline_raw(&[0.0, 1.0], 0, 1, 1.5), 0.0);
        assert_abs_diff_eq!(m_spline_raw(&[0.0, 2.0], 0, 1, 0.3), 0.5);
    }

    #[test]
    fn augmented_sequence_and_dimension() {
        let spec = SplineBasisSpec::new(vec![3.0, 4.0], [0.0, 25.0], 3).unwrap();
        assert_eq!(spec.dim(), 2 + 3 + 1);
        assert_eq!(
            spec.augmented_knots(),
            &[0.0, 0.0, 0.0, 0.0, 3.0, 4.0, 25.0, 25.0, 25.0, 25.0]
        );
    }

    #[test]
    fn ispline_unit_density_integral() {
        // Single [0,1]-style cell: I_1 is the integral of a unit density.
        let spec = SplineBasisSpec::new(vec![], [0.0, 1.0], 1).unwrap();
        assert_abs_diff_eq!(i_spline(&spec, 1, 0.5).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(i_spline(&spec, 1, 0.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(i_spline(&spec, 1, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        // Index 0 is the intercept.
        assert_abs_diff_eq!(i_spline(&spec, 0, 0.3).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ispline_piecewise_branches_are_exact() {
        let spec = toy_spec();
        // x in [0,1): basis 2's support has not started.
        assert_eq!(i_spline(&spec, 2, 0.5).unwrap(), 0.0);
        // x in [1,2): basis 1's support is fully passed.
        assert_eq!(i_spline(&spec, 1, 1.5).unwrap(), 1.0);
        // Interior values match hand integration of the order-1 densities.
        assert_abs_diff_eq!(i_spline(&spec, 1, 0.25).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(i_spline(&spec, 2, 1.25).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn domain_errors() {
        let spec = toy_spec();
        assert!(i_spline(&spec, 0, -0.1).is_err());
        assert!(i_spline(&spec, 0, 2.1).is_err());
        assert!(i_spline(&spec, 3, 0.5).is_err());
        assert!(m_spline(&spec, 9, 1, 0.5).is_err());
    }

    /// Composite Simpson applied cell by cell, so the piecewise-polynomial
    /// integrand never straddles a knot (where it is not smooth) and the
    /// half-open right edge of order-1 cells is never sampled.
    fn simpson_over_cells(t: &[f64], from: f64, to: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mut cells: Vec<f64> = t.iter().copied().filter(|&k| k > from && k < to).collect();
        cells.insert(0, from);
        cells.push(to);
        cells.dedup();
        let mut total = 0.0;
        for w in cells.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let n = 64;
            let h = (b - a) / n as f64;
            let mut s = f(a) + f(b - 1e-12 * (b - a));
            for k in 1..n {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                s += w * f(a + k as f64 * h);
            }
            total += s * h / 3.0;
        }
        total
    }

    #[test]
    fn mspline_unit_integral_by_quadrature() {
        let spec = SplineBasisSpec::new(vec![3.0, 5.0, 8.0, 11.0], [0.0, 15.0], 3).unwrap();
        let t = spec.augmented_knots().to_vec();
        for p in 1..=spec.order + 1 {
            for j in 0..t.len() - p {
                if t[j + p] <= t[j] {
                    continue;
                }
                let s = simpson_over_cells(&t, t[j], t[j + p], |x| m_spline_raw(&t, j, p, x));
                assert_abs_diff_eq!(s, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn ispline_matches_quadrature_of_mspline() {
        // Integral definition against the closed partial-sum form (j >= 1;
        // index 0 is the degenerate intercept).
        let spec = SplineBasisSpec::new(vec![3.0, 5.0, 8.0], [0.0, 12.0], 3).unwrap();
        let t = spec.augmented_knots().to_vec();
        for j in 1..spec.dim() {
            for &x in &[0.5, 2.9, 3.0, 4.7, 6.1, 9.5, 11.99, 12.0] {
                let s =
                    simpson_over_cells(&t, spec.lower(), x, |u| m_spline_raw(&t, j, spec.order, u));
                assert_abs_diff_eq!(i_spline(&spec, j, x).unwrap(), s, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn eval_basis_matches_pointwise_recursion() {
        let spec = SplineBasisSpec::default_power_curve();
        for i in 0..=500 {
            let x = spec.lower() + (spec.upper() - spec.lower()) * i as f64 / 500.0;
            let fast = eval_basis(&spec, x).unwrap();
            for j in 0..spec.dim() {
                assert_abs_diff_eq!(fast[j], i_spline(&spec, j, x).unwrap(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn design_matrix_shape_and_empty_input() {
        let spec = SplineBasisSpec::default_power_curve();
        let z = design_matrix(&spec, &[]).unwrap();
        assert_eq!(z.nrows(), 0);
        assert_eq!(z.ncols(), spec.dim());

        let z = design_matrix(&spec, &[0.0, 7.3, 25.0]).unwrap();
        assert_eq!(z.nrows(), 3);
        for v in z.iter() {
            assert!(*v >= 0.0 && *v <= 1.0);
        }
    }

    #[test]
    fn columns_nondecreasing_for_sorted_input() {
        let spec = SplineBasisSpec::default_power_curve();
        let xs: Vec<f64> = (0..=1000).map(|i| 25.0 * i as f64 / 1000.0).collect();
        let z = design_matrix(&spec, &xs).unwrap();
        for j in 0..spec.dim() {
            for i in 1..xs.len() {
                assert!(
                    z[(i, j)] >= z[(i - 1, j)] - 1e-12,
                    "column {j} decreases at row {i}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn monotone_curve_for_nonnegative_coefficients(
            seed in 0u64..50,
            knot_count in 1usize..6,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut interior: Vec<f64> = (0..knot_count)
                .map(|_| rng.gen_range(0.5..9.5))
                .collect();
            interior.sort_by(|a, b| a.partial_cmp(b).unwrap());
            interior.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            let spec = SplineBasisSpec::new(interior, [0.0, 10.0], 3).unwrap();
            let beta: Vec<f64> = (0..spec.dim()).map(|_| rng.gen_range(0.0..2.0)).collect();
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=300 {
                let x = 10.0 * i as f64 / 300.0;
                let b = eval_basis(&spec, x).unwrap();
                let f: f64 = b.iter().zip(&beta).map(|(v, c)| v * c).sum();
                prop_assert!(f >= prev - 1e-10);
                prev = f;
            }
        }
    }
}
