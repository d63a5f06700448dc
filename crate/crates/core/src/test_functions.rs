//! Separable compactly supported test functions and query points.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::preset::SupportParams;

/// The bump `phi(v) = (1 - (v / (m delta))^2)^p` tabulated on the stencil
/// `v = j delta`, `|j| <= m`, with analytic first and second derivatives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferencePhi {
    pub m: usize,
    pub p: u32,
    pub delta: f64,
    /// Values at `j = -m..=m` (index `j + m`).
    pub phi: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl ReferencePhi {
    /// Stencil length `2m + 1`.
    pub fn len(&self) -> usize {
        2 * self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Derivative table of the given order (0, 1 or 2).
    pub fn table(&self, order: usize) -> &[f64] {
        match order {
            0 => &self.phi,
            1 => &self.d1,
            2 => &self.d2,
            _ => panic!("test functions are tabulated up to second derivatives"),
        }
    }

    /// Evaluates `phi^(order)` at an arbitrary `v` (zero outside the support).
    pub fn eval(&self, v: f64, order: usize) -> f64 {
        phi_at(v, self.m as f64 * self.delta, self.p, order)
    }
}

fn phi_at(v: f64, a: f64, p: u32, order: usize) -> f64 {
    let u = v / a;
    let s = 1.0 - u * u;
    if s <= 0.0 {
        return 0.0;
    }
    let p = p as i32;
    let pf = p as f64;
    match order {
        0 => s.powi(p),
        1 => -2.0 * pf * u / a * s.powi(p - 1),
        2 => (-2.0 * pf * s.powi(p - 1) + 4.0 * pf * (pf - 1.0) * u * u * s.powi(p - 2)) / (a * a),
        _ => panic!("test functions are tabulated up to second derivatives"),
    }
}

/// Tabulates `phi_{m,p}` with spacing `delta`.
pub fn make_phi(m: usize, p: u32, delta: f64) -> Result<ReferencePhi> {
    if p < 3 {
        return Err(Error::DegreeTooSmall(p));
    }
    if m == 0 {
        return Err(Error::Config("test function support parameter m must be >= 1".into()));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Config(format!("test function spacing must be positive, got {delta}")));
    }
    let a = m as f64 * delta;
    let tab = |order| -> Vec<f64> {
        (-(m as i64)..=m as i64)
            .map(|j| {
                if j.unsigned_abs() as usize == m {
                    0.0
                } else {
                    phi_at(j as f64 * delta, a, p, order)
                }
            })
            .collect()
    };
    Ok(ReferencePhi { m, p, delta, phi: tab(0), d1: tab(1), d2: tab(2) })
}

/// A query point: grid-center indices and a time index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryPoint {
    pub space: Vec<usize>,
    pub time: usize,
}

/// Query lattice: the product of per-axis index lists.
///
/// Rows are ordered time-major, then spatial indices row-major with the
/// last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryLattice {
    pub space: Vec<Vec<usize>>,
    pub time: Vec<usize>,
}

impl QueryLattice {
    pub fn spatial_count(&self) -> usize {
        self.space.iter().map(Vec::len).product()
    }

    pub fn len(&self) -> usize {
        self.spatial_count() * self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Query point for row `k`.
    pub fn point(&self, k: usize) -> QueryPoint {
        let ns = self.spatial_count();
        let time = self.time[k / ns];
        let mut rest = k % ns;
        let mut space = vec![0; self.space.len()];
        for axis in (0..self.space.len()).rev() {
            let n = self.space[axis].len();
            space[axis] = self.space[axis][rest % n];
            rest /= n;
        }
        QueryPoint { space, time }
    }

    pub fn points(&self) -> Vec<QueryPoint> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }
}

fn axis_indices(count: usize, m: usize, stride: usize, axis: &str) -> Result<Vec<usize>> {
    if stride == 0 {
        return Err(Error::Config(format!("query stride along {axis} must be >= 1")));
    }
    if count < 2 * m + 1 {
        return Err(Error::SupportTooLarge { axis: axis.to_string(), support: 2 * m + 1, available: count });
    }
    Ok((m..count - m).step_by(stride).collect())
}

/// Uniform sublattice of centers whose test-function support fits inside
/// the grid and the observation window, anchored at the first admissible
/// index on each axis.
pub fn make_query_points(
    grid: &Grid,
    timepoints: usize,
    m_x: usize,
    m_t: usize,
    s_x: usize,
    s_t: usize,
) -> Result<QueryLattice> {
    let space = (0..grid.dim())
        .map(|a| axis_indices(grid.counts()[a], m_x, s_x, &format!("x{}", a + 1)))
        .collect::<Result<Vec<_>>>()?;
    let time = axis_indices(timepoints, m_t, s_t, "t")?;
    Ok(QueryLattice { space, time })
}

/// Space-time test functions `psi_k(x, t) = prod_a phi_x(x_a - x_ka) phi_t(t - t_k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestBasis {
    pub space: ReferencePhi,
    pub time: ReferencePhi,
    pub queries: QueryLattice,
    pub params: SupportParams,
}

impl TestBasis {
    /// Builds the basis for `grid` and uniformly spaced `times`.
    pub fn new(grid: &Grid, times: &[f64], params: SupportParams) -> Result<TestBasis> {
        let dt = uniform_step(times)?;
        let space = make_phi(params.m_x, params.p_x, grid.h())?;
        let time = make_phi(params.m_t, params.p_t, dt)?;
        let queries = make_query_points(grid, times.len(), params.m_x, params.m_t, params.s_x, params.s_t)?;
        Ok(TestBasis { space, time, queries, params })
    }

    /// Number of test functions (rows of G).
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.time.delta
    }

    /// Evaluates `d^a/dx^a d^b/dt^b psi_k(x, t)` where `orders[axis]` is
    /// the spatial derivative order per axis and `t_order` the temporal one.
    pub fn eval(&self, k: usize, grid: &Grid, x: &[f64], t: f64, t0: f64, orders: &[usize], t_order: usize) -> f64 {
        let q = self.queries.point(k);
        let mut v = self.time.eval(t - (t0 + q.time as f64 * self.time.delta), t_order);
        for (a, &o) in orders.iter().enumerate() {
            v *= self.space.eval(x[a] - grid.center(a, q.space[a]), o);
        }
        v
    }
}

/// Checks that `times` are equally spaced and returns the spacing.
pub fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Config("need at least two timepoints".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    let tol = 1e-6 * dt;
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > tol) {
        return Err(Error::Config("timestamps must be equally spaced".into()));
    }
    Ok(dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_peak() {
        for (m, p) in [(1, 3), (8, 3), (29, 5), (31, 7)] {
            let f = make_phi(m, p, 0.1).unwrap();
            assert_eq!(f.phi[m], 1.0);
            for t in [&f.phi, &f.d1, &f.d2] {
                assert_eq!(t[0], 0.0);
                assert_eq!(t[2 * m], 0.0);
            }
        }
        assert!(matches!(make_phi(4, 2, 1.0), Err(Error::DegreeTooSmall(2))));
    }

    #[test]
    fn derivatives_match_central_differences() {
        let f = make_phi(10, 5, 0.05).unwrap();
        let fine = make_phi(40, 5, 0.0125).unwrap();
        // phi' on the coarse stencil from differences on the 4x refined one
        let e = fine.delta;
        for j in 1..20 {
            let i = 4 * j;
            let fd = (fine.phi[i + 1] - fine.phi[i - 1]) / (2.0 * e);
            assert!((fd - f.d1[j]).abs() < 5.0 * e * e * 1e3, "{fd} vs {}", f.d1[j]);
            let fd2 = (fine.phi[i + 1] - 2.0 * fine.phi[i] + fine.phi[i - 1]) / (e * e);
            assert!((fd2 - f.d2[j]).abs() < 5e-2 * (1.0 + f.d2[j].abs()), "{fd2} vs {}", f.d2[j]);
        }
    }

    #[test]
    fn nonlocal_1d_query_count() {
        let g = Grid::new(vec![-3.0], 6.0 / 256.0, vec![256]).unwrap();
        let q = make_query_points(&g, 101, 29, 8, 5, 1).unwrap();
        assert_eq!(q.space[0].first(), Some(&29));
        assert_eq!(*q.space[0].last().unwrap(), 224);
        assert_eq!(q.time, (8..=92).collect::<Vec<_>>());
        assert_eq!(q.len(), 40 * 85);
        assert!((q.len() as f64 / 3368.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn two_dimensional_query_counts() {
        let g = Grid::new(vec![0.0, 0.0], 0.1, vec![128, 128]).unwrap();
        assert_eq!(make_query_points(&g, 101, 31, 16, 10, 5).unwrap().len(), 686);
        assert_eq!(make_query_points(&g, 81, 25, 8, 8, 1).unwrap().len(), 6500);
    }

    #[test]
    fn oversized_support_names_axis() {
        let g = Grid::new(vec![0.0, 0.0], 0.1, vec![128, 40]).unwrap();
        match make_query_points(&g, 50, 25, 8, 8, 1) {
            Err(Error::SupportTooLarge { axis, .. }) => assert_eq!(axis, "x2"),
            other => panic!("{other:?}"),
        }
        match make_query_points(&g, 10, 5, 8, 8, 1) {
            Err(Error::SupportTooLarge { axis, .. }) => assert_eq!(axis, "t"),
            other => panic!("{other:?}"),
        }
        let one = make_query_points(&Grid::new(vec![0.0], 0.1, vec![64]).unwrap(), 20, 5, 2, 64, 1).unwrap();
        assert_eq!(one.space[0].len(), 1);
    }

    #[test]
    fn row_order_is_time_major() {
        let q = QueryLattice { space: vec![vec![1, 2], vec![5, 6, 7]], time: vec![3, 4] };
        assert_eq!(q.point(0), QueryPoint { space: vec![1, 5], time: 3 });
        assert_eq!(q.point(1), QueryPoint { space: vec![1, 6], time: 3 });
        assert_eq!(q.point(3), QueryPoint { space: vec![2, 5], time: 3 });
        assert_eq!(q.point(6), QueryPoint { space: vec![1, 5], time: 4 });
    }

    proptest! {
        #[test]
        fn time_derivative_integrates_to_zero(m in 1usize..20, p in 3u32..8) {
            let f = make_phi(m, p, 0.01).unwrap();
            let s: f64 = f.d1.iter().sum();
            prop_assert!(s.abs() < 1e-9 * f.d1.iter().map(|v| v.abs()).sum::<f64>().max(1.0));
        }

        #[test]
        fn tables_are_even_and_odd(m in 1usize..40, p in 3u32..9, delta in 0.001f64..2.0) {
            let f = make_phi(m, p, delta).unwrap();
            for j in 0..=2 * m {
                prop_assert_eq!(f.phi[j], f.phi[2 * m - j]);
                prop_assert_eq!(f.d1[j], -f.d1[2 * m - j]);
                prop_assert_eq!(f.d2[j], f.d2[2 * m - j]);
            }
        }
    }
}
