//! Riemannian manifolds as finite chart atlases.
//!
//! A manifold is a set of charts with metric (and optionally Christoffel)
//! data plus explicit transition maps between overlapping charts. There is
//! deliberately no global embedding or trivialization anywhere: geodesics,
//! parallel transport and noise frames are all computed chart-locally, and
//! integration switches charts when coordinates leave a safe region.

mod builtins;

pub use builtins::{
    euclidean, flat_torus2, graph_surface, manifold_by_name, sphere2_stereographic, HeightFn,
};

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector};
use std::sync::Arc;

pub type CoordFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MetricFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type ValidityFn = Arc<dyn Fn(&DVector<f64>) -> bool + Send + Sync>;
pub type ChristoffelFn = Arc<dyn Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Send + Sync>;

/// One coordinate chart: validity region, metric, optional analytic
/// Christoffel symbols and optional periodic identification.
///
/// Christoffel data is stored as `gamma[k][(i, j)]` = Γ^k_{ij}.
#[derive(Clone)]
pub struct ChartSpec {
    pub chart_id: usize,
    pub dimension: usize,
    pub validity: ValidityFn,
    pub metric: MetricFn,
    pub christoffel: Option<ChristoffelFn>,
    pub wrap: Option<CoordFn>,
}

/// Transition between two charts: the coordinate map and its Jacobian.
#[derive(Clone)]
pub struct TransitionSpec {
    pub from_chart: usize,
    pub to_chart: usize,
    /// Domain predicate: where in the source chart the map is defined.
    pub domain: ValidityFn,
    pub map: CoordFn,
    pub jacobian: MetricFn,
}

/// A manifold given by charts, transitions and a chart-switch policy.
///
/// Immutable after construction; all operations are pure functions, so a
/// manifold can be shared freely across worker threads.
pub struct AtlasManifold {
    pub name: String,
    pub dimension: usize,
    pub charts: Vec<ChartSpec>,
    pub transitions: Vec<TransitionSpec>,
    /// Euclidean coordinate radius beyond which integrators try to switch
    /// to a better chart.
    pub switch_threshold: f64,
    /// Whether the base manifold is compact (grid quadrature and Poincare
    /// estimation need this).
    pub compact: bool,
}

/// A point of the manifold in a specific chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub chart_id: usize,
    pub coords: DVector<f64>,
}

impl ChartPoint {
    pub fn new(chart_id: usize, coords: impl Into<Vec<f64>>) -> Self {
        ChartPoint {
            chart_id,
            coords: DVector::from_vec(coords.into()),
        }
    }
}

impl AtlasManifold {
    pub fn chart(&self, chart_id: usize) -> &ChartSpec {
        &self.charts[chart_id]
    }

    /// Applies the chart's wrap map (if any) and checks validity.
    pub fn normalize_point(&self, p: &ChartPoint) -> Result<ChartPoint> {
        let chart = self.chart(p.chart_id);
        let coords = match &chart.wrap {
            Some(wrap) => wrap(&p.coords),
            None => p.coords.clone(),
        };
        if !(chart.validity)(&coords) {
            return Err(Error::InvalidChartPoint {
                chart_id: p.chart_id,
                coords: coords.iter().copied().collect(),
            });
        }
        Ok(ChartPoint {
            chart_id: p.chart_id,
            coords,
        })
    }

    /// Metric matrix g(p). Symmetric positive definite at valid points.
    pub fn metric_at(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        let p = self.normalize_point(p)?;
        Ok((self.chart(p.chart_id).metric)(&p.coords))
    }

    /// Inverse metric g^{-1}(p) via Cholesky.
    pub fn inverse_metric_at(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        let g = self.metric_at(p)?;
        let chol = Cholesky::new(g).ok_or_else(|| Error::SingularMetric {
            chart_id: p.chart_id,
            coords: p.coords.iter().copied().collect(),
        })?;
        Ok(chol.inverse())
    }

    /// Christoffel symbols Γ^k_{ij} at p, as `gamma[k][(i,j)]`.
    ///
    /// Uses the chart's analytic function when present, otherwise central
    /// finite differences of the metric with step h = 1e-5 (1 + |x|).
    pub fn christoffel_at(&self, p: &ChartPoint) -> Result<Vec<DMatrix<f64>>> {
        let p = self.normalize_point(p)?;
        let chart = self.chart(p.chart_id);
        if let Some(gamma) = &chart.christoffel {
            return Ok(gamma(&p.coords));
        }
        self.christoffel_fd(&p)
    }

    /// Finite-difference Christoffels from the metric alone.
    pub fn christoffel_fd(&self, p: &ChartPoint) -> Result<Vec<DMatrix<f64>>> {
        let d = self.dimension;
        let chart = self.chart(p.chart_id);
        let x = &p.coords;
        let h = 1e-5 * (1.0 + x.norm());

        // dg[l] = ∂_l g as a matrix
        let mut dg: Vec<DMatrix<f64>> = Vec::with_capacity(d);
        for l in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[l] += h;
            xm[l] -= h;
            let gp = (chart.metric)(&xp);
            let gm = (chart.metric)(&xm);
            dg.push((gp - gm) / (2.0 * h));
        }

        let g = (chart.metric)(x);
        let ginv = Cholesky::new(g)
            .ok_or_else(|| Error::SingularMetric {
                chart_id: p.chart_id,
                coords: x.iter().copied().collect(),
            })?
            .inverse();

        let mut gamma = vec![DMatrix::<f64>::zeros(d, d); d];
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut sum = 0.0;
                    for l in 0..d {
                        sum += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    gamma[k][(i, j)] = 0.5 * sum;
                }
            }
        }
        Ok(gamma)
    }

    /// Expresses the same manifold point in the target chart.
    pub fn transition_point(&self, p: &ChartPoint, target: usize) -> Result<ChartPoint> {
        if p.chart_id == target {
            return Ok(p.clone());
        }
        let t = self
            .transitions
            .iter()
            .find(|t| t.from_chart == p.chart_id && t.to_chart == target)
            .ok_or(Error::NoTransition {
                from: p.chart_id,
                to: target,
            })?;
        if !(t.domain)(&p.coords) {
            return Err(Error::OutOfDomain {
                from: p.chart_id,
                to: target,
                coords: p.coords.iter().copied().collect(),
            });
        }
        Ok(ChartPoint {
            chart_id: target,
            coords: (t.map)(&p.coords),
        })
    }

    /// Transition a point together with a tangent vector (pushed by the
    /// transition Jacobian).
    pub fn transition_state(
        &self,
        p: &ChartPoint,
        v: &DVector<f64>,
        target: usize,
    ) -> Result<(ChartPoint, DVector<f64>)> {
        if p.chart_id == target {
            return Ok((p.clone(), v.clone()));
        }
        let t = self
            .transitions
            .iter()
            .find(|t| t.from_chart == p.chart_id && t.to_chart == target)
            .ok_or(Error::NoTransition {
                from: p.chart_id,
                to: target,
            })?;
        if !(t.domain)(&p.coords) {
            return Err(Error::OutOfDomain {
                from: p.chart_id,
                to: target,
                coords: p.coords.iter().copied().collect(),
            });
        }
        let q = ChartPoint {
            chart_id: target,
            coords: (t.map)(&p.coords),
        };
        let jac = (t.jacobian)(&p.coords);
        Ok((q, &jac * v))
    }

    /// Picks a chart in which `p` sits comfortably inside the switch radius,
    /// pushing `v` along. Returns the input when no better chart exists.
    pub fn resettle(&self, p: &ChartPoint, v: &DVector<f64>) -> Result<(ChartPoint, DVector<f64>)> {
        let p = self.normalize_point(p)?;
        if p.coords.norm() <= self.switch_threshold {
            return Ok((p, v.clone()));
        }
        let mut best: Option<(ChartPoint, DVector<f64>)> = None;
        for t in self.transitions.iter().filter(|t| t.from_chart == p.chart_id) {
            if (t.domain)(&p.coords) {
                let cand = ChartPoint {
                    chart_id: t.to_chart,
                    coords: (t.map)(&p.coords),
                };
                let better = match &best {
                    Some((b, _)) => cand.coords.norm() < b.coords.norm(),
                    None => cand.coords.norm() < p.coords.norm(),
                };
                if better {
                    let jac = (t.jacobian)(&p.coords);
                    best = Some((cand, &jac * v));
                }
            }
        }
        match best {
            Some((q, w)) => {
                let q = self.normalize_point(&q)?;
                Ok((q, w))
            }
            None => {
                if (self.chart(p.chart_id).validity)(&p.coords) {
                    Ok((p, v.clone()))
                } else {
                    Err(Error::ChartEscape {
                        chart_id: p.chart_id,
                        coords: p.coords.iter().copied().collect(),
                    })
                }
            }
        }
    }

    /// Geodesic acceleration: a^k = -Γ^k_{ij} v^i v^j.
    pub fn geodesic_acceleration(
        &self,
        chart_id: usize,
        x: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let gamma = self.christoffel_at(&ChartPoint {
            chart_id,
            coords: x.clone(),
        })?;
        let d = self.dimension;
        let mut a = DVector::zeros(d);
        for k in 0..d {
            a[k] = -v.dot(&(&gamma[k] * v));
        }
        Ok(a)
    }

    /// One fixed-step RK4 integration of the geodesic equation
    /// x' = v, v' = -Γ(x)(v, v), with chart resettling afterwards.
    pub fn geodesic_step(
        &self,
        p: &ChartPoint,
        v: &DVector<f64>,
        dt: f64,
    ) -> Result<(ChartPoint, DVector<f64>)> {
        let (q, w) = self.geodesic_step_raw(p, v, dt)?;
        self.resettle(&q, &w)
    }

    /// The RK4 geodesic step without any chart switching (the endpoint stays
    /// in the starting chart). Callers carrying extra vectors along the
    /// geodesic use this to transition everything at the same point.
    pub fn geodesic_step_raw(
        &self,
        p: &ChartPoint,
        v: &DVector<f64>,
        dt: f64,
    ) -> Result<(ChartPoint, DVector<f64>)> {
        let p = self.normalize_point(p)?;
        let id = p.chart_id;
        let x0 = p.coords.clone();
        let v0 = v.clone();

        let a1 = self.geodesic_acceleration(id, &x0, &v0)?;
        let (k1x, k1v) = (v0.clone(), a1);

        let x2 = &x0 + &k1x * (dt / 2.0);
        let v2 = &v0 + &k1v * (dt / 2.0);
        let a2 = self.geodesic_acceleration(id, &x2, &v2)?;
        let (k2x, k2v) = (v2, a2);

        let x3 = &x0 + &k2x * (dt / 2.0);
        let v3 = &v0 + &k2v * (dt / 2.0);
        let a3 = self.geodesic_acceleration(id, &x3, &v3)?;
        let (k3x, k3v) = (v3, a3);

        let x4 = &x0 + &k3x * dt;
        let v4 = &v0 + &k3v * dt;
        let a4 = self.geodesic_acceleration(id, &x4, &v4)?;
        let (k4x, k4v) = (v4, a4);

        let x = &x0 + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (dt / 6.0);
        let v = &v0 + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0);

        Ok((
            ChartPoint {
                chart_id: id,
                coords: x,
            },
            v,
        ))
    }

    /// Parallel transport of `w` along the geodesic through (p, u) for one
    /// RK4 step of size dt: w'^k = -Γ^k_{ij} u^i w^j along x' = u.
    pub fn parallel_transport(
        &self,
        p: &ChartPoint,
        w: &DVector<f64>,
        u: &DVector<f64>,
        dt: f64,
    ) -> Result<DVector<f64>> {
        let p = self.normalize_point(p)?;
        let id = p.chart_id;
        let d = self.dimension;

        let deriv = |x: &DVector<f64>,
                     u: &DVector<f64>,
                     w: &DVector<f64>|
         -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
            let gamma = self.christoffel_at(&ChartPoint {
                chart_id: id,
                coords: x.clone(),
            })?;
            let mut du = DVector::zeros(d);
            let mut dw = DVector::zeros(d);
            for k in 0..d {
                du[k] = -u.dot(&(&gamma[k] * u));
                dw[k] = -u.dot(&(&gamma[k] * w));
            }
            Ok((u.clone(), du, dw))
        };

        let (x0, u0, w0) = (p.coords.clone(), u.clone(), w.clone());
        let (k1x, k1u, k1w) = deriv(&x0, &u0, &w0)?;
        let (k2x, k2u, k2w) = deriv(
            &(&x0 + &k1x * (dt / 2.0)),
            &(&u0 + &k1u * (dt / 2.0)),
            &(&w0 + &k1w * (dt / 2.0)),
        )?;
        let (k3x, k3u, k3w) = deriv(
            &(&x0 + &k2x * (dt / 2.0)),
            &(&u0 + &k2u * (dt / 2.0)),
            &(&w0 + &k2w * (dt / 2.0)),
        )?;
        let (k4x, k4u, k4w) = deriv(
            &(&x0 + &k3x * dt),
            &(&u0 + &k3u * dt),
            &(&w0 + &k3w * dt),
        )?;
        let _ = (k2x, k3x, k4x);
        let _ = (k1x, k1u, k2u, k3u, k4u);
        Ok(&w0 + (k1w + k2w * 2.0 + k3w * 2.0 + k4w) * (dt / 6.0))
    }

    /// Lower-triangular L with L Lᵀ = g^{-1}(p). Columns are the coordinate
    /// components of a g-orthonormal frame, so Lᵀ g L = I.
    pub fn orthonormal_frame_at(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        let ginv = self.inverse_metric_at(p)?;
        let chol = Cholesky::new(ginv).ok_or_else(|| Error::SingularMetric {
            chart_id: p.chart_id,
            coords: p.coords.iter().copied().collect(),
        })?;
        Ok(chol.l())
    }

    /// g-inner product of two coordinate vectors at p.
    pub fn inner(&self, p: &ChartPoint, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
        let g = self.metric_at(p)?;
        Ok(a.dot(&(&g * b)))
    }

    /// g-norm of a coordinate vector at p.
    pub fn norm(&self, p: &ChartPoint, a: &DVector<f64>) -> Result<f64> {
        Ok(self.inner(p, a, a)?.max(0.0).sqrt())
    }

    /// sqrt(det g(p)), the Riemannian volume density in the chart.
    pub fn volume_density(&self, p: &ChartPoint) -> Result<f64> {
        let g = self.metric_at(p)?;
        Ok(g.determinant().max(0.0).sqrt())
    }

    /// Minimal-image coordinate difference b - a, honoring the wrap map of
    /// the chart (used for arclength and binning on periodic charts).
    pub fn coord_difference(&self, chart_id: usize, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let chart = self.chart(chart_id);
        let mut diff = b - a;
        if chart.wrap.is_some() {
            // Built-in wraps are all 2π-periodic per axis.
            for i in 0..diff.len() {
                diff[i] = diff[i].rem_euclid(2.0 * std::f64::consts::PI);
                if diff[i] > std::f64::consts::PI {
                    diff[i] -= 2.0 * std::f64::consts::PI;
                }
            }
        }
        diff
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_point, test_manifolds};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn euclidean_metric_is_identity() {
        let m = euclidean(2);
        let p = ChartPoint::new(0, vec![0.3, -1.2]);
        let g = m.metric_at(&p).unwrap();
        assert_eq!(g, DMatrix::identity(2, 2));
    }

    #[test]
    fn sphere_metric_at_origin_is_four_identity() {
        let m = sphere2_stereographic();
        let g = m.metric_at(&ChartPoint::new(0, vec![0.0, 0.0])).unwrap();
        assert_relative_eq!(g[(0, 0)], 4.0, max_relative = 1e-14);
        assert_relative_eq!(g[(1, 1)], 4.0, max_relative = 1e-14);
        assert_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn torus_metric_is_identity() {
        let m = flat_torus2();
        let g = m.metric_at(&ChartPoint::new(0, vec![1.0, 5.0])).unwrap();
        assert_eq!(g, DMatrix::identity(2, 2));
    }

    #[test]
    fn invalid_point_is_rejected() {
        let m = sphere2_stereographic();
        let err = m.metric_at(&ChartPoint::new(0, vec![1e9, 0.0])).unwrap_err();
        assert!(matches!(err, Error::InvalidChartPoint { .. }));
    }

    #[test]
    fn euclidean_christoffels_vanish() {
        let m = euclidean(3);
        let p = ChartPoint::new(0, vec![0.5, -0.7, 2.0]);
        for mat in m.christoffel_at(&p).unwrap() {
            assert!(mat.amax() < 1e-12);
        }
        for mat in m.christoffel_fd(&p).unwrap() {
            assert!(mat.amax() < 1e-9);
        }
    }

    #[test]
    fn torus_christoffels_vanish() {
        let m = flat_torus2();
        let p = ChartPoint::new(0, vec![2.0, 3.0]);
        for mat in m.christoffel_at(&p).unwrap() {
            assert!(mat.amax() < 1e-12);
        }
    }

    // Analytic stereographic Christoffels: Γ^k_{ij} = -2(δ^k_i u_j + δ^k_j u_i - δ_{ij} u_k)/(1+|u|²)
    #[test]
    fn sphere_fd_christoffels_match_analytic() {
        let m = sphere2_stereographic();
        let p = ChartPoint::new(0, vec![0.3, -0.1]);
        let fd = m.christoffel_fd(&p).unwrap();
        let analytic = m.christoffel_at(&p).unwrap();
        for k in 0..2 {
            assert!((&fd[k] - &analytic[k]).amax() < 1e-6);
        }
        // Spot-check one analytic value by hand: Γ^0_{01} = -2 u_2 / (1+|u|²).
        let u = [0.3, -0.1];
        let denom = 1.0 + u[0] * u[0] + u[1] * u[1];
        assert_relative_eq!(analytic[0][(0, 1)], -2.0 * u[1] / denom, epsilon = 1e-12);
    }

    #[test]
    fn fd_christoffels_match_analytic_on_graph_surface() {
        let m = graph_surface(HeightFn::sine_sheet(0.5, 1.0));
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p = random_point(&m, &mut rng);
            let fd = m.christoffel_fd(&p).unwrap();
            let analytic = m.christoffel_at(&p).unwrap();
            for k in 0..2 {
                assert!((&fd[k] - &analytic[k]).amax() < 1e-6);
            }
        }
    }

    #[test]
    fn metric_spd_and_christoffel_symmetric_on_random_points() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for m in test_manifolds() {
            for _ in 0..1000 {
                let p = random_point(&m, &mut rng);
                let g = m.metric_at(&p).unwrap();
                assert!((&g - g.transpose()).amax() < 1e-12, "{} symmetry", m.name);
                assert!(Cholesky::new(g).is_some(), "{} SPD", m.name);
                let gamma = m.christoffel_at(&p).unwrap();
                for k in 0..m.dimension {
                    assert!(
                        (&gamma[k] - gamma[k].transpose()).amax() < 1e-10,
                        "{} lower-index symmetry",
                        m.name
                    );
                }
            }
        }
    }

    #[test]
    fn torus_wrap_is_periodic() {
        let m = flat_torus2();
        let p = m
            .normalize_point(&ChartPoint::new(0, vec![2.0 * std::f64::consts::PI + 0.1, 0.0]))
            .unwrap();
        assert_relative_eq!(p.coords[0], 0.1, epsilon = 1e-12);
        assert_eq!(p.coords[1], 0.0);
    }

    #[test]
    fn sphere_transition_at_origin_is_out_of_domain() {
        let m = sphere2_stereographic();
        let err = m
            .transition_point(&ChartPoint::new(0, vec![0.0, 0.0]), 1)
            .unwrap_err();
        assert!(matches!(err, Error::OutOfDomain { .. }));
    }

    #[test]
    fn sphere_transition_is_inversion() {
        let m = sphere2_stereographic();
        let q = m
            .transition_point(&ChartPoint::new(0, vec![1.0, 0.0]), 1)
            .unwrap();
        assert_eq!(q.chart_id, 1);
        assert_relative_eq!(q.coords[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(q.coords[1], 0.0, epsilon = 1e-14);
        let q2 = m
            .transition_point(&ChartPoint::new(0, vec![2.0, 0.0]), 1)
            .unwrap();
        assert_relative_eq!(q2.coords[0], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn transition_jacobian_matches_fd_and_metric_pullback() {
        let m = sphere2_stereographic();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let t = &m.transitions[0];
        for _ in 0..1000 {
            // Points in the overlap annulus 0.5 < |u| < 2.
            let r = 0.5 + 1.5 * rand::Rng::gen::<f64>(&mut rng);
            let th = 2.0 * std::f64::consts::PI * rand::Rng::gen::<f64>(&mut rng);
            let x = DVector::from_vec(vec![r * th.cos(), r * th.sin()]);
            let jac = (t.jacobian)(&x);

            // FD check of the Jacobian.
            let h = 1e-6;
            for j in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let col = ((t.map)(&xp) - (t.map)(&xm)) / (2.0 * h);
                for i in 0..2 {
                    assert_relative_eq!(jac[(i, j)], col[i], max_relative = 1e-6, epsilon = 1e-8);
                }
            }

            // Isometry: Jᵀ g_to(φ(x)) J = g_from(x).
            let y = (t.map)(&x);
            let g_to = (m.chart(1).metric)(&y);
            let g_from = (m.chart(0).metric)(&x);
            let pulled = jac.transpose() * g_to * &jac;
            let rel = (&pulled - &g_from).amax() / g_from.amax();
            assert!(rel < 1e-8);
        }
    }

    #[test]
    fn euclidean_geodesic_is_straight_line() {
        let m = euclidean(2);
        let p = ChartPoint::new(0, vec![1.0, 2.0]);
        let v = DVector::from_vec(vec![0.5, -0.25]);
        let (q, w) = m.geodesic_step(&p, &v, 0.125).unwrap();
        // RK4 with zero acceleration must be bitwise x + dt·v.
        assert_eq!(q.coords[0], 1.0 + 0.125 * 0.5);
        assert_eq!(q.coords[1], 2.0 + 0.125 * (-0.25));
        assert_eq!(w, v);
    }

    #[test]
    fn torus_geodesic_wraps() {
        let m = flat_torus2();
        let p = ChartPoint::new(0, vec![6.2, 0.0]);
        let v = DVector::from_vec(vec![1.0, 0.0]);
        let (q, _) = m.geodesic_step(&p, &v, 0.2).unwrap();
        assert_relative_eq!(q.coords[0], 6.4 - 2.0 * std::f64::consts::PI, epsilon = 1e-12);
    }

    #[test]
    fn geodesic_energy_conserved_on_all_builtins() {
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        for m in test_manifolds() {
            let mut p = random_point(&m, &mut rng);
            let mut v = DVector::from_fn(m.dimension, |_, _| {
                rand::Rng::gen::<f64>(&mut rng) * 2.0 - 1.0
            });
            let e0 = m.inner(&p, &v, &v).unwrap();
            for _ in 0..1000 {
                let (q, w) = m.geodesic_step(&p, &v, 1e-3).unwrap();
                p = q;
                v = w;
            }
            let e1 = m.inner(&p, &v, &v).unwrap();
            assert!(
                ((e1 - e0) / e0).abs() < 1e-7,
                "{}: relative energy drift {}",
                m.name,
                ((e1 - e0) / e0).abs()
            );
        }
    }

    /// Great circle on the sphere: unit-speed geodesic from the north chart
    /// origin returns to the antipode (south chart origin) at time π, and the
    /// endpoint matches the embedded closed form through both charts.
    #[test]
    fn sphere_great_circle_crosses_charts_accurately() {
        let m = sphere2_stereographic();
        let mut p = ChartPoint::new(0, vec![0.0, 0.0]);
        // |v|_g = 1 at the origin needs coordinate speed 1/2 (g = 4I).
        let mut v = DVector::from_vec(vec![0.5, 0.0]);
        assert_relative_eq!(m.norm(&p, &v).unwrap(), 1.0, epsilon = 1e-14);

        let dt = 1e-3;
        let steps = (std::f64::consts::PI / dt).floor() as usize;
        let remainder = std::f64::consts::PI - steps as f64 * dt;
        let mut switched = false;
        for _ in 0..steps {
            let (q, w) = m.geodesic_step(&p, &v, dt).unwrap();
            if q.chart_id != p.chart_id {
                switched = true;
            }
            p = q;
            v = w;
        }
        let (q, w) = m.geodesic_step(&p, &v, remainder).unwrap();
        p = q;
        v = w;
        assert!(switched, "trajectory must change charts");
        assert_relative_eq!(m.norm(&p, &v).unwrap(), 1.0, epsilon = 1e-8);

        // Embedded oracle: start (0,0,1), velocity e_x => at time π the point
        // is (0,0,-1), i.e. the south chart origin.
        assert_eq!(p.chart_id, 1);
        assert!(p.coords.norm() < 1e-6, "endpoint error {}", p.coords.norm());
    }

    #[test]
    fn parallel_transport_preserves_norm_and_euclidean_identity() {
        let m = euclidean(2);
        let p = ChartPoint::new(0, vec![0.0, 0.0]);
        let w = DVector::from_vec(vec![0.3, 0.4]);
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let w1 = m.parallel_transport(&p, &w, &u, 0.1).unwrap();
        assert_eq!(w1, w);

        let m = sphere2_stereographic();
        let mut p = ChartPoint::new(0, vec![0.0, 0.0]);
        let mut u = DVector::from_vec(vec![0.5, 0.0]);
        let mut w = DVector::from_vec(vec![0.1, 0.2]);
        let n0 = m.norm(&p, &w).unwrap();
        for _ in 0..1000 {
            w = m.parallel_transport(&p, &w, &u, 1e-3).unwrap();
            let (q, unew) = m.geodesic_step(&p, &u, 1e-3).unwrap();
            if q.chart_id != p.chart_id {
                // Push w through the same transition the geodesic took.
                let (_, wnew) = m.transition_state(&p, &w, q.chart_id).unwrap();
                w = wnew;
            }
            p = q;
            u = unew;
        }
        let n1 = m.norm(&p, &w).unwrap();
        assert!(((n1 - n0) / n0).abs() < 1e-8);
    }

    /// Transport around a closed great circle comes back identically: the
    /// loop is a geodesic, so the angle to the tangent is constant and the
    /// embedded oracle gives holonomy zero for the full loop.
    #[test]
    fn sphere_full_loop_holonomy_matches_embedded_oracle() {
        let m = sphere2_stereographic();
        let mut p = ChartPoint::new(0, vec![0.0, 0.0]);
        let mut u = DVector::from_vec(vec![0.5, 0.0]);
        let w0 = DVector::from_vec(vec![0.1, 0.2]);
        let mut w = w0.clone();
        let dt = 1e-3;
        let total = 2.0 * std::f64::consts::PI;
        let steps = (total / dt).floor() as usize;
        let mut advance = |p: &mut ChartPoint, u: &mut DVector<f64>, w: &mut DVector<f64>, h: f64| {
            *w = m.parallel_transport(p, w, u, h).unwrap();
            let (q, unew) = m.geodesic_step(p, u, h).unwrap();
            if q.chart_id != p.chart_id {
                let (_, wnew) = m.transition_state(p, w, q.chart_id).unwrap();
                *w = wnew;
            }
            *p = q;
            *u = unew;
        };
        for _ in 0..steps {
            advance(&mut p, &mut u, &mut w, dt);
        }
        advance(&mut p, &mut u, &mut w, total - steps as f64 * dt);
        assert_eq!(p.chart_id, 0);
        assert!(p.coords.norm() < 1e-5);
        assert!((w - w0).norm() < 1e-5);
    }

    #[test]
    fn orthonormal_frame_properties() {
        let m = sphere2_stereographic();
        let p = ChartPoint::new(0, vec![0.0, 0.0]);
        let l = m.orthonormal_frame_at(&p).unwrap();
        assert_relative_eq!(l[(0, 0)], 0.5, epsilon = 1e-14);
        assert_relative_eq!(l[(1, 1)], 0.5, epsilon = 1e-14);

        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for m in test_manifolds() {
            for _ in 0..50 {
                let p = random_point(&m, &mut rng);
                let l = m.orthonormal_frame_at(&p).unwrap();
                let g = m.metric_at(&p).unwrap();
                let should_be_id = l.transpose() * g * &l;
                assert!((should_be_id - DMatrix::identity(m.dimension, m.dimension)).amax() < 1e-10);
            }
        }
    }
}
