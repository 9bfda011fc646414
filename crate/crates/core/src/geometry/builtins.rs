//! Built-in manifolds.
//!
//! * `euclidean(d)` — flat ℝ^d, one chart. d = 1 is kept as the analytic
//!   baseline for the classical Langevin tests even though the models of
//!   interest live in d ≥ 2.
//! * `sphere2_stereographic()` — unit S², two stereographic charts (from the
//!   south and north pole respectively) glued by the inversion u ↦ u/|u|².
//!   No embedding is used anywhere.
//! * `flat_torus2()` — [0,2π)² with wrap-around, flat metric.
//! * `graph_surface(h)` — the graph of a height function over ℝ², metric
//!   I + ∇h ∇hᵀ (a sagging sheet).

use super::{AtlasManifold, ChartSpec, TransitionSpec};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Flat ℝ^d with the identity metric.
pub fn euclidean(d: usize) -> AtlasManifold {
    assert!(d >= 1);
    let chart = ChartSpec {
        chart_id: 0,
        dimension: d,
        validity: Arc::new(|x: &DVector<f64>| x.iter().all(|c| c.is_finite())),
        metric: Arc::new(move |_x: &DVector<f64>| DMatrix::identity(d, d)),
        christoffel: Some(Arc::new(move |_x: &DVector<f64>| {
            vec![DMatrix::zeros(d, d); d]
        })),
        wrap: None,
    };
    AtlasManifold {
        name: format!("euclidean({d})"),
        dimension: d,
        charts: vec![chart],
        transitions: vec![],
        switch_threshold: f64::INFINITY,
        compact: false,
    }
}

fn stereo_metric(u: &DVector<f64>) -> DMatrix<f64> {
    let s = 1.0 + u.norm_squared();
    DMatrix::identity(2, 2) * (4.0 / (s * s))
}

fn stereo_christoffel(u: &DVector<f64>) -> Vec<DMatrix<f64>> {
    // Conformal metric (4/(1+|u|²)²)·I: Γ^k_{ij} = -2(δ^k_i u_j + δ^k_j u_i - δ_{ij} u_k)/(1+|u|²)
    let s = 1.0 + u.norm_squared();
    let mut gamma = vec![DMatrix::zeros(2, 2); 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut val = 0.0;
                if i == k {
                    val += u[j];
                }
                if j == k {
                    val += u[i];
                }
                if i == j {
                    val -= u[k];
                }
                gamma[k][(i, j)] = -2.0 * val / s;
            }
        }
    }
    gamma
}

fn inversion(u: &DVector<f64>) -> DVector<f64> {
    u / u.norm_squared()
}

fn inversion_jacobian(u: &DVector<f64>) -> DMatrix<f64> {
    let r2 = u.norm_squared();
    let mut jac = DMatrix::identity(2, 2) / r2;
    for i in 0..2 {
        for j in 0..2 {
            jac[(i, j)] -= 2.0 * u[i] * u[j] / (r2 * r2);
        }
    }
    jac
}

/// Unit 2-sphere as two stereographic charts.
///
/// Chart 0 ("north") projects from the south pole and covers everything but
/// that pole; its origin is the north pole. Chart 1 is the mirror image. The
/// overlap transition is the inversion u ↦ u/|u|², an isometry of the round
/// metric 4/(1+|u|²)²·I.
pub fn sphere2_stereographic() -> AtlasManifold {
    let mk_chart = |chart_id| ChartSpec {
        chart_id,
        dimension: 2,
        validity: Arc::new(|u: &DVector<f64>| u.iter().all(|c| c.is_finite()) && u.norm() <= 8.0),
        metric: Arc::new(stereo_metric),
        christoffel: Some(Arc::new(stereo_christoffel)),
        wrap: None,
    };
    let mk_transition = |from_chart, to_chart| TransitionSpec {
        from_chart,
        to_chart,
        domain: Arc::new(|u: &DVector<f64>| u.norm() > 0.05),
        map: Arc::new(inversion),
        jacobian: Arc::new(inversion_jacobian),
    };
    AtlasManifold {
        name: "sphere2_stereographic".to_string(),
        dimension: 2,
        charts: vec![mk_chart(0), mk_chart(1)],
        transitions: vec![mk_transition(0, 1), mk_transition(1, 0)],
        switch_threshold: 1.5,
        compact: true,
    }
}

/// Flat torus [0,2π)², one chart with periodic wrap.
pub fn flat_torus2() -> AtlasManifold {
    let tau = 2.0 * std::f64::consts::PI;
    let chart = ChartSpec {
        chart_id: 0,
        dimension: 2,
        validity: Arc::new(|x: &DVector<f64>| x.iter().all(|c| c.is_finite())),
        metric: Arc::new(|_x: &DVector<f64>| DMatrix::identity(2, 2)),
        christoffel: Some(Arc::new(|_x: &DVector<f64>| {
            vec![DMatrix::zeros(2, 2); 2]
        })),
        wrap: Some(Arc::new(move |x: &DVector<f64>| {
            DVector::from_iterator(2, x.iter().map(|c| c.rem_euclid(tau)))
        })),
    };
    AtlasManifold {
        name: "flat_torus2".to_string(),
        dimension: 2,
        charts: vec![chart],
        transitions: vec![],
        switch_threshold: f64::INFINITY,
        compact: true,
    }
}

/// Height functions for `graph_surface`, with analytic gradient and Hessian.
#[derive(Clone, Debug)]
pub enum HeightFn {
    /// h(x) = a (x₁² + x₂²)/2
    Paraboloid { a: f64 },
    /// h(x) = a sin(b x₁) — a sheet sagging along the first axis.
    SineSheet { a: f64, b: f64 },
}

impl HeightFn {
    pub fn paraboloid(a: f64) -> Self {
        HeightFn::Paraboloid { a }
    }

    pub fn sine_sheet(a: f64, b: f64) -> Self {
        HeightFn::SineSheet { a, b }
    }

    /// Registry lookup by name with scalar parameters (a, b).
    pub fn by_name(name: &str, a: f64, b: f64) -> Option<Self> {
        match name {
            "paraboloid" => Some(HeightFn::Paraboloid { a }),
            "sine_sheet" => Some(HeightFn::SineSheet { a, b }),
            _ => None,
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            HeightFn::Paraboloid { a } => 0.5 * a * x.norm_squared(),
            HeightFn::SineSheet { a, b } => a * (b * x[0]).sin(),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            HeightFn::Paraboloid { a } => x * *a,
            HeightFn::SineSheet { a, b } => {
                DVector::from_vec(vec![a * b * (b * x[0]).cos(), 0.0])
            }
        }
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self {
            HeightFn::Paraboloid { a } => DMatrix::identity(2, 2) * *a,
            HeightFn::SineSheet { a, b } => {
                let mut h = DMatrix::zeros(2, 2);
                h[(0, 0)] = -a * b * b * (b * x[0]).sin();
                h
            }
        }
    }
}

/// Graph of a height function over ℝ²: metric I + ∇h ∇hᵀ.
///
/// Christoffels come from Γ^k_{ij} = h_k h_ij / (1 + |∇h|²).
pub fn graph_surface(h: HeightFn) -> AtlasManifold {
    let name = format!("graph_surface({h:?})");
    let h_metric = h.clone();
    let h_gamma = h.clone();
    let chart = ChartSpec {
        chart_id: 0,
        dimension: 2,
        validity: Arc::new(|x: &DVector<f64>| x.iter().all(|c| c.is_finite())),
        metric: Arc::new(move |x: &DVector<f64>| {
            let grad = h_metric.gradient(x);
            DMatrix::identity(2, 2) + &grad * grad.transpose()
        }),
        christoffel: Some(Arc::new(move |x: &DVector<f64>| {
            let grad = h_gamma.gradient(x);
            let hess = h_gamma.hessian(x);
            let denom = 1.0 + grad.norm_squared();
            (0..2).map(|k| &hess * (grad[k] / denom)).collect()
        })),
        wrap: None,
    };
    AtlasManifold {
        name,
        dimension: 2,
        charts: vec![chart],
        transitions: vec![],
        switch_threshold: f64::INFINITY,
        compact: false,
    }
}

/// Manifold registry used by the CLI: name plus scalar parameters.
pub fn manifold_by_name(
    name: &str,
    dim: Option<usize>,
    height: Option<HeightFn>,
) -> Option<AtlasManifold> {
    match name {
        "euclidean" => Some(euclidean(dim.unwrap_or(2))),
        "sphere2_stereographic" | "sphere2" => Some(sphere2_stereographic()),
        "flat_torus2" => Some(flat_torus2()),
        "graph_surface" => height.map(graph_surface),
        _ => None,
    }
}
