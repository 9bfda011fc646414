//! Shared helpers for unit, property and acceptance tests: deterministic
//! random points and states on the built-in manifolds.

use crate::bundle::TangentState;
use crate::geometry::{
    euclidean, flat_torus2, graph_surface, sphere2_stereographic, AtlasManifold, ChartPoint,
    HeightFn,
};
use nalgebra::DVector;
use rand::Rng;

/// The built-in manifolds exercised by the generic invariant tests.
pub fn test_manifolds() -> Vec<AtlasManifold> {
    vec![
        euclidean(1),
        euclidean(2),
        euclidean(3),
        sphere2_stereographic(),
        flat_torus2(),
        graph_surface(HeightFn::paraboloid(0.8)),
        graph_surface(HeightFn::sine_sheet(0.5, 1.0)),
    ]
}

/// A random valid point, drawn from a manifold-appropriate region.
pub fn random_point<R: Rng>(m: &AtlasManifold, rng: &mut R) -> ChartPoint {
    match m.name.as_str() {
        "sphere2_stereographic" => {
            let chart = usize::from(rng.gen::<bool>());
            loop {
                let u = DVector::from_fn(2, |_, _| rng.gen::<f64>() * 2.4 - 1.2);
                if u.norm() <= 1.2 {
                    return ChartPoint {
                        chart_id: chart,
                        coords: u,
                    };
                }
            }
        }
        "flat_torus2" => ChartPoint {
            chart_id: 0,
            coords: DVector::from_fn(2, |_, _| rng.gen::<f64>() * 2.0 * std::f64::consts::PI),
        },
        _ => ChartPoint {
            chart_id: 0,
            coords: DVector::from_fn(m.dimension, |_, _| rng.gen::<f64>() * 4.0 - 2.0),
        },
    }
}

/// A random tangent state with velocity components in [-1, 1)^d.
pub fn random_state<R: Rng>(m: &AtlasManifold, rng: &mut R) -> TangentState {
    let p = random_point(m, rng);
    let v = DVector::from_fn(m.dimension, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    TangentState {
        chart_id: p.chart_id,
        x: p.coords,
        v,
    }
}

/// A random state on the unit tangent bundle (velocity normalized to
/// |v|_g = 1).
pub fn random_unit_state<R: Rng>(m: &AtlasManifold, rng: &mut R) -> TangentState {
    let mut s = random_state(m, rng);
    loop {
        let norm = m
            .norm(&s.base_point(), &s.v)
            .expect("valid random point");
        if norm > 1e-8 {
            s.v /= norm;
            return s;
        }
        s.v = DVector::from_fn(m.dimension, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    }
}
