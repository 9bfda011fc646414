//! The invariant bundle measure μ = e^{-Φ} Leb_g ⊠ ν.
//!
//! The base factor is the weighted Riemannian volume; the fibre factor ν is
//! either a Gaussian N(0, β⁻¹ I) living in the g-orthonormal frame (its
//! coordinate covariance is β⁻¹ g⁻¹(x)) or the normalized surface measure
//! on the unit fibre sphere. The module provides chart density evaluation,
//! exact sampling (direct where possible, rejection against declared
//! envelopes otherwise), fibrewise averaging (the projection P_S) and
//! iterated base-fibre quadrature.

use crate::bundle::TangentState;
use crate::dynamics::{FldParams, LangevinParams, Model, Potential};
use crate::error::{Error, Result};
use crate::geometry::{AtlasManifold, ChartPoint};
use crate::par::map_indexed;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use std::collections::HashMap;
use std::sync::{LazyLock, Mutex};

/// Fibre factor of the bundle measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FibreKind {
    /// N(0, β⁻¹ I) in the g-orthonormal frame (Langevin velocities).
    Gaussian { beta: f64 },
    /// Normalized surface measure on the unit fibre sphere (lay-down).
    UniformSphere,
}

/// Quadrature rules for base and fibre integrals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BaseRule {
    /// Structured grid with n points per axis.
    Grid { n: usize },
    /// Monte Carlo with n exact samples.
    Mc { n: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FibreRule {
    GaussHermite { order: usize },
    SphereGrid { n_theta: usize, n_phi: usize },
    CircleGrid { n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub base_rule: BaseRule,
    pub fibre_rule: FibreRule,
}

impl QuadratureSpec {
    pub fn new(base_rule: BaseRule, fibre_rule: FibreRule) -> Result<Self> {
        let ok = match fibre_rule {
            FibreRule::GaussHermite { order } => order >= 4,
            FibreRule::SphereGrid { n_theta, n_phi } => n_theta >= 4 && n_phi >= 4,
            FibreRule::CircleGrid { n } => n >= 4,
        };
        let ok = ok
            && match base_rule {
                BaseRule::Grid { n } => n >= 4,
                BaseRule::Mc { n, .. } => n >= 4,
            };
        if !ok {
            return Err(Error::InvalidArgument(
                "quadrature orders must be at least 4".into(),
            ));
        }
        Ok(QuadratureSpec {
            base_rule,
            fibre_rule,
        })
    }

    /// Defaults: base grid 64 per axis, Gauss-Hermite order 20, sphere grid
    /// 64x32, circle grid 256.
    pub fn default_for(fibre: FibreKind, dimension: usize) -> Self {
        let fibre_rule = match fibre {
            FibreKind::Gaussian { .. } => FibreRule::GaussHermite { order: 20 },
            FibreKind::UniformSphere => {
                if dimension >= 3 {
                    FibreRule::SphereGrid {
                        n_theta: 64,
                        n_phi: 32,
                    }
                } else {
                    FibreRule::CircleGrid { n: 256 }
                }
            }
        };
        QuadratureSpec {
            base_rule: BaseRule::Grid { n: 64 },
            fibre_rule,
        }
    }
}

/// The invariant measure μ = e^{-Φ} Leb_g ⊠ ν with Φ = phi_scale · Ψ.
///
/// For the Langevin model Φ = βΨ and ν is Gaussian; for the lay-down model
/// Φ = Ψ and ν is the uniform sphere measure.
#[derive(Clone, Debug)]
pub struct BundleMeasureSpec {
    pub psi: Potential,
    pub phi_scale: f64,
    pub fibre: FibreKind,
    /// Cached base partition estimate (value, error).
    pub normalization: (f64, f64),
    /// Optional override for the rejection-sampling envelope bound.
    pub envelope_override: Option<f64>,
}

impl BundleMeasureSpec {
    pub fn new(m: &AtlasManifold, psi: Potential, phi_scale: f64, fibre: FibreKind) -> Result<Self> {
        let mut spec = BundleMeasureSpec {
            psi,
            phi_scale,
            fibre,
            normalization: (1.0, 0.0),
            envelope_override: None,
        };
        spec.normalization = base_partition(m, &spec)?;
        Ok(spec)
    }

    pub fn for_langevin(m: &AtlasManifold, params: &LangevinParams) -> Result<Self> {
        Self::new(
            m,
            params.potential.clone(),
            params.beta,
            FibreKind::Gaussian { beta: params.beta },
        )
    }

    pub fn for_fld(m: &AtlasManifold, params: &FldParams) -> Result<Self> {
        Self::new(m, params.potential.clone(), 1.0, FibreKind::UniformSphere)
    }

    pub fn for_model(m: &AtlasManifold, model: &Model) -> Result<Self> {
        match model {
            Model::Langevin(p) => Self::for_langevin(m, p),
            Model::Fld(p) => Self::for_fld(m, p),
        }
    }

    /// Φ(x) = phi_scale · Ψ(x).
    pub fn phi(&self, m: &AtlasManifold, p: &ChartPoint) -> f64 {
        self.phi_scale * self.psi.psi(m, p)
    }

    /// Coordinate components of grad_g Φ.
    pub fn grad_phi(&self, m: &AtlasManifold, p: &ChartPoint) -> Result<DVector<f64>> {
        Ok(self.psi.grad_g(m, p)? * self.phi_scale)
    }
}

fn sphere_surface(d: usize) -> f64 {
    // |S^{d-1}| for the fibre dimensions we support.
    match d {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => {
            let dh = d as f64;
            2.0 * std::f64::consts::PI.powf(dh / 2.0) / statrs::function::gamma::gamma(dh / 2.0)
        }
    }
}

// ---------------------------------------------------------------------------
// Base grids
// ---------------------------------------------------------------------------

/// Structured base nodes with Riemannian volume weights, so that
/// ∫ f dLeb_g ≈ Σ f(pᵢ) wᵢ. Non-compact single-chart manifolds are covered
/// by a box of half-width `box_halfwidth`.
pub fn base_grid(
    m: &AtlasManifold,
    n_per_axis: usize,
    box_halfwidth: f64,
) -> Result<Vec<(ChartPoint, f64)>> {
    let n = n_per_axis.max(4);
    match m.name.as_str() {
        "flat_torus2" => {
            let h = 2.0 * std::f64::consts::PI / n as f64;
            let mut out = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let p = ChartPoint::new(0, vec![(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
                    out.push((p, h * h));
                }
            }
            Ok(out)
        }
        "sphere2_stereographic" => {
            // Latitude-longitude midpoint grid mapped into the two charts;
            // weight is the round area element sinθ dθ dφ.
            let n_theta = n;
            let n_phi = 2 * n;
            let dt = std::f64::consts::PI / n_theta as f64;
            let dp = 2.0 * std::f64::consts::PI / n_phi as f64;
            let mut out = Vec::with_capacity(n_theta * n_phi);
            for i in 0..n_theta {
                let theta = (i as f64 + 0.5) * dt;
                for j in 0..n_phi {
                    let phi = (j as f64 + 0.5) * dp;
                    let (chart, r) = if theta <= std::f64::consts::FRAC_PI_2 {
                        (0usize, (theta / 2.0).tan())
                    } else {
                        (1usize, ((std::f64::consts::PI - theta) / 2.0).tan())
                    };
                    // Chart 1 is the antipodal projection; the azimuth flips
                    // orientation but integration weights do not care.
                    let p = ChartPoint::new(chart, vec![r * phi.cos(), r * phi.sin()]);
                    out.push((p, theta.sin() * dt * dp));
                }
            }
            Ok(out)
        }
        _ => {
            if m.charts.len() != 1 {
                return Err(Error::InvalidArgument(format!(
                    "no base grid for multi-chart manifold '{}'",
                    m.name
                )));
            }
            let d = m.dimension;
            let h = 2.0 * box_halfwidth / n as f64;
            let mut out = Vec::new();
            let mut idx = vec![0usize; d];
            loop {
                let coords: Vec<f64> = idx
                    .iter()
                    .map(|&i| -box_halfwidth + (i as f64 + 0.5) * h)
                    .collect();
                let p = ChartPoint::new(0, coords);
                let w = m.volume_density(&p)? * h.powi(d as i32);
                out.push((p, w));
                // Increment the multi-index.
                let mut axis = 0;
                loop {
                    idx[axis] += 1;
                    if idx[axis] < n {
                        break;
                    }
                    idx[axis] = 0;
                    axis += 1;
                    if axis == d {
                        return Ok(out);
                    }
                }
            }
        }
    }
}

/// Default box half-width for non-compact base grids: wide enough that the
/// named Gaussian-type weights have negligible tail mass outside.
pub fn default_box_halfwidth(spec: &BundleMeasureSpec) -> f64 {
    match &spec.psi {
        Potential::Harmonic { a } | Potential::OffsetHarmonic { a, .. } => {
            let c = (spec.phi_scale * a).abs().max(1e-8);
            (10.0 / c.sqrt()).min(50.0)
        }
        _ => 10.0,
    }
}

/// Base partition function Z = ∫ e^{-Φ} dLeb_g with a refinement-difference
/// error estimate.
fn base_partition(m: &AtlasManifold, spec: &BundleMeasureSpec) -> Result<(f64, f64)> {
    let half = default_box_halfwidth(spec);
    let integrate = |n: usize| -> Result<f64> {
        let grid = base_grid(m, n, half)?;
        Ok(grid
            .iter()
            .map(|(p, w)| (-spec.phi(m, p)).exp() * w)
            .sum())
    };
    let fine = integrate(64)?;
    let coarse = integrate(32)?;
    Ok((fine, (fine - coarse).abs()))
}

// ---------------------------------------------------------------------------
// Density
// ---------------------------------------------------------------------------

/// The density of μ in a chart, with respect to Lebesgue measure dx dv for
/// Gaussian fibres and to dx ⊗ (surface measure of the unit g-sphere) for
/// uniform-sphere fibres.
pub fn mu_density_chart(m: &AtlasManifold, spec: &BundleMeasureSpec, s: &TangentState) -> Result<f64> {
    let p = m.normalize_point(&s.base_point())?;
    let detg = m.metric_at(&p)?.determinant();
    let base = (-spec.phi(m, &p)).exp() * detg.max(0.0).sqrt() / spec.normalization.0;
    let fibre = match spec.fibre {
        FibreKind::Gaussian { beta } => {
            let d = m.dimension as f64;
            let gvv = m.inner(&p, &s.v, &s.v)?;
            (beta / (2.0 * std::f64::consts::PI)).powf(d / 2.0)
                * detg.max(0.0).sqrt()
                * (-0.5 * beta * gvv).exp()
        }
        FibreKind::UniformSphere => 1.0 / sphere_surface(m.dimension),
    };
    Ok(base * fibre)
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

struct RejectionRegion {
    chart_id: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Extra acceptance predicate inside the box.
    inside: fn(&DVector<f64>) -> bool,
    /// Declared upper bound for e^{-Φ} sqrt(det g) on the region.
    bound: f64,
    /// Estimated share of total mass (used to pick the region).
    mass: f64,
}

fn named_phi_min(spec: &BundleMeasureSpec) -> Option<f64> {
    // Lower bound of Φ = phi_scale · Ψ for named potentials (phi_scale > 0).
    let s = spec.phi_scale;
    match &spec.psi {
        Potential::Zero => Some(0.0),
        Potential::Harmonic { a } if *a >= 0.0 => Some(0.0),
        Potential::OffsetHarmonic { offset, a } if *a >= 0.0 => Some(s * offset),
        Potential::SinX1 { a } | Potential::CosX1 { a } => Some(-s * a.abs()),
        _ => None,
    }
}

fn rejection_regions(m: &AtlasManifold, spec: &BundleMeasureSpec) -> Result<Vec<RejectionRegion>> {
    let phi_min = match (named_phi_min(spec), spec.envelope_override) {
        (_, Some(b)) => return regions_with_bound(m, spec, b),
        (Some(v), None) => v,
        (None, None) => {
            return Err(Error::InvalidArgument(format!(
                "no declared envelope for potential {:?} on '{}'; set envelope_override",
                spec.psi, m.name
            )))
        }
    };
    regions_with_bound(m, spec, (-phi_min).exp())
}

fn regions_with_bound(
    m: &AtlasManifold,
    spec: &BundleMeasureSpec,
    weight_bound: f64,
) -> Result<Vec<RejectionRegion>> {
    fn in_unit_disk(u: &DVector<f64>) -> bool {
        u.norm() <= 1.0
    }
    fn always(_: &DVector<f64>) -> bool {
        true
    }
    match m.name.as_str() {
        "flat_torus2" => {
            let tau = 2.0 * std::f64::consts::PI;
            Ok(vec![RejectionRegion {
                chart_id: 0,
                lo: vec![0.0, 0.0],
                hi: vec![tau, tau],
                inside: always,
                bound: weight_bound,
                mass: 1.0,
            }])
        }
        "sphere2_stereographic" => {
            // The closed unit disks of the two charts cover the sphere
            // (overlap only on the equator, a null set). sqrt(det g) ≤ 4.
            let mk = |chart_id, mass| RejectionRegion {
                chart_id,
                lo: vec![-1.0, -1.0],
                hi: vec![1.0, 1.0],
                inside: in_unit_disk,
                bound: 4.0 * weight_bound,
                mass,
            };
            let masses = hemisphere_masses(m, spec)?;
            Ok(vec![mk(0, masses.0), mk(1, masses.1)])
        }
        name if m.charts.len() == 1 => {
            let half = default_box_halfwidth(spec);
            let sqrt_detg_bound = single_chart_density_bound(m, half)?;
            let d = m.dimension;
            let _ = name;
            Ok(vec![RejectionRegion {
                chart_id: 0,
                lo: vec![-half; d],
                hi: vec![half; d],
                inside: always,
                bound: weight_bound * sqrt_detg_bound,
                mass: 1.0,
            }])
        }
        name => Err(Error::InvalidArgument(format!(
            "no sampling regions for manifold '{name}'"
        ))),
    }
}

fn hemisphere_masses(m: &AtlasManifold, spec: &BundleMeasureSpec) -> Result<(f64, f64)> {
    let grid = base_grid(m, 48, 0.0)?;
    let mut mass = [0.0f64; 2];
    for (p, w) in &grid {
        mass[p.chart_id] += (-spec.phi(m, p)).exp() * w;
    }
    let total = mass[0] + mass[1];
    Ok((mass[0] / total, mass[1] / total))
}

fn single_chart_density_bound(m: &AtlasManifold, half: f64) -> Result<f64> {
    // sqrt(det g) bound on the sampling box: for the built-in graphs the
    // metric density grows monotonically with |∇h|, so corner/grid scan with
    // a safety factor declares the bound.
    let mut bound: f64 = 0.0;
    let n = 33;
    let d = m.dimension;
    let mut idx = vec![0usize; d];
    loop {
        let coords: Vec<f64> = idx
            .iter()
            .map(|&i| -half + 2.0 * half * i as f64 / (n - 1) as f64)
            .collect();
        let p = ChartPoint::new(0, coords);
        bound = bound.max(m.volume_density(&p)?);
        let mut axis = 0;
        loop {
            idx[axis] += 1;
            if idx[axis] < n {
                break;
            }
            idx[axis] = 0;
            axis += 1;
            if axis == d {
                return Ok(bound * 1.001);
            }
        }
    }
}

fn sample_base<R: Rng>(
    m: &AtlasManifold,
    spec: &BundleMeasureSpec,
    regions: &[RejectionRegion],
    rng: &mut R,
) -> Result<ChartPoint> {
    // Direct sampling for the uniform torus.
    if m.name == "flat_torus2" && spec.psi.is_zero() {
        let tau = 2.0 * std::f64::consts::PI;
        return Ok(ChartPoint::new(
            0,
            vec![rng.gen::<f64>() * tau, rng.gen::<f64>() * tau],
        ));
    }
    // Direct sampling for Gaussian weights on flat charts.
    if matches!(m.name.as_str(), name if name.starts_with("euclidean")) {
        if let Potential::Harmonic { a } | Potential::OffsetHarmonic { a, .. } = spec.psi {
            let c = spec.phi_scale * a;
            if c > 0.0 {
                let sd = 1.0 / c.sqrt();
                return Ok(ChartPoint {
                    chart_id: 0,
                    coords: DVector::from_fn(m.dimension, |_, _| {
                        rng.sample::<f64, _>(StandardNormal) * sd
                    }),
                });
            }
        }
    }

    loop {
        // Pick a region proportionally to its mass.
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let region = regions
            .iter()
            .find(|r| {
                acc += r.mass;
                u <= acc
            })
            .unwrap_or(regions.last().expect("nonempty regions"));

        let coords = DVector::from_fn(m.dimension, |i, _| {
            region.lo[i] + (region.hi[i] - region.lo[i]) * rng.gen::<f64>()
        });
        if !(region.inside)(&coords) {
            continue;
        }
        let p = ChartPoint {
            chart_id: region.chart_id,
            coords,
        };
        let density = (-spec.phi(m, &p)).exp() * m.volume_density(&p)?;
        if density > region.bound {
            return Err(Error::EnvelopeViolation {
                chart_id: region.chart_id,
                density,
                bound: region.bound,
            });
        }
        if rng.gen::<f64>() * region.bound < density {
            return Ok(p);
        }
    }
}

fn sample_fibre<R: Rng>(
    m: &AtlasManifold,
    spec: &BundleMeasureSpec,
    p: &ChartPoint,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let l = m.orthonormal_frame_at(p)?;
    let zeta = DVector::from_fn(m.dimension, |_, _| rng.sample::<f64, _>(StandardNormal));
    match spec.fibre {
        FibreKind::Gaussian { beta } => Ok(l * zeta / beta.sqrt()),
        FibreKind::UniformSphere => {
            let v = l * zeta;
            let norm = m.norm(p, &v)?;
            if norm < 1e-12 {
                return sample_fibre(m, spec, p, rng);
            }
            Ok(v / norm)
        }
    }
}

/// Draws n i.i.d. samples from μ.
pub fn sample_mu<R: Rng>(
    m: &AtlasManifold,
    spec: &BundleMeasureSpec,
    n: usize,
    rng: &mut R,
) -> Result<Vec<TangentState>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need n >= 1 samples".into()));
    }
    let regions = rejection_regions(m, spec)?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let p = sample_base(m, spec, &regions, rng)?;
        let v = sample_fibre(m, spec, &p, rng)?;
        out.push(TangentState {
            chart_id: p.chart_id,
            x: p.coords,
            v,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Fibre quadrature and the projection P_S
// ---------------------------------------------------------------------------

static GH_CACHE: LazyLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

/// Gauss-Hermite nodes and weights for the weight e^{-t²} (Golub-Welsch).
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    if let Some(hit) = GH_CACHE.lock().unwrap().get(&order) {
        return hit.clone();
    }
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let w = std::f64::consts::PI.sqrt() * eig.eigenvectors[(0, i)].powi(2);
            (node, w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    GH_CACHE
        .lock()
        .unwrap()
        .insert(order, (nodes.clone(), weights.clone()));
    (nodes, weights)
}

/// Fibre quadrature nodes at a base point: velocity vectors with weights
/// summing to 1, so that E_ν f ≈ Σ wᵢ f(vᵢ).
pub fn fibre_nodes(
    m: &AtlasManifold,
    spec: &BundleMeasureSpec,
    quad: &QuadratureSpec,
    p: &ChartPoint,
) -> Result<Vec<(DVector<f64>, f64)>> {
    let l = m.orthonormal_frame_at(p)?;
    let d = m.dimension;
    match (spec.fibre, quad.fibre_rule) {
        (FibreKind::Gaussian { beta }, FibreRule::GaussHermite { order }) => {
            let (nodes, weights) = gauss_hermite(order);
            let norm = std::f64::consts::PI.powf(-(d as f64) / 2.0);
            let scale = (2.0 / beta).sqrt();
            let mut out = Vec::with_capacity(order.pow(d as u32));
            let mut idx = vec![0usize; d];
            loop {
                let t = DVector::from_fn(d, |i, _| nodes[idx[i]]);
                let w: f64 = idx.iter().map(|&i| weights[i]).product::<f64>() * norm;
                out.push((&l * t * scale, w));
                let mut axis = 0;
                loop {
                    idx[axis] += 1;
                    if idx[axis] < order {
                        break;
                    }
                    idx[axis] = 0;
                    axis += 1;
                    if axis == d {
                        return Ok(out);
                    }
                }
            }
        }
        (FibreKind::UniformSphere, rule) => match (d, rule) {
            (1, _) => Ok(vec![
                (l.column(0).into_owned(), 0.5),
                (-l.column(0).into_owned(), 0.5),
            ]),
            (2, FibreRule::CircleGrid { n }) | (2, FibreRule::GaussHermite { order: n }) => {
                let mut out = Vec::with_capacity(n);
                for j in 0..n {
                    let th = (j as f64 + 0.5) * 2.0 * std::f64::consts::PI / n as f64;
                    let v = l.column(0) * th.cos() + l.column(1) * th.sin();
                    out.push((v, 1.0 / n as f64));
                }
                Ok(out)
            }
            (2, FibreRule::SphereGrid { n_theta, .. }) => {
                let n = n_theta.max(4);
                let mut out = Vec::with_capacity(n);
                for j in 0..n {
                    let th = (j as f64 + 0.5) * 2.0 * std::f64::consts::PI / n as f64;
                    let v = l.column(0) * th.cos() + l.column(1) * th.sin();
                    out.push((v, 1.0 / n as f64));
                }
                Ok(out)
            }
            (3, FibreRule::SphereGrid { n_theta, n_phi }) => {
                let dt = std::f64::consts::PI / n_theta as f64;
                let dp = 2.0 * std::f64::consts::PI / n_phi as f64;
                let mut out = Vec::with_capacity(n_theta * n_phi);
                let mut total = 0.0;
                for i in 0..n_theta {
                    let th = (i as f64 + 0.5) * dt;
                    for j in 0..n_phi {
                        let ph = (j as f64 + 0.5) * dp;
                        let dir = DVector::from_vec(vec![
                            th.sin() * ph.cos(),
                            th.sin() * ph.sin(),
                            th.cos(),
                        ]);
                        let w = th.sin() * dt * dp;
                        total += w;
                        out.push((&l * dir, w));
                    }
                }
                for (_, w) in &mut out {
                    *w /= total;
                }
                Ok(out)
            }
            (d, rule) => Err(Error::InvalidArgument(format!(
                "no sphere quadrature for dimension {d} with rule {rule:?}"
            ))),
        },
        (fibre, rule) => Err(Error::InvalidArgument(format!(
            "fibre rule {rule:?} does not match fibre {fibre:?}"
        ))),
    }
}

/// Fibrewise average E_ν f at the fibre over p (the projection P_S).
pub fn fibrewise_average<F>(
    m: &AtlasManifold,
    spec: &BundleMeasureSpec,
    quad: &QuadratureSpec,
    f: F,
    p: &ChartPoint,
) -> Result<f64>
where
    F: Fn(&TangentState) -> f64,
{
    let nodes = fibre_nodes(m, spec, quad, p)?;
    Ok(nodes
        .iter()
        .map(|(v, w)| {
            w * f(&TangentState {
                chart_id: p.chart_id,
                x: p.coords.clone(),
                v: v.clone(),
            })
        })
        .sum())
}

/// Iterated integral ∫ f dμ with an error estimate (refinement difference
/// for grids, standard error for Monte Carlo).
pub fn integrate_mu<F>(
    m: &AtlasManifold,
    spec: &BundleMeasureSpec,
    f: &F,
    quad: &QuadratureSpec,
) -> Result<(f64, f64)>
where
    F: Fn(&TangentState) -> f64 + Sync,
{
    match quad.base_rule {
        BaseRule::Grid { n } => {
            let fine = grid_integral(m, spec, f, quad, n)?;
            let coarse = grid_integral(m, spec, f, quad, (n / 2).max(4))?;
            Ok((fine, (fine - coarse).abs()))
        }
        BaseRule::Mc { n, seed } => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let samples = sample_mu(m, spec, n, &mut rng)?;
            let values: Vec<f64> = samples.iter().map(f).collect();
            let (mean, se) = crate::stats::mean_and_stderr(&values);
            Ok((mean, se))
        }
    }
}

fn grid_integral<F>(
    m: &AtlasManifold,
    spec: &BundleMeasureSpec,
    f: &F,
    quad: &QuadratureSpec,
    n: usize,
) -> Result<f64>
where
    F: Fn(&TangentState) -> f64 + Sync,
{
    let half = default_box_halfwidth(spec);
    let grid = base_grid(m, n, half)?;
    let terms = map_indexed(grid.len(), |i| -> Result<(f64, f64)> {
        let (p, w) = &grid[i];
        let weight = (-spec.phi(m, p)).exp() * w;
        let avg = fibrewise_average(m, spec, quad, &f, p)?;
        Ok((weight * avg, weight))
    });
    let mut num = 0.0;
    let mut den = 0.0;
    for t in terms {
        let (a, b) = t?;
        num += a;
        den += b;
    }
    Ok(num / den)
}
