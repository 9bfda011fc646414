//! Stochastic integrators on the tangent and unit tangent bundles.
//!
//! Two models are integrated with fixed step size and per-trajectory
//! deterministic RNG streams:
//!
//! * Langevin dynamics on T𝕄 — horizontal geodesic motion, vertical force
//!   -grad Ψ, exact Ornstein-Uhlenbeck friction/noise in the g-orthonormal
//!   frame. The default scheme is the Strang splitting O-B-A-B-O whose O
//!   and A legs are exact for their generator summands.
//! * Fibre lay-down dynamics on UT𝕄 — geodesic transport plus tangentially
//!   projected drift and noise on the unit fibre sphere, realized as
//!   renormalized projected Euler-Maruyama between geodesic half-steps
//!   (weak order 1 for the Stratonovich sphere diffusion with generator
//!   (σ²/2)Δ_S).

use crate::bundle::TangentState;
use crate::error::{Error, Result};
use crate::geometry::{AtlasManifold, ChartPoint};
use crate::par::{map_indexed, map_indexed_serial};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

pub type PsiFn = Arc<dyn Fn(&AtlasManifold, &ChartPoint) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&AtlasManifold, &ChartPoint) -> DVector<f64> + Send + Sync>;

/// Potential Ψ on the base manifold.
///
/// Named variants evaluate closed-form expressions of the chart coordinates
/// and carry analytic partials; `Custom` takes closures (with an optional
/// gradient, FD fallback otherwise). Named potentials other than `Zero` are
/// coordinate expressions, so they are only well defined on single-chart
/// manifolds; the CLI validator enforces that.
#[derive(Clone)]
pub enum Potential {
    Zero,
    /// Ψ = a |x|² / 2
    Harmonic { a: f64 },
    /// Ψ = offset + a |x|² / 2 (strictly positive potentials for lay-down)
    OffsetHarmonic { offset: f64, a: f64 },
    /// Ψ = a sin(x¹)
    SinX1 { a: f64 },
    /// Ψ = a cos(x¹)
    CosX1 { a: f64 },
    Custom {
        psi: PsiFn,
        /// Coordinate components of grad_g Ψ (already metric-dual).
        grad: Option<GradFn>,
    },
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Potential::Zero => write!(f, "Zero"),
            Potential::Harmonic { a } => write!(f, "Harmonic{{a:{a}}}"),
            Potential::OffsetHarmonic { offset, a } => {
                write!(f, "OffsetHarmonic{{offset:{offset},a:{a}}}")
            }
            Potential::SinX1 { a } => write!(f, "SinX1{{a:{a}}}"),
            Potential::CosX1 { a } => write!(f, "CosX1{{a:{a}}}"),
            Potential::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl Potential {
    /// Registry lookup by name with a scalar parameter.
    pub fn by_name(name: &str, a: f64, offset: f64) -> Option<Self> {
        match name {
            "zero" => Some(Potential::Zero),
            "harmonic" => Some(Potential::Harmonic { a }),
            "offset_harmonic" => Some(Potential::OffsetHarmonic { offset, a }),
            "sin_x1" => Some(Potential::SinX1 { a }),
            "cos_x1" => Some(Potential::CosX1 { a }),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Potential::Zero)
    }

    pub fn psi(&self, m: &AtlasManifold, p: &ChartPoint) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Harmonic { a } => 0.5 * a * p.coords.norm_squared(),
            Potential::OffsetHarmonic { offset, a } => offset + 0.5 * a * p.coords.norm_squared(),
            Potential::SinX1 { a } => a * p.coords[0].sin(),
            Potential::CosX1 { a } => a * p.coords[0].cos(),
            Potential::Custom { psi, .. } => psi(m, p),
        }
    }

    /// Coordinate partial derivatives ∂_j Ψ (analytic for named variants,
    /// central differences with step 1e-6 (1+|x|) otherwise).
    pub fn partials(&self, m: &AtlasManifold, p: &ChartPoint) -> DVector<f64> {
        let d = p.coords.len();
        match self {
            Potential::Zero => DVector::zeros(d),
            Potential::Harmonic { a } => &p.coords * *a,
            Potential::OffsetHarmonic { a, .. } => &p.coords * *a,
            Potential::SinX1 { a } => {
                let mut out = DVector::zeros(d);
                out[0] = a * p.coords[0].cos();
                out
            }
            Potential::CosX1 { a } => {
                let mut out = DVector::zeros(d);
                out[0] = -a * p.coords[0].sin();
                out
            }
            Potential::Custom { .. } => {
                let h = 1e-6 * (1.0 + p.coords.norm());
                DVector::from_fn(d, |j, _| {
                    let mut pp = p.clone();
                    let mut pm = p.clone();
                    pp.coords[j] += h;
                    pm.coords[j] -= h;
                    (self.psi(m, &pp) - self.psi(m, &pm)) / (2.0 * h)
                })
            }
        }
    }

    /// Coordinate components of grad_g Ψ = g^{-1} ∂Ψ.
    pub fn grad_g(&self, m: &AtlasManifold, p: &ChartPoint) -> Result<DVector<f64>> {
        if let Potential::Custom {
            grad: Some(grad), ..
        } = self
        {
            return Ok(grad(m, p));
        }
        if self.is_zero() {
            return Ok(DVector::zeros(p.coords.len()));
        }
        let ginv = m.inverse_metric_at(p)?;
        Ok(ginv * self.partials(m, p))
    }
}

/// Parameters of the Langevin model. The constructor enforces the relation
/// σ = sqrt(2α/β).
#[derive(Clone, Debug)]
pub struct LangevinParams {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub potential: Potential,
}

impl LangevinParams {
    pub fn new(alpha: f64, beta: f64, potential: Potential) -> Result<Self> {
        if alpha < 0.0 || beta <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "need alpha >= 0 and beta > 0, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(LangevinParams {
            alpha,
            beta,
            sigma: (2.0 * alpha / beta).sqrt(),
            potential,
        })
    }

    /// Constructor with an explicit σ, validated against sqrt(2α/β).
    pub fn with_sigma(alpha: f64, beta: f64, sigma: f64, potential: Potential) -> Result<Self> {
        let params = Self::new(alpha, beta, potential)?;
        if (sigma - params.sigma).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "sigma = {sigma} violates sigma = sqrt(2 alpha / beta) = {}",
                params.sigma
            )));
        }
        Ok(params)
    }
}

/// Parameters of the fibre lay-down model.
#[derive(Clone, Debug)]
pub struct FldParams {
    pub sigma: f64,
    pub potential: Potential,
}

impl FldParams {
    pub fn new(sigma: f64, potential: Potential) -> Result<Self> {
        if sigma < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "need sigma >= 0, got {sigma}"
            )));
        }
        Ok(FldParams { sigma, potential })
    }
}

/// Either model, for generic drivers.
#[derive(Clone, Debug)]
pub enum Model {
    Langevin(LangevinParams),
    Fld(FldParams),
}

impl Model {
    pub fn potential(&self) -> &Potential {
        match self {
            Model::Langevin(p) => &p.potential,
            Model::Fld(p) => &p.potential,
        }
    }

    pub fn is_unit_bundle(&self) -> bool {
        matches!(self, Model::Fld(_))
    }
}

/// Integration scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Scheme {
    /// Strang splitting O-B-A-B-O with exact OU and exact geodesic legs.
    #[serde(rename = "strang_baoab_like")]
    StrangBaoabLike,
    /// Heun predictor-corrector drift with additive end-of-step noise
    /// (weak order 1); kept as a cross-check integrator.
    #[serde(rename = "euler_heun")]
    EulerHeun,
}

/// Fixed-step integrator configuration.
#[derive(Clone, Debug)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    pub record_stride: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_final: f64, record_stride: usize, seed: u64) -> Result<Self> {
        if dt <= 0.0 || t_final < 0.0 || (t_final > 0.0 && dt > t_final) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < dt <= t_final, got dt={dt}, t_final={t_final}"
            )));
        }
        Ok(IntegratorConfig {
            dt,
            t_final,
            record_stride: record_stride.max(1),
            seed,
            scheme: Scheme::StrangBaoabLike,
        })
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// A chart change during integration.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartSwitchEvent {
    pub step: usize,
    pub from_chart: usize,
    pub to_chart: usize,
}

/// Recorded path of one trajectory.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<TangentState>,
    pub chart_switch_events: Vec<ChartSwitchEvent>,
}

impl Trajectory {
    pub fn last_state(&self) -> &TangentState {
        self.states.last().expect("trajectory is never empty")
    }
}

fn draw_standard_normal<R: Rng>(rng: &mut R, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Exact OU half-step on the velocity in the g-orthonormal frame:
/// v ← e^{-αh} v + L ζ sqrt((1-e^{-2αh})/β) with L Lᵀ = g^{-1}(x).
fn ou_half_step<R: Rng>(
    m: &AtlasManifold,
    s: &mut TangentState,
    params: &LangevinParams,
    h: f64,
    rng: &mut R,
) -> Result<()> {
    if params.alpha == 0.0 {
        return Ok(());
    }
    let c = (-params.alpha * h).exp();
    let scale = ((1.0 - c * c) / params.beta).sqrt();
    let l = m.orthonormal_frame_at(&s.base_point())?;
    let zeta = draw_standard_normal(rng, m.dimension);
    s.v = &s.v * c + l * zeta * scale;
    Ok(())
}

/// Velocity kick v ← v - h grad_g Ψ(x).
fn force_kick(m: &AtlasManifold, s: &mut TangentState, potential: &Potential, h: f64) -> Result<()> {
    if potential.is_zero() {
        return Ok(());
    }
    let grad = potential.grad_g(m, &s.base_point())?;
    s.v -= grad * h;
    Ok(())
}

fn geodesic_leg(m: &AtlasManifold, s: &mut TangentState, dt: f64) -> Result<()> {
    let (p, v) = m.geodesic_step(&s.base_point(), &s.v, dt)?;
    s.chart_id = p.chart_id;
    s.x = p.coords;
    s.v = v;
    Ok(())
}

/// One Langevin step with the Strang O-B-A-B-O splitting.
pub fn langevin_step<R: Rng>(
    m: &AtlasManifold,
    s: &TangentState,
    params: &LangevinParams,
    dt: f64,
    rng: &mut R,
) -> Result<TangentState> {
    let mut s = s.clone();
    ou_half_step(m, &mut s, params, dt / 2.0, rng)?;
    force_kick(m, &mut s, &params.potential, dt / 2.0)?;
    geodesic_leg(m, &mut s, dt)?;
    force_kick(m, &mut s, &params.potential, dt / 2.0)?;
    ou_half_step(m, &mut s, params, dt / 2.0, rng)?;
    Ok(s)
}

/// One Langevin step with Heun drift plus end-of-step vertical noise.
pub fn langevin_step_euler_heun<R: Rng>(
    m: &AtlasManifold,
    s: &TangentState,
    params: &LangevinParams,
    dt: f64,
    rng: &mut R,
) -> Result<TangentState> {
    let drift = |s: &TangentState| -> Result<(DVector<f64>, DVector<f64>)> {
        let p = s.base_point();
        let mut acc = m.geodesic_acceleration(s.chart_id, &s.x, &s.v)?;
        if !params.potential.is_zero() {
            acc -= params.potential.grad_g(m, &p)?;
        }
        acc -= &s.v * params.alpha;
        Ok((s.v.clone(), acc))
    };

    let (kx1, kv1) = drift(s)?;
    let pred = TangentState {
        chart_id: s.chart_id,
        x: &s.x + &kx1 * dt,
        v: &s.v + &kv1 * dt,
    };
    let (kx2, kv2) = drift(&pred)?;
    let mut out = TangentState {
        chart_id: s.chart_id,
        x: &s.x + (kx1 + kx2) * (dt / 2.0),
        v: &s.v + (kv1 + kv2) * (dt / 2.0),
    };

    if params.sigma > 0.0 {
        let (p, v) = m.resettle(&out.base_point(), &out.v)?;
        out.chart_id = p.chart_id;
        out.x = p.coords;
        out.v = v;
        let l = m.orthonormal_frame_at(&out.base_point())?;
        let zeta = draw_standard_normal(rng, m.dimension);
        out.v += l * zeta * (params.sigma * dt.sqrt());
    } else {
        let (p, v) = m.resettle(&out.base_point(), &out.v)?;
        out.chart_id = p.chart_id;
        out.x = p.coords;
        out.v = v;
    }
    Ok(out)
}

/// Tangential fibre update of the lay-down model: projected Euler-Maruyama
/// with renormalization, w = v + dt P_v(-grad Ψ) + σ sqrt(dt) P_v(L ζ).
fn fld_fibre_update<R: Rng>(
    m: &AtlasManifold,
    s: &mut TangentState,
    params: &FldParams,
    dt: f64,
    rng: &mut R,
) -> Result<()> {
    let p = s.base_point();
    let g = m.metric_at(&p)?;
    let project = |w: &DVector<f64>, v: &DVector<f64>| -> DVector<f64> {
        let c = w.dot(&(&g * v));
        w - v * c
    };

    let mut w = s.v.clone();
    if !params.potential.is_zero() {
        let grad = params.potential.grad_g(m, &p)?;
        w -= project(&grad, &s.v) * dt;
    }
    if params.sigma > 0.0 {
        let l = m.orthonormal_frame_at(&p)?;
        let zeta = draw_standard_normal(rng, m.dimension);
        let noise = l * zeta;
        w += project(&noise, &s.v) * (params.sigma * dt.sqrt());
    }
    s.v = w;
    s.renormalize_unit(m)
}

/// One fibre lay-down step: geodesic half-step, tangential fibre update,
/// geodesic half-step. Keeps |v|_g = 1 by renormalization.
pub fn fld_step<R: Rng>(
    m: &AtlasManifold,
    s: &TangentState,
    params: &FldParams,
    dt: f64,
    rng: &mut R,
) -> Result<TangentState> {
    let norm = m.norm(&s.base_point(), &s.v)?;
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotUnitState { norm });
    }
    let mut s = s.clone();
    geodesic_leg(m, &mut s, dt / 2.0)?;
    s.renormalize_unit(m)?;
    fld_fibre_update(m, &mut s, params, dt, rng)?;
    geodesic_leg(m, &mut s, dt / 2.0)?;
    s.renormalize_unit(m)?;
    Ok(s)
}

/// Euler variant of the lay-down step: one full geodesic leg, then the
/// fibre update.
pub fn fld_step_euler_heun<R: Rng>(
    m: &AtlasManifold,
    s: &TangentState,
    params: &FldParams,
    dt: f64,
    rng: &mut R,
) -> Result<TangentState> {
    let norm = m.norm(&s.base_point(), &s.v)?;
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotUnitState { norm });
    }
    let mut s = s.clone();
    geodesic_leg(m, &mut s, dt)?;
    s.renormalize_unit(m)?;
    fld_fibre_update(m, &mut s, params, dt, rng)?;
    Ok(s)
}

/// Dispatch one step of either model under the configured scheme.
pub fn step_model<R: Rng>(
    m: &AtlasManifold,
    s: &TangentState,
    model: &Model,
    dt: f64,
    scheme: Scheme,
    rng: &mut R,
) -> Result<TangentState> {
    match (model, scheme) {
        (Model::Langevin(p), Scheme::StrangBaoabLike) => langevin_step(m, s, p, dt, rng),
        (Model::Langevin(p), Scheme::EulerHeun) => langevin_step_euler_heun(m, s, p, dt, rng),
        (Model::Fld(p), Scheme::StrangBaoabLike) => fld_step(m, s, p, dt, rng),
        (Model::Fld(p), Scheme::EulerHeun) => fld_step_euler_heun(m, s, p, dt, rng),
    }
}

fn simulate_with_stream(
    m: &AtlasManifold,
    init: &TangentState,
    model: &Model,
    cfg: &IntegratorConfig,
    stream: u64,
) -> Result<Trajectory> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);

    let mut s = init.clone();
    let p = m.normalize_point(&s.base_point())?;
    s.chart_id = p.chart_id;
    s.x = p.coords;
    if model.is_unit_bundle() {
        s.renormalize_unit(m)?;
    }

    let n = cfg.steps();
    let mut times = Vec::with_capacity(n / cfg.record_stride + 2);
    let mut states = Vec::with_capacity(n / cfg.record_stride + 2);
    let mut events = Vec::new();
    times.push(0.0);
    states.push(s.clone());

    for k in 1..=n {
        let before = s.chart_id;
        s = step_model(m, &s, model, cfg.dt, cfg.scheme, &mut rng)?;
        if s.chart_id != before {
            events.push(ChartSwitchEvent {
                step: k,
                from_chart: before,
                to_chart: s.chart_id,
            });
        }
        if k % cfg.record_stride == 0 || k == n {
            times.push(k as f64 * cfg.dt);
            states.push(s.clone());
        }
    }

    Ok(Trajectory {
        times,
        states,
        chart_switch_events: events,
    })
}

/// Simulates a single trajectory. Deterministic for a fixed seed.
pub fn simulate_trajectory(
    m: &AtlasManifold,
    init: &TangentState,
    model: &Model,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    simulate_with_stream(m, init, model, cfg, 0)
}

/// Simulates independent trajectories with per-trajectory RNG streams
/// derived from (seed, index). Results are identical for any worker count.
pub fn simulate_ensemble(
    m: &AtlasManifold,
    inits: &[TangentState],
    model: &Model,
    cfg: &IntegratorConfig,
) -> Result<Vec<Trajectory>> {
    if inits.is_empty() {
        return Err(Error::InvalidArgument("empty initial ensemble".into()));
    }
    map_indexed(inits.len(), |i| {
        simulate_with_stream(m, &inits[i], model, cfg, i as u64)
    })
    .into_iter()
    .collect()
}

/// Sequential twin of [`simulate_ensemble`]; the criterion bench compares
/// the two.
pub fn simulate_ensemble_serial(
    m: &AtlasManifold,
    inits: &[TangentState],
    model: &Model,
    cfg: &IntegratorConfig,
) -> Result<Vec<Trajectory>> {
    if inits.is_empty() {
        return Err(Error::InvalidArgument("empty initial ensemble".into()));
    }
    map_indexed_serial(inits.len(), |i| {
        simulate_with_stream(m, &inits[i], model, cfg, i as u64)
    })
    .into_iter()
    .collect()
}

/// Projected positions π ∘ η of a trajectory (the lay-down curve).
pub fn base_path(traj: &Trajectory) -> Vec<ChartPoint> {
    traj.states.iter().map(|s| s.base_point()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{euclidean, flat_torus2, sphere2_stereographic};
    use approx::assert_relative_eq;

    fn cfg(dt: f64, t_final: f64, stride: usize, seed: u64) -> IntegratorConfig {
        IntegratorConfig::new(dt, t_final, stride, seed).unwrap()
    }

    #[test]
    fn sigma_relation_is_enforced() {
        let p = LangevinParams::new(2.0, 0.5, Potential::Zero).unwrap();
        assert_relative_eq!(p.sigma, (2.0f64 * 2.0 / 0.5).sqrt(), epsilon = 1e-15);
        assert!(LangevinParams::with_sigma(1.0, 1.0, 1.5, Potential::Zero).is_err());
        assert!(LangevinParams::with_sigma(1.0, 1.0, 2.0f64.sqrt(), Potential::Zero).is_ok());
    }

    #[test]
    fn zero_noise_langevin_is_bitwise_geodesic_flow() {
        let m = sphere2_stereographic();
        let params = LangevinParams::new(0.0, 1.0, Potential::Zero).unwrap();
        let model = Model::Langevin(params);
        let init = TangentState::new(0, vec![0.1, -0.2], vec![0.4, 0.3]);
        let c = cfg(1e-3, 0.5, 1, 7);
        let traj = simulate_trajectory(&m, &init, &model, &c).unwrap();

        let mut p = init.base_point();
        let mut v = init.v.clone();
        for (k, state) in traj.states.iter().enumerate() {
            assert_eq!(state.x, p.coords, "step {k}");
            assert_eq!(state.v, v, "step {k}");
            let (q, w) = m.geodesic_step(&p, &v, 1e-3).unwrap();
            p = q;
            v = w;
        }
    }

    #[test]
    fn zero_final_time_gives_single_record() {
        let m = euclidean(1);
        let model = Model::Langevin(LangevinParams::new(1.0, 1.0, Potential::Zero).unwrap());
        let init = TangentState::new(0, vec![0.5], vec![-0.5]);
        let traj = simulate_trajectory(&m, &init, &model, &cfg(0.1, 0.0, 1, 1)).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.times, vec![0.0]);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let m = flat_torus2();
        let model = Model::Fld(FldParams::new(1.0, Potential::Zero).unwrap());
        let init = TangentState::new(0, vec![1.0, 2.0], vec![1.0, 0.0]);
        let c = cfg(1e-2, 2.0, 5, 99);
        let a = simulate_trajectory(&m, &init, &model, &c).unwrap();
        let b = simulate_trajectory(&m, &init, &model, &c).unwrap();
        for (sa, sb) in a.states.iter().zip(&b.states) {
            assert_eq!(sa.x, sb.x);
            assert_eq!(sa.v, sb.v);
        }
    }

    #[test]
    fn ensemble_stream_zero_matches_single_trajectory() {
        let m = flat_torus2();
        let model = Model::Langevin(LangevinParams::new(1.0, 2.0, Potential::SinX1 { a: 1.0 }).unwrap());
        let init = TangentState::new(0, vec![1.0, 2.0], vec![0.3, -0.1]);
        let c = cfg(1e-2, 1.0, 1, 4242);
        let single = simulate_trajectory(&m, &init, &model, &c).unwrap();
        let ensemble = simulate_ensemble(&m, &[init.clone(), init.clone()], &model, &c).unwrap();
        assert_eq!(ensemble[0].states.len(), single.states.len());
        for (sa, sb) in ensemble[0].states.iter().zip(&single.states) {
            assert_eq!(sa.x, sb.x);
            assert_eq!(sa.v, sb.v);
        }
        // Distinct streams must differ.
        assert_ne!(ensemble[1].last_state().x, ensemble[0].last_state().x);
        // Parallel and serial paths agree bitwise.
        let serial = simulate_ensemble_serial(&m, &[init.clone(), init], &model, &c).unwrap();
        for (ta, tb) in ensemble.iter().zip(&serial) {
            for (sa, sb) in ta.states.iter().zip(&tb.states) {
                assert_eq!(sa.x, sb.x);
                assert_eq!(sa.v, sb.v);
            }
        }
    }

    #[test]
    fn fld_keeps_unit_norm() {
        let m = sphere2_stereographic();
        let model = Model::Fld(FldParams::new(0.8, Potential::Zero).unwrap());
        let init = TangentState::new(0, vec![0.0, 0.0], vec![0.5, 0.0]);
        let c = cfg(1e-2, 20.0, 10, 3);
        let traj = simulate_trajectory(&m, &init, &model, &c).unwrap();
        for s in &traj.states {
            let norm = m.norm(&s.base_point(), &s.v).unwrap();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fld_sigma_zero_is_unit_speed_geodesic_flow() {
        let m = flat_torus2();
        let model = Model::Fld(FldParams::new(0.0, Potential::Zero).unwrap());
        let init = TangentState::new(0, vec![0.0, 0.0], vec![0.6, 0.8]);
        let traj = simulate_trajectory(&m, &init, &model, &cfg(1e-2, 3.0, 1, 5)).unwrap();
        let last = traj.last_state();
        assert_relative_eq!(last.x[0], 3.0 * 0.6, epsilon = 1e-10);
        assert_relative_eq!(last.x[1], 3.0 * 0.8, epsilon = 1e-10);
        assert_eq!(m.norm(&last.base_point(), &last.v).unwrap(), 1.0);
    }

    #[test]
    fn torus_fld_arclength_is_elapsed_time() {
        let m = flat_torus2();
        let model = Model::Fld(FldParams::new(1.0, Potential::Zero).unwrap());
        let init = TangentState::new(0, vec![1.0, 1.0], vec![1.0, 0.0]);
        let c = cfg(1e-2, 10.0, 1, 11);
        let traj = simulate_trajectory(&m, &init, &model, &c).unwrap();
        let path = base_path(&traj);
        let mut arclength = 0.0;
        for w in path.windows(2) {
            let diff = m.coord_difference(0, &w[0].coords, &w[1].coords);
            arclength += diff.norm();
        }
        assert!((arclength - 10.0).abs() < 0.05, "arclength {arclength}");
    }

    #[test]
    fn sphere_langevin_long_run_stays_on_atlas() {
        let m = sphere2_stereographic();
        let model =
            Model::Langevin(LangevinParams::new(1.0, 1.0, Potential::Zero).unwrap());
        let init = TangentState::new(0, vec![0.0, 0.0], vec![0.5, 0.0]);
        let c = cfg(1e-3, 100.0, 1000, 17);
        let traj = simulate_trajectory(&m, &init, &model, &c).unwrap();
        assert!(!traj.chart_switch_events.is_empty());
        for s in &traj.states {
            assert!(s.x.norm() <= 8.0);
        }
    }

    #[test]
    fn constant_trajectory_projects_to_constant_path() {
        let m = euclidean(2);
        let model = Model::Langevin(LangevinParams::new(0.0, 1.0, Potential::Zero).unwrap());
        let init = TangentState::new(0, vec![0.7, -0.7], vec![0.0, 0.0]);
        let traj = simulate_trajectory(&m, &init, &model, &cfg(0.1, 1.0, 1, 2)).unwrap();
        for p in base_path(&traj) {
            assert_eq!(p.coords, init.x);
        }
    }

    #[test]
    fn euler_heun_scheme_runs_and_differs() {
        let m = euclidean(1);
        let model = Model::Langevin(LangevinParams::new(1.0, 1.0, Potential::Harmonic { a: 1.0 }).unwrap());
        let init = TangentState::new(0, vec![0.3], vec![0.1]);
        let c1 = cfg(1e-2, 1.0, 1, 8);
        let c2 = c1.clone().with_scheme(Scheme::EulerHeun);
        let a = simulate_trajectory(&m, &init, &model, &c1).unwrap();
        let b = simulate_trajectory(&m, &init, &model, &c2).unwrap();
        assert_ne!(a.last_state().x, b.last_state().x);
    }

    #[test]
    fn non_unit_initial_state_is_rejected_by_fld_step() {
        let m = euclidean(2);
        let params = FldParams::new(1.0, Potential::Zero).unwrap();
        let s = TangentState::new(0, vec![0.0, 0.0], vec![2.0, 0.0]);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        assert!(matches!(
            fld_step(&m, &s, &params, 0.01, &mut rng),
            Err(Error::NotUnitState { .. })
        ));
    }
}
