//! Exact-in-law sampling of the sticky process at discrete times.
//!
//! Each step draws `(X¹, ΔL)` from the three-part law of the normal
//! coordinate and its local time over the step:
//!
//! * no boundary contact: `ΔL = 0`, `X¹` from the killed kernel;
//! * ending on the boundary: `X¹ = 0`, `ΔL` from its tabulated marginal;
//! * diffuse: `ΔL` from its tabulated marginal, then `X¹` in closed form.
//!
//! The tangential increment is Gaussian with variance `Δ + A·ΔO`, where
//! `ΔO = ΔL/θ` is the occupation time of the boundary over the step.

mod table;

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::geometry::{HalfSpacePoint, ModelParams};
use crate::kernel::{log_boundary_marginal, log_diffuse_marginal};
use table::{graded_nodes, CdfTable};

type Params = ModelParams<f64>;
type Point = HalfSpacePoint<f64>;

/// Quantisation of the normal coordinate in the table cache.
const X1_GRID: f64 = 1e-4;
/// Steps whose boundary-contact probability is below this never touch the boundary.
const NEGLIGIBLE_CONTACT: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: Params,
    pub start: Point,
    pub step: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub tabulation_resolution: usize,
}

impl SimConfig {
    pub fn new(
        params: Params,
        start: Point,
        step: f64,
        n_steps: usize,
        seed: u64,
        tabulation_resolution: usize,
    ) -> Result<Self> {
        params.check_dim(start.dim())?;
        if !(step > 0.0 && step.is_finite()) {
            return Err(param(format!("step must be positive, got {step}")));
        }
        if n_steps < 1 {
            return Err(param("n_steps must be at least 1"));
        }
        if tabulation_resolution < 256 {
            return Err(param(format!(
                "tabulation_resolution {tabulation_resolution} < 256"
            )));
        }
        Ok(SimConfig {
            params,
            start,
            step,
            n_steps,
            seed,
            tabulation_resolution,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub states: Vec<Point>,
    pub local_time: Vec<f64>,
    pub occupation_time: Vec<f64>,
}

/// Per-path random stream: ChaCha8 keyed by `seed`, stream `path_index`.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

struct StepTables {
    /// Probability of at least one boundary contact during the step.
    contact: f64,
    /// Probability of ending on the boundary given a contact.
    atom_share: f64,
    boundary: CdfTable,
    diffuse: CdfTable,
}

/// Sampler with a shared cache of step tables.
pub struct Simulator {
    params: Params,
    resolution: usize,
    cache: RwLock<HashMap<(i64, u64), Arc<StepTables>>>,
}

impl Simulator {
    pub fn new(params: Params, tabulation_resolution: usize) -> Result<Self> {
        if tabulation_resolution < 256 {
            return Err(param(format!(
                "tabulation_resolution {tabulation_resolution} < 256"
            )));
        }
        Ok(Simulator {
            params,
            resolution: tabulation_resolution,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    fn tables(&self, x1: f64, dt: f64) -> Result<Arc<StepTables>> {
        let node = (x1 / X1_GRID).round();
        let key = (node as i64, dt.to_bits());
        if let Some(found) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(found.clone());
        }
        let x1 = node * X1_GRID;
        let params = &self.params;
        let theta_t = params.theta * dt;
        // widths of the layers in which the marginals can concentrate
        let right = 1e-3 * ((theta_t + x1).powi(2) / dt).min(1.0);
        let left = 1e-3 / (1.0 + params.theta * x1 + x1 * x1 / (2.0 * dt));
        let nodes = graded_nodes(self.resolution, left, right);
        let boundary = CdfTable::build(
            |l, r| log_boundary_marginal(params, dt, x1, l, r),
            nodes.clone(),
        )?;
        let diffuse = CdfTable::build(|l, r| log_diffuse_marginal(params, dt, x1, l, r), nodes)?;
        let contact = statrs::function::erf::erfc(x1 / (2.0 * dt).sqrt());
        let atom_share = 1.0 / (1.0 + (diffuse.log_mass - boundary.log_mass).exp());
        let built = Arc::new(StepTables {
            contact,
            atom_share,
            boundary,
            diffuse,
        });
        let mut cache = self.cache.write().expect("cache lock");
        Ok(cache.entry(key).or_insert(built).clone())
    }

    /// Draw `(X¹_{t+dt}, L_{t+dt} - L_t)` given `X¹_t = x1`.
    pub fn step_horizontal<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        x1: f64,
        dt: f64,
    ) -> Result<(f64, f64)> {
        let (x1_new, level) = self.step_normal(rng, x1, dt)?;
        Ok((x1_new, self.params.theta * dt * level))
    }

    /// As [`Self::step_horizontal`] but returning `ΔO / dt ∈ [0, 1]`.
    fn step_normal<R: Rng + ?Sized>(&self, rng: &mut R, x1: f64, dt: f64) -> Result<(f64, f64)> {
        if !(dt > 0.0) || !(x1 >= 0.0) {
            return Err(param(format!(
                "step needs dt > 0 and x1 >= 0, got dt = {dt}, x1 = {x1}"
            )));
        }
        let contact = statrs::function::erf::erfc(x1 / (2.0 * dt).sqrt());
        if contact < NEGLIGIBLE_CONTACT || rng.random::<f64>() >= contact {
            return Ok((sample_killed(rng, x1, dt), 0.0));
        }
        let tables = self.tables(x1, dt)?;
        debug_assert!(tables.contact > 0.0);
        if rng.random::<f64>() < tables.atom_share {
            let level = tables.boundary.inverse(rng.random());
            return Ok((0.0, level));
        }
        let level = tables.diffuse.inverse(rng.random());
        let m = self.params.theta * dt * level + x1;
        let tau = dt * (1.0 - level);
        let u: f64 = rng.random();
        let z = (m * m - 2.0 * tau * (-u).ln_1p()).sqrt() - m;
        Ok((z.max(0.0), level))
    }

    /// Tangential increment over a step with boundary occupation `delta_o`.
    pub fn step_vertical<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        dt: f64,
        delta_o: f64,
    ) -> Result<Vec<f64>> {
        if !(0.0..=dt).contains(&delta_o) {
            return Err(param(format!(
                "occupation increment {delta_o} outside [0, {dt}]"
            )));
        }
        let variance = (dt - delta_o) + self.params.a * delta_o;
        if !(variance >= 0.0) {
            return Err(param(format!("negative variance {variance}")));
        }
        let sd = variance.sqrt();
        Ok((1..self.params.d)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            })
            .collect())
    }

    /// One path of `config.n_steps` steps on stream `path_index`.
    pub fn simulate_path(&self, config: &SimConfig, path_index: u64) -> Result<SamplePath> {
        let mut rng = path_rng(config.seed, path_index);
        let theta = self.params.theta;
        let n = config.n_steps;
        let mut path = SamplePath {
            times: Vec::with_capacity(n + 1),
            states: Vec::with_capacity(n + 1),
            local_time: Vec::with_capacity(n + 1),
            occupation_time: Vec::with_capacity(n + 1),
        };
        let mut state = config.start.clone();
        let mut occupation = 0.0;
        path.times.push(0.0);
        path.states.push(state.clone());
        path.local_time.push(0.0);
        path.occupation_time.push(0.0);
        for i in 1..=n {
            let (x1, level) = self.step_normal(&mut rng, state.x1, config.step)?;
            let delta_o = config.step * level;
            let shift = self.step_vertical(&mut rng, config.step, delta_o)?;
            state.x1 = x1;
            for (coord, d) in state.xp.iter_mut().zip(shift) {
                *coord += d;
            }
            occupation += delta_o;
            path.times.push(i as f64 * config.step);
            path.states.push(state.clone());
            path.occupation_time.push(occupation);
            path.local_time.push(theta * occupation);
        }
        Ok(path)
    }

    /// Final states of `n_paths` paths, without storing the paths.
    pub fn endpoints(&self, config: &SimConfig, n_paths: usize) -> Result<Vec<(Point, f64)>> {
        (0..n_paths as u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = path_rng(config.seed, k);
                let mut state = config.start.clone();
                let mut occupation = 0.0;
                for _ in 0..config.n_steps {
                    let (x1, level) = self.step_normal(&mut rng, state.x1, config.step)?;
                    let shift = self.step_vertical(&mut rng, config.step, config.step * level)?;
                    state.x1 = x1;
                    for (coord, d) in state.xp.iter_mut().zip(shift) {
                        *coord += d;
                    }
                    occupation += config.step * level;
                }
                Ok((state, occupation))
            })
            .collect()
    }
}

/// Exact draw from `g⁰_dt(x1, ·)` normalised, by rejection from the free Gaussian.
fn sample_killed<R: Rng + ?Sized>(rng: &mut R, x1: f64, dt: f64) -> f64 {
    let sd = dt.sqrt();
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let w = x1 + sd * z;
        if w > 0.0 && rng.random::<f64>() < -(-2.0 * x1 * w / dt).exp_m1() {
            return w;
        }
    }
}

/// One sample path following `config`.
pub fn simulate(config: &SimConfig) -> Result<SamplePath> {
    Simulator::new(config.params, config.tabulation_resolution)?.simulate_path(config, 0)
}

/// `n_paths` independent paths, path `k` on stream `k`.
pub fn simulate_many(config: &SimConfig, n_paths: usize) -> Result<Vec<SamplePath>> {
    let sim = Simulator::new(config.params, config.tabulation_resolution)?;
    (0..n_paths as u64)
        .into_par_iter()
        .map(|k| sim.simulate_path(config, k))
        .collect()
}

/// Fraction of paths whose oscillation over some pair of sample times at most
/// `delta` apart reaches `eta`.
pub fn modulus_statistics(paths: &[SamplePath], delta: f64, eta: f64) -> Result<f64> {
    if paths.is_empty() {
        return Err(param("no paths"));
    }
    if !(delta > 0.0) {
        return Err(param("delta must be positive"));
    }
    let horizon = paths
        .iter()
        .map(|p| *p.times.last().expect("nonempty path"))
        .fold(f64::INFINITY, f64::min);
    if delta > horizon + 1e-12 {
        return Err(param(format!(
            "delta {delta} exceeds the horizon {horizon}"
        )));
    }
    let eta_sq = eta * eta;
    let hits = paths
        .par_iter()
        .filter(|path| {
            let n = path.times.len();
            (0..n).any(|i| {
                (i + 1..n)
                    .take_while(|&j| path.times[j] - path.times[i] <= delta + 1e-12)
                    .any(|j| path.states[i].distance_sq(&path.states[j]) >= eta_sq)
            })
        })
        .count();
    Ok(hits as f64 / paths.len() as f64)
}

/// Crude Euler scheme with the boundary replaced by a layer of width `layer`.
///
/// Inside the layer the normal diffusivity is `2θ·layer`, so that the layer
/// carries stationary mass `1/(2θ)` per unit area, and the tangential
/// diffusivity is `a`. The scheme is biased in both `dt` and `layer`; it is
/// only meant as a rough cross-check of the exact sampler.
pub fn thin_layer_euler<R: Rng + ?Sized>(
    params: &Params,
    start: &Point,
    dt: f64,
    n_steps: usize,
    layer: f64,
    rng: &mut R,
) -> Result<SamplePath> {
    if !(dt > 0.0 && layer > 0.0) {
        return Err(param("thin-layer scheme needs dt, layer > 0"));
    }
    let mut state = start.clone();
    let mut occupation = 0.0;
    let mut path = SamplePath {
        times: vec![0.0],
        states: vec![state.clone()],
        local_time: vec![0.0],
        occupation_time: vec![0.0],
    };
    for i in 1..=n_steps {
        let inside = state.x1 < layer;
        let (normal_var, tangential_var) = if inside {
            (2.0 * params.theta * layer, params.a)
        } else {
            (1.0, 1.0)
        };
        let dn: f64 = StandardNormal.sample(rng);
        state.x1 = (state.x1 + (normal_var * dt).sqrt() * dn).abs();
        for coord in state.xp.iter_mut() {
            let dz: f64 = StandardNormal.sample(rng);
            *coord += (tangential_var * dt).sqrt() * dz;
        }
        if inside {
            occupation += dt;
        }
        path.times.push(i as f64 * dt);
        path.states.push(state.clone());
        path.occupation_time.push(occupation);
        path.local_time.push(params.theta * occupation);
    }
    Ok(path)
}
