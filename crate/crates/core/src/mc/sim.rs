use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::model::ModelParams;

/// Default cap on the number of simultaneously tracked particles.
pub const DEFAULT_MAX_PARTICLES: usize = 1 << 23;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub params: ModelParams,
    pub t: f64,
    pub seed: u64,
    pub max_particles: usize,
}

impl SimConfig {
    pub fn new(params: ModelParams, t: f64, seed: u64) -> Result<Self> {
        let c = SimConfig {
            params,
            t,
            seed,
            max_particles: DEFAULT_MAX_PARTICLES,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(invalid(format!("horizon must be >= 0, got {}", self.t)));
        }
        if self.max_particles < 1 {
            return Err(invalid("max_particles must be >= 1"));
        }
        Ok(())
    }
}

/// Generator for trial `index`: ChaCha keyed by `seed`, one stream per
/// trial, so a trial's draws do not depend on which worker runs it.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Outcome of one simulated tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbmSample {
    pub x_max: f64,
    pub n_final: u64,
    /// Lifetime drawn for the initial particle; it branches at this time
    /// if that is before the horizon.
    pub root_lifetime: f64,
}

/// Exact event-driven simulation of a BBM started by one particle at `x0`
/// and run for `horizon`. Only branching epochs are visited; displacements
/// between them are exact Gaussian draws.
pub fn simulate_from<R: Rng + ?Sized>(
    rng: &mut R,
    params: &ModelParams,
    horizon: f64,
    x0: f64,
    max_particles: usize,
) -> Result<BbmSample> {
    let sigma = params.sigma();
    let mut stack: Vec<(f64, f64)> = vec![(x0, horizon)];
    let mut x_max = f64::NEG_INFINITY;
    let mut n_final: u64 = 0;
    let mut root_lifetime = None;

    while let Some((x, remaining)) = stack.pop() {
        let life: f64 = Exp1.sample(rng);
        let life = life / params.branch_rate;
        root_lifetime.get_or_insert(life);
        let z: f64 = StandardNormal.sample(rng);
        if life >= remaining {
            x_max = x_max.max(x + sigma * remaining.sqrt() * z);
            n_final += 1;
        } else {
            let y = x + sigma * life.sqrt() * z;
            let left = remaining - life;
            for _ in 0..params.offspring_count {
                stack.push((y, left));
            }
            if n_final as usize + stack.len() > max_particles {
                return Err(Error::ParticleCap {
                    cap: max_particles,
                    t: horizon,
                });
            }
        }
    }

    Ok(BbmSample {
        x_max,
        n_final,
        root_lifetime: root_lifetime.unwrap_or(f64::INFINITY),
    })
}

pub fn simulate_trial(config: &SimConfig, index: u64) -> Result<BbmSample> {
    let mut rng = trial_rng(config.seed, index);
    simulate_from(&mut rng, &config.params, config.t, 0.0, config.max_particles)
}

/// Rightmost position and population at the horizon for trial 0 of `config.seed`.
pub fn simulate_xmax(config: &SimConfig) -> Result<(f64, u64)> {
    config.validate()?;
    let s = simulate_trial(config, 0)?;
    Ok((s.x_max, s.n_final))
}
