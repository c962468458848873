use serde::{Deserialize, Serialize};

use crate::envs::{make_env, Outcome, ScenarioConfig};
use crate::game::{AugmentedObservation, DelayedEnv};
use crate::nn::Mlp;
use crate::Scalar;

use super::learner::greedy_action;
use super::train::split_seed;
use super::{AgentLayout, AgentLearner, MarlError, Result, Variant};

/// Maps an agent's augmented observation to an action.
pub trait Policy {
    fn act(&mut self, obs: &AugmentedObservation<f64>) -> Result<Vec<f64>>;
}

/// Noise-free actor: movement as output, message as a one-hot argmax.
#[derive(Debug, Clone)]
pub struct ActorPolicy<T> {
    variant: Variant,
    layout: AgentLayout,
    actor: Mlp<T>,
}

impl<T: Scalar> ActorPolicy<T> {
    pub fn new(variant: Variant, layout: AgentLayout, actor: Mlp<T>) -> Result<Self> {
        let want = layout.view_dim(variant.delay_aware());
        if actor.input_dim() != want || actor.output_dim() != layout.action_dim() {
            return Err(MarlError::Shape(format!(
                "actor {}->{} for a {variant} agent with view {want} and action {}",
                actor.input_dim(),
                actor.output_dim(),
                layout.action_dim()
            )));
        }
        Ok(Self { variant, layout, actor })
    }

    pub fn from_learner(l: &AgentLearner<T>) -> Self {
        Self {
            variant: l.variant,
            layout: *l.layout(),
            actor: l.actor.clone(),
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn layout(&self) -> &AgentLayout {
        &self.layout
    }

    pub fn actor(&self) -> &Mlp<T> {
        &self.actor
    }
}

impl<T: Scalar> Policy for ActorPolicy<T> {
    fn act(&mut self, obs: &AugmentedObservation<f64>) -> Result<Vec<f64>> {
        let input: Vec<T> = obs.to_vec(self.variant.delay_aware()).into_iter().map(T::lit).collect();
        if input.len() != self.actor.input_dim() {
            return Err(MarlError::Shape(format!(
                "{} policy takes width {}, observation has {}",
                self.variant,
                self.actor.input_dim(),
                input.len()
            )));
        }
        let out = self.actor.forward(&input)?;
        Ok(greedy_action(&out, self.layout.space.movement)
            .into_iter()
            .map(|v| v.as_f64())
            .collect())
    }
}

/// Emits the same action every tick.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantPolicy(pub Vec<f64>);

impl Policy for ConstantPolicy {
    fn act(&mut self, _: &AugmentedObservation<f64>) -> Result<Vec<f64>> {
        Ok(self.0.clone())
    }
}

/// Wraps a closure.
pub struct FnPolicy<F>(pub F);

impl<F: FnMut(&AugmentedObservation<f64>) -> Vec<f64>> Policy for FnPolicy<F> {
    fn act(&mut self, obs: &AugmentedObservation<f64>) -> Result<Vec<f64>> {
        Ok((self.0)(obs))
    }
}

/// Predator that pushes at full force toward the prey, read from the
/// prey's relative position in its observation (columns 12..14).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScriptedChaser;

impl Policy for ScriptedChaser {
    fn act(&mut self, obs: &AugmentedObservation<f64>) -> Result<Vec<f64>> {
        let rel = obs
            .obs
            .get(12..14)
            .ok_or_else(|| MarlError::Shape(format!("chaser needs 14 observation columns, got {}", obs.obs.len())))?;
        let norm = rel[0].hypot(rel[1]);
        if norm == 0.0 {
            return Ok(vec![0.0, 0.0]);
        }
        Ok(vec![rel[0] / norm, rel[1] / norm])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub return_mean: Vec<f64>,
    /// Population standard deviation over episodes.
    pub return_std: Vec<f64>,
    pub touches_mean: f64,
    pub touches_std: f64,
    pub collisions_mean: f64,
    /// Fractions of episodes per outcome; zero when the world reports none.
    pub success_rate: f64,
    pub crash_rate: f64,
    pub stuck_rate: f64,
    pub touches: Vec<usize>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Noise-free rollouts of `policies` (one per agent) through the delayed
/// world `scenario` describes. Episode `e` resets with `split_seed(seed, e)`.
pub fn evaluate(
    policies: &mut [Box<dyn Policy + '_>],
    scenario: &ScenarioConfig,
    episodes: usize,
    seed: u64,
) -> Result<EvalSummary> {
    let env = make_env(scenario)?;
    let n = env.num_agents();
    if policies.len() != n {
        return Err(MarlError::Shape(format!("{} policies for {n} agents", policies.len())));
    }
    let delays = scenario.delays_for(n)?;
    let mut env = DelayedEnv::new(env, &delays)?;
    let mut returns: Vec<Vec<f64>> = vec![Vec::with_capacity(episodes); n];
    let mut touches = Vec::with_capacity(episodes);
    let mut collisions = Vec::with_capacity(episodes);
    let mut outcomes = [0usize; 3];
    for e in 0..episodes {
        let mut obs = env.reset(split_seed(seed, e as u64));
        let mut ret = vec![0.0; n];
        let (mut t, mut c) = (0usize, 0usize);
        loop {
            let actions = policies
                .iter_mut()
                .zip(&obs)
                .map(|(p, o)| p.act(o))
                .collect::<Result<Vec<_>>>()?;
            let out = env.step(&actions)?;
            for (r, v) in ret.iter_mut().zip(&out.rewards) {
                *r += v;
            }
            t += out.info.touches;
            c += out.info.collisions;
            if let Some(o) = out.info.outcome {
                outcomes[match o {
                    Outcome::Success => 0,
                    Outcome::Crash => 1,
                    Outcome::Stuck => 2,
                }] += 1;
            }
            obs = out.observations;
            if out.done {
                break;
            }
        }
        for (all, r) in returns.iter_mut().zip(ret) {
            all.push(r);
        }
        touches.push(t);
        collisions.push(c as f64);
    }
    let (return_mean, return_std) = returns.iter().map(|r| mean_std(r)).unzip();
    let tf: Vec<f64> = touches.iter().map(|&t| t as f64).collect();
    let (touches_mean, touches_std) = mean_std(&tf);
    let rate = |k: usize| if episodes == 0 { 0.0 } else { k as f64 / episodes as f64 };
    Ok(EvalSummary {
        episodes,
        return_mean,
        return_std,
        touches_mean,
        touches_std,
        collisions_mean: mean_std(&collisions).0,
        success_rate: rate(outcomes[0]),
        crash_rate: rate(outcomes[1]),
        stuck_rate: rate(outcomes[2]),
        touches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{ActionSpace, MultiAgentEnv, PreyMode, ScenarioId};
    use crate::nn::MlpSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn still(n: usize, dim: usize) -> Vec<Box<dyn Policy>> {
        (0..n).map(|_| Box::new(ConstantPolicy(vec![0.0; dim])) as Box<dyn Policy>).collect()
    }

    #[test]
    fn zero_episodes_is_empty() {
        let s = evaluate(&mut still(3, 2), &ScenarioConfig::new(ScenarioId::CoopNav), 0, 0).unwrap();
        assert_eq!(s.episodes, 0);
        assert_eq!(s.return_mean, vec![0.0; 3]);
        assert!(s.touches.is_empty());
    }

    #[test]
    fn wrong_roster_is_shape_error() {
        let r = evaluate(&mut still(2, 2), &ScenarioConfig::new(ScenarioId::CoopNav), 1, 0);
        assert!(matches!(r, Err(MarlError::Shape(_))));
    }

    #[test]
    fn repeated_calls_agree() {
        let scenario = ScenarioConfig {
            delay_steps: vec![1],
            ..ScenarioConfig::new(ScenarioId::PredatorPrey)
        };
        let run = || {
            let mut p: Vec<Box<dyn Policy>> = (0..3).map(|_| Box::new(ScriptedChaser) as Box<dyn Policy>).collect();
            evaluate(&mut p, &scenario, 5, 9).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn actor_policy_checks_width() {
        let layout = AgentLayout {
            obs_dim: 4,
            delay: 2,
            space: ActionSpace { movement: 2, message: 0 },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let aware = Mlp::<f64>::new(&MlpSpec::actor(8, 2, 0), &mut rng).unwrap();
        assert!(ActorPolicy::new(Variant::Ma, layout, aware.clone()).is_err());
        let mut p = ActorPolicy::new(Variant::Dama, layout, aware).unwrap();
        let obs = AugmentedObservation {
            obs: vec![0.1; 4],
            act: vec![vec![0.0; 2]; 2],
        };
        assert_eq!(p.act(&obs).unwrap().len(), 2);
        let short = AugmentedObservation { obs: vec![0.1; 4], act: vec![] };
        assert!(matches!(p.act(&short), Err(MarlError::Shape(_))));
    }

    #[test]
    fn chaser_touches_match_world_count() {
        // chasers against a prey that never moves, replayed directly on the world
        let scenario = ScenarioConfig {
            prey: PreyMode::Learned,
            ..ScenarioConfig::new(ScenarioId::PredatorPrey)
        };
        let policies = || -> Vec<Box<dyn Policy>> {
            let mut p: Vec<Box<dyn Policy>> = (0..3).map(|_| Box::new(ScriptedChaser) as Box<dyn Policy>).collect();
            p.push(Box::new(ConstantPolicy(vec![0.0, 0.0])));
            p
        };
        let summary = evaluate(&mut policies(), &scenario, 3, 4).unwrap();
        for e in 0..3 {
            let mut env = make_env(&scenario).unwrap();
            let mut p = policies();
            let mut obs = env.reset(split_seed(4, e));
            let mut count = 0;
            loop {
                let acts: Vec<Vec<f64>> = obs
                    .iter()
                    .zip(p.iter_mut())
                    .map(|(o, p)| p.act(&AugmentedObservation { obs: o.clone(), act: vec![] }).unwrap())
                    .collect();
                let out = env.step(&acts).unwrap();
                count += out.info.touches;
                obs = out.observations;
                if out.done {
                    break;
                }
            }
            assert_eq!(summary.touches[e as usize], count);
        }
        assert!(summary.touches.iter().sum::<usize>() > 0, "chasers should reach a static prey");
    }
}
