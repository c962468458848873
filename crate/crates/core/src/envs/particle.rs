use serde::{Deserialize, Serialize};

/// Fraction of velocity removed each step before forces are applied.
pub const DAMPING: f64 = 0.25;
/// Contact force per unit of (softened) overlap.
pub const CONTACT_STIFFNESS: f64 = 100.0;
/// Softplus length scale of the contact penalty.
pub const CONTACT_MARGIN: f64 = 1e-3;

/// A disc in the plane: an agent or a landmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
    /// Radius in meters.
    pub size: f64,
    pub mass: f64,
    pub movable: bool,
    pub collide: bool,
    /// Force per unit of action.
    pub accel: f64,
    pub max_speed: Option<f64>,
    pub color: usize,
}

impl Entity {
    pub fn landmark(size: f64, collide: bool, color: usize) -> Self {
        Self {
            pos: [0.0; 2],
            vel: [0.0; 2],
            size,
            mass: 1.0,
            movable: false,
            collide,
            accel: 0.0,
            max_speed: None,
            color,
        }
    }

    pub fn agent(size: f64, accel: f64, max_speed: Option<f64>, collide: bool) -> Self {
        Self {
            pos: [0.0; 2],
            vel: [0.0; 2],
            size,
            mass: 1.0,
            movable: true,
            collide,
            accel,
            max_speed,
            color: 0,
        }
    }

    pub fn distance(&self, other: &Entity) -> f64 {
        let dx = self.pos[0] - other.pos[0];
        let dy = self.pos[1] - other.pos[1];
        (dx * dx + dy * dy).sqrt()
    }

    pub fn overlaps(&self, other: &Entity) -> bool {
        self.distance(other) < self.size + other.size
    }

    pub fn speed(&self) -> f64 {
        self.vel[0].hypot(self.vel[1])
    }
}

/// One semi-implicit Euler step: damp velocity, add `force / mass * dt`,
/// clamp to the entity's max speed, then advance position with the new
/// velocity.
pub fn integrate(entity: &mut Entity, force: [f64; 2], dt: f64, damping: f64) {
    if !entity.movable {
        return;
    }
    for d in 0..2 {
        entity.vel[d] = entity.vel[d] * (1.0 - damping) + force[d] / entity.mass * dt;
    }
    if let Some(max) = entity.max_speed {
        let speed = entity.speed();
        if speed > max {
            entity.vel[0] *= max / speed;
            entity.vel[1] *= max / speed;
        }
    }
    for d in 0..2 {
        entity.pos[d] += entity.vel[d] * dt;
    }
}

/// Contact force on `a` from `b`; `b` receives the negation.
///
/// The penetration depth is softened with a softplus of width
/// [`CONTACT_MARGIN`], so the force is smooth and saturates to linear growth.
pub fn contact_force(a: &Entity, b: &Entity) -> [f64; 2] {
    let delta = [a.pos[0] - b.pos[0], a.pos[1] - b.pos[1]];
    let dist = delta[0].hypot(delta[1]);
    let min_dist = a.size + b.size;
    let x = -(dist - min_dist) / CONTACT_MARGIN;
    // numerically stable softplus
    let penetration = (x.max(0.0) + (-x.abs()).exp().ln_1p()) * CONTACT_MARGIN;
    if dist < 1e-12 {
        // coincident centers: push along +x so the pair still separates
        return [CONTACT_STIFFNESS * penetration, 0.0];
    }
    let scale = CONTACT_STIFFNESS * penetration / dist;
    [delta[0] * scale, delta[1] * scale]
}

/// Particles in the plane with damping and soft contacts. Agents come first
/// in `entities`, landmarks after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleWorld {
    pub entities: Vec<Entity>,
    pub num_agents: usize,
    pub dt: f64,
    pub damping: f64,
}

impl ParticleWorld {
    pub fn agents(&self) -> &[Entity] {
        &self.entities[..self.num_agents]
    }

    pub fn landmarks(&self) -> &[Entity] {
        &self.entities[self.num_agents..]
    }

    /// Advances all entities one tick given per-agent action forces.
    pub fn step(&mut self, action_forces: &[[f64; 2]]) {
        let n = self.entities.len();
        let mut forces = vec![[0.0; 2]; n];
        for (i, f) in action_forces.iter().enumerate().take(self.num_agents) {
            forces[i] = *f;
        }
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&self.entities[i], &self.entities[j]);
                if !(a.collide && b.collide) || !(a.movable || b.movable) {
                    continue;
                }
                let f = contact_force(a, b);
                for d in 0..2 {
                    forces[i][d] += f[d];
                    forces[j][d] -= f[d];
                }
            }
        }
        let (dt, damping) = (self.dt, self.damping);
        for (entity, force) in self.entities.iter_mut().zip(forces) {
            integrate(entity, force, dt, damping);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_force_at_rest_stays_put() {
        let mut e = Entity::agent(0.1, 1.0, None, true);
        e.pos = [0.3, -0.2];
        integrate(&mut e, [0.0, 0.0], 0.1, DAMPING);
        assert_eq!(e.pos, [0.3, -0.2]);
        assert_eq!(e.vel, [0.0, 0.0]);
    }

    #[test]
    fn unit_force_from_rest() {
        // v1 = (1 - d) * 0 + f / m * dt = 0.1, x1 = x0 + v1 * dt = 0.01
        let mut e = Entity::agent(0.1, 1.0, None, true);
        integrate(&mut e, [1.0, 0.0], 0.1, DAMPING);
        assert!((e.vel[0] - 0.1).abs() < 1e-15);
        assert!((e.pos[0] - 0.01).abs() < 1e-15);
        assert_eq!(e.pos[1], 0.0);
    }

    #[test]
    fn speed_clamped() {
        let mut e = Entity::agent(0.1, 1.0, Some(1.0), true);
        integrate(&mut e, [100.0, 0.0], 0.1, DAMPING);
        assert!((e.speed() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_particle_speed_decays_monotonically() {
        let mut world = ParticleWorld {
            entities: vec![Entity::agent(0.1, 1.0, None, false)],
            num_agents: 1,
            dt: 0.1,
            damping: DAMPING,
        };
        world.entities[0].vel = [2.0, -1.0];
        let mut last = world.entities[0].speed();
        for _ in 0..50 {
            world.step(&[[0.0, 0.0]]);
            let speed = world.entities[0].speed();
            assert!(speed < last);
            last = speed;
        }
    }

    #[test]
    fn contact_is_antisymmetric_and_repulsive() {
        let mut a = Entity::agent(0.15, 1.0, None, true);
        let mut b = a.clone();
        a.pos = [0.0, 0.0];
        b.pos = [0.2, 0.1];
        let fab = contact_force(&a, &b);
        let fba = contact_force(&b, &a);
        assert!((fab[0] + fba[0]).abs() < 1e-12 && (fab[1] + fba[1]).abs() < 1e-12);
        assert!(fab[0] < 0.0, "a is pushed away from b");
        b.pos = [1.0, 0.0];
        let far = contact_force(&a, &b);
        assert!(far[0].abs() < 1e-100);
    }
}
