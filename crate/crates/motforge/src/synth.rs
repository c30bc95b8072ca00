//! Deterministic synthetic sequences: ground truth, a noisy detector, and
//! appearance features, emitted in the same formats real sequences use.
//!
//! Agents move with piecewise-constant velocity and reflect off the arena
//! walls. Occlusion events suppress detections for a sampled duration; the
//! detector independently drops, jitters, and fabricates boxes. Each agent
//! owns a latent unit appearance vector; emitted features are the latent
//! plus isotropic noise, re-normalized.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::detection::{Detection, Feature};
use crate::motio::{GtRecord, SequenceBundle};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotionConfig {
    pub speed_min: f64,
    pub speed_max: f64,
    /// Per-frame probability of resampling direction and speed.
    pub direction_change_prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OcclusionConfig {
    /// Per-frame probability that a visible agent starts an occlusion.
    pub rate_per_frame: f64,
    pub duration_min: u32,
    pub duration_max: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Independent per-opportunity miss probability.
    pub miss_prob: f64,
    /// Standard deviation of the center jitter, pixels.
    pub jitter_sigma: f64,
    /// Expected false positives per frame.
    pub false_positive_rate: f64,
    pub confidence_mean: f64,
    pub confidence_sigma: f64,
    pub fp_confidence_mean: f64,
    pub fp_confidence_sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub frame_count: u32,
    pub agent_count: usize,
    pub arena_width: f64,
    pub arena_height: f64,
    pub agent_height_min: f64,
    pub agent_height_max: f64,
    pub motion: MotionConfig,
    pub appearance_dim: usize,
    pub appearance_noise_sigma: f64,
    pub occlusion: OcclusionConfig,
    pub detector: DetectorConfig,
}

impl ScenarioConfig {
    /// Sparse scene, mild noise, short occlusions.
    pub fn easy(seed: u64) -> Self {
        Self {
            name: format!("easy-s{seed}"),
            seed,
            frame_count: 150,
            agent_count: 4,
            arena_width: 800.0,
            arena_height: 600.0,
            agent_height_min: 40.0,
            agent_height_max: 70.0,
            motion: MotionConfig {
                speed_min: 1.0,
                speed_max: 3.0,
                direction_change_prob: 0.03,
            },
            appearance_dim: 32,
            appearance_noise_sigma: 0.1,
            occlusion: OcclusionConfig {
                rate_per_frame: 0.005,
                duration_min: 1,
                duration_max: 3,
            },
            detector: DetectorConfig {
                miss_prob: 0.02,
                jitter_sigma: 0.5,
                false_positive_rate: 0.005,
                confidence_mean: 0.9,
                confidence_sigma: 0.05,
                fp_confidence_mean: 0.5,
                fp_confidence_sigma: 0.1,
            },
        }
    }

    /// Noiseless variant of `easy`: detections equal ground truth exactly.
    pub fn noiseless(seed: u64) -> Self {
        Self {
            name: format!("noiseless-s{seed}"),
            appearance_noise_sigma: 0.0,
            occlusion: OcclusionConfig {
                rate_per_frame: 0.0,
                duration_min: 1,
                duration_max: 1,
            },
            detector: DetectorConfig {
                miss_prob: 0.0,
                jitter_sigma: 0.0,
                false_positive_rate: 0.0,
                confidence_mean: 0.9,
                confidence_sigma: 0.0,
                fp_confidence_mean: 0.5,
                fp_confidence_sigma: 0.0,
            },
            ..Self::easy(seed)
        }
    }

    /// Dense scene with frequent multi-frame occlusions, turns, misses and
    /// false positives; the benchmark workhorse.
    pub fn crowded(seed: u64) -> Self {
        Self {
            name: format!("crowded-s{seed}"),
            seed,
            frame_count: 250,
            agent_count: 12,
            arena_width: 900.0,
            arena_height: 700.0,
            agent_height_min: 40.0,
            agent_height_max: 70.0,
            motion: MotionConfig {
                speed_min: 1.0,
                speed_max: 4.0,
                direction_change_prob: 0.12,
            },
            appearance_dim: 32,
            appearance_noise_sigma: 0.3,
            occlusion: OcclusionConfig {
                rate_per_frame: 0.03,
                duration_min: 3,
                duration_max: 10,
            },
            detector: DetectorConfig {
                miss_prob: 0.05,
                jitter_sigma: 1.0,
                false_positive_rate: 0.02,
                confidence_mean: 0.9,
                confidence_sigma: 0.05,
                fp_confidence_mean: 0.5,
                fp_confidence_sigma: 0.1,
            },
        }
    }

    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        match name {
            "easy" => Some(Self::easy(seed)),
            "noiseless" => Some(Self::noiseless(seed)),
            "crowded" => Some(Self::crowded(seed)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.agent_count < 1 {
            return Err("agent_count must be >= 1".into());
        }
        if self.frame_count < 1 {
            return Err("frame_count must be >= 1".into());
        }
        for (name, p) in [
            ("direction_change_prob", self.motion.direction_change_prob),
            ("occlusion.rate_per_frame", self.occlusion.rate_per_frame),
            ("detector.miss_prob", self.detector.miss_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must be in [0, 1]"));
            }
        }
        for (name, s) in [
            ("appearance_noise_sigma", self.appearance_noise_sigma),
            ("detector.jitter_sigma", self.detector.jitter_sigma),
        ] {
            if s < 0.0 {
                return Err(format!("{name} must be >= 0"));
            }
        }
        if self.occlusion.duration_min < 1
            || self.occlusion.duration_max < self.occlusion.duration_min
        {
            return Err("occlusion duration range is empty".into());
        }
        if self.agent_height_min <= 0.0 || self.agent_height_max < self.agent_height_min {
            return Err("agent height range is empty".into());
        }
        Ok(())
    }
}

struct Agent {
    latent: Vec<f64>,
    width: f64,
    height: f64,
    cx: f64,
    cy: f64,
    vx: f64,
    vy: f64,
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    loop {
        let v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn noisy_feature(rng: &mut ChaCha8Rng, latent: &[f64], sigma: f64) -> Feature {
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let v: Vec<f64> = latent
        .iter()
        .map(|&x| x + sigma * normal.sample(rng))
        .collect();
    match Feature::normalized(v) {
        Ok(f) => f,
        // Vanishingly unlikely cancellation; resample fresh.
        Err(_) => Feature::normalized(unit_vector(rng, latent.len())).expect("unit"),
    }
}

/// Generate the sequence described by `config`. Fully deterministic: the same
/// config produces bitwise-identical output.
pub fn generate(config: &ScenarioConfig) -> SequenceBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let frames = config.frame_count;

    // Agents: appearance, size, pose.
    let mut agents: Vec<Agent> = (0..config.agent_count)
        .map(|_| {
            let latent = unit_vector(&mut rng, config.appearance_dim);
            let height = rng.random_range(config.agent_height_min..=config.agent_height_max);
            let aspect = rng.random_range(0.38..0.48);
            let width = aspect * height;
            let cx = rng.random_range(width / 2.0..config.arena_width - width / 2.0);
            let cy = rng.random_range(height / 2.0..config.arena_height - height / 2.0);
            let speed = rng.random_range(config.motion.speed_min..=config.motion.speed_max);
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            Agent {
                latent,
                width,
                height,
                cx,
                cy,
                vx: speed * angle.cos(),
                vy: speed * angle.sin(),
            }
        })
        .collect();

    // Occlusion schedule per agent.
    let mut occluded = vec![vec![false; frames as usize + 1]; config.agent_count];
    for agent_occluded in occluded.iter_mut() {
        let mut until = 0u32;
        for frame in 1..=frames {
            if frame <= until {
                agent_occluded[frame as usize] = true;
            } else if rng.random_bool(config.occlusion.rate_per_frame) {
                let duration =
                    rng.random_range(config.occlusion.duration_min..=config.occlusion.duration_max);
                until = frame + duration - 1;
                agent_occluded[frame as usize] = true;
            }
        }
    }

    // Trajectories: piecewise-constant velocity with wall reflection.
    let mut positions = vec![vec![(0.0f64, 0.0f64); frames as usize + 1]; config.agent_count];
    for (a, agent) in agents.iter_mut().enumerate() {
        for frame in 1..=frames {
            if frame > 1 {
                if rng.random_bool(config.motion.direction_change_prob) {
                    let speed = rng.random_range(config.motion.speed_min..=config.motion.speed_max);
                    let angle = rng.random_range(0.0..std::f64::consts::TAU);
                    agent.vx = speed * angle.cos();
                    agent.vy = speed * angle.sin();
                }
                agent.cx += agent.vx;
                agent.cy += agent.vy;
                let (min_x, max_x) = (agent.width / 2.0, config.arena_width - agent.width / 2.0);
                let (min_y, max_y) = (agent.height / 2.0, config.arena_height - agent.height / 2.0);
                if agent.cx < min_x {
                    agent.cx = 2.0 * min_x - agent.cx;
                    agent.vx = -agent.vx;
                } else if agent.cx > max_x {
                    agent.cx = 2.0 * max_x - agent.cx;
                    agent.vx = -agent.vx;
                }
                if agent.cy < min_y {
                    agent.cy = 2.0 * min_y - agent.cy;
                    agent.vy = -agent.vy;
                } else if agent.cy > max_y {
                    agent.cy = 2.0 * max_y - agent.cy;
                    agent.vy = -agent.vy;
                }
            }
            positions[a][frame as usize] = (agent.cx, agent.cy);
        }
    }

    // Ground truth rows; occluded frames keep their row at visibility 0.
    let mut ground_truth = Vec::new();
    for frame in 1..=frames {
        for (a, agent) in agents.iter().enumerate() {
            let (cx, cy) = positions[a][frame as usize];
            let bbox = BBox::new(
                cx - agent.width / 2.0,
                cy - agent.height / 2.0,
                agent.width,
                agent.height,
            )
            .expect("positive agent extent");
            ground_truth.push(GtRecord {
                frame,
                identity: a as u32 + 1,
                bbox,
                visibility: if occluded[a][frame as usize] {
                    0.0
                } else {
                    1.0
                },
            });
        }
    }

    // Detector pass: misses, jitter, confidence, appearance noise, then
    // false positives.
    let mut detections = Vec::new();
    for frame in 1..=frames {
        for (a, agent) in agents.iter().enumerate() {
            if occluded[a][frame as usize] {
                continue;
            }
            if config.detector.miss_prob > 0.0 && rng.random_bool(config.detector.miss_prob) {
                continue;
            }
            let (cx, cy) = positions[a][frame as usize];
            let (jx, jy) = if config.detector.jitter_sigma > 0.0 {
                (
                    config.detector.jitter_sigma * normal.sample(&mut rng),
                    config.detector.jitter_sigma * normal.sample(&mut rng),
                )
            } else {
                (0.0, 0.0)
            };
            let bbox = BBox::new(
                cx + jx - agent.width / 2.0,
                cy + jy - agent.height / 2.0,
                agent.width,
                agent.height,
            )
            .expect("positive agent extent");
            let confidence = (config.detector.confidence_mean
                + config.detector.confidence_sigma * normal.sample(&mut rng))
            .clamp(0.0, 1.0);
            let feature = noisy_feature(&mut rng, &agent.latent, config.appearance_noise_sigma);
            detections.push(Detection::new(frame, bbox, confidence).with_feature(feature));
        }

        // False positives: expectation false_positive_rate per frame.
        let rate = config.detector.false_positive_rate;
        let mut count = rate.floor() as u32;
        let frac = rate - rate.floor();
        if frac > 0.0 && rng.random_bool(frac) {
            count += 1;
        }
        for _ in 0..count {
            let height = rng.random_range(config.agent_height_min..=config.agent_height_max);
            let width = rng.random_range(0.38..0.48) * height;
            let cx = rng.random_range(width / 2.0..config.arena_width - width / 2.0);
            let cy = rng.random_range(height / 2.0..config.arena_height - height / 2.0);
            let confidence = (config.detector.fp_confidence_mean
                + config.detector.fp_confidence_sigma * normal.sample(&mut rng))
            .clamp(0.0, 1.0);
            let feature =
                Feature::normalized(unit_vector(&mut rng, config.appearance_dim)).expect("unit");
            let bbox = BBox::new(cx - width / 2.0, cy - height / 2.0, width, height)
                .expect("positive extent");
            detections.push(Detection::new(frame, bbox, confidence).with_feature(feature));
        }
    }

    SequenceBundle {
        name: config.name.clone(),
        frame_count: frames,
        frame_rate: 30.0,
        detections,
        ground_truth: Some(ground_truth),
    }
}
