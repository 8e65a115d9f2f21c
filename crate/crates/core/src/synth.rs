//! Synthetic contact-task recordings with injected failures.
//!
//! A run follows a phase script (free motion, approach, contact, retreat).
//! Poses move between waypoints with cosine easing, joint positions are a
//! fixed linear image of the pose, and wrench channels carry a contact
//! plateau plus phase-dependent Gaussian noise. All values are rounded to
//! six decimals so that CSV round trips are exact.
//!
//! A failure run is rendered from the same seed as its nominal twin and is
//! spliced onto it at the onset, so the two agree on every earlier sample.
//! The label spans the first to the last sample that differs from the twin.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::preprocessing::{Channel, ChannelKind, FailureLabel, FailureTag, TimeSeries};
use crate::{Error, Result};

/// Decimal places kept in generated values.
pub const DECIMALS: i32 = 6;

const N_CHANNELS: usize = 19;
const FX: usize = 0;
const FY: usize = 1;
const FZ: usize = 2;
const TX: usize = 3;
const TY: usize = 4;
const Q0: usize = 6;
const POSE0: usize = 13;

/// Seconds over which a failure blends in after its onset.
const ONSET_BLEND: f64 = 0.05;
/// Time constant (s) with which a failure's pose deviation decays once the
/// retreat starts.
const RETREAT_SETTLE: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Free,
    Approach,
    Contact,
    Retreat,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Free, Phase::Approach, Phase::Contact, Phase::Retreat];

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseNoise {
    /// Share of the run spent in the phase.
    pub fraction: f64,
    /// Standard deviations of force (N), torque (Nm), pose (m or rad) and
    /// joint (rad) noise.
    pub force: f64,
    pub torque: f64,
    pub pose: f64,
    pub joint: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskProfile {
    pub name: String,
    pub sample_rate: f64,
    /// Mean duration in seconds.
    pub duration_mean: f64,
    /// Duration variance in s².
    pub duration_var: f64,
    /// Free, approach, contact, retreat.
    pub phases: [PhaseNoise; 4],
    /// Waypoints `[x, y, z, rx, ry, rz]`.
    pub home: [f64; 6],
    pub pre_contact: [f64; 6],
    pub contact: [f64; 6],
    /// Per-run standard deviation of the target position in x and y (m).
    pub waypoint_jitter: f64,
    /// Pressing force during contact (N).
    pub contact_force: f64,
    /// Relative per-run standard deviation of the pressing force.
    pub force_jitter: f64,
    /// Lateral force per metre of misalignment (N/m).
    pub lateral_stiffness: f64,
    /// Per-run standard deviation of the natural misalignment (m).
    pub natural_misalignment: f64,
    /// Travel along −z while in contact (m).
    pub insertion_depth: f64,
    /// Lateral stroke amplitude (m) and frequency (Hz) while in contact.
    pub stroke_amplitude: f64,
    pub stroke_frequency: f64,
    pub friction: f64,
    /// Tool rotation about z over the contact phase (rad) and the final
    /// tightening torque (Nm).
    pub screw_rotation: f64,
    pub screw_torque: f64,
    /// Lever arm between contact point and wrench sensor (m).
    pub lever: f64,
    /// Pose deflection per newton of external force (m/N).
    pub compliance: f64,
    /// Duration of force ramps at contact start and end (s).
    pub contact_ramp: f64,
}

fn phases(fractions: [f64; 4], force: [f64; 4]) -> [PhaseNoise; 4] {
    let mk = |i: usize| PhaseNoise {
        fraction: fractions[i],
        force: force[i],
        torque: 0.05 * force[i],
        pose: 5e-5,
        joint: 5e-5,
    };
    [mk(0), mk(1), mk(2), mk(3)]
}

impl TaskProfile {
    pub const NAMES: [&'static str; 3] = ["cabling_like", "screwing_like", "polishing_like"];

    /// Connector insertion: 43.1 s ± √3.4 s at 500 Hz.
    pub fn cabling_like() -> Self {
        Self {
            name: "cabling_like".into(),
            sample_rate: 500.0,
            duration_mean: 43.1,
            duration_var: 3.4,
            phases: phases([0.30, 0.20, 0.35, 0.15], [0.15, 0.2, 0.25, 0.2]),
            home: [0.45, 0.0, 0.45, PI, 0.0, 0.0],
            pre_contact: [0.60, 0.15, 0.20, PI, 0.0, 0.3],
            contact: [0.60, 0.15, 0.12, PI, 0.0, 0.3],
            waypoint_jitter: 0.002,
            contact_force: 12.0,
            force_jitter: 0.05,
            lateral_stiffness: 2000.0,
            natural_misalignment: 0.0005,
            insertion_depth: 0.015,
            stroke_amplitude: 0.0,
            stroke_frequency: 0.0,
            friction: 0.2,
            screw_rotation: 0.0,
            screw_torque: 0.0,
            lever: 0.1,
            compliance: 1.0 / 3000.0,
            contact_ramp: 0.3,
        }
    }

    /// Screw driving: 17.2 s ± √0.1 s at 500 Hz.
    pub fn screwing_like() -> Self {
        Self {
            name: "screwing_like".into(),
            duration_mean: 17.2,
            duration_var: 0.1,
            phases: phases([0.25, 0.20, 0.40, 0.15], [0.15, 0.25, 0.8, 0.2]),
            pre_contact: [0.55, -0.10, 0.22, PI, 0.0, 0.0],
            contact: [0.55, -0.10, 0.15, PI, 0.0, 0.0],
            waypoint_jitter: 0.001,
            contact_force: 20.0,
            insertion_depth: 0.008,
            screw_rotation: 6.0 * PI,
            screw_torque: 1.5,
            ..Self::cabling_like()
        }
    }

    /// Surface polishing: 39.0 s ± √1.1 s at 500 Hz.
    pub fn polishing_like() -> Self {
        Self {
            name: "polishing_like".into(),
            duration_mean: 39.0,
            duration_var: 1.1,
            phases: phases([0.15, 0.10, 0.65, 0.10], [0.15, 0.25, 0.5, 0.2]),
            pre_contact: [0.50, 0.05, 0.18, PI, 0.0, 0.0],
            contact: [0.50, 0.05, 0.10, PI, 0.0, 0.0],
            contact_force: 15.0,
            insertion_depth: 0.0,
            stroke_amplitude: 0.04,
            stroke_frequency: 0.5,
            friction: 0.3,
            ..Self::cabling_like()
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "cabling_like" => Ok(Self::cabling_like()),
            "screwing_like" => Ok(Self::screwing_like()),
            "polishing_like" => Ok(Self::polishing_like()),
            other => Err(Error::input(format!(
                "unknown task profile '{other}' (expected one of {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    /// Same profile with every duration multiplied by `factor`.
    pub fn scaled_duration(mut self, factor: f64) -> Self {
        self.duration_mean *= factor;
        self.duration_var *= factor * factor;
        self
    }

    pub fn channels() -> Vec<Channel> {
        let mut ch = Vec::with_capacity(N_CHANNELS);
        for n in ["fx", "fy", "fz"] {
            ch.push(Channel::new(n, ChannelKind::Force, "N"));
        }
        for n in ["tx", "ty", "tz"] {
            ch.push(Channel::new(n, ChannelKind::Torque, "Nm"));
        }
        for i in 1..=7 {
            ch.push(Channel::new(format!("q{i}"), ChannelKind::JointPosition, "rad"));
        }
        for n in ["x", "y", "z"] {
            ch.push(Channel::new(n, ChannelKind::Pose, "m"));
        }
        for n in ["rx", "ry", "rz"] {
            ch.push(Channel::new(n, ChannelKind::Pose, "rad"));
        }
        ch
    }

    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.phases.iter().map(|p| p.fraction).sum();
        if self.phases.iter().any(|p| !(p.fraction > 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::input("phase fractions must be positive and sum to 1"));
        }
        if !(self.sample_rate > 0.0 && self.duration_mean > 0.0 && self.duration_var >= 0.0) {
            return Err(Error::input("sample rate and duration must be positive"));
        }
        let noise_ok = self
            .phases
            .iter()
            .all(|p| p.force >= 0.0 && p.torque >= 0.0 && p.pose >= 0.0 && p.joint >= 0.0);
        if !noise_ok {
            return Err(Error::input("noise levels must be non-negative"));
        }
        Ok(())
    }
}

/// Where a failure starts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Onset {
    /// Uniform between fractions `lo` and `hi` of the given phase.
    Phase { phase: Phase, lo: f64, hi: f64 },
    /// Absolute sample index.
    Index(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureSpec {
    pub tag: FailureTag,
    /// Class name used in labels and reports.
    pub class: String,
    pub onset: Onset,
    /// Tag-specific size: newtons for spikes, metres for offsets and
    /// displacement, relative change otherwise.
    pub magnitude: f64,
    /// Seconds the perturbation lasts, for transient tags.
    pub duration: Option<f64>,
}

impl FailureSpec {
    pub fn new(tag: FailureTag, class: impl Into<String>, onset: Onset, magnitude: f64, duration: Option<f64>) -> Self {
        Self {
            tag,
            class: class.into(),
            onset,
            magnitude,
            duration,
        }
    }

    fn at_contact(tag: FailureTag, class: &str, magnitude: f64, duration: Option<f64>) -> Self {
        Self::new(
            tag,
            class,
            Onset::Phase {
                phase: Phase::Contact,
                lo: 0.0,
                hi: 0.0,
            },
            magnitude,
            duration,
        )
    }

    pub fn disturbance_spike(newtons: f64, seconds: f64) -> Self {
        Self::new(
            FailureTag::DisturbanceSpike,
            "disturbance_spike",
            Onset::Phase {
                phase: Phase::Contact,
                lo: 0.1,
                hi: 0.9,
            },
            newtons,
            Some(seconds),
        )
    }

    pub fn misalignment(class: &str, metres: f64) -> Self {
        Self::at_contact(FailureTag::MisalignmentOffset, class, metres, None)
    }

    pub fn missing_contact() -> Self {
        Self::at_contact(FailureTag::MissingContact, "missing_contact", 0.04, None)
    }

    pub fn wrong_part_profile() -> Self {
        Self::at_contact(FailureTag::WrongPartProfile, "wrong_part_profile", 0.6, None)
    }

    pub fn obstructed_target() -> Self {
        Self::at_contact(FailureTag::ObstructedTarget, "obstructed_target", 0.01, None)
    }

    pub fn displaced_object() -> Self {
        Self::new(
            FailureTag::DisplacedObject,
            "displaced_object",
            Onset::Phase {
                phase: Phase::Approach,
                lo: 0.0,
                hi: 0.0,
            },
            0.02,
            None,
        )
    }

    /// Extra force noise and friction from contact start, fading out over
    /// `seconds` when given.
    pub fn texture_change(relative: f64, seconds: Option<f64>) -> Self {
        Self::at_contact(FailureTag::TextureChange, "texture_change", relative, seconds)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude >= 0.0 && self.magnitude.is_finite()) {
            return Err(Error::input("failure magnitude must be finite and non-negative"));
        }
        if let Some(d) = self.duration {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::input("failure duration must be positive"));
            }
        }
        if self.tag == FailureTag::DisturbanceSpike && self.duration.is_none() {
            return Err(Error::input("a disturbance spike needs a duration"));
        }
        if let Onset::Phase { lo, hi, .. } = self.onset {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return Err(Error::input(format!(
                    "phase-relative onset [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1"
                )));
            }
        }
        Ok(())
    }
}

/// One entry of a corpus recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureMix {
    pub spec: FailureSpec,
    pub count: usize,
}

/// Ten runs per class for each profile.
pub fn default_failure_mix(profile: &str) -> Result<Vec<FailureMix>> {
    let specs = match profile {
        "cabling_like" => vec![
            FailureSpec::disturbance_spike(25.0, 0.5),
            FailureSpec::misalignment("misalignment_offset", 0.005),
            FailureSpec::misalignment("misalignment_offset_subtle", 0.0005),
            FailureSpec::wrong_part_profile(),
            FailureSpec::missing_contact(),
        ],
        "screwing_like" => vec![
            FailureSpec::missing_contact(),
            FailureSpec::obstructed_target(),
            FailureSpec::wrong_part_profile(),
            FailureSpec::disturbance_spike(25.0, 0.5),
        ],
        "polishing_like" => vec![
            FailureSpec::texture_change(1.5, None),
            FailureSpec::displaced_object(),
            FailureSpec::disturbance_spike(25.0, 0.5),
            FailureSpec::misalignment("misalignment_offset", 0.005),
            FailureSpec::missing_contact(),
        ],
        other => return Err(Error::input(format!("no default failure mix for profile '{other}'"))),
    };
    Ok(specs.into_iter().map(|spec| FailureMix { spec, count: 10 }).collect())
}

/// Per-run draws and the knobs that failures turn.
#[derive(Clone, Debug)]
struct Plan {
    len: usize,
    /// Start index of each phase, then the run length.
    bounds: [usize; 5],
    pre: [f64; 6],
    contact: [f64; 6],
    force_scale: f64,
    lateral: [f64; 2],
    stroke_phase: f64,
    // Failure knobs.
    force_mult: f64,
    lateral_extra: [f64; 2],
    contact_offset: [f64; 3],
    approach_offset: [f64; 3],
    insertion_mult: f64,
    /// Extra depth (m) reached while pressing against nothing.
    overtravel: f64,
    /// Nominal contact-end pose the retreat is planned from.
    retreat_anchor: Option<[f64; 6]>,
    contact_noise_phase: Phase,
    friction_mult: f64,
    stick_slip: f64,
    screw_mult: f64,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th run of a given kind within a corpus.
pub fn run_seed(corpus_seed: u64, kind: u64, index: u64) -> u64 {
    splitmix(splitmix(corpus_seed ^ kind.wrapping_mul(0xA24B_AED4_963E_E407)).wrapping_add(index))
}

fn ease(u: f64) -> f64 {
    0.5 - 0.5 * (PI * u.clamp(0.0, 1.0)).cos()
}

fn lerp6(a: &[f64; 6], b: &[f64; 6], w: f64) -> [f64; 6] {
    std::array::from_fn(|i| a[i] + (b[i] - a[i]) * w)
}

fn quantize(x: f64) -> f64 {
    let s = 10f64.powi(DECIMALS);
    let q = (x * s).round() / s;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

/// Fixed joint map of the simulated arm: `q = q0 + J (pose − home)`.
fn joint_map() -> ([f64; 7], [[f64; 6]; 7]) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a6f_696e_7473);
    let q0 = std::array::from_fn(|i| [0.0, -0.6, 0.0, -2.1, 0.0, 1.6, 0.8][i] + 0.05 * rng.random::<f64>());
    let j = std::array::from_fn(|_| std::array::from_fn(|c| rng.sample::<f64, _>(StandardNormal) * if c < 3 { 2.0 } else { 0.3 }));
    (q0, j)
}

fn draw_plan(profile: &TaskProfile, rng: &mut ChaCha8Rng) -> Plan {
    let sd = profile.duration_var.sqrt();
    let duration = Normal::new(profile.duration_mean, sd)
        .expect("validated")
        .sample(rng)
        .max(0.5 * profile.duration_mean);
    let len = ((duration * profile.sample_rate).round() as usize).max(8);
    let mut bounds = [0usize; 5];
    let mut acc = 0.0;
    for (i, p) in profile.phases.iter().enumerate() {
        acc += p.fraction;
        bounds[i + 1] = ((acc * len as f64).round() as usize).clamp(bounds[i] + 1, len);
    }
    bounds[4] = len;
    let mut jitter = || rng.sample::<f64, _>(StandardNormal);
    let (jx, jy) = (jitter() * profile.waypoint_jitter, jitter() * profile.waypoint_jitter);
    let mut pre = profile.pre_contact;
    let mut contact = profile.contact;
    pre[0] += jx;
    pre[1] += jy;
    contact[0] += jx;
    contact[1] += jy;
    let force_scale = 1.0 + profile.force_jitter * jitter();
    let lateral = [
        profile.lateral_stiffness * profile.natural_misalignment * jitter(),
        profile.lateral_stiffness * profile.natural_misalignment * jitter(),
    ];
    let stroke_phase = 2.0 * PI * rng.random::<f64>();
    Plan {
        len,
        bounds,
        pre,
        contact,
        force_scale,
        lateral,
        stroke_phase,
        force_mult: 1.0,
        lateral_extra: [0.0; 2],
        contact_offset: [0.0; 3],
        approach_offset: [0.0; 3],
        insertion_mult: 1.0,
        overtravel: 0.0,
        retreat_anchor: None,
        contact_noise_phase: Phase::Contact,
        friction_mult: 1.0,
        stick_slip: 0.0,
        screw_mult: 1.0,
    }
}

/// Noise-free signal and per-sample noise scales.
struct Rendered {
    base: Vec<f64>,
    sigma: Vec<[f64; 4]>,
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

fn render(profile: &TaskProfile, plan: &Plan) -> Rendered {
    let (q0, jm) = joint_map();
    let rate = profile.sample_rate;
    let mut base = vec![0.0; plan.len * N_CHANNELS];
    let mut sigma = Vec::with_capacity(plan.len);
    let [_, a0, c0, r0, end] = plan.bounds;
    let contact_len = r0 - c0;
    let ramp = (profile.contact_ramp * rate).max(1.0);
    let omega = 2.0 * PI * profile.stroke_frequency;

    let mut contact_pose = plan.contact;
    for k in 0..3 {
        contact_pose[k] += plan.contact_offset[k];
    }
    let mut approach_target = plan.contact;
    for k in 0..3 {
        approach_target[k] += plan.approach_offset[k];
    }
    let depth = profile.insertion_depth * plan.insertion_mult;
    let contact_state = |i: usize| -> ([f64; 6], [f64; 6]) {
        let tau = (i - c0) as f64;
        let u = if contact_len > 1 { tau / (contact_len - 1) as f64 } else { 1.0 };
        let s = smoothstep(tau / ramp) * smoothstep((contact_len as f64 - 1.0 - tau) / ramp);
        let t = tau / rate;
        let mut pose = contact_pose;
        pose[2] -= depth * ease(u / 0.5) + plan.overtravel * s;
        let stroke = profile.stroke_amplitude * (omega * t + plan.stroke_phase).sin() * s;
        pose[0] += stroke;
        pose[5] += profile.screw_rotation * plan.screw_mult * u;
        let vx = profile.stroke_amplitude * omega * (omega * t + plan.stroke_phase).cos() * s;

        let press = profile.contact_force * plan.force_scale * plan.force_mult * s
            * (1.0 + plan.stick_slip * (2.0 * PI * 6.0 * t).sin());
        let fz = -press;
        let friction = -profile.friction * plan.friction_mult * press * (vx / 0.01).tanh();
        let fx = (plan.lateral[0] + plan.lateral_extra[0]) * s * plan.force_mult.min(1.0) + friction;
        let fy = (plan.lateral[1] + plan.lateral_extra[1]) * s * plan.force_mult.min(1.0);
        let tz = profile.screw_torque * plan.screw_mult * plan.force_mult.min(1.0) * u * u * s;
        (pose, [fx, fy, fz, profile.lever * fy, -profile.lever * fx, tz])
    };
    let contact_end_pose = if contact_len > 0 { contact_state(r0 - 1).0 } else { contact_pose };

    for i in 0..end {
        let (phase, pose, wrench) = if i < a0 {
            let u = i as f64 / a0.max(1) as f64;
            (Phase::Free, lerp6(&profile.home, &plan.pre, ease(u)), [0.0; 6])
        } else if i < c0 {
            let u = (i - a0 + 1) as f64 / (c0 - a0) as f64;
            (Phase::Approach, lerp6(&plan.pre, &approach_target, ease(u)), [0.0; 6])
        } else if i < r0 {
            let (pose, wrench) = contact_state(i);
            (plan.contact_noise_phase, pose, wrench)
        } else {
            let u = (i - r0 + 1) as f64 / (end - r0) as f64;
            let pose = match plan.retreat_anchor {
                Some(anchor) => {
                    let decay = (-((i - r0) as f64) / (RETREAT_SETTLE * rate)).exp();
                    let mut p = lerp6(&anchor, &profile.home, ease(u));
                    for k in 0..6 {
                        p[k] += (contact_end_pose[k] - anchor[k]) * decay;
                    }
                    p
                }
                None => lerp6(&contact_end_pose, &profile.home, ease(u)),
            };
            (Phase::Retreat, pose, [0.0; 6])
        };
        let row = &mut base[i * N_CHANNELS..(i + 1) * N_CHANNELS];
        row[..6].copy_from_slice(&wrench);
        row[POSE0..POSE0 + 6].copy_from_slice(&pose);
        let p = &profile.phases[phase.index()];
        sigma.push([p.force, p.torque, p.pose, p.joint]);
    }
    apply_kinematics(&mut base, &profile.home, &q0, &jm);
    Rendered { base, sigma }
}

/// Recomputes joint channels from the pose channels.
fn apply_kinematics(base: &mut [f64], home: &[f64; 6], q0: &[f64; 7], jm: &[[f64; 6]; 7]) {
    for row in base.chunks_exact_mut(N_CHANNELS) {
        for j in 0..7 {
            let mut q = q0[j];
            for c in 0..6 {
                q += jm[j][c] * (row[POSE0 + c] - home[c]);
            }
            row[Q0 + j] = q;
        }
    }
}

fn noise_scale(sigma: &[f64; 4], channel: usize) -> f64 {
    match channel {
        0..=2 => sigma[0],
        3..=5 => sigma[1],
        c if c >= POSE0 => sigma[2],
        _ => sigma[3],
    }
}

struct RunParts {
    plan: Plan,
    noise: Vec<f64>,
}

fn draw_run(profile: &TaskProfile, seed: u64) -> Result<RunParts> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plan = draw_plan(profile, &mut rng);
    let noise = (0..plan.len * N_CHANNELS)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(RunParts { plan, noise })
}

fn assemble(rendered: &Rendered, noise: &[f64], noise_mult: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut data = vec![0.0; rendered.base.len()];
    for (i, (row, s)) in data.chunks_exact_mut(N_CHANNELS).zip(&rendered.sigma).enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            let k = i * N_CHANNELS + c;
            *v = rendered.base[k] + noise_scale(s, c) * noise[k] * noise_mult(i, c);
        }
    }
    data
}

/// A nominal run; identical for identical seeds.
pub fn gen_nominal(profile: &TaskProfile, seed: u64) -> Result<TimeSeries> {
    let parts = draw_run(profile, seed)?;
    let rendered = render(profile, &parts.plan);
    let mut data = assemble(&rendered, &parts.noise, |_, _| 1.0);
    data.iter_mut().for_each(|v| *v = quantize(*v));
    TimeSeries::new(profile.sample_rate, TaskProfile::channels(), data, Vec::new())
}

fn resolve_onset(onset: Onset, plan: &Plan, rng: &mut ChaCha8Rng) -> Result<usize> {
    match onset {
        Onset::Index(i) if i < plan.len => Ok(i),
        Onset::Index(i) => Err(Error::input(format!("onset {i} lies outside a run of {} samples", plan.len))),
        Onset::Phase { phase, lo, hi } => {
            let start = plan.bounds[phase.index()];
            let span = plan.bounds[phase.index() + 1] - start;
            let u = if hi > lo { rng.random_range(lo..hi) } else { lo };
            Ok((start + (u * span as f64).floor() as usize).min(plan.len - 1))
        }
    }
}

/// The nominal run of the same seed with `spec` injected.
pub fn gen_failure(profile: &TaskProfile, spec: &FailureSpec, seed: u64) -> Result<TimeSeries> {
    spec.validate()?;
    let parts = draw_run(profile, seed)?;
    let plan = &parts.plan;
    let mut frng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ 0xFA11_0000_0000_0001));
    let onset = resolve_onset(spec.onset, plan, &mut frng)?;
    let angle = 2.0 * PI * frng.random::<f64>();
    let dir = [angle.cos(), angle.sin()];
    let rate = profile.sample_rate;
    let m = spec.magnitude;

    let mut failed = plan.clone();
    let mut texture: Option<(f64, Option<f64>)> = None;
    match spec.tag {
        FailureTag::DisturbanceSpike => {}
        FailureTag::MisalignmentOffset => {
            failed.lateral_extra = [profile.lateral_stiffness * m * dir[0], profile.lateral_stiffness * m * dir[1]];
            failed.contact_offset = [m * dir[0], m * dir[1], 0.0];
            failed.insertion_mult = (1.0 - m / 0.006).max(0.0);
        }
        FailureTag::MissingContact => {
            failed.force_mult = 0.0;
            failed.friction_mult = 0.0;
            failed.overtravel = m;
            failed.contact_noise_phase = Phase::Free;
        }
        FailureTag::WrongPartProfile => {
            failed.force_mult = 1.0 + m;
            failed.stick_slip = 0.3 * m;
            failed.insertion_mult = 0.5;
        }
        FailureTag::ObstructedTarget => {
            failed.contact_offset = [0.0, 0.0, m];
            failed.insertion_mult = 0.0;
            failed.force_mult = 2.0;
            failed.screw_mult = 0.1;
        }
        FailureTag::DisplacedObject => {
            failed.contact_offset = [m * dir[0], m * dir[1], 0.0];
            failed.approach_offset = failed.contact_offset;
            failed.pre[0] += m * dir[0];
            failed.pre[1] += m * dir[1];
            failed.lateral_extra = [profile.lateral_stiffness * 0.003 * dir[0], profile.lateral_stiffness * 0.003 * dir[1]];
        }
        FailureTag::TextureChange => {
            texture = Some((m, spec.duration));
            failed.friction_mult = 1.0 + 0.5 * m;
        }
    }

    let nominal = render(profile, plan);
    let r0 = plan.bounds[Phase::Retreat.index()];
    if r0 > plan.bounds[Phase::Contact.index()] {
        let row = &nominal.base[(r0 - 1) * N_CHANNELS..r0 * N_CHANNELS];
        failed.retreat_anchor = Some(std::array::from_fn(|k| row[POSE0 + k]));
    }
    let mut broken = render(profile, &failed);
    let blend = (ONSET_BLEND * rate).max(1.0);
    for i in onset..plan.len {
        let w = ((i - onset + 1) as f64 / blend).min(1.0);
        for c in 0..N_CHANNELS {
            let k = i * N_CHANNELS + c;
            broken.base[k] = nominal.base[k] + w * (broken.base[k] - nominal.base[k]);
        }
        if w < 1.0 {
            broken.sigma[i] = std::array::from_fn(|j| nominal.sigma[i][j] + w * (broken.sigma[i][j] - nominal.sigma[i][j]));
        }
    }
    broken.base[..onset * N_CHANNELS].copy_from_slice(&nominal.base[..onset * N_CHANNELS]);
    broken.sigma[..onset].copy_from_slice(&nominal.sigma[..onset]);

    if spec.tag == FailureTag::DisturbanceSpike {
        let d = (spec.duration.expect("validated") * rate).round().max(1.0) as usize;
        for i in onset..(onset + d).min(plan.len) {
            let amp = m * (1.0 - ((i - onset) as f64 / d as f64).powi(4));
            let row = &mut broken.base[i * N_CHANNELS..(i + 1) * N_CHANNELS];
            let (fx, fy) = (amp * dir[0], amp * dir[1]);
            row[FX] += fx;
            row[FY] += fy;
            row[TX] += profile.lever * fy;
            row[TY] -= profile.lever * fx;
            row[POSE0] += profile.compliance * fx;
            row[POSE0 + 1] += profile.compliance * fy;
        }
        let (q0, jm) = joint_map();
        let range = onset * N_CHANNELS..plan.len * N_CHANNELS;
        apply_kinematics(&mut broken.base[range], &profile.home, &q0, &jm);
    }

    let noise_mult = |i: usize, c: usize| -> f64 {
        match texture {
            Some((mag, dur)) if i >= onset && c <= FZ => {
                let fade = match dur {
                    Some(d) => (1.0 - (i - onset) as f64 / (d * rate)).max(0.0),
                    None => 1.0,
                };
                1.0 + mag * fade
            }
            _ => 1.0,
        }
    };
    let mut data = assemble(&broken, &parts.noise, noise_mult);
    data.iter_mut().for_each(|v| *v = quantize(*v));

    let twin = gen_nominal(profile, seed)?;
    let differs = |i: usize| data[i * N_CHANNELS..(i + 1) * N_CHANNELS] != *twin.row(i);
    let first = (onset..plan.len).find(|&i| differs(i)).unwrap_or(onset);
    let last = (first..plan.len).rev().find(|&i| differs(i)).unwrap_or(first);
    let label = FailureLabel {
        onset: first,
        end: Some(last + 1),
        tag: spec.tag,
        class: spec.class.clone(),
    };
    TimeSeries::new(rate, TaskProfile::channels(), data, vec![label])
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedRun {
    pub name: String,
    pub seed: u64,
    pub series: TimeSeries,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub profile: TaskProfile,
    pub seed: u64,
    pub nominal: Vec<NamedRun>,
    pub failures: Vec<NamedRun>,
}

impl Corpus {
    /// Failure classes in order of first appearance.
    pub fn classes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.failures {
            for l in r.series.labels() {
                if !out.contains(&l.class) {
                    out.push(l.class.clone());
                }
            }
        }
        out
    }

    /// Every run in nominal-then-failure order.
    pub fn runs(&self) -> impl Iterator<Item = &NamedRun> {
        self.nominal.iter().chain(&self.failures)
    }
}

/// Generates a corpus in memory.
pub fn gen_dataset(profile: &TaskProfile, n_nominal: usize, mix: &[FailureMix], seed: u64) -> Result<Corpus> {
    if n_nominal == 0 {
        return Err(Error::input("a corpus needs at least one nominal run"));
    }
    if mix.iter().any(|m| m.count == 0) {
        return Err(Error::input("every failure class needs a count of at least one"));
    }
    let mut nominal = Vec::with_capacity(n_nominal);
    for i in 0..n_nominal {
        let s = run_seed(seed, 0, i as u64);
        nominal.push(NamedRun {
            name: format!("nominal_{i:03}"),
            seed: s,
            series: gen_nominal(profile, s)?,
        });
    }
    let mut failures = Vec::new();
    let mut k = 0u64;
    for entry in mix {
        for _ in 0..entry.count {
            let s = run_seed(seed, 1, k);
            failures.push(NamedRun {
                name: format!("failure_{k:03}_{}", entry.spec.class),
                seed: s,
                series: gen_failure(profile, &entry.spec, s)?,
            });
            k += 1;
        }
    }
    Ok(Corpus {
        profile: profile.clone(),
        seed,
        nominal,
        failures,
    })
}

/// Generates a corpus and writes its runs and manifest into `dir`.
pub fn gen_corpus(
    profile: &TaskProfile,
    n_nominal: usize,
    mix: &[FailureMix],
    seed: u64,
    dir: &std::path::Path,
) -> Result<crate::io::Manifest> {
    let corpus = gen_dataset(profile, n_nominal, mix, seed)?;
    crate::io::write_corpus(&corpus, dir)
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Free => "free",
            Phase::Approach => "approach",
            Phase::Contact => "contact",
            Phase::Retreat => "retreat",
        })
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Phase::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| Error::input(format!("unknown phase '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> TaskProfile {
        TaskProfile::cabling_like().scaled_duration(0.1)
    }

    #[test]
    fn nominal_is_deterministic() {
        let p = short();
        assert_eq!(gen_nominal(&p, 3).unwrap(), gen_nominal(&p, 3).unwrap());
        assert_ne!(gen_nominal(&p, 3).unwrap(), gen_nominal(&p, 4).unwrap());
    }

    #[test]
    fn forces_follow_the_phase_script() {
        let p = TaskProfile::cabling_like();
        let s = gen_nominal(&p, 11).unwrap();
        let parts = draw_run(&p, 11).unwrap();
        let [_, a0, c0, r0, _] = parts.plan.bounds;
        let fz = |i: usize| s.row(i)[FZ];
        let free_max = (0..a0).map(|i| fz(i).abs()).fold(0.0, f64::max);
        assert!(free_max < 1.0, "free-motion force {free_max}");
        let mid = (c0 + r0) / 2;
        let plateau: f64 = (mid - 50..mid + 50).map(fz).sum::<f64>() / 100.0;
        assert!((plateau + p.contact_force).abs() < 0.2 * p.contact_force, "plateau {plateau}");
    }

    #[test]
    fn phases_tile_the_run() {
        let p = short();
        let parts = draw_run(&p, 5).unwrap();
        let b = parts.plan.bounds;
        assert_eq!(b[0], 0);
        assert_eq!(b[4], parts.plan.len);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn failure_matches_twin_before_onset() {
        let p = short();
        for spec in default_failure_mix("cabling_like").unwrap().into_iter().map(|m| m.spec) {
            let f = gen_failure(&p, &spec, 9).unwrap();
            let n = gen_nominal(&p, 9).unwrap();
            let l = &f.labels()[0];
            assert_eq!(f.len(), n.len());
            for i in 0..l.onset {
                assert_eq!(f.row(i), n.row(i), "{} differs at {i} before onset {}", spec.class, l.onset);
            }
            assert_ne!(f.row(l.onset), n.row(l.onset), "{} onset sample is unperturbed", spec.class);
        }
    }

    #[test]
    fn onset_outside_run_is_rejected() {
        let mut spec = FailureSpec::disturbance_spike(10.0, 0.1);
        spec.onset = Onset::Index(1_000_000);
        assert!(matches!(gen_failure(&short(), &spec, 1), Err(Error::Input(_))));
        spec.onset = Onset::Phase {
            phase: Phase::Contact,
            lo: 0.5,
            hi: 1.5,
        };
        assert!(gen_failure(&short(), &spec, 1).is_err());
    }

    #[test]
    fn values_are_quantized() {
        let s = gen_nominal(&short(), 2).unwrap();
        for &v in s.data().iter().take(2000) {
            assert_eq!(quantize(v), v);
        }
    }

    #[test]
    fn unknown_profile() {
        assert!(TaskProfile::by_name("welding").is_err());
        for n in TaskProfile::NAMES {
            TaskProfile::by_name(n).unwrap().validate().unwrap();
        }
    }
}
