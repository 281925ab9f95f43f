//! Scenario files: TOML, every field optional except the trajectory kind.
//! Angles are radians, lengths millimetres, forces millinewtons.

use std::fmt;
use std::path::Path;

use jamsnake_core::environment::{BendClass, CheckpointLayout, TrajectoryKind, TrajectoryOptions};
use jamsnake_core::ftl::{Sampling, Timing};
use jamsnake_core::geometry::RobotConfig;
use jamsnake_core::statics::StiffnessModel;
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Controller {
    Ftl,
    Tdcr,
}

impl Controller {
    pub fn as_str(&self) -> &'static str {
        match self {
            Controller::Ftl => "ftl",
            Controller::Tdcr => "tdcr",
        }
    }
}

impl fmt::Display for Controller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Extension strategy selection: `ES1`..`ES4` by number, or every strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategySelection {
    One(usize),
    All,
}

impl StrategySelection {
    pub fn indices(&self, n_fjms: usize) -> Vec<usize> {
        match self {
            StrategySelection::One(i) => vec![*i],
            StrategySelection::All => (1..=n_fjms).collect(),
        }
    }
}

impl Serialize for StrategySelection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            StrategySelection::One(i) => s.serialize_u64(*i as u64),
            StrategySelection::All => s.serialize_str("all"),
        }
    }
}

impl<'de> Deserialize<'de> for StrategySelection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Index(i64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Index(i) if i >= 1 => Ok(StrategySelection::One(i as usize)),
            Raw::Word(w) if w.eq_ignore_ascii_case("all") => Ok(StrategySelection::All),
            Raw::Index(i) => Err(serde::de::Error::custom(format!(
                "strategy {i} is not valid, expected 1..n_fjms or \"all\""
            ))),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "strategy \"{w}\" is not valid, expected 1..n_fjms or \"all\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Events,
    Forces,
    Sweep,
    Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    #[serde(default = "default_bend_class")]
    pub bend_class: BendClass,
    #[serde(default = "defaults::section_joints")]
    pub section_joints: usize,
    #[serde(default = "defaults::lead_in")]
    pub lead_in: usize,
    #[serde(default = "defaults::spiral_azimuth_step")]
    pub spiral_azimuth_step: f64,
    #[serde(default)]
    pub bends: Vec<[f64; 2]>,
}

impl TrajectorySpec {
    pub fn options(&self) -> TrajectoryOptions {
        TrajectoryOptions {
            section_joints: self.section_joints,
            lead_in: self.lead_in,
            spiral_azimuth_step: self.spiral_azimuth_step,
            bends: self.bends.clone(),
        }
    }
}

fn default_bend_class() -> BendClass {
    BendClass::Gentle
}

mod defaults {
    use jamsnake_core::environment::TrajectoryOptions;

    pub fn section_joints() -> usize {
        TrajectoryOptions::default().section_joints
    }

    pub fn lead_in() -> usize {
        TrajectoryOptions::default().lead_in
    }

    pub fn spiral_azimuth_step() -> f64 {
        TrajectoryOptions::default().spiral_azimuth_step
    }
}

/// Explicit camera plane for sweep images; the trajectory's dominant plane otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionSpec {
    pub u: [f64; 3],
    pub v: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    /// Base feed per cycle, mm; a positive multiple of the segment length.
    pub advance: f64,
    /// How far past the bend limit a steering target may lie before the run
    /// fails instead of clamping, rad.
    pub steer_slack: f64,
    /// Standard deviation of Gaussian noise added to each steering command, rad.
    pub perturbation: f64,
    /// Cycles in the sweep-error window, centred on the bent vertices.
    pub sweep_cycles: usize,
    /// mm per cell
    pub grid_resolution: f64,
    /// Phase values below this in every run are reported as no-touch, mN.
    pub touch_threshold: f64,
    /// Uniform load per segment, mN.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection: Option<ProjectionSpec>,
    pub timing: Timing,
    pub sampling: Sampling,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            advance: 15.0,
            steer_slack: 5f64.to_radians(),
            perturbation: 0.0,
            sweep_cycles: 4,
            grid_resolution: 0.1,
            touch_threshold: 1.0,
            load: None,
            projection: None,
            timing: Timing::default(),
            sampling: Sampling::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_controller")]
    pub controller: Controller,
    #[serde(default = "default_strategy")]
    pub strategy: StrategySelection,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Output>,
    #[serde(default)]
    pub robot: RobotConfig,
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub stiffness: StiffnessModel,
    #[serde(default)]
    pub checkpoints: CheckpointLayout,
    #[serde(default)]
    pub simulation: SimulationSpec,
}

fn default_controller() -> Controller {
    Controller::Ftl
}

fn default_strategy() -> StrategySelection {
    StrategySelection::One(1)
}

fn default_runs() -> usize {
    3
}

fn default_outputs() -> Vec<Output> {
    vec![Output::Events, Output::Forces, Output::Sweep, Output::Summary]
}

impl Scenario {
    /// Defaults everywhere, on the given trajectory.
    pub fn new(kind: TrajectoryKind, bend_class: BendClass) -> Self {
        let mut s: Scenario = toml::from_str(&format!(
            "[trajectory]\nkind = \"{}\"\nbend_class = \"{}\"\n",
            kind.as_str(),
            bend_class.as_str()
        ))
        .expect("built-in scenario parses");
        s.name = default_name(&s);
        s
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let mut s: Scenario = toml::from_str(text).map_err(|e| SimError::Validation(e.to_string()))?;
        if s.name.is_empty() {
            s.name = default_name(&s);
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            SimError::Validation(m) => SimError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |m: String| Err(SimError::Validation(m));
        self.robot.validate()?;
        self.stiffness.validate()?;
        if self.runs == 0 {
            return fail("runs must be at least 1".into());
        }
        if let StrategySelection::One(i) = self.strategy {
            if i == 0 || i > self.robot.n_fjms {
                return fail(format!("strategy {i} out of range 1..={}", self.robot.n_fjms));
            }
        }
        if self.name.is_empty()
            || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return fail(format!(
                "name {:?} must be non-empty and use only letters, digits, '-' and '_'",
                self.name
            ));
        }
        let sim = &self.simulation;
        let k = sim.advance / self.robot.seg_length;
        if !(sim.advance > 0.0) || (k - k.round()).abs() > 1e-9 {
            return fail(format!(
                "simulation.advance must be a positive multiple of seg_length ({}), got {}",
                self.robot.seg_length, sim.advance
            ));
        }
        if !(sim.steer_slack >= 0.0) {
            return fail("simulation.steer_slack must be >= 0".into());
        }
        if !(sim.perturbation >= 0.0 && sim.perturbation.is_finite()) {
            return fail("simulation.perturbation must be a finite standard deviation >= 0".into());
        }
        if sim.sweep_cycles == 0 {
            return fail("simulation.sweep_cycles must be at least 1".into());
        }
        if !(sim.grid_resolution > 0.0) {
            return fail("simulation.grid_resolution must be positive".into());
        }
        if !(sim.touch_threshold >= 0.0) {
            return fail("simulation.touch_threshold must be >= 0".into());
        }
        let t = &sim.timing;
        if [t.jam, t.unjam, t.propagate, t.steer, t.extend].iter().any(|d| !(*d > 0.0)) {
            return fail("every simulation.timing duration must be positive".into());
        }
        if sim.sampling.propagate == 0 || sim.sampling.steer == 0 {
            return fail("simulation.sampling counts must be at least 1".into());
        }
        let f = &self.checkpoints.fractions;
        if !f.iter().all(|x| (0.0..=1.0).contains(x)) || !(f[0] < f[1] && f[1] < f[2]) {
            return fail(format!("checkpoints.fractions must increase within [0, 1], got {f:?}"));
        }
        // trajectory and ring geometry
        crate::run::build_environment(self)?;
        Ok(())
    }

    /// Strategy numbers this scenario runs; the tendon-only controller has none.
    pub fn strategies(&self) -> Vec<usize> {
        match self.controller {
            Controller::Ftl => self.strategy.indices(self.robot.n_fjms),
            Controller::Tdcr => vec![0],
        }
    }

    /// Effective configuration, defaults included; loading it reproduces the run.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn wants(&self, output: Output) -> bool {
        self.outputs.contains(&output)
    }
}

fn default_name(s: &Scenario) -> String {
    format!("{}-{}", s.trajectory.kind.as_str(), s.trajectory.bend_class.as_str())
}

/// Strategy label used in reports.
pub fn strategy_label(controller: Controller, index: usize) -> String {
    match controller {
        Controller::Ftl => format!("ES{index}"),
        Controller::Tdcr => "-".into(),
    }
}

pub const SCHEMA: &str = r#"# Scenario file schema (TOML). Every key except trajectory.kind is optional.
# Angles in radians, lengths in mm, forces in mN, stiffness in mN·mm/rad².

name = "c-gentle"            # [A-Za-z0-9_-]+, defaults to "<kind>-<bend_class>"
controller = "ftl"           # "ftl" | "tdcr"
strategy = 1                 # 1..n_fjms or "all" (ftl only)
runs = 3                     # >= 1
seed = 0                     # feeds the optional steering perturbation
outputs = ["events", "forces", "sweep", "summary"]

[robot]
n_segments = 12
seg_length = 15.0
seg_diameter = 15.0
joint_sphere_radius = 7.5
tendon_pitch_radius = 6.0
fjm_pitch_radius = 4.5
# alpha, beta: channel outlet angles; default asin(pitch_radius / joint_sphere_radius)
gentle_limit = 0.17453292519943295
sharp_limit = 0.2617993877991494
n_tendons = 4
n_fjms = 4

[trajectory]
kind = "C"                   # "C" | "S" | "spiral" | "straight" | "custom"
bend_class = "gentle"        # "gentle" | "sharp"
section_joints = 4
lead_in = 2
spiral_azimuth_step = 0.5235987755982988
bends = []                   # custom only: [[bend, plane], ...] for vertices 1..n_segments-1

[stiffness]
k_soft = 100000.0
jam_ratio = 34.0             # inf pins jammed joints
k_contact = 100.0
tracking_error = 0.03
sharp_friction = 1.5

[checkpoints]
fractions = [0.1, 0.5, 0.9]
inner_diameter = 20.0

[simulation]
advance = 15.0               # multiple of seg_length
steer_slack = 0.08726646259971647
perturbation = 0.0
sweep_cycles = 4
grid_resolution = 0.1
touch_threshold = 1.0
# load = [0.0, 0.0, 0.0]
# projection = { u = [0.0, 0.0, 1.0], v = [1.0, 0.0, 0.0] }

[simulation.timing]
jam = 2.0
unjam = 2.0
propagate = 3.0
steer = 1.0
extend = 3.0

[simulation.sampling]
propagate = 10
steer = 5
"#;
