//! Layered TOML configuration.
//!
//! Built-in defaults, then an optional sensor preset (`preset = "hdl32"`),
//! then the user's file, then command-line overrides. Sections: `[sensor]`,
//! `[extractor]`, `[map]`, `[mcl]`, `[simulator]`. Angles are in degrees.
//!
//! ```toml
//! preset = "hdl64"
//!
//! [extractor]
//! range_gap = 0.4
//!
//! [mcl]
//! particles = 2000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::extractor::ExtractorParams;
use crate::geometry::SensorConfig;
use crate::mapping::MapParams;
use crate::mcl::{MclParams, ObservationModelParams};
use crate::motion::MotionNoise;
use crate::sim::{scenarios, TrajectorySpec, WorldSpec};

const PRESETS: &[(&str, &str)] = &[
    ("os1-64", include_str!("../presets/os1-64.toml")),
    ("hdl64", include_str!("../presets/hdl64.toml")),
    ("hdl32", include_str!("../presets/hdl32.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// 240 m ring road with 20 poles, walls and pedestrians.
    Loop,
    /// Straight drive past one pole.
    SinglePole,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatorConfig {
    pub scenario: Scenario,
    pub world_seed: u64,
    /// Distance between scans along the trajectory, meters.
    pub spacing: f64,
    pub speed: f64,
    pub mount_height: f64,
    pub range_noise: f64,
    pub odometry_noise: MotionNoise,
    /// Replace the scenario world / trajectory with TOML specs.
    pub world_file: Option<PathBuf>,
    pub trajectory_file: Option<PathBuf>,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Loop,
            world_seed: 7,
            spacing: 0.5,
            speed: 10.0,
            mount_height: scenarios::MOUNT_HEIGHT,
            range_noise: 0.02,
            odometry_noise: MotionNoise::default(),
            world_file: None,
            trajectory_file: None,
        }
    }
}

impl SimulatorConfig {
    pub fn world(&self) -> Result<WorldSpec> {
        let world = match &self.world_file {
            Some(p) => load_toml::<WorldSpec>(p)?,
            None => match self.scenario {
                Scenario::Loop => scenarios::loop_world(self.world_seed),
                Scenario::SinglePole => scenarios::single_pole(),
            },
        };
        world.validate()?;
        Ok(world)
    }

    pub fn trajectory(&self) -> Result<TrajectorySpec> {
        let traj = match &self.trajectory_file {
            Some(p) => load_toml::<TrajectorySpec>(p)?,
            None => match self.scenario {
                Scenario::Loop => TrajectorySpec::circle_loop(
                    scenarios::LOOP_LENGTH,
                    self.spacing,
                    self.speed,
                    self.mount_height,
                ),
                Scenario::SinglePole => scenarios::single_pole_drive(),
            },
        };
        traj.validate()?;
        Ok(traj)
    }
}

/// Effective configuration of every stage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub sensor: SensorConfig,
    pub extractor: ExtractorParams,
    pub map: MapParams,
    pub mcl: MclParams,
    pub simulator: SimulatorConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SensorSection {
    width: usize,
    height: usize,
    fov_up_deg: f64,
    fov_down_deg: f64,
    min_range: f64,
    max_range: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MclSection {
    particles: usize,
    sigma_d: f64,
    max_match_dist: f64,
    no_match_penalty: f64,
    resample_threshold: f64,
    top_fraction: f64,
    init_radius: f64,
    init_yaw_deg: f64,
    alpha: [f64; 4],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulatorSection {
    scenario: Scenario,
    world_seed: u64,
    spacing: f64,
    speed: f64,
    mount_height: f64,
    range_noise: f64,
    odometry_alpha: [f64; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    world_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectory_file: Option<PathBuf>,
}

#[derive(Serialize)]
struct Document {
    sensor: SensorSection,
    extractor: ExtractorParams,
    map: MapParams,
    mcl: MclSection,
    simulator: SimulatorSection,
}

impl Config {
    fn to_document(&self) -> Document {
        let s = &self.sensor;
        let m = &self.mcl;
        let sim = &self.simulator;
        Document {
            sensor: SensorSection {
                width: s.width,
                height: s.height,
                fov_up_deg: s.fov_up.to_degrees(),
                fov_down_deg: s.fov_down.to_degrees(),
                min_range: s.min_range,
                max_range: s.max_range,
            },
            extractor: self.extractor,
            map: self.map,
            mcl: MclSection {
                particles: m.particles,
                sigma_d: m.observation.sigma_d,
                max_match_dist: m.observation.max_match_dist,
                no_match_penalty: m.observation.no_match_penalty,
                resample_threshold: m.resample_threshold,
                top_fraction: m.top_fraction,
                init_radius: m.init_radius,
                init_yaw_deg: m.init_yaw_halfwidth.to_degrees(),
                alpha: m.motion.alpha,
            },
            simulator: SimulatorSection {
                scenario: sim.scenario,
                world_seed: sim.world_seed,
                spacing: sim.spacing,
                speed: sim.speed,
                mount_height: sim.mount_height,
                range_noise: sim.range_noise,
                odometry_alpha: sim.odometry_noise.alpha,
                world_file: sim.world_file.clone(),
                trajectory_file: sim.trajectory_file.clone(),
            },
        }
    }

    fn from_document(d: Document) -> Self {
        Self {
            sensor: SensorConfig {
                width: d.sensor.width,
                height: d.sensor.height,
                fov_up: d.sensor.fov_up_deg.to_radians(),
                fov_down: d.sensor.fov_down_deg.to_radians(),
                min_range: d.sensor.min_range,
                max_range: d.sensor.max_range,
            },
            extractor: d.extractor,
            map: d.map,
            mcl: MclParams {
                particles: d.mcl.particles,
                observation: ObservationModelParams {
                    sigma_d: d.mcl.sigma_d,
                    max_match_dist: d.mcl.max_match_dist,
                    no_match_penalty: d.mcl.no_match_penalty,
                },
                motion: MotionNoise { alpha: d.mcl.alpha },
                resample_threshold: d.mcl.resample_threshold,
                top_fraction: d.mcl.top_fraction,
                init_radius: d.mcl.init_radius,
                init_yaw_halfwidth: d.mcl.init_yaw_deg.to_radians(),
            },
            simulator: SimulatorConfig {
                scenario: d.simulator.scenario,
                world_seed: d.simulator.world_seed,
                spacing: d.simulator.spacing,
                speed: d.simulator.speed,
                mount_height: d.simulator.mount_height,
                range_noise: d.simulator.range_noise,
                odometry_noise: MotionNoise {
                    alpha: d.simulator.odometry_alpha,
                },
                world_file: d.simulator.world_file,
                trajectory_file: d.simulator.trajectory_file,
            },
        }
    }

    fn to_table(&self) -> Table {
        Table::try_from(self.to_document()).expect("configuration serializes to a table")
    }

    /// Defaults overlaid with `text`; `origin` labels errors and anchors
    /// relative file paths.
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let mut user: Table = toml::from_str(text).map_err(|e| toml_error(text, origin, e))?;
        let mut merged = Config::default().to_table();
        if let Some(preset) = user.remove("preset") {
            let name = preset
                .as_str()
                .ok_or_else(|| Error::format(origin, 0, "preset must be a string"))?;
            let (_, body) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
                let known: Vec<_> = preset_names().collect();
                Error::InvalidConfig(format!("unknown preset {name:?}, expected one of {known:?}"))
            })?;
            merge(&mut merged, toml::from_str(body).expect("built-in presets parse"));
        }
        merge(&mut merged, user);
        if let Some(k) = merged.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(Error::format(origin, 0, format!("unknown section or key {k:?}")));
        }
        let doc = Document {
            sensor: take_section(&mut merged, "sensor", text, origin)?,
            extractor: take_section(&mut merged, "extractor", text, origin)?,
            map: take_section(&mut merged, "map", text, origin)?,
            mcl: take_section(&mut merged, "mcl", text, origin)?,
            simulator: take_section(&mut merged, "simulator", text, origin)?,
        };
        let mut cfg = Self::from_document(doc);
        let base = origin.parent().unwrap_or(Path::new(""));
        for f in [&mut cfg.simulator.world_file, &mut cfg.simulator.trajectory_file] {
            if let Some(p) = f.as_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    /// `path` if given, defaults otherwise.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn preset(name: &str) -> Result<Self> {
        Self::from_toml(&format!("preset = {name:?}"), Path::new("<preset>"))
    }

    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        self.extractor.validate()?;
        self.map.validate()?;
        self.mcl.validate()?;
        let s = &self.simulator;
        if !(s.spacing > 0.0 && s.speed > 0.0 && s.mount_height > 0.0 && s.range_noise >= 0.0) {
            return Err(Error::InvalidConfig(
                "simulator: spacing, speed and mount_height must be > 0, range_noise >= 0".into(),
            ));
        }
        if !s.odometry_noise.is_valid() {
            return Err(Error::InvalidConfig("simulator: odometry_alpha must be >= 0".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_document()).expect("configuration serializes")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Flattened `section.key value` pairs in a stable order.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (section, body) in self.to_table() {
            if let Value::Table(t) = body {
                for (k, v) in t {
                    out.push((format!("{section}.{k}"), v.to_string()));
                }
            }
        }
        out
    }

    /// Comment header echoing the effective configuration.
    pub fn header(&self) -> String {
        let mut out = format!("# config_hash {}\n", self.hash());
        for (k, v) in self.pairs() {
            out.push_str(&format!("# {k} {v}\n"));
        }
        out
    }
}

const SECTIONS: [&str; 5] = ["sensor", "extractor", "map", "mcl", "simulator"];

// Decoded one at a time so errors can name the section.
fn take_section<T: serde::de::DeserializeOwned>(t: &mut Table, name: &str, text: &str, origin: &Path) -> Result<T> {
    let body = t.remove(name).expect("defaults provide every section");
    body.try_into().map_err(|e: toml::de::Error| {
        let msg = e.message();
        Error::format(origin, section_line(text, name, msg), format!("[{name}] {msg}"))
    })
}

/// Best-effort line of a section error in the user's text: the line of the
/// first backquoted key in `msg` inside `[section]`, else the header line,
/// else 0 (the value came from defaults or a preset).
fn section_line(text: &str, section: &str, msg: &str) -> usize {
    let header = format!("[{section}]");
    let Some(start) = text.lines().position(|l| l.trim() == header) else {
        return 0;
    };
    let key = msg.split('`').nth(1);
    let body = text.lines().enumerate().skip(start + 1).take_while(|(_, l)| !l.trim_start().starts_with('['));
    for (i, l) in body {
        let k = l.split('=').next().unwrap_or("").trim();
        if key == Some(k) {
            return i + 1;
        }
    }
    start + 1
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn toml_error(text: &str, origin: &Path, e: toml::de::Error) -> Error {
    let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    Error::format(origin, line, e.message().to_string())
}

/// Reads a TOML file into any deserializable spec.
pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| toml_error(&text, path, e))
}
