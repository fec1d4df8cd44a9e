//! Flat `key = value` scenario files with dotted section names.
//!
//! `#` starts a comment. Values are numbers, `true`/`false`, bare or
//! double-quoted strings, or comma-separated number lists. Every key has a
//! default, so an empty document is a complete configuration; unknown keys
//! are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::face::{TrajectoryKind, DEFAULT_REAL_WIDTH, NUM_LANDMARKS};
use crate::geometry::{look_at_pose, rot_x, rot_y, rot_z, Pose, Vec3};
use crate::kinematics::{DhParams, JointLimits, JointVector, ToolOffset};
use crate::mapping::MaskKind;
use crate::optics::CameraIntrinsics;
use crate::servo::{PipelineConfig, PredictorConfig, ServoGains};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid {field}: must be {constraint}")]
    Validation { field: String, constraint: String },
}

impl ConfigError {
    fn invalid(field: &str, constraint: &str) -> Self {
        Self::Validation {
            field: field.to_string(),
            constraint: constraint.to_string(),
        }
    }
}

/// Head placement and motion.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    /// Radians for yaw/pitch/composite, meters for linear translation.
    pub amplitude: f64,
    pub frequency: f64,
    /// World position of the head origin at rest.
    pub position: Vec3,
    /// World direction the face looks at rest (head +Z).
    pub facing: Vec3,
    /// Rest-pose offsets about head Y, X and Z, radians.
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub direction: Vec3,
    pub pivot_depth: f64,
    pub translation_amplitude: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::Static,
            amplitude: 0.0,
            frequency: 0.0,
            position: Vec3::new(0.557, 0.2, 0.213),
            facing: Vec3::new(-1.0, 0.0, 0.0),
            yaw: 0.0,
            pitch: 0.0,
            roll: 0.0,
            direction: Vec3::new(0.0, 1.0, 0.0),
            pivot_depth: 0.1,
            translation_amplitude: 0.0,
        }
    }
}

impl TrajectorySpec {
    /// Rest pose: head +Z along `facing`, head +Y as close to world +Z as
    /// possible, then the yaw/pitch/roll offsets.
    pub fn base_pose(&self) -> Pose {
        // look_at_pose puts +Z along the aim and +Y along the hint.
        let frame = look_at_pose(&self.position, &(self.position + self.facing), &Vec3::z())
            .expect("facing validated against world up");
        let r = frame.rotation * rot_y(self.yaw) * rot_x(self.pitch) * rot_z(self.roll);
        Pose::new(r, self.position)
    }
}

/// Camera and projector mounts on the flange as translations and rotation
/// vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolSpec {
    pub projector_offset: Vec3,
    pub projector_rotation: Vec3,
    pub camera_offset: Vec3,
    pub camera_rotation: Vec3,
}

impl Default for ToolSpec {
    fn default() -> Self {
        let d = ToolOffset::default();
        Self {
            projector_offset: d.projector_mount.translation,
            projector_rotation: Vec3::zeros(),
            camera_offset: d.camera_mount.translation,
            camera_rotation: Vec3::zeros(),
        }
    }
}

impl ToolSpec {
    pub fn offsets(&self) -> ToolOffset {
        ToolOffset {
            projector_mount: Pose::from_rotation_vector(
                self.projector_rotation,
                self.projector_offset,
            ),
            camera_mount: Pose::from_rotation_vector(self.camera_rotation, self.camera_offset),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskSpec {
    pub kind: MaskKind,
    pub texture: Option<PathBuf>,
    pub anchors: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputOptions {
    pub dump_frames: bool,
    /// Dump every n-th frame.
    pub frame_stride: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub duration: f64,
    pub noise_sigma: f64,
    pub predictor_on: bool,
    /// World direction the projector image +y axis should follow.
    pub up_hint: Vec3,
    pub camera: CameraIntrinsics,
    pub projector: CameraIntrinsics,
    pub dh: DhParams,
    pub home: JointVector,
    pub limits: JointLimits,
    pub tool: ToolSpec,
    pub face_model: Option<PathBuf>,
    pub real_width: f64,
    pub width_pair: (usize, usize),
    pub trajectory: TrajectorySpec,
    pub gains: ServoGains,
    pub latency: PipelineConfig,
    pub kalman: PredictorConfig,
    pub mask: MaskSpec,
    pub output: OutputOptions,
}

/// Home posture: projector at (0.14, 0.2, 0.2) m looking along world +X, away
/// from the base, with its image +y pointing down.
pub const DEFAULT_HOME: [f64; 6] = [
    -2.2807,
    -1.4235,
    1.9522,
    -0.5287,
    2.4317,
    std::f64::consts::PI,
];

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            duration: 10.0,
            noise_sigma: 0.5,
            predictor_on: true,
            up_hint: Vec3::new(0.0, 0.0, -1.0),
            camera: CameraIntrinsics::default_camera(),
            projector: CameraIntrinsics::default_projector(),
            dh: DhParams::ur3(),
            home: JointVector(DEFAULT_HOME),
            limits: JointLimits::default(),
            tool: ToolSpec::default(),
            face_model: None,
            real_width: DEFAULT_REAL_WIDTH,
            width_pair: (0, 16),
            trajectory: TrajectorySpec::default(),
            gains: ServoGains::default(),
            latency: PipelineConfig::default(),
            kalman: PredictorConfig::default(),
            mask: MaskSpec {
                kind: MaskKind::Glasses,
                texture: None,
                anchors: None,
            },
            output: OutputOptions {
                dump_frames: false,
                frame_stride: 1,
            },
        }
    }
}

fn parse_value_list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{}` is not a number", s.trim()))
        })
        .collect()
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
}

fn num(v: &str) -> Result<f64, String> {
    v.parse::<f64>()
        .map_err(|_| format!("`{v}` is not a number"))
}

fn int<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse::<T>()
        .map_err(|_| format!("`{v}` is not a non-negative integer"))
}

fn boolean(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("`{v}` is not true/false")),
    }
}

fn array<const N: usize>(v: &str) -> Result<[f64; N], String> {
    let vals = parse_value_list(v)?;
    vals.try_into().map_err(|vals: Vec<f64>| {
        format!("expected {N} comma-separated numbers, got {}", vals.len())
    })
}

fn vec3(v: &str) -> Result<Vec3, String> {
    array::<3>(v).map(|a| Vec3::new(a[0], a[1], a[2]))
}

fn set_intrinsics(k: &mut CameraIntrinsics, field: &str, v: &str) -> Result<bool, String> {
    match field {
        "fx" => k.fx = num(v)?,
        "fy" => k.fy = num(v)?,
        "cx" => k.cx = num(v)?,
        "cy" => k.cy = num(v)?,
        "width" => k.width = int(v)?,
        "height" => k.height = int(v)?,
        _ => return Ok(false),
    }
    Ok(true)
}

impl ScenarioConfig {
    fn set(&mut self, key: &str, raw: &str, base_dir: &Path) -> Result<bool, String> {
        let v = unquote(raw);
        let path = |v: &str| Some(base_dir.join(v));
        match key {
            "seed" => self.seed = int(v)?,
            "duration" => self.duration = num(v)?,
            "noise_sigma" => self.noise_sigma = num(v)?,
            "predictor" => self.predictor_on = boolean(v)?,
            "up_hint" => self.up_hint = vec3(v)?,
            "standoff" => self.gains.standoff = num(v)?,
            "position_gain" => self.gains.position_gain = num(v)?,
            "orientation_gain" => self.gains.orientation_gain = num(v)?,
            "control_period" => self.gains.control_period = num(v)?,
            "arm.a" => self.dh.a = array(v)?,
            "arm.d" => self.dh.d = array(v)?,
            "arm.alpha" => self.dh.alpha = array(v)?,
            "arm.theta_offset" => self.dh.theta_offset = array(v)?,
            "arm.home" => self.home = JointVector(array(v)?),
            "limits.min" => self.limits.min = array(v)?,
            "limits.max" => self.limits.max = array(v)?,
            "limits.max_speed" => self.limits.max_speed = array(v)?,
            "tool.projector_offset" => self.tool.projector_offset = vec3(v)?,
            "tool.projector_rotation" => self.tool.projector_rotation = vec3(v)?,
            "tool.camera_offset" => self.tool.camera_offset = vec3(v)?,
            "tool.camera_rotation" => self.tool.camera_rotation = vec3(v)?,
            "face.model" => self.face_model = path(v),
            "face.real_width" => self.real_width = num(v)?,
            "face.width_pair" => {
                let p = array::<2>(v)?;
                if p.iter().any(|x| x.fract() != 0.0 || *x < 0.0) {
                    return Err("width pair must be two landmark indices".into());
                }
                self.width_pair = (p[0] as usize, p[1] as usize);
            }
            "trajectory.kind" => {
                self.trajectory.kind = TrajectoryKind::parse(v).ok_or_else(|| {
                    format!("unknown trajectory kind `{v}` (static, sinusoidal_yaw, sinusoidal_pitch, linear_translation, composite)")
                })?
            }
            "trajectory.amplitude" => self.trajectory.amplitude = num(v)?,
            "trajectory.frequency" => self.trajectory.frequency = num(v)?,
            "trajectory.position" => self.trajectory.position = vec3(v)?,
            "trajectory.facing" => self.trajectory.facing = vec3(v)?,
            "trajectory.yaw" => self.trajectory.yaw = num(v)?,
            "trajectory.pitch" => self.trajectory.pitch = num(v)?,
            "trajectory.roll" => self.trajectory.roll = num(v)?,
            "trajectory.direction" => self.trajectory.direction = vec3(v)?,
            "trajectory.pivot_depth" => self.trajectory.pivot_depth = num(v)?,
            "trajectory.translation_amplitude" => self.trajectory.translation_amplitude = num(v)?,
            "latency.capture" => self.latency.capture_latency = num(v)?,
            "latency.detect" => self.latency.detect_latency = num(v)?,
            "latency.plan" => self.latency.plan_latency = num(v)?,
            "latency.project" => self.latency.project_latency = num(v)?,
            "kalman.position_process_noise" => self.kalman.position_process_noise = num(v)?,
            "kalman.orientation_process_noise" => self.kalman.orientation_process_noise = num(v)?,
            "kalman.position_measurement_noise" => {
                self.kalman.position_measurement_noise = num(v)?
            }
            "kalman.orientation_measurement_noise" => {
                self.kalman.orientation_measurement_noise = num(v)?
            }
            "mask.kind" => {
                self.mask.kind = MaskKind::parse(v).ok_or_else(|| {
                    format!("unknown mask kind `{v}` (beard, glasses, logo, makeup, custom)")
                })?
            }
            "mask.texture" => self.mask.texture = path(v),
            "mask.anchors" => self.mask.anchors = path(v),
            "output.dump_frames" => self.output.dump_frames = boolean(v)?,
            "output.frame_stride" => self.output.frame_stride = int(v)?,
            _ => {
                if let Some(field) = key.strip_prefix("camera.") {
                    return set_intrinsics(&mut self.camera, field, v);
                }
                if let Some(field) = key.strip_prefix("projector.") {
                    return set_intrinsics(&mut self.projector, field, v);
                }
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Checks every numeric constraint and that referenced files exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = ConfigError::invalid;
        let finite_pos = |v: f64| v > 0.0 && v.is_finite();
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(bad("duration", ">= 0"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(bad("noise_sigma", ">= 0"));
        }
        if !(self.up_hint.norm() > 0.0) {
            return Err(bad("up_hint", "a nonzero vector"));
        }
        self.gains.validate().map_err(
            |crate::servo::ServoError::Invalid { field, constraint }| bad(field, constraint),
        )?;
        self.latency.validate().map_err(
            |crate::servo::ServoError::Invalid { field, constraint }| {
                bad(
                    &format!("latency.{}", field.trim_end_matches("_latency")),
                    constraint,
                )
            },
        )?;
        for (k, name) in [(&self.camera, "camera"), (&self.projector, "projector")] {
            k.validate()
                .map_err(|e| bad(name, &e.to_string().replace("invalid intrinsics: ", "")))?;
        }
        let t = &self.tool;
        let tool_vecs = [
            t.projector_offset,
            t.projector_rotation,
            t.camera_offset,
            t.camera_rotation,
        ];
        if tool_vecs.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(bad("tool", "finite offsets and rotations"));
        }
        if !self.dh.is_finite() {
            return Err(bad("arm", "finite DH parameters"));
        }
        self.limits.validate().map_err(|e| bad("limits", &e))?;
        if !self.limits.contains(&self.home) {
            return Err(bad("arm.home", "within joint limits"));
        }
        if !finite_pos(self.real_width) {
            return Err(bad("face.real_width", "> 0"));
        }
        let (a, b) = self.width_pair;
        if a == b || a >= NUM_LANDMARKS || b >= NUM_LANDMARKS {
            return Err(bad("face.width_pair", "two distinct indices below 68"));
        }
        let t = &self.trajectory;
        if !(t.amplitude >= 0.0 && t.amplitude.is_finite()) {
            return Err(bad("trajectory.amplitude", ">= 0"));
        }
        if !(t.frequency >= 0.0 && t.frequency.is_finite()) {
            return Err(bad("trajectory.frequency", ">= 0"));
        }
        if !(t.pivot_depth >= 0.0 && t.pivot_depth.is_finite()) {
            return Err(bad("trajectory.pivot_depth", ">= 0"));
        }
        if !(t.translation_amplitude >= 0.0 && t.translation_amplitude.is_finite()) {
            return Err(bad("trajectory.translation_amplitude", ">= 0"));
        }
        if t.direction.norm() == 0.0 && t.kind == TrajectoryKind::LinearTranslation {
            return Err(bad("trajectory.direction", "a nonzero vector"));
        }
        if look_at_pose(&Vec3::zeros(), &t.facing, &Vec3::z()).is_err() {
            return Err(bad("trajectory.facing", "nonzero and not vertical"));
        }
        let k = &self.kalman;
        for (v, name) in [
            (k.position_process_noise, "kalman.position_process_noise"),
            (
                k.orientation_process_noise,
                "kalman.orientation_process_noise",
            ),
        ] {
            if !finite_pos(v) {
                return Err(bad(name, "> 0"));
            }
        }
        for (v, name) in [
            (
                k.position_measurement_noise,
                "kalman.position_measurement_noise",
            ),
            (
                k.orientation_measurement_noise,
                "kalman.orientation_measurement_noise",
            ),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad(name, ">= 0"));
            }
        }
        if self.output.frame_stride == 0 {
            return Err(bad("output.frame_stride", ">= 1"));
        }
        if let Some(p) = &self.face_model {
            if !p.is_file() {
                return Err(bad("face.model", "an existing file"));
            }
        }
        if self.mask.kind == MaskKind::Custom {
            for (p, name) in [
                (&self.mask.texture, "mask.texture"),
                (&self.mask.anchors, "mask.anchors"),
            ] {
                match p {
                    Some(p) if p.is_file() => {}
                    _ => return Err(bad(name, "an existing file for a custom mask")),
                }
            }
        }
        Ok(())
    }

    /// Base pose of the configured trajectory.
    pub fn head_base_pose(&self) -> Pose {
        self.trajectory.base_pose()
    }

    /// Effective settings as ordered key/value text pairs (the summary file
    /// records these).
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let l = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let v3 = |v: &Vec3| l(v.as_slice());
        let p = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("seed", self.seed.to_string());
        put("duration", format!("{}", self.duration));
        put("noise_sigma", format!("{}", self.noise_sigma));
        put("predictor", self.predictor_on.to_string());
        put("up_hint", v3(&self.up_hint));
        put("standoff", format!("{}", self.gains.standoff));
        put("position_gain", format!("{}", self.gains.position_gain));
        put(
            "orientation_gain",
            format!("{}", self.gains.orientation_gain),
        );
        put("control_period", format!("{}", self.gains.control_period));
        for (name, k) in [("camera", &self.camera), ("projector", &self.projector)] {
            put(&format!("{name}.fx"), format!("{}", k.fx));
            put(&format!("{name}.fy"), format!("{}", k.fy));
            put(&format!("{name}.cx"), format!("{}", k.cx));
            put(&format!("{name}.cy"), format!("{}", k.cy));
            put(&format!("{name}.width"), k.width.to_string());
            put(&format!("{name}.height"), k.height.to_string());
        }
        put("arm.a", l(&self.dh.a));
        put("arm.d", l(&self.dh.d));
        put("arm.alpha", l(&self.dh.alpha));
        put("arm.theta_offset", l(&self.dh.theta_offset));
        put("arm.home", l(&self.home.0));
        put("limits.min", l(&self.limits.min));
        put("limits.max", l(&self.limits.max));
        put("limits.max_speed", l(&self.limits.max_speed));
        put("tool.projector_offset", v3(&self.tool.projector_offset));
        put("tool.projector_rotation", v3(&self.tool.projector_rotation));
        put("tool.camera_offset", v3(&self.tool.camera_offset));
        put("tool.camera_rotation", v3(&self.tool.camera_rotation));
        put("face.model", p(&self.face_model));
        put("face.real_width", format!("{}", self.real_width));
        put(
            "face.width_pair",
            format!("{}, {}", self.width_pair.0, self.width_pair.1),
        );
        let t = &self.trajectory;
        put("trajectory.kind", t.kind.name().to_string());
        put("trajectory.amplitude", format!("{}", t.amplitude));
        put("trajectory.frequency", format!("{}", t.frequency));
        put("trajectory.position", v3(&t.position));
        put("trajectory.facing", v3(&t.facing));
        put("trajectory.yaw", format!("{}", t.yaw));
        put("trajectory.pitch", format!("{}", t.pitch));
        put("trajectory.roll", format!("{}", t.roll));
        put("trajectory.direction", v3(&t.direction));
        put("trajectory.pivot_depth", format!("{}", t.pivot_depth));
        put(
            "trajectory.translation_amplitude",
            format!("{}", t.translation_amplitude),
        );
        put(
            "latency.capture",
            format!("{}", self.latency.capture_latency),
        );
        put("latency.detect", format!("{}", self.latency.detect_latency));
        put("latency.plan", format!("{}", self.latency.plan_latency));
        put(
            "latency.project",
            format!("{}", self.latency.project_latency),
        );
        let k = &self.kalman;
        put(
            "kalman.position_process_noise",
            format!("{}", k.position_process_noise),
        );
        put(
            "kalman.orientation_process_noise",
            format!("{}", k.orientation_process_noise),
        );
        put(
            "kalman.position_measurement_noise",
            format!("{}", k.position_measurement_noise),
        );
        put(
            "kalman.orientation_measurement_noise",
            format!("{}", k.orientation_measurement_noise),
        );
        put("mask.kind", self.mask.kind.name().to_string());
        put("mask.texture", p(&self.mask.texture));
        put("mask.anchors", p(&self.mask.anchors));
        put("output.dump_frames", self.output.dump_frames.to_string());
        put("output.frame_stride", self.output.frame_stride.to_string());
        m
    }

    /// Config text that loads back to this configuration. Empty path values
    /// are omitted.
    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Parses and validates a scenario. Relative paths resolve against the
/// current directory.
pub fn load_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    load_scenario_in(text, Path::new(""))
}

/// Reads a scenario file; relative paths inside it resolve against the
/// file's directory.
pub fn load_scenario_file(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse {
        line: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    load_scenario_in(&text, path.parent().unwrap_or(Path::new("")))
}

pub fn load_scenario_in(text: &str, base_dir: &Path) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    let mut seen = std::collections::HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| ConfigError::Parse {
            line: line_no,
            message,
        };
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected `key = value`".into()))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(err("expected `key = value`".into()));
        }
        if !seen.insert(key.to_string()) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        if !cfg.set(key, value, base_dir).map_err(err)? {
            return Err(err(format!("unknown key `{key}`")));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Drops a `#` comment that is not inside double quotes.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}
