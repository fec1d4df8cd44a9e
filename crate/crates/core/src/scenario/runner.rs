//! The closed-loop episode: head motion, detection, delayed delivery, pose
//! estimation, prediction, servoing, rendering and scoring, one tick at a time.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::face::{
    acquire_head_pose, estimate_head_pose, fit_face_plane, head_pose_at, load_face_model,
    observe_landmarks, DetectedLandmarks, FaceModel, HeadTrajectory, NUM_LANDMARKS,
};
use crate::geometry::Pose;
use crate::kinematics::{forward_kinematics, JointVector, ToolOffset};
use crate::mapping::{
    load_template, onface_error, Frame, FrameMapping, MaskKind, MaskTemplate, Renderer,
};
use crate::servo::{
    compute_target_pose, control_step, pipeline_tick, predictor_step, PredictorState, SimClock,
};

use super::{MetricsLog, MetricsRow, ScenarioConfig, ScenarioError};

/// Consecutive ticks without a usable detection before the arm freezes and
/// the tracker is reset.
pub const LOST_GRACE_TICKS: u32 = 10;

/// A camera frame in flight through the sensing pipeline.
#[derive(Debug, Clone)]
struct Capture {
    det: DetectedLandmarks,
    camera_pose: Pose,
    true_distance: f64,
}

/// Episode state. [`Simulation::step`] advances one control period.
pub struct Simulation {
    cfg: ScenarioConfig,
    tool: ToolOffset,
    face: FaceModel,
    template: MaskTemplate,
    renderer: Renderer,
    trajectory: HeadTrajectory,
    clock: SimClock<Capture>,
    rng: ChaCha8Rng,
    q: JointVector,
    predictor: PredictorState,
    /// Capture time the predictor state refers to.
    filter_time: f64,
    /// Latest head→world estimate and its capture time.
    estimate: Option<(Pose, f64)>,
    tracking: bool,
    lost_ticks: u32,
    /// Last commanded projector pose, held while the face is lost.
    last_target: Option<Pose>,
    anchors: Vec<usize>,
    /// Estimates above this RMS (px) are rejected.
    rms_gate: f64,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, ScenarioError> {
        cfg.validate()?;
        let face = match &cfg.face_model {
            Some(path) => load_face_model(path, cfg.width_pair, cfg.real_width)?,
            None => FaceModel::new(
                FaceModel::canonical().points().to_vec(),
                cfg.width_pair,
                cfg.real_width,
            )?,
        };
        let template = match (cfg.mask.kind, &cfg.mask.texture, &cfg.mask.anchors) {
            (MaskKind::Custom, Some(tex), Some(anchors)) => load_template(tex, anchors)?,
            (kind, _, _) => MaskTemplate::builtin(kind, &face),
        };
        let renderer = Renderer::new(&face)?;
        let t = &cfg.trajectory;
        let trajectory = HeadTrajectory {
            kind: t.kind,
            amplitude: t.amplitude,
            frequency: t.frequency,
            base_pose: t.base_pose(),
            direction: t.direction,
            pivot_depth: t.pivot_depth,
            translation_amplitude: t.translation_amplitude,
        };
        Ok(Self {
            cfg: cfg.clone(),
            tool: cfg.tool.offsets(),
            face,
            template,
            renderer,
            trajectory,
            clock: SimClock::new(cfg.gains.control_period),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            q: cfg.home,
            predictor: PredictorState::new(cfg.kalman),
            filter_time: 0.0,
            estimate: None,
            tracking: false,
            lost_ticks: 0,
            last_target: None,
            anchors: (0..NUM_LANDMARKS).collect(),
            rms_gate: 5.0 + 5.0 * cfg.noise_sigma,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn face(&self) -> &FaceModel {
        &self.face
    }

    pub fn joints(&self) -> JointVector {
        self.q
    }

    pub fn tick(&self) -> u64 {
        self.clock.tick
    }

    /// Number of ticks in the configured duration.
    pub fn total_ticks(&self) -> u64 {
        (self.cfg.duration / self.cfg.gains.control_period + 1e-9).floor() as u64
    }

    pub fn finished(&self) -> bool {
        self.clock.tick >= self.total_ticks()
    }

    /// True head pose at time `t`.
    pub fn head_truth(&self, t: f64) -> Pose {
        head_pose_at(&self.trajectory, t)
    }

    fn camera_pose(&self, q: &JointVector) -> Pose {
        forward_kinematics(&self.cfg.dh, q, &self.tool.camera_mount)
    }

    fn projector_pose(&self, q: &JointVector) -> Pose {
        forward_kinematics(&self.cfg.dh, q, &self.tool.projector_mount)
    }

    /// Head→camera estimate for one delivered frame, or `None` if it is
    /// unusable. Tracking is seeded from the last estimate; a failed or poor
    /// fit falls back to acquisition from scratch.
    fn estimate_capture(&self, cap: &Capture) -> Option<Pose> {
        if !cap.det.valid {
            return None;
        }
        let k = &self.cfg.camera;
        let tracked = self.estimate.and_then(|(world, _)| {
            let seed = cap.camera_pose.inverse().compose(&world);
            estimate_head_pose(&cap.det, &self.face, k, &seed).ok()
        });
        let est = match tracked {
            Some(e) if e.rms <= self.rms_gate => e,
            _ => acquire_head_pose(&cap.det, &self.face, k).ok()?,
        };
        (est.rms <= self.rms_gate).then_some(est.pose)
    }

    /// Advances one control period. When `render` is set the projector frame
    /// for this tick is rendered too (black while nothing is tracked).
    pub fn step(&mut self, render: bool) -> (MetricsRow, Option<Frame>) {
        let t = self.clock.now();
        let truth_now = self.head_truth(t);
        let camera_pose = self.camera_pose(&self.q);
        let det = observe_landmarks(
            &self.face,
            &truth_now,
            &self.cfg.camera,
            &camera_pose,
            self.cfg.noise_sigma,
            self.rng.next_u64(),
            t,
        );
        let true_distance = camera_pose.inverse().compose(&truth_now).translation.norm();
        let capture = Capture {
            det,
            camera_pose,
            true_distance,
        };
        let outcome = pipeline_tick(&mut self.clock, &self.cfg.latency, capture);

        let mut est_distance = f64::NAN;
        let mut true_distance = f64::NAN;
        let mut fresh = false;
        let mut any_delivered = false;
        for (_, cap) in &outcome.delivered {
            any_delivered = true;
            est_distance = f64::NAN;
            true_distance = cap.true_distance;
            let Some(rel) = self.estimate_capture(cap) else {
                fresh = false;
                continue;
            };
            fresh = true;
            est_distance = rel.translation.norm();
            let world = cap.camera_pose.compose(&rel);
            let tc = cap.det.capture_time;
            let dt = if self.predictor.initialized {
                tc - self.filter_time
            } else {
                0.0
            };
            self.predictor = predictor_step(&self.predictor, Some(&world), dt, 0.0).0;
            self.filter_time = tc;
            self.estimate = Some((world, tc));
            self.tracking = true;
        }
        if fresh {
            self.lost_ticks = 0;
        } else if any_delivered || !self.tracking {
            self.lost_ticks = self.lost_ticks.saturating_add(1);
        }
        if self.tracking && self.lost_ticks > LOST_GRACE_TICKS {
            self.tracking = false;
            self.estimate = None;
            self.predictor = PredictorState::new(self.cfg.kalman);
            self.last_target = None;
        }

        // Head pose expected when this tick's command reaches the projector.
        let shown = self.tracking.then(|| {
            let (raw, _) = self.estimate.expect("tracking implies an estimate");
            if self.cfg.predictor_on {
                self.predictor
                    .extrapolate(outcome.effective_at - self.filter_time)
            } else {
                raw
            }
        });
        // While the face is lost the last command is held and the predictor
        // coasts; fresh estimates retarget.
        if self.lost_ticks == 0 {
            if let Some(head) = shown {
                let plane = fit_face_plane(&head, &self.face);
                self.last_target =
                    compute_target_pose(&plane, &self.cfg.gains, &self.cfg.up_hint).ok();
            }
        }
        if let Some(target) = self.last_target.filter(|_| self.tracking) {
            if let Ok(q) = control_step(
                &self.q,
                &target,
                &self.cfg.dh,
                &self.tool.projector_mount,
                &self.cfg.limits,
                &self.cfg.gains,
            ) {
                self.q = q;
            }
        }
        assert!(self.cfg.limits.contains(&self.q), "joint limits violated");

        let display = self.projector_pose(&self.q);
        let truth = self.head_truth(outcome.effective_at);
        let plane = fit_face_plane(&truth, &self.face);
        let axis = display.z_axis();
        let back = -plane.normal;
        let alignment = axis.cross(&back).norm().atan2(axis.dot(&back)).to_degrees();
        let standoff_error = (plane.normal.dot(&(display.translation - plane.center))
            - self.cfg.gains.standoff)
            .abs()
            * 1000.0;
        let onface = shown.map(|head| {
            let mapping = FrameMapping {
                face_estimate: head,
                render_projector_pose: display,
                display_projector_pose: display,
                projector: self.cfg.projector,
            };
            onface_error(&mapping, &truth, &self.face, &self.anchors)
        });
        let frame = render.then(|| {
            shown
                .and_then(|head| {
                    self.renderer
                        .render(
                            &self.template,
                            &head,
                            &self.face,
                            &self.cfg.projector,
                            &display,
                        )
                        .ok()
                })
                .unwrap_or_else(|| {
                    Frame::new(
                        self.cfg.projector.width,
                        self.cfg.projector.height,
                        self.template.texture.channels,
                    )
                })
        });
        let row = MetricsRow {
            t,
            alignment_error_deg: alignment,
            standoff_error_mm: standoff_error,
            onface_mean_mm: onface.map_or(f64::NAN, |e| e.mean_mm),
            onface_max_mm: onface.map_or(f64::NAN, |e| e.max_mm),
            est_distance_m: est_distance,
            true_distance_m: true_distance,
            q: self.q.0,
            detection_valid: fresh || (self.tracking && self.lost_ticks == 0),
            predictor_on: self.cfg.predictor_on,
        };
        (row, frame)
    }
}

/// Runs the whole episode without rendering.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<MetricsLog, ScenarioError> {
    run_scenario_with(cfg, |_, _| Ok(()))
}

/// Runs the whole episode. When `cfg.output.dump_frames` is set every
/// `frame_stride`-th tick is rendered and handed to `on_frame` with its tick
/// index; an error from the callback aborts the run.
pub fn run_scenario_with<F>(
    cfg: &ScenarioConfig,
    mut on_frame: F,
) -> Result<MetricsLog, ScenarioError>
where
    F: FnMut(u64, &Frame) -> Result<(), ScenarioError>,
{
    let mut sim = Simulation::new(cfg)?;
    let mut log = MetricsLog::default();
    let stride = u64::from(cfg.output.frame_stride);
    while !sim.finished() {
        let tick = sim.tick();
        let render = cfg.output.dump_frames && tick % stride == 0;
        let (row, frame) = sim.step(render);
        if let Some(frame) = frame {
            on_frame(tick, &frame)?;
        }
        log.rows.push(row);
    }
    Ok(log)
}
