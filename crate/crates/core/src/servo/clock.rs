//! Tick scheduler for the sensing and actuation delays.

use std::collections::VecDeque;
use std::fmt;

use super::PipelineConfig;

/// Slack for comparing delivery times computed by different float paths.
const TIME_EPS: f64 = 1e-9;

/// Simulation clock with a queue of in-flight measurements.
#[derive(Debug, Clone)]
pub struct SimClock<T> {
    pub tick: u64,
    pub period: f64,
    pending: VecDeque<(u64, T, f64)>,
}

impl<T> SimClock<T> {
    pub fn new(period: f64) -> Self {
        Self {
            tick: 0,
            period,
            pending: VecDeque::new(),
        }
    }

    /// Current time; computed from the tick count so it does not drift.
    pub fn now(&self) -> f64 {
        self.tick as f64 * self.period
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PipelineEvent {
    Capture {
        tick: u64,
        t: f64,
        deliver_at: f64,
    },
    Deliver {
        captured_tick: u64,
        t: f64,
    },
    Command {
        tick: u64,
        t: f64,
        effective_at: f64,
    },
}

impl fmt::Display for PipelineEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Capture {
                tick,
                t,
                deliver_at,
            } => {
                write!(f, "capture tick={tick} t={t:.6} deliver_at={deliver_at:.6}")
            }
            Self::Deliver { captured_tick, t } => {
                write!(f, "deliver captured_tick={captured_tick} t={t:.6}")
            }
            Self::Command {
                tick,
                t,
                effective_at,
            } => {
                write!(
                    f,
                    "command tick={tick} t={t:.6} effective_at={effective_at:.6}"
                )
            }
        }
    }
}

/// What the controller gets to work with during one tick.
#[derive(Debug, Clone)]
pub struct TickOutcome<T> {
    pub t: f64,
    /// Measurements due by now, oldest first, with their capture ticks.
    pub delivered: Vec<(u64, T)>,
    /// When a command issued this tick reaches the projector output.
    pub effective_at: f64,
    pub events: Vec<PipelineEvent>,
}

/// Runs one tick: the frame captured now is queued for delivery after the
/// sensing delay, everything due is handed over, the command time is
/// stamped, and the clock advances one period.
pub fn pipeline_tick<T>(
    clock: &mut SimClock<T>,
    cfg: &PipelineConfig,
    captured: T,
) -> TickOutcome<T> {
    let t = clock.now();
    let deliver_at = t + cfg.sensing_delay();
    let mut events = vec![PipelineEvent::Capture {
        tick: clock.tick,
        t,
        deliver_at,
    }];
    clock.pending.push_back((clock.tick, captured, deliver_at));
    let mut delivered = Vec::new();
    while clock
        .pending
        .front()
        .is_some_and(|(_, _, at)| *at <= t + TIME_EPS)
    {
        let (captured_tick, item, _) = clock.pending.pop_front().expect("front exists");
        events.push(PipelineEvent::Deliver { captured_tick, t });
        delivered.push((captured_tick, item));
    }
    let effective_at = t + cfg.actuation_delay();
    events.push(PipelineEvent::Command {
        tick: clock.tick,
        t,
        effective_at,
    });
    clock.tick += 1;
    TickOutcome {
        t,
        delivered,
        effective_at,
        events,
    }
}
