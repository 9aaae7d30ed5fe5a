//! Online replay: frames in, epochs out, one prediction per qualified epoch
//! and a REM-triggered vibration policy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::extract_frames;
use crate::ml::{MlError, TrainedModel};
use crate::model::{
    EpochWindow, ModelError, SensorFrame, SleepStage, EPOCH_MS, EXPECTED_SAMPLES, MIN_QUALIFIED_SAMPLES,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StreamError {
    #[error("frame at {t_ms} ms arrived after {last_ms} ms")]
    OutOfOrderFrame { t_ms: u64, last_ms: u64 },
    #[error("epoch {0} is not qualified")]
    UnqualifiedEpoch(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ml(#[from] MlError),
}

/// A closed 30 s window.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledEpoch {
    pub epoch_idx: usize,
    pub window: EpochWindow,
    pub frames: Vec<SensorFrame>,
    pub qualified: bool,
}

impl AssembledEpoch {
    pub fn sample_count(&self) -> usize {
        self.frames.len()
    }
}

/// Cuts a time-ordered frame stream into windows `[origin + 30 s·k,
/// origin + 30 s·(k+1))`.
///
/// A window is emitted as soon as it holds the expected 7500 frames, or
/// when the first frame past its end arrives. Windows that never receive a
/// frame are not emitted. Frames before the origin, or inside a window that
/// was already emitted, are dropped and counted.
#[derive(Debug, Clone)]
pub struct EpochAssembler {
    origin_ms: i64,
    current: Option<usize>,
    buffer: Vec<SensorFrame>,
    closed_through: Option<usize>,
    last_t: Option<u64>,
    emitted: usize,
    fed: usize,
    emitted_frames: usize,
    dropped: usize,
}

impl Default for EpochAssembler {
    fn default() -> Self {
        Self::new(0)
    }
}

impl EpochAssembler {
    pub fn new(origin_ms: i64) -> Self {
        Self {
            origin_ms,
            current: None,
            buffer: Vec::with_capacity(EXPECTED_SAMPLES),
            closed_through: None,
            last_t: None,
            emitted: 0,
            fed: 0,
            emitted_frames: 0,
            dropped: 0,
        }
    }

    pub fn window(&self, idx: usize) -> EpochWindow {
        EpochWindow::standard(self.origin_ms + idx as i64 * EPOCH_MS)
    }

    fn index_of(&self, t_ms: u64) -> Option<usize> {
        let rel = t_ms as i64 - self.origin_ms;
        (rel >= 0).then_some((rel / EPOCH_MS) as usize)
    }

    fn close(&mut self) -> Option<AssembledEpoch> {
        let idx = self.current.take()?;
        let frames = std::mem::replace(&mut self.buffer, Vec::with_capacity(EXPECTED_SAMPLES));
        self.closed_through = Some(idx);
        self.emitted += 1;
        self.emitted_frames += frames.len();
        Some(AssembledEpoch {
            epoch_idx: idx,
            window: self.window(idx),
            qualified: frames.len() >= MIN_QUALIFIED_SAMPLES,
            frames,
        })
    }

    /// Accepts one frame. Returns the window it completes, if any; at most
    /// one window closes per frame.
    pub fn feed(&mut self, frame: SensorFrame) -> Result<Option<AssembledEpoch>, StreamError> {
        if let Some(last) = self.last_t {
            if frame.t_ms < last {
                return Err(StreamError::OutOfOrderFrame {
                    t_ms: frame.t_ms,
                    last_ms: last,
                });
            }
        }
        self.last_t = Some(frame.t_ms);
        self.fed += 1;
        let Some(idx) = self.index_of(frame.t_ms) else {
            self.dropped += 1;
            return Ok(None);
        };
        if self.closed_through.is_some_and(|c| idx <= c) {
            self.dropped += 1;
            return Ok(None);
        }
        let mut out = None;
        if self.current.is_some_and(|c| c != idx) {
            out = self.close();
        }
        self.current = Some(idx);
        self.buffer.push(frame);
        if self.buffer.len() >= EXPECTED_SAMPLES {
            debug_assert!(out.is_none());
            out = self.close();
        }
        Ok(out)
    }

    /// Emits the open window at end of stream.
    pub fn finish(&mut self) -> Option<AssembledEpoch> {
        self.close()
    }

    pub fn frames_fed(&self) -> usize {
        self.fed
    }

    pub fn frames_emitted(&self) -> usize {
        self.emitted_frames
    }

    pub fn frames_dropped(&self) -> usize {
        self.dropped
    }

    pub fn frames_buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn epochs_emitted(&self) -> usize {
        self.emitted
    }
}

/// Same features and prediction as the offline pipeline.
pub fn classify_online(model: &TrainedModel, epoch: &AssembledEpoch) -> Result<SleepStage, StreamError> {
    if !epoch.qualified {
        return Err(StreamError::UnqualifiedEpoch(epoch.epoch_idx));
    }
    let fv = extract_frames(&epoch.frames)?;
    let class = model.predict_one(fv.values())?;
    Ok(SleepStage::from_class_index(class)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationPolicy {
    pub target_stage: SleepStage,
    pub consecutive_required: usize,
    pub refractory_epochs: usize,
    pub motor_on_ms: u32,
}

impl Default for ModulationPolicy {
    fn default() -> Self {
        Self {
            target_stage: SleepStage::Rem,
            consecutive_required: 2,
            refractory_epochs: 10,
            motor_on_ms: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerEvent {
    pub epoch_idx: usize,
    pub stage: SleepStage,
    pub motor_on_ms: u32,
}

/// Running state of a [`ModulationPolicy`].
///
/// A streak counts target predictions on consecutive epoch indices; a
/// skipped epoch breaks it. The `refractory_epochs` epochs after a trigger
/// neither trigger nor count toward the next streak.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PolicyState {
    streak: usize,
    last_epoch: Option<usize>,
    last_trigger: Option<usize>,
}

pub fn policy_step(
    policy: &ModulationPolicy,
    state: &mut PolicyState,
    epoch_idx: usize,
    stage: SleepStage,
) -> Option<TriggerEvent> {
    let contiguous = state.last_epoch.is_some_and(|l| epoch_idx == l + 1);
    state.last_epoch = Some(epoch_idx);
    if state
        .last_trigger
        .is_some_and(|t| epoch_idx <= t + policy.refractory_epochs)
    {
        state.streak = 0;
        return None;
    }
    if stage != policy.target_stage {
        state.streak = 0;
        return None;
    }
    state.streak = if contiguous { state.streak + 1 } else { 1 };
    if state.streak < policy.consecutive_required.max(1) {
        return None;
    }
    state.streak = 0;
    state.last_trigger = Some(epoch_idx);
    Some(TriggerEvent {
        epoch_idx,
        stage,
        motor_on_ms: policy.motor_on_ms,
    })
}

/// One line of replay output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEvent {
    pub epoch: usize,
    pub stage: Option<SleepStage>,
    pub qualified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<TriggerEvent>,
}

/// Assembler, classifier and policy wired together.
pub struct OnlineSession<'m> {
    model: &'m TrainedModel,
    policy: ModulationPolicy,
    state: PolicyState,
    assembler: EpochAssembler,
}

impl<'m> OnlineSession<'m> {
    pub fn new(model: &'m TrainedModel, policy: ModulationPolicy, origin_ms: i64) -> Self {
        Self {
            model,
            policy,
            state: PolicyState::default(),
            assembler: EpochAssembler::new(origin_ms),
        }
    }

    fn handle(&mut self, epoch: AssembledEpoch) -> Result<ReplayEvent, StreamError> {
        if !epoch.qualified {
            return Ok(ReplayEvent {
                epoch: epoch.epoch_idx,
                stage: None,
                qualified: false,
                trigger: None,
            });
        }
        let stage = classify_online(self.model, &epoch)?;
        let trigger = policy_step(&self.policy, &mut self.state, epoch.epoch_idx, stage);
        Ok(ReplayEvent {
            epoch: epoch.epoch_idx,
            stage: Some(stage),
            qualified: true,
            trigger,
        })
    }

    pub fn push(&mut self, frame: SensorFrame) -> Result<Option<ReplayEvent>, StreamError> {
        match self.assembler.feed(frame)? {
            Some(e) => self.handle(e).map(Some),
            None => Ok(None),
        }
    }

    pub fn finish(&mut self) -> Result<Option<ReplayEvent>, StreamError> {
        match self.assembler.finish() {
            Some(e) => self.handle(e).map(Some),
            None => Ok(None),
        }
    }

    pub fn assembler(&self) -> &EpochAssembler {
        &self.assembler
    }
}

/// Replays a whole frame sequence.
pub fn replay(
    model: &TrainedModel,
    policy: ModulationPolicy,
    origin_ms: i64,
    frames: impl IntoIterator<Item = SensorFrame>,
) -> Result<Vec<ReplayEvent>, StreamError> {
    let mut s = OnlineSession::new(model, policy, origin_ms);
    let mut out = Vec::new();
    for f in frames {
        out.extend(s.push(f)?);
    }
    out.extend(s.finish()?);
    Ok(out)
}
