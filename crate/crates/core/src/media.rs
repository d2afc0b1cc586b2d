//! Media preprocessing plans: segment tiling, temporal subsampling for
//! long videos, gaze look-back windows, and frame sampling manifests.

use serde::{Deserialize, Serialize};

/// Maximum processed segment length in seconds.
pub const MAX_SEGMENT_S: f64 = 400.0;
/// Longest video span processed at full rate; longer videos subsample.
pub const PROCESSING_WINDOW_S: f64 = 2400.0;
/// How far back gaze context reaches from a query time.
pub const GAZE_LOOKBACK_S: f64 = 400.0;
/// Frame sampling rate in the (possibly subsampled) timeline.
pub const FRAME_RATE_HZ: f64 = 1.0;
/// Target frame height for extracted frames.
pub const FRAME_HEIGHT_PX: u32 = 480;

#[derive(Debug, thiserror::Error)]
pub enum MediaError {
    #[error("video duration must be positive, got {0}")]
    NonPositiveDuration(f64),
}

/// Closed time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    pub start: f64,
    pub end: f64,
}

impl TimeInterval {
    pub fn new(start: f64, end: f64) -> Self {
        TimeInterval { start, end }
    }

    /// Closed containment: both endpoints belong to the interval.
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// One planned processing segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub index: usize,
    pub start_s: f64,
    pub end_s: f64,
}

impl SegmentPlan {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Tiles a video into consecutive segments of at most [`MAX_SEGMENT_S`]
/// seconds; only the final segment may be shorter.
pub fn plan_segments(duration_s: f64) -> Result<Vec<SegmentPlan>, MediaError> {
    if !(duration_s > 0.0) {
        return Err(MediaError::NonPositiveDuration(duration_s));
    }
    let count = (duration_s / MAX_SEGMENT_S).ceil() as usize;
    Ok((0..count)
        .map(|index| {
            let start_s = index as f64 * MAX_SEGMENT_S;
            SegmentPlan {
                index,
                start_s,
                end_s: (start_s + MAX_SEGMENT_S).min(duration_s),
            }
        })
        .collect())
}

/// Temporal subsampling decision for one video.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalPlan {
    /// Playback acceleration factor; 1 means no subsampling.
    pub divisor: u32,
    /// Video length in seconds after subsampling, floored at 1.
    pub effective_duration_s: f64,
}

/// Chooses the smallest integer divisor that fits the video inside the
/// processing window. Total: nonpositive durations get the identity plan
/// with the 1 second floor applied.
pub fn temporal_divisor(duration_s: f64) -> TemporalPlan {
    if !(duration_s > 0.0) {
        return TemporalPlan {
            divisor: 1,
            effective_duration_s: 1.0,
        };
    }
    let divisor = ((duration_s / PROCESSING_WINDOW_S).ceil() as u32).max(1);
    TemporalPlan {
        divisor,
        effective_duration_s: (duration_s / divisor as f64).max(1.0),
    }
}

/// Look-back window ending at `t`: `[max(0, t - 400), max(0, t)]`.
pub fn gaze_window(t: f64) -> TimeInterval {
    let end = t.max(0.0);
    TimeInterval {
        start: (t - GAZE_LOOKBACK_S).max(0.0),
        end,
    }
}

/// One frame to extract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub global_time_s: f64,
    pub segment_index: usize,
}

/// Frame extraction schedule for one video: one frame per second of the
/// subsampled timeline, which is one frame every `divisor` seconds of
/// real time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameManifest {
    pub video_id: String,
    pub duration_s: f64,
    pub divisor: u32,
    pub frames: Vec<FrameEntry>,
}

/// Manifest id for one tiled segment of a video.
pub fn segment_manifest_id(video_id: &str, index: usize) -> String {
    format!("{video_id}:seg{index}")
}

/// Manifest id for the whole (possibly subsampled) video.
pub fn full_manifest_id(video_id: &str) -> String {
    format!("{video_id}:full")
}

pub fn frame_manifest(video_id: &str, duration_s: f64) -> Result<FrameManifest, MediaError> {
    let segments = plan_segments(duration_s)?;
    let plan = temporal_divisor(duration_s);
    let step = plan.divisor as f64 / FRAME_RATE_HZ;
    let last_segment = segments.len() - 1;
    let mut frames = Vec::new();
    let mut i = 0u64;
    loop {
        let t = i as f64 * step;
        if t >= duration_s {
            break;
        }
        frames.push(FrameEntry {
            global_time_s: t,
            segment_index: ((t / MAX_SEGMENT_S) as usize).min(last_segment),
        });
        i += 1;
    }
    Ok(FrameManifest {
        video_id: video_id.to_string(),
        duration_s,
        divisor: plan.divisor,
        frames,
    })
}
