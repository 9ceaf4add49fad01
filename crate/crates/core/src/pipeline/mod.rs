//! Streaming wiring of the stages:
//!
//! ```text
//! RAW → decode/resample → STFT → SSL → SST → SSS → outputs
//! ```
//!
//! Each stage runs on its own thread, connected by bounded queues whose
//! producers block when full. The same stage objects can also be driven
//! sequentially on the calling thread; both modes produce identical output.

mod protocol;
mod run;
mod sink;
mod stages;

use std::time::SystemTime;

pub use protocol::{fmt3, pot_line, src_line, validate_line, SourceTag, Stream, TargetInfo, PROTOCOL_VERSION};
pub use run::{run, PipelineError, RunOptions, RunReport, Sinks, POSTFILTERED_FILE, SEPARATED_FILE};
pub use sink::{Sink, TcpSink, TCP_BUFFER_LINES};

use crate::ssl::PotentialDoa;

/// Separated audio of one target for one hop.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatedChannel {
    pub track_id: u64,
    /// Output channel carrying this target.
    pub slot: usize,
    pub samples: Vec<f64>,
    pub postfiltered: Option<Vec<f64>>,
}

/// Events published per frame, in stage order.
#[derive(Debug, Clone, PartialEq)]
pub enum PipelineEvent {
    PotentialDoaSet {
        frame_index: u64,
        timestamp: SystemTime,
        doas: Vec<PotentialDoa>,
    },
    TrackedSourceSet {
        frame_index: u64,
        timestamp: SystemTime,
        sources: Vec<TargetInfo>,
    },
    SeparatedFrameSet {
        frame_index: u64,
        timestamp: SystemTime,
        outputs: Vec<SeparatedChannel>,
    },
    Diagnostics {
        frame_index: u64,
        timestamp: SystemTime,
        message: String,
    },
}

impl PipelineEvent {
    pub fn frame_index(&self) -> u64 {
        match self {
            PipelineEvent::PotentialDoaSet { frame_index, .. }
            | PipelineEvent::TrackedSourceSet { frame_index, .. }
            | PipelineEvent::SeparatedFrameSet { frame_index, .. }
            | PipelineEvent::Diagnostics { frame_index, .. } => *frame_index,
        }
    }
}
