//! Camera pose pipeline: robust solver, per-frame coarse/fine estimation,
//! sequence chaining and trajectory evaluation.

mod frame;
mod solver;
mod trajectory;

pub use frame::{
    frames_from_records, run_frame, run_frame_naive, run_naive_sequence, run_pipeline_sequence, run_sequence,
    FrameDiagnostics, FrameInput, FrameResult, LabelOracle, PointClassifier, PointRole, SequenceResult,
};
pub use solver::{
    estimate_pose, Correspondence, RobustKernel, RobustSolverConfig, SolveReport, DEFAULT_HUBER_DELTA,
    MIN_CORRESPONDENCES,
};
pub use trajectory::{ate, parse_trajectory, write_trajectory};
