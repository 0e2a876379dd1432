//! Recordings, resampling, normalization, segmentation and a synthetic
//! PPG/respiration generator.

pub mod normalize;
pub mod recording;
pub mod resample;
pub mod segment;
pub mod synth;

pub use normalize::{normalize_input, normalize_target, InputScaling};
pub use recording::{load_recording, load_dataset, write_recording, Recording, RespKind, RrAnnotation};
pub use resample::resample_to_30hz;
pub use segment::{segment_test, segment_training, SegmentPair, TEST_STRIDE, TRAIN_SEGMENTS};
pub use synth::{generate_synthetic, SynthConfig};
