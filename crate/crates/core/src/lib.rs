//! Subtitle segmentation toolkit: SubRip I/O, break annotation, length
//! constraints, baseline and learned segmenters, and evaluation.

pub mod annotate;
pub mod batch;
pub mod constraints;
pub mod eval;
pub mod pipeline;
mod kv;
pub mod segment;
pub mod srt;
pub mod synth;
