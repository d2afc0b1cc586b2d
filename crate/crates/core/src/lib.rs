//! Core library for an egocentric video question-answering toolkit:
//! object-rooted commonsense knowledge graphs, typed video scene graphs,
//! media preprocessing plans, a pluggable multimodal model client, and a
//! multiple-choice inference and evaluation pipeline.

pub mod cli;
pub mod conceptnet;
pub mod eval;
pub mod knowledge;
pub mod media;
pub mod mllm;
pub mod scene;
