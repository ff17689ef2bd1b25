pub mod acoustic;
pub mod agra;
pub mod annotator;
pub mod embed;
pub mod error;
pub mod extrema;
pub mod genmath;
pub mod intensity;
pub mod llm;
pub mod metrics;
pub mod model;
pub mod singcot;
pub mod srt;
pub mod vocab;
