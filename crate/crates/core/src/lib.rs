pub mod cli;
pub mod geometry;
pub mod overlay;
pub mod phantom;
pub mod pipeline;
pub mod pluginio;
pub mod raster;
pub mod stats;
pub mod ultrasound;
pub mod validation;
pub mod xray;
