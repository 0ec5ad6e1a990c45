pub mod biomarkers;
pub mod config;
pub mod imaging;
pub mod pipeline;
pub mod quality;
pub mod stats;
pub mod vasculature;
