pub mod bitstream;
pub mod codec;
pub mod downmix;
pub mod error;
pub mod eval;
pub mod filterbank;
pub mod param;
pub mod render;
pub mod scene;
pub mod wav;
