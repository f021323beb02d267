pub mod error;
pub mod flow;
pub mod kernel;
pub mod pipeline;
pub mod synth;
pub mod syntax;
pub mod transform;

pub use error::{
    DatasetError, FormatError, KernelError, NotApplicable, ParseError, TokenizerError,
};
