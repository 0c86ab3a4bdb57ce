//! LLM-guided optimization: prompt rendering, response parsing, backends
//! and the iterative best-solution loop.

mod backend;
mod llmo;
mod parse;
mod prompt;
mod remote;

pub use backend::{BackendError, LlmBackend, MockBackend, MockProfile};
pub use llmo::{llmo_run, llmo_run_logged, LlmoConfig};
pub use parse::{parse_genotype, parse_solution, ParseError};
pub use prompt::{render_prompt, PromptContext, PromptError, PromptTemplate, PLACEHOLDER_NAMES};
pub use remote::{RemoteBackend, RemoteConfig, API_KEY_ENV};
