pub mod answer;
pub mod cli;
pub mod archive;
pub mod coevolution;
pub mod config;
pub mod critic;
pub mod engine;
pub mod error;
pub mod evolver;
pub mod genotype;
pub mod impressions;
pub mod planner;
pub mod types;
pub mod util;

pub use answer::{parse_cited_answer, render_cited_answer, CitedAnswer, Sentence};
pub use error::{Error, Result};
pub use types::{CandidateSet, Context, Document, Instance, Query};
