//! Title/skills dual encoder for job-title normalization.
//!
//! The pipeline: clean and filter postings ([`corpus`]), encode titles and
//! skill lists with `[SKILL]` markers ([`tokenizer`]), embed them with one
//! shared transformer and pooling head ([`encoder`]), train with a
//! multiple-negatives ranking loss over in-batch negatives ([`training`]),
//! search a normalized-title index ([`index`]) and score Recall@N
//! ([`eval`]).

pub mod corpus;
pub mod tokenizer;
pub mod encoder;
pub mod training;
pub mod index;
pub mod eval;
