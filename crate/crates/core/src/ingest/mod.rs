//! Dump ingestion: posts, threads, code blocks and the heuristic corpus.

pub mod corpus;
pub mod dump;
pub mod howto;
pub mod html;
pub mod threads;

pub use corpus::{build_corr_corpus, CorpusPair};
pub use dump::{parse_dump, DumpReader, DumpStats, PostType, RawPost};
pub use howto::{filter_howto, AcceptAllHowTo, HowToFilter, IdListHowTo, KeywordHowTo};
pub use html::{extract_code_blocks, extract_code_blocks_with_warnings, render_code_blocks};
pub use threads::{
    assemble_threads, AnswerEntry, AssemblyStats, BlockEntry, CodeBlock, QuestionThread,
    MAX_ANSWERS,
};
