//! Prompt assembly: system text, use cases, retrieved demos, target.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{render_instructions, retrieval_text, Tutorial};
use crate::pool::PoolState;
use crate::retrieval::{top1_use_case, top_k_demos, Embedder, RetrievalError};

pub const DEFAULT_SYSTEM_PROMPT: &str = include_str!("../assets/system_prompt.txt");
pub const DEFAULT_CHAR_BUDGET: usize = 90_000;
pub const PROGRAM_CUE: &str = "PROGRAM:";
pub const USE_CASE_HEADER: &str = "# Use Case of ";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("pool has no demonstrations to retrieve")]
    EmptyPool,
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PipelineVariant {
    #[serde(rename = "base")]
    Base,
    #[serde(rename = "base+usecase")]
    BaseUseCase,
    #[serde(rename = "base+usecase+desc")]
    BaseUseCaseDesc,
}

impl PipelineVariant {
    pub const ALL: [PipelineVariant; 3] = [Self::Base, Self::BaseUseCase, Self::BaseUseCaseDesc];

    pub fn name(self) -> &'static str {
        match self {
            Self::Base => "base",
            Self::BaseUseCase => "base+usecase",
            Self::BaseUseCaseDesc => "base+usecase+desc",
        }
    }

    /// Row label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Self::Base => "Base",
            Self::BaseUseCase => "+UseCase",
            Self::BaseUseCaseDesc => "+UseCase+Desc",
        }
    }

    pub fn uses_use_cases(self) -> bool {
        self != Self::Base
    }

    pub fn uses_descriptions(self) -> bool {
        self == Self::BaseUseCaseDesc
    }
}

impl fmt::Display for PipelineVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PipelineVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace(['_', ' '], "").as_str() {
            "base" => Ok(Self::Base),
            "base+usecase" | "usecase" => Ok(Self::BaseUseCase),
            "base+usecase+desc" | "usecase+desc" | "desc" => Ok(Self::BaseUseCaseDesc),
            _ => Err(format!("unknown pipeline variant {s:?} (expected base, base+usecase or base+usecase+desc)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptOptions {
    pub k: usize,
    pub char_budget: usize,
    /// Embed demo keys and the query with descriptions. Defaults to the variant.
    pub retrieval_descriptions: Option<bool>,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self { k: 10, char_budget: DEFAULT_CHAR_BUDGET, retrieval_descriptions: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub system_text: String,
    pub use_case_block: Option<String>,
    pub demo_block: String,
    pub target_block: String,
    /// Tutorial ids of the demos shown, in prompt order.
    pub demo_ids: Vec<String>,
    /// APIs whose use case is shown, in prompt order.
    pub use_case_apis: Vec<String>,
}

impl PromptSpec {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(self.system_text.trim_end());
        out.push_str("\n\n");
        if let Some(u) = &self.use_case_block {
            out.push_str(u);
            out.push('\n');
        }
        out.push_str(&self.demo_block);
        out.push('\n');
        out.push_str(&self.target_block);
        out
    }
}

fn demo_text(t: &Tutorial, program_text: &str, descriptions: bool) -> String {
    let mut s = render_instructions(t, descriptions);
    s.push_str(PROGRAM_CUE);
    s.push('\n');
    s.push_str(program_text.trim_end());
    s.push('\n');
    s
}

fn join_blocks(blocks: &[String]) -> String {
    blocks.iter().map(|b| format!("{b}\n")).collect()
}

/// Builds the prompt for one target tutorial.
///
/// Demos are the `k` nearest by retrieval key, least similar first so the
/// closest one sits right above the target. Over `char_budget` the least
/// similar demos are dropped first (keeping at least one), then the
/// use cases of the earliest-seen APIs.
pub fn build_prompt(
    variant: PipelineVariant,
    tutorial: &Tutorial,
    pool: &PoolState,
    embedder: &Embedder,
    system_text: &str,
    opts: &PromptOptions,
) -> Result<PromptSpec, PromptError> {
    if pool.demos.is_empty() {
        return Err(PromptError::EmptyPool);
    }
    let desc = variant.uses_descriptions();
    let key_desc = opts.retrieval_descriptions.unwrap_or(desc);
    let query = retrieval_text(tutorial, key_desc);

    let mut demos = top_k_demos(embedder, pool, &query, opts.k.max(1), key_desc)?;
    demos.reverse();
    let mut demo_ids: Vec<String> = demos.iter().map(|d| d.tutorial_id.clone()).collect();
    let mut demo_texts: Vec<String> = demos.iter().map(|d| demo_text(&d.tutorial, &d.program_text, desc)).collect();

    let mut use_case_apis = Vec::new();
    let mut use_case_texts = Vec::new();
    if variant.uses_use_cases() {
        let mut apis: Vec<_> = pool.apis.values().filter(|e| !e.use_cases.is_empty()).collect();
        apis.sort_by(|a, b| a.first_seen_step.cmp(&b.first_seen_step).then_with(|| a.signature.name.cmp(&b.signature.name)));
        for e in apis {
            let uc = top1_use_case(embedder, pool, &e.signature.name, &query)?;
            use_case_apis.push(e.signature.name.clone());
            use_case_texts.push(format!("{USE_CASE_HEADER}{}\n{}\n", e.signature.name, uc.snippet));
        }
    }

    let target_block = format!("{}{PROGRAM_CUE}\n", render_instructions(tutorial, desc));
    let fixed = system_text.trim_end().len() + 2 + target_block.len();
    let size = |d: &[String], u: &[String]| -> usize {
        fixed + d.iter().map(|s| s.len() + 1).sum::<usize>() + 1 + u.iter().map(|s| s.len() + 1).sum::<usize>() + 1
    };
    while size(&demo_texts, &use_case_texts) > opts.char_budget && demo_texts.len() > 1 {
        demo_texts.remove(0);
        demo_ids.remove(0);
    }
    while size(&demo_texts, &use_case_texts) > opts.char_budget && !use_case_texts.is_empty() {
        use_case_texts.remove(0);
        use_case_apis.remove(0);
    }
    if size(&demo_texts, &use_case_texts) > opts.char_budget {
        log::warn!("prompt for {} exceeds the character budget even when trimmed", tutorial.id);
    }

    Ok(PromptSpec {
        system_text: system_text.to_string(),
        use_case_block: variant.uses_use_cases().then(|| join_blocks(&use_case_texts)),
        demo_block: join_blocks(&demo_texts),
        target_block,
        demo_ids,
        use_case_apis,
    })
}
