//! Query/document/context types shared across the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let q = Query {
            id: id.into(),
            text: text.into(),
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::Validation(format!("query `{}` has empty text", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    /// Position of the document inside its candidate set (0-based).
    #[serde(default)]
    pub rank_index: usize,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            rank_index: 0,
        }
    }

    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }

    /// Same document slot, new text.
    pub fn with_text(&self, text: impl Into<String>) -> Self {
        Document {
            id: self.id.clone(),
            text: text.into(),
            rank_index: self.rank_index,
        }
    }
}

/// The pair `(q, d)` a strategy is applied to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    pub query: Query,
    pub document: Document,
}

impl Context {
    pub fn new(query: Query, document: Document) -> Self {
        Context { query, document }
    }

    /// Stable identifier used to key labels and replay entries.
    pub fn id(&self) -> String {
        format!("{}::{}", self.query.id, self.document.id)
    }
}

/// Retrieved documents for one query, with the creator's document at `target_index`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub docs: Vec<Document>,
    pub target_index: usize,
}

impl CandidateSet {
    pub fn new(docs: Vec<Document>, target_index: usize) -> Result<Self> {
        let mut docs = docs;
        for (i, d) in docs.iter_mut().enumerate() {
            d.rank_index = i;
        }
        let set = CandidateSet { docs, target_index };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.docs.is_empty() {
            return Err(Error::Validation("candidate set is empty".into()));
        }
        if self.target_index >= self.docs.len() {
            return Err(Error::Validation(format!(
                "target index {} out of range for {} candidates",
                self.target_index,
                self.docs.len()
            )));
        }
        let mut ids: Vec<&str> = self.docs.iter().map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("candidate ids are not unique".into()));
        }
        if let Some(d) = self.docs.iter().find(|d| d.text.trim().is_empty()) {
            return Err(Error::Validation(format!("document `{}` has empty text", d.id)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn target(&self) -> &Document {
        &self.docs[self.target_index]
    }

    /// 1-based citation index of the target document.
    pub fn target_citation(&self) -> usize {
        self.target_index + 1
    }

    /// Copy of the set with the target document's text replaced.
    pub fn with_target_text(&self, text: &str) -> CandidateSet {
        let mut docs = self.docs.clone();
        docs[self.target_index].text = text.to_string();
        CandidateSet {
            docs,
            target_index: self.target_index,
        }
    }
}

/// A query paired with its candidate set; the unit the online loop samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub query: Query,
    pub candidates: CandidateSet,
}

impl Instance {
    pub fn new(query: Query, candidates: CandidateSet) -> Self {
        Instance { query, candidates }
    }

    pub fn context(&self) -> Context {
        Context::new(self.query.clone(), self.candidates.target().clone())
    }

    pub fn validate(&self) -> Result<()> {
        self.query.validate()?;
        self.candidates.validate()
    }
}
