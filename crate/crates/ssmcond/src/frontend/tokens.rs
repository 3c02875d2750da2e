//! Phoneme token streams and the embedding lookup.

use crate::error::{Error, Result};
use crate::numerics::{self, SeqTensor};

#[derive(Debug, Clone)]
pub struct PhonemeSequence {
    pub ids: Vec<usize>,
}

impl PhonemeSequence {
    pub fn new(ids: Vec<usize>) -> Self {
        PhonemeSequence { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn validate(&self, vocab: usize) -> Result<()> {
        for (pos, &id) in self.ids.iter().enumerate() {
            if id >= vocab {
                return Err(Error::TokenOutOfRange { pos, id, vocab });
            }
        }
        Ok(())
    }
}

/// row t = table[ids[t]]
pub fn embed_tokens(p: &PhonemeSequence, table: &SeqTensor) -> Result<SeqTensor> {
    p.validate(table.rows())?;
    Ok(numerics::gather_rows(table, &p.ids))
}
