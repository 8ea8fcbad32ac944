//! Counter-addressed random streams.
//!
//! Every (subject, slot) pair owns a disjoint window of one ChaCha8 keystream:
//! the subject index selects the ChaCha stream id and the slot selects a
//! word offset. Slot 0 holds per-subject draws (α, start pose); slot `k + 1`
//! holds the draws of scan `k`. Results therefore do not depend on the order
//! in which subjects or scans are simulated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 2^24 32-bit words reserved per slot.
const SLOT_WORDS_LOG2: u32 = 24;

#[derive(Debug, Clone)]
pub struct StreamFactory {
    base: ChaCha8Rng,
}

impl StreamFactory {
    pub fn new(master_seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(master_seed),
        }
    }

    fn slot(&self, subject: u64, slot: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(subject);
        rng.set_word_pos(u128::from(slot) << SLOT_WORDS_LOG2);
        rng
    }

    /// Stream for draws made once per subject.
    pub fn subject(&self, subject: u64) -> ChaCha8Rng {
        self.slot(subject, 0)
    }

    /// Stream for the draws of scan `scan` (0 = initial scan).
    pub fn scan(&self, subject: u64, scan: u64) -> ChaCha8Rng {
        self.slot(subject, scan + 1)
    }
}
