//! Bounded top-K selection.
//!
//! Query answering never sorts the whole candidate pool: candidates stream
//! through a fixed-capacity selector that keeps the K best seen so far.
//! Ordering is score-descending with word-ID-ascending tie-break, the same
//! total order used everywhere suggestions are ranked.

/// Fixed-capacity selector over `(word ID, score)` candidates carrying an
/// arbitrary payload (e.g. which scoring branch produced the score).
///
/// `push` is O(K) in the worst case (K is small, single digits in practice)
/// and O(1) when the candidate does not beat the current worst entry.
#[derive(Debug, Clone)]
pub struct TopK<T> {
    cap: usize,
    // Best first; `entries.len() <= cap`.
    entries: Vec<Entry<T>>,
}

#[derive(Debug, Clone)]
struct Entry<T> {
    id: u32,
    score: f64,
    payload: T,
}

impl<T> Entry<T> {
    /// True when `self` ranks strictly ahead of `other`: higher score wins,
    /// equal scores fall back to the smaller word ID.
    fn beats(&self, other: &Entry<T>) -> bool {
        match self.score.total_cmp(&other.score) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => self.id < other.id,
        }
    }
}

impl<T> TopK<T> {
    /// Creates a selector that retains at most `cap` entries.
    pub fn new(cap: usize) -> Self {
        TopK { cap, entries: Vec::with_capacity(cap.min(64)) }
    }

    /// Offers a candidate; it is kept only while it ranks among the best
    /// `cap` seen so far.
    pub fn push(&mut self, id: u32, score: f64, payload: T) {
        if self.cap == 0 {
            return;
        }
        let cand = Entry { id, score, payload };
        if self.entries.len() == self.cap {
            // Full: reject unless the candidate beats the current worst.
            if !cand.beats(self.entries.last().expect("cap > 0")) {
                return;
            }
            self.entries.pop();
        }
        let at = self.entries.partition_point(|e| e.beats(&cand));
        self.entries.insert(at, cand);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Worst retained score, if any entry is retained.
    pub fn worst_score(&self) -> Option<f64> {
        self.entries.last().map(|e| e.score)
    }

    /// Consumes the selector, yielding entries best-first.
    pub fn into_ranked(self) -> Vec<(u32, f64, T)> {
        self.entries.into_iter().map(|e| (e.id, e.score, e.payload)).collect()
    }
}
