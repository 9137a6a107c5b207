// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// A region of a source file. Lines and columns are 1-based; `start` and
/// `end` are byte offsets (end exclusive) into the file text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub line_start: u32,
    pub line_end: u32,
    pub col_start: u32,
    pub col_end: u32,
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    /// Smallest span covering both `self` and `other` (same file assumed).
    pub fn join(&self, other: &SourceSpan) -> SourceSpan {
        let (first, last) = if self.start <= other.start {
            (self, other)
        } else {
            (other, self)
        };
        let end_src = if last.end >= first.end { last } else { first };
        SourceSpan {
            file: self.file.clone(),
            line_start: first.line_start,
            col_start: first.col_start,
            start: first.start,
            line_end: end_src.line_end,
            col_end: end_src.col_end,
            end: end_src.end,
        }
    }

    pub fn contains(&self, other: &SourceSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// The exact source text this span covers.
    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        text.get(self.start..self.end).unwrap_or("")
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line_start, self.col_start)
    }
}

/// Maps byte offsets to line/column positions.
#[derive(Debug, Clone)]
pub struct LineIndex {
    file: Arc<str>,
    line_starts: Vec<usize>,
}

impl LineIndex {
    pub fn new(file: Arc<str>, text: &str) -> Self {
        let mut line_starts = vec![0];
        line_starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        Self { file, line_starts }
    }

    pub fn file(&self) -> &Arc<str> {
        &self.file
    }

    pub fn position(&self, offset: usize) -> (u32, u32) {
        let line = match self.line_starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let col = offset - self.line_starts[line];
        (line as u32 + 1, col as u32 + 1)
    }

    pub fn span(&self, start: usize, end: usize) -> SourceSpan {
        let (line_start, col_start) = self.position(start);
        let (line_end, col_end) = self.position(end);
        SourceSpan {
            file: self.file.clone(),
            line_start,
            line_end,
            col_start,
            col_end,
            start,
            end,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_are_one_based() {
        let idx = LineIndex::new("f.v".into(), "ab\ncd\n");
        assert_eq!(idx.position(0), (1, 1));
        assert_eq!(idx.position(1), (1, 2));
        assert_eq!(idx.position(3), (2, 1));
        let s = idx.span(3, 5);
        assert_eq!((s.line_start, s.col_start, s.line_end, s.col_end), (2, 1, 2, 3));
        assert_eq!(s.slice("ab\ncd\n"), "cd");
    }
}
