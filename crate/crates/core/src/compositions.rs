//! Lexicographic enumeration of integer compositions.

use crate::error::{Error, Result};

/// Iterator over all `parts`-tuples of positive integers summing to `total`,
/// in lexicographic order.
#[derive(Debug, Clone)]
pub struct Compositions {
    current: Vec<usize>,
    done: bool,
}

/// Compositions of `total` into exactly `parts` positive parts.
pub fn compositions(total: usize, parts: usize) -> Result<Compositions> {
    if parts == 0 || parts > total {
        return Err(Error::EmptyDomain { total, parts });
    }
    let mut current = vec![1; parts];
    current[parts - 1] = total - (parts - 1);
    Ok(Compositions {
        current,
        done: false,
    })
}

impl Compositions {
    fn advance(&mut self) {
        let n = self.current.len();
        // Rightmost slot that can grow while every later slot stays >= 1.
        let mut suffix = self.current[n - 1];
        for i in (0..n - 1).rev() {
            let room = n - 1 - i;
            if suffix > room {
                self.current[i] += 1;
                for slot in &mut self.current[i + 1..n - 1] {
                    *slot = 1;
                }
                self.current[n - 1] = suffix - 1 - (room - 1);
                return;
            }
            suffix += self.current[i];
        }
        self.done = true;
    }
}

impl Iterator for Compositions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        self.advance();
        Some(out)
    }
}

/// `C(m-1, n-1)`, the number of compositions of `m` into `n` parts.
pub fn composition_count(total: usize, parts: usize) -> usize {
    if parts == 0 || parts > total {
        return 0;
    }
    let (n, mut k) = (total - 1, parts - 1);
    k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}
