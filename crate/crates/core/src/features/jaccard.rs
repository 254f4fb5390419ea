use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::str::FromStr;

/// Shingle width used to turn a name into a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Shingle {
    Unigram,
    #[default]
    Bigram,
    Trigram,
}

impl Shingle {
    pub fn width(self) -> usize {
        match self {
            Shingle::Unigram => 1,
            Shingle::Bigram => 2,
            Shingle::Trigram => 3,
        }
    }

    pub fn from_width(n: u8) -> Option<Self> {
        match n {
            1 => Some(Shingle::Unigram),
            2 => Some(Shingle::Bigram),
            3 => Some(Shingle::Trigram),
            _ => None,
        }
    }
}

impl FromStr for Shingle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<u8>()
            .ok()
            .and_then(Shingle::from_width)
            .ok_or_else(|| format!("shingle width must be 1, 2 or 3, got {s:?}"))
    }
}

/// Overlapping character n-grams of `s`; strings shorter than the width
/// fall back to their character set.
pub fn shingles(s: &str, shingle: Shingle) -> HashSet<&str> {
    let bounds: Vec<usize> = s.char_indices().map(|(i, _)| i).chain(std::iter::once(s.len())).collect();
    let chars = bounds.len() - 1;
    let n = if chars < shingle.width() { 1 } else { shingle.width() };
    (0..=chars.saturating_sub(n))
        .filter(|_| chars > 0)
        .map(|i| &s[bounds[i]..bounds[i + n]])
        .collect()
}

/// |S(a) ∩ S(b)| / |S(a) ∪ S(b)| over shingle sets; 1.0 when both are empty.
/// Larger means more similar.
pub fn jaccard_with(a: &str, b: &str, shingle: Shingle) -> f64 {
    let sa = shingles(a, shingle);
    let sb = shingles(b, shingle);
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    let inter = sa.intersection(&sb).count();
    inter as f64 / union as f64
}

/// Bigram Jaccard coefficient.
pub fn jaccard(a: &str, b: &str) -> f64 {
    jaccard_with(a, b, Shingle::Bigram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_cases() {
        assert_eq!(jaccard("paypal.com", "paypal.com"), 1.0);
        assert_eq!(jaccard("abc.com", "xyz.net"), 0.0);
        assert_eq!(jaccard("bank.com", "banc.com"), 5.0 / 9.0);
        assert_eq!(jaccard("", ""), 1.0);
        assert_eq!(jaccard("", "a"), 0.0);
    }

    #[test]
    fn short_strings_use_characters() {
        let s = shingles("a", Shingle::Bigram);
        assert_eq!(s.len(), 1);
        assert!(s.contains("a"));
        assert_eq!(shingles("ab", Shingle::Trigram).len(), 2);
        assert_eq!(shingles("aaaa", Shingle::Bigram).len(), 1);
        assert_eq!(shingles("żółw", Shingle::Bigram).len(), 3);
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(a in "[a-z.]{0,12}", b in "[a-z.]{0,12}") {
            let ab = jaccard(&a, &b);
            prop_assert_eq!(ab, jaccard(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(jaccard(&a, &a), 1.0);
        }
    }
}
