//! The deterministic rename sequence used by ProGuard-family obfuscators and
//! the matching of observed identifiers against it.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NameError {
    #[error("cannot match an empty name scope")]
    EmptyScope,
    #[error("rename alphabet must contain at least two distinct, non-empty symbols")]
    BadAlphabet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphabetMode {
    MixedCase,
    LowerCase,
}

/// Ordered symbol list that names are built from. The built-in alphabets use
/// single characters; a custom word list may use longer symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenameAlphabet {
    mode: Option<AlphabetMode>,
    digits: Vec<String>,
    single_char: bool,
}

const LOWER: &str = "abcdefghijklmnopqrstuvwxyz";
const UPPER: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";

impl RenameAlphabet {
    pub fn mixed_case() -> Self {
        Self::from_chars(Some(AlphabetMode::MixedCase), LOWER.chars().chain(UPPER.chars()))
    }

    pub fn lower_case() -> Self {
        Self::from_chars(Some(AlphabetMode::LowerCase), LOWER.chars())
    }

    pub fn for_mode(mode: AlphabetMode) -> Self {
        match mode {
            AlphabetMode::MixedCase => Self::mixed_case(),
            AlphabetMode::LowerCase => Self::lower_case(),
        }
    }

    /// A user-supplied symbol sequence (obfuscation dictionary).
    pub fn custom<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Result<Self, NameError> {
        let digits: Vec<String> = words.into_iter().map(Into::into).collect();
        let unique: HashSet<&str> = digits.iter().map(String::as_str).collect();
        if digits.len() < 2 || unique.len() != digits.len() || digits.iter().any(String::is_empty) {
            return Err(NameError::BadAlphabet);
        }
        let single_char = digits.iter().all(|d| d.chars().count() == 1);
        Ok(RenameAlphabet {
            mode: None,
            digits,
            single_char,
        })
    }

    fn from_chars(mode: Option<AlphabetMode>, chars: impl Iterator<Item = char>) -> Self {
        RenameAlphabet {
            mode,
            digits: chars.map(String::from).collect(),
            single_char: true,
        }
    }

    /// `None` for custom word lists.
    pub fn mode(&self) -> Option<AlphabetMode> {
        self.mode
    }

    pub fn digits(&self) -> &[String] {
        &self.digits
    }

    fn radix(&self) -> u128 {
        self.digits.len() as u128
    }

    /// Index of `name` in the sequence, if it belongs to it. Only defined
    /// for single-character alphabets, where decomposition is unambiguous.
    fn rank(&self, name: &str) -> Option<u128> {
        if !self.single_char || name.is_empty() {
            return None;
        }
        let k = self.radix();
        let mut value: u128 = 0;
        let mut len = 0u32;
        for ch in name.chars() {
            let digit = self.digits.iter().position(|d| d.starts_with(ch))? as u128;
            value = value.checked_mul(k)?.checked_add(digit)?;
            len += 1;
        }
        // Offset by the count of all shorter names: k + k^2 + ... + k^(len-1).
        let mut shorter: u128 = 0;
        let mut pow: u128 = 1;
        for _ in 1..len {
            pow = pow.checked_mul(k)?;
            shorter = shorter.checked_add(pow)?;
        }
        shorter.checked_add(value)
    }
}

/// The n-th (0-based) name in bijective-numeral order: every length-1 name in
/// digit order, then every length-2 name lexicographically, and so on.
pub fn nth_name(alphabet: &RenameAlphabet, n: u64) -> String {
    let k = alphabet.radix();
    let mut rest = n as u128;
    let mut len = 1u32;
    let mut block = k;
    while rest >= block {
        rest -= block;
        len += 1;
        block *= k;
    }
    let mut out = vec![0usize; len as usize];
    for slot in out.iter_mut().rev() {
        *slot = (rest % k) as usize;
        rest /= k;
    }
    out.iter().map(|&d| alphabet.digits[d].as_str()).collect()
}

/// The first `k` names of the sequence.
pub fn generated_prefix(alphabet: &RenameAlphabet, k: usize) -> BTreeSet<String> {
    (0..k as u64).map(|i| nth_name(alphabet, i)).collect()
}

/// True if `name` is among the first `k` names of the sequence.
pub fn in_prefix(alphabet: &RenameAlphabet, name: &str, k: usize) -> bool {
    if alphabet.single_char {
        alphabet.rank(name).is_some_and(|r| r < k as u128)
    } else {
        (0..k as u64).any(|i| nth_name(alphabet, i) == name)
    }
}

/// Number of `names` found among the first `names.len()` generated names.
pub fn count_matches<'a>(names: impl IntoIterator<Item = &'a str>, alphabet: &RenameAlphabet) -> (usize, usize) {
    let distinct: BTreeSet<&str> = names.into_iter().collect();
    let k = distinct.len();
    if alphabet.single_char {
        let hits = distinct.iter().filter(|n| in_prefix(alphabet, n, k)).count();
        (hits, k)
    } else {
        let prefix = generated_prefix(alphabet, k);
        let hits = distinct.iter().filter(|n| prefix.contains(**n)).count();
        (hits, k)
    }
}

/// Fraction of a name scope that coincides with the generated prefix of the
/// same size.
pub fn match_scope<'a>(
    names: impl IntoIterator<Item = &'a str>,
    alphabet: &RenameAlphabet,
) -> Result<f64, NameError> {
    let (hits, total) = count_matches(names, alphabet);
    if total == 0 {
        return Err(NameError::EmptyScope);
    }
    Ok(hits as f64 / total as f64)
}

/// Reserved device names of the Windows file system, used as class names by
/// some commercial obfuscators so that the classes cannot be extracted there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowsKeywordSet {
    keywords: BTreeSet<String>,
}

impl Default for WindowsKeywordSet {
    fn default() -> Self {
        let mut keywords: BTreeSet<String> =
            ["AUX", "NUL", "CON", "PRN"].iter().map(|s| s.to_string()).collect();
        for i in 1..=9 {
            keywords.insert(format!("COM{i}"));
            keywords.insert(format!("LPT{i}"));
        }
        WindowsKeywordSet { keywords }
    }
}

impl WindowsKeywordSet {
    pub fn new<S: AsRef<str>>(keywords: impl IntoIterator<Item = S>) -> Self {
        WindowsKeywordSet {
            keywords: keywords.into_iter().map(|k| k.as_ref().to_uppercase()).collect(),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.keywords.contains(&name.to_uppercase())
    }
}

pub fn is_windows_keyword(name: &str, keywords: &WindowsKeywordSet) -> bool {
    keywords.contains(name)
}
