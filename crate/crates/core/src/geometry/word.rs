//! Freely reduced words over the generators `a_1^{±1}, …, a_k^{±1}` of a
//! free group.
//!
//! A letter is stored as `2 * generator + inverse_bit`, so the inverse of a
//! letter is `letter ^ 1`. Words are kept reduced at all times: every
//! constructor reduces its input, and right multiplication cancels at the
//! seam only.

use std::fmt;

use super::GeometryError;

/// Letter index: `2 * generator` for `a_i`, `2 * generator + 1` for `a_i⁻¹`.
pub type Letter = u8;

/// Largest supported rank (one lowercase ASCII letter per generator).
pub const MAX_RANK: u8 = 26;

#[inline]
pub fn inverse_letter(letter: Letter) -> Letter {
    letter ^ 1
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word {
    letters: Vec<Letter>,
}

impl Word {
    pub fn identity() -> Self {
        Self::default()
    }

    /// The generator `a_index` (or its inverse).
    pub fn generator(index: u8, inverse: bool) -> Self {
        Self {
            letters: vec![2 * index + u8::from(inverse)],
        }
    }

    /// Builds a word from arbitrary letters, freely reducing it.
    pub fn from_letters<I: IntoIterator<Item = Letter>>(letters: I) -> Self {
        let mut word = Self::identity();
        for letter in letters {
            word.push_letter(letter);
        }
        word
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Highest generator index used, if any.
    pub fn max_generator(&self) -> Option<u8> {
        self.letters.iter().map(|l| l / 2).max()
    }

    #[inline]
    fn push_letter(&mut self, letter: Letter) {
        if self.letters.last() == Some(&inverse_letter(letter)) {
            self.letters.pop();
        } else {
            self.letters.push(letter);
        }
    }

    /// `self ← self · rhs`, cancelling at the seam.
    #[inline]
    pub fn mul_assign_right(&mut self, rhs: &Word) {
        for &letter in &rhs.letters {
            self.push_letter(letter);
        }
    }

    pub fn mul(&self, rhs: &Word) -> Word {
        let mut out = self.clone();
        out.mul_assign_right(rhs);
        out
    }

    pub fn inverse(&self) -> Word {
        Word {
            letters: self.letters.iter().rev().map(|&l| inverse_letter(l)).collect(),
        }
    }

    /// Length of the longest common prefix; on the Cayley tree this is the
    /// Gromov product based at the identity.
    #[inline]
    pub fn common_prefix_len(&self, other: &Word) -> usize {
        self.letters
            .iter()
            .zip(&other.letters)
            .take_while(|(a, b)| a == b)
            .count()
    }

    /// Word metric distance `|self⁻¹ · other|`.
    #[inline]
    pub fn distance(&self, other: &Word) -> usize {
        self.len() + other.len() - 2 * self.common_prefix_len(other)
    }

    pub fn pow(&self, exponent: i64) -> Word {
        let base = if exponent < 0 { self.inverse() } else { self.clone() };
        let mut out = Word::identity();
        for _ in 0..exponent.unsigned_abs() {
            out.mul_assign_right(&base);
        }
        out
    }

    /// Parses the textual encoding: lowercase `a`–`z` for generators, either
    /// uppercase or a `⁻¹` / `^-1` suffix for inverses. `""` and `"1"` are the
    /// identity.
    pub fn parse(text: &str) -> Result<Word, GeometryError> {
        let text = text.trim();
        if text.is_empty() || text == "1" {
            return Ok(Word::identity());
        }
        let mut letters = Vec::new();
        let mut rest = text;
        while let Some(c) = rest.chars().next() {
            rest = &rest[c.len_utf8()..];
            let (generator, mut inverse) = match c {
                'a'..='z' => (c as u8 - b'a', false),
                'A'..='Z' => (c as u8 - b'A', true),
                _ => {
                    return Err(GeometryError::Parse(format!(
                        "unexpected character {c:?} in word {text:?}"
                    )))
                }
            };
            for suffix in ["⁻¹", "^-1"] {
                if let Some(stripped) = rest.strip_prefix(suffix) {
                    inverse = !inverse;
                    rest = stripped;
                    break;
                }
            }
            letters.push(2 * generator + u8::from(inverse));
        }
        Ok(Word::from_letters(letters))
    }

    /// All reduced words of length at most `max_len` in `F_rank`, shortest
    /// first.
    pub fn enumerate_ball(rank: u8, max_len: usize) -> Vec<Word> {
        let alphabet = 2 * rank;
        let mut out = vec![Word::identity()];
        let mut frontier = vec![Word::identity()];
        for _ in 0..max_len {
            let mut next = Vec::with_capacity(frontier.len() * (alphabet as usize - 1));
            for word in &frontier {
                for letter in 0..alphabet {
                    if word.letters.last() == Some(&inverse_letter(letter)) {
                        continue;
                    }
                    let mut longer = word.clone();
                    longer.letters.push(letter);
                    next.push(longer);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("1");
        }
        for &l in &self.letters {
            let base = if l & 1 == 0 { b'a' } else { b'A' };
            write!(f, "{}", (base + l / 2) as char)?;
        }
        Ok(())
    }
}
