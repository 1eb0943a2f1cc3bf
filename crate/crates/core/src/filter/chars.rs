use serde::{Deserialize, Serialize};

/// Per-class character counts of one piece of text.
///
/// Classes are disjoint and cover every code point, so `total` is always the sum of
/// the other six fields.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharClassProfile {
    pub total: u64,
    pub cyrillic: u64,
    pub latin: u64,
    pub digits: u64,
    pub alphabetic_other: u64,
    pub non_alpha_non_ws: u64,
    pub whitespace: u64,
}

/// Character class of a single code point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharClass {
    Cyrillic,
    Latin,
    Digit,
    AlphabeticOther,
    Whitespace,
    Other,
}

/// Cyrillic and Cyrillic Supplement blocks.
pub fn is_cyrillic(c: char) -> bool {
    matches!(c, '\u{0400}'..='\u{052F}')
}

pub fn char_class(c: char) -> CharClass {
    if c.is_whitespace() {
        CharClass::Whitespace
    } else if c.is_ascii_digit() {
        CharClass::Digit
    } else if c.is_ascii_alphabetic() {
        CharClass::Latin
    } else if is_cyrillic(c) {
        CharClass::Cyrillic
    } else if c.is_alphabetic() {
        CharClass::AlphabeticOther
    } else {
        CharClass::Other
    }
}

pub fn classify_chars(text: &str) -> CharClassProfile {
    let mut p = CharClassProfile::default();
    for c in text.chars() {
        p.add(char_class(c));
    }
    p
}

impl CharClassProfile {
    fn add(&mut self, class: CharClass) {
        self.total += 1;
        match class {
            CharClass::Cyrillic => self.cyrillic += 1,
            CharClass::Latin => self.latin += 1,
            CharClass::Digit => self.digits += 1,
            CharClass::AlphabeticOther => self.alphabetic_other += 1,
            CharClass::Whitespace => self.whitespace += 1,
            CharClass::Other => self.non_alpha_non_ws += 1,
        }
    }

    /// Characters that count towards the table-level Cyrillic ratio.
    pub fn letters_and_digits(&self) -> u64 {
        self.cyrillic + self.latin + self.digits + self.alphabetic_other
    }

    /// A cell "with non-string data": any digit or any character that is neither a
    /// letter nor whitespace.
    pub fn is_nonstring(&self) -> bool {
        self.non_alpha_non_ws >= 1 || self.digits >= 1
    }

    /// Latin letters present and no letters of any other script.
    pub fn is_latin_only(&self) -> bool {
        self.latin > 0 && self.cyrillic == 0 && self.alphabetic_other == 0
    }

    /// Cyrillic letters present and no letters of any other script.
    pub fn is_cyrillic_only(&self) -> bool {
        self.cyrillic > 0 && self.latin == 0 && self.alphabetic_other == 0
    }
}

impl std::ops::AddAssign for CharClassProfile {
    fn add_assign(&mut self, o: Self) {
        self.total += o.total;
        self.cyrillic += o.cyrillic;
        self.latin += o.latin;
        self.digits += o.digits;
        self.alphabetic_other += o.alphabetic_other;
        self.non_alpha_non_ws += o.non_alpha_non_ws;
        self.whitespace += o.whitespace;
    }
}
