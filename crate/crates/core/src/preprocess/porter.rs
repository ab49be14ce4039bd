//! Porter's 1980 suffix-stripping stemmer.
//!
//! This is the original algorithm, not Porter2/Snowball. Every character that
//! is not one of `a e i o u` (or a `y` following a consonant) is a consonant,
//! so digits and punctuation inside compound tokens such as `private-key`
//! take part in the measure computation like any other consonant.

/// Stems a lowercase word.
pub fn stem(word: &str) -> String {
    let mut w = Word::new(word);
    if w.chars.is_empty() {
        return String::new();
    }
    w.step1a();
    w.step1b();
    w.step1c();
    w.step2();
    w.step3();
    w.step4();
    w.step5a();
    w.step5b();
    w.chars.into_iter().collect()
}

/// Applies [`stem`] until the output stops changing.
///
/// Porter stemming is not idempotent (`agreed -> agre -> agr`); the tokenizer
/// uses the fixed point so that re-normalizing normalized text is a no-op.
pub fn stem_fixed_point(word: &str) -> String {
    let mut current = stem(word);
    loop {
        let next = stem(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

struct Word {
    chars: Vec<char>,
}

impl Word {
    fn new(word: &str) -> Self {
        Word {
            chars: word.chars().collect(),
        }
    }

    fn is_consonant(chars: &[char], i: usize) -> bool {
        match chars[i] {
            'a' | 'e' | 'i' | 'o' | 'u' => false,
            'y' => i == 0 || !Self::is_consonant(chars, i - 1),
            _ => true,
        }
    }

    /// Number of VC sequences in `stem`, i.e. m in `[C](VC)^m[V]`.
    fn measure(stem: &[char]) -> usize {
        let mut m = 0;
        let mut prev_vowel = false;
        for i in 0..stem.len() {
            let cons = Self::is_consonant(stem, i);
            if cons && prev_vowel {
                m += 1;
            }
            prev_vowel = !cons;
        }
        m
    }

    fn contains_vowel(stem: &[char]) -> bool {
        (0..stem.len()).any(|i| !Self::is_consonant(stem, i))
    }

    fn ends_double_consonant(stem: &[char]) -> bool {
        let n = stem.len();
        n >= 2 && stem[n - 1] == stem[n - 2] && Self::is_consonant(stem, n - 1)
    }

    /// `*o`: stem ends cvc, where the final c is not w, x or y.
    fn ends_cvc(stem: &[char]) -> bool {
        let n = stem.len();
        n >= 3
            && Self::is_consonant(stem, n - 3)
            && !Self::is_consonant(stem, n - 2)
            && Self::is_consonant(stem, n - 1)
            && !matches!(stem[n - 1], 'w' | 'x' | 'y')
    }

    fn ends_with(&self, suffix: &str) -> bool {
        let n = suffix.chars().count();
        self.chars.len() >= n && self.chars[self.chars.len() - n..].iter().copied().eq(suffix.chars())
    }

    fn stem_without(&self, suffix: &str) -> &[char] {
        &self.chars[..self.chars.len() - suffix.chars().count()]
    }

    fn replace_suffix(&mut self, suffix: &str, replacement: &str) {
        let keep = self.chars.len() - suffix.chars().count();
        self.chars.truncate(keep);
        self.chars.extend(replacement.chars());
    }

    /// Finds the first rule whose suffix matches; applies it when the stem
    /// has measure greater than `min_measure`. Only one rule is tried.
    fn apply_measure_rules(&mut self, rules: &[(&str, &str)], min_measure: usize) {
        for &(suffix, replacement) in rules {
            if self.ends_with(suffix) {
                if Self::measure(self.stem_without(suffix)) > min_measure {
                    self.replace_suffix(suffix, replacement);
                }
                return;
            }
        }
    }

    fn step1a(&mut self) {
        if self.ends_with("sses") {
            self.replace_suffix("sses", "ss");
        } else if self.ends_with("ies") {
            self.replace_suffix("ies", "i");
        } else if self.ends_with("ss") {
        } else if self.ends_with("s") {
            self.replace_suffix("s", "");
        }
    }

    fn step1b(&mut self) {
        if self.ends_with("eed") {
            if Self::measure(self.stem_without("eed")) > 0 {
                self.replace_suffix("eed", "ee");
            }
            return;
        }
        let removed = if self.ends_with("ed") && Self::contains_vowel(self.stem_without("ed")) {
            self.replace_suffix("ed", "");
            true
        } else if self.ends_with("ing") && Self::contains_vowel(self.stem_without("ing")) {
            self.replace_suffix("ing", "");
            true
        } else {
            false
        };
        if !removed {
            return;
        }
        if self.ends_with("at") {
            self.replace_suffix("at", "ate");
        } else if self.ends_with("bl") {
            self.replace_suffix("bl", "ble");
        } else if self.ends_with("iz") {
            self.replace_suffix("iz", "ize");
        } else if Self::ends_double_consonant(&self.chars)
            && !matches!(self.chars.last(), Some('l' | 's' | 'z'))
        {
            self.chars.pop();
        } else if Self::measure(&self.chars) == 1 && Self::ends_cvc(&self.chars) {
            self.chars.push('e');
        }
    }

    fn step1c(&mut self) {
        if self.ends_with("y") && Self::contains_vowel(self.stem_without("y")) {
            self.replace_suffix("y", "i");
        }
    }

    fn step2(&mut self) {
        const RULES: &[(&str, &str)] = &[
            ("ational", "ate"),
            ("tional", "tion"),
            ("enci", "ence"),
            ("anci", "ance"),
            ("izer", "ize"),
            ("abli", "able"),
            ("alli", "al"),
            ("entli", "ent"),
            ("eli", "e"),
            ("ousli", "ous"),
            ("ization", "ize"),
            ("ation", "ate"),
            ("ator", "ate"),
            ("alism", "al"),
            ("iveness", "ive"),
            ("fulness", "ful"),
            ("ousness", "ous"),
            ("aliti", "al"),
            ("iviti", "ive"),
            ("biliti", "ble"),
        ];
        self.apply_longest(RULES, 0);
    }

    fn step3(&mut self) {
        const RULES: &[(&str, &str)] = &[
            ("icate", "ic"),
            ("ative", ""),
            ("alize", "al"),
            ("iciti", "ic"),
            ("ical", "ic"),
            ("ful", ""),
            ("ness", ""),
        ];
        self.apply_longest(RULES, 0);
    }

    fn step4(&mut self) {
        const RULES: &[&str] = &[
            "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion",
            "ou", "ism", "ate", "iti", "ous", "ive", "ize",
        ];
        let Some(suffix) = RULES
            .iter()
            .filter(|s| self.ends_with(s))
            .max_by_key(|s| s.len())
        else {
            return;
        };
        let stem = self.stem_without(suffix);
        let ok = Self::measure(stem) > 1
            && (*suffix != "ion" || matches!(stem.last(), Some('s' | 't')));
        if ok {
            self.replace_suffix(suffix, "");
        }
    }

    fn step5a(&mut self) {
        if !self.ends_with("e") {
            return;
        }
        let stem = self.stem_without("e");
        let m = Self::measure(stem);
        if m > 1 || (m == 1 && !Self::ends_cvc(stem)) {
            self.chars.pop();
        }
    }

    fn step5b(&mut self) {
        if Self::measure(&self.chars) > 1
            && Self::ends_double_consonant(&self.chars)
            && self.chars.last() == Some(&'l')
        {
            self.chars.pop();
        }
    }

    /// The longest matching suffix decides; a failed condition means no
    /// other rule of the step is tried.
    fn apply_longest(&mut self, rules: &[(&str, &str)], min_measure: usize) {
        let best = rules
            .iter()
            .filter(|(s, _)| self.ends_with(s))
            .max_by_key(|(s, _)| s.len())
            .copied();
        if let Some(rule) = best {
            self.apply_measure_rules(&[rule], min_measure);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference stems from the original-algorithm mode of a widely used
    // Python implementation.
    const CANONICAL: &[(&str, &str)] = &[
        ("caresses", "caress"),
        ("ponies", "poni"),
        ("ties", "ti"),
        ("caress", "caress"),
        ("cats", "cat"),
        ("feed", "feed"),
        ("agreed", "agre"),
        ("plastered", "plaster"),
        ("bled", "bled"),
        ("motoring", "motor"),
        ("sing", "sing"),
        ("conflated", "conflat"),
        ("troubled", "troubl"),
        ("sized", "size"),
        ("hopping", "hop"),
        ("tanned", "tan"),
        ("falling", "fall"),
        ("hissing", "hiss"),
        ("fizzed", "fizz"),
        ("failing", "fail"),
        ("filing", "file"),
        ("happy", "happi"),
        ("relational", "relat"),
        ("conditional", "condit"),
        ("generalization", "gener"),
        ("hopefulness", "hope"),
        ("triplicate", "triplic"),
        ("adjustment", "adjust"),
        ("controlling", "control"),
        ("generalizations", "gener"),
    ];

    #[test]
    fn canonical_vector() {
        for (word, expected) in CANONICAL {
            assert_eq!(stem(word), *expected, "stem({word})");
        }
    }

    #[test]
    fn attack_variants_collapse() {
        assert_eq!(stem("attacks"), "attack");
        assert_eq!(stem("attack"), "attack");
    }

    #[test]
    fn compound_tokens() {
        assert_eq!(stem("private-key"), "private-kei");
        assert_eq!(stem("x.509"), "x.509");
        assert_eq!(stem("sql-injection"), "sql-inject");
    }

    #[test]
    fn fixed_point_settles() {
        assert_eq!(stem("agreed"), "agre");
        assert_eq!(stem_fixed_point("agreed"), "agr");
        assert_eq!(stem(""), "");
    }
}
