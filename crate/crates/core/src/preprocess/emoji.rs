// Emoji detection over a fixed codepoint table.

const EMOJI_RANGES: &[(u32, u32)] = &[
    (0x231A, 0x231B),   // watch, hourglass
    (0x23E9, 0x23F3),   // media controls
    (0x2600, 0x26FF),   // miscellaneous symbols
    (0x2700, 0x27BF),   // dingbats
    (0x2B50, 0x2B55),   // star, circles
    (0x1F004, 0x1F004), // mahjong red dragon
    (0x1F0CF, 0x1F0CF), // joker
    (0x1F1E6, 0x1F1FF), // regional indicators (flags)
    (0x1F300, 0x1F5FF), // symbols & pictographs
    (0x1F600, 0x1F64F), // emoticons
    (0x1F680, 0x1F6FF), // transport & map
    (0x1F900, 0x1F9FF), // supplemental symbols & pictographs
    (0x1FA70, 0x1FAFF), // symbols & pictographs extended-A
];

const ZWJ: char = '\u{200D}';

fn in_table(c: char) -> bool {
    let cp = c as u32;
    EMOJI_RANGES.iter().any(|&(lo, hi)| (lo..=hi).contains(&cp))
}

pub fn is_regional_indicator(c: char) -> bool {
    (0x1F1E6..=0x1F1FF).contains(&(c as u32))
}

/// Skin-tone modifiers, variation selectors and the keycap combiner attach to
/// the preceding emoji.
pub fn is_modifier(c: char) -> bool {
    matches!(c as u32, 0xFE0E | 0xFE0F | 0x20E3 | 0x1F3FB..=0x1F3FF)
}

/// Codepoints that only make sense inside an emoji sequence.
pub fn is_joiner_or_modifier(c: char) -> bool {
    c == ZWJ || is_modifier(c)
}

pub fn is_emoji_start(c: char) -> bool {
    in_table(c) && !is_modifier(c)
}

/// True if `c` is any codepoint from the emoji table (including modifiers).
pub fn is_emoji_codepoint(c: char) -> bool {
    in_table(c) || is_joiner_or_modifier(c)
}

/// Length in chars of the emoji sequence starting at `chars[start]`, or 0 if
/// no emoji starts there. Flags are regional-indicator pairs; other emoji
/// absorb trailing modifiers and ZWJ-joined continuations.
pub fn emoji_len(chars: &[char], start: usize) -> usize {
    let Some(&first) = chars.get(start) else {
        return 0;
    };
    if !is_emoji_start(first) {
        return 0;
    }
    if is_regional_indicator(first) {
        return match chars.get(start + 1) {
            Some(&c) if is_regional_indicator(c) => 2,
            _ => 1,
        };
    }
    let mut end = start + 1;
    loop {
        match chars.get(end) {
            Some(&c) if is_modifier(c) => end += 1,
            Some(&ZWJ) => match chars.get(end + 1) {
                Some(&next) if is_emoji_start(next) => end += 2,
                _ => {
                    end += 1;
                    break;
                }
            },
            _ => break,
        }
    }
    end - start
}
