//! Tokenizers for intents and code.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenMode {
    NaturalLanguage,
    Code,
}

/// Intent tokenization: lowercase, split on whitespace and punctuation,
/// punctuation kept as single-character tokens.
pub fn tokenize_nl(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            word.extend(c.to_lowercase());
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

const MULTI_CHAR_OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", "**=", "//=", "...", ">>>", "->", "::", "==", "!=", "<=", ">=", "&&",
    "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "**", "//", "<<", ">>",
];

/// Code tokenization: case preserved; identifiers, numbers and string
/// literals are single tokens; operators, brackets and dots are split out.
pub fn tokenize_code(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_alphabetic() || c == '_' || c == '$' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            // string prefix such as r'..' or b"..": keep with the literal
            if i < chars.len()
                && (chars[i] == '\'' || chars[i] == '"')
                && i - start <= 2
                && chars[start..i].iter().all(|c| "rRbBuUfF".contains(*c))
            {
                i = scan_string(&chars, i);
            }
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let exponent_sign = (d == '+' || d == '-') && matches!(chars[i - 1], 'e' | 'E') && !is_hex(&chars[start..i]);
                if d.is_ascii_alphanumeric() || d == '.' || d == '_' || exponent_sign {
                    i += 1;
                } else {
                    break;
                }
            }
        } else if c == '"' || c == '\'' {
            i = scan_string(&chars, i);
        } else {
            let rest: String = chars[i..chars.len().min(i + 4)].iter().collect();
            let op_len = MULTI_CHAR_OPERATORS
                .iter()
                .find(|op| rest.starts_with(*op))
                .map(|op| op.chars().count())
                .unwrap_or(1);
            i += op_len;
        }
        tokens.push(chars[start..i].iter().collect());
    }
    tokens
}

fn is_hex(chars: &[char]) -> bool {
    chars.len() > 1 && chars[0] == '0' && matches!(chars[1], 'x' | 'X')
}

/// Returns the index just past the string literal starting at `i`.
/// An unterminated literal runs to the end of its line.
fn scan_string(chars: &[char], i: usize) -> usize {
    let q = chars[i];
    let triple = chars.get(i + 1) == Some(&q) && chars.get(i + 2) == Some(&q);
    let mut j = if triple { i + 3 } else { i + 1 };
    while j < chars.len() {
        let c = chars[j];
        if c == '\\' {
            j += 2;
            continue;
        }
        if !triple && c == '\n' {
            return j;
        }
        if c == q {
            if !triple {
                return j + 1;
            }
            if chars.get(j + 1) == Some(&q) && chars.get(j + 2) == Some(&q) {
                return j + 3;
            }
        }
        j += 1;
    }
    chars.len()
}

pub fn tokenize(text: &str, mode: TokenMode) -> Vec<String> {
    match mode {
        TokenMode::NaturalLanguage => tokenize_nl(text),
        TokenMode::Code => tokenize_code(text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn nl_title() {
        assert_eq!(
            tokenize_nl("Removing duplicates in lists"),
            toks(&["removing", "duplicates", "in", "lists"])
        );
        assert_eq!(tokenize_nl("List<Integer> to int[]?"), toks(&["list", "<", "integer", ">", "to", "int", "[", "]", "?"]));
    }

    #[test]
    fn code_call() {
        assert_eq!(tokenize_code("list(set(t))"), toks(&["list", "(", "set", "(", "t", ")", ")"]));
    }

    #[test]
    fn empty() {
        assert!(tokenize_nl("").is_empty());
        assert!(tokenize_code("").is_empty());
    }

    #[test]
    fn code_literals_and_operators() {
        assert_eq!(
            tokenize_code("x = re.sub('[!@#$]', '', line) # c"),
            toks(&["x", "=", "re", ".", "sub", "(", "'[!@#$]'", ",", "''", ",", "line", ")", "#", "c"])
        );
        assert_eq!(tokenize_code("a >= 1.5e-3"), toks(&["a", ">=", "1.5e-3"]));
        assert_eq!(tokenize_code("i -> i"), toks(&["i", "->", "i"]));
        assert_eq!(tokenize_code("0x1F-2"), toks(&["0x1F", "-", "2"]));
        assert_eq!(tokenize_code("s = r\"a\\\"b\""), toks(&["s", "=", "r\"a\\\"b\""]));
        assert_eq!(tokenize_code("'''doc\nstring'''"), toks(&["'''doc\nstring'''"]));
    }

    #[test]
    fn case_preserved_in_code() {
        assert_eq!(tokenize_code("ArrayUtils.toPrimitive"), toks(&["ArrayUtils", ".", "toPrimitive"]));
    }
}
