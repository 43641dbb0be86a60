//! Syntactic validity checks for candidate snippets.

use std::io::Write;
use std::process::{Command, Stdio};

use crate::types::Language;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Invalid,
    Unknown,
}

pub trait SnippetValidator: Send + Sync {
    /// `Err` means the validator itself failed on this input.
    fn validate(&self, text: &str) -> Result<Validity, String>;
}

/// Accepts everything; used for ablations.
#[derive(Debug, Clone, Copy, Default)]
pub struct AcceptAll;

impl SnippetValidator for AcceptAll {
    fn validate(&self, _text: &str) -> Result<Validity, String> {
        Ok(Validity::Valid)
    }
}

/// Pipes the snippet through a user-configured parser command.
///
/// The template is run with `sh -c` after `{file}` is replaced by the path of
/// a temporary file holding the snippet. Exit status 0 means valid.
#[derive(Debug, Clone)]
pub struct ExternalCommand {
    template: String,
    suffix: String,
}

impl ExternalCommand {
    pub fn new(template: impl Into<String>, language: &Language) -> Self {
        let suffix = match language.as_str() {
            "java" => ".java",
            l if Language::new(l).is_indentation_sensitive() => ".py",
            _ => ".txt",
        };
        ExternalCommand {
            template: template.into(),
            suffix: suffix.to_string(),
        }
    }
}

impl SnippetValidator for ExternalCommand {
    fn validate(&self, text: &str) -> Result<Validity, String> {
        let mut file = tempfile::Builder::new()
            .prefix("snippet")
            .suffix(&self.suffix)
            .tempfile()
            .map_err(|e| e.to_string())?;
        file.write_all(text.as_bytes()).map_err(|e| e.to_string())?;
        file.flush().map_err(|e| e.to_string())?;
        let path = file.path().to_string_lossy().into_owned();
        let command = self.template.replace("{file}", &shell_quote(&path));
        let status = Command::new("sh")
            .arg("-c")
            .arg(&command)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .map_err(|e| format!("cannot run validator: {e}"))?;
        match status.code() {
            Some(0) => Ok(Validity::Valid),
            Some(_) => Ok(Validity::Invalid),
            None => Err("validator terminated by signal".into()),
        }
    }
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Dependency-free structural check: balanced brackets and quotes, no
/// dangling block opener at the end, and (for indentation-sensitive
/// languages) consistent indentation.
#[derive(Debug, Clone)]
pub struct Structural {
    indentation_sensitive: bool,
}

impl Structural {
    pub fn new(language: &Language) -> Self {
        Structural {
            indentation_sensitive: language.is_indentation_sensitive(),
        }
    }
}

/// One physical line after lexing: code with strings and comments blanked,
/// plus the bracket depth at the start of the line.
#[derive(Debug)]
struct LexedLine {
    code: String,
    depth_before: usize,
    in_string_before: bool,
}

#[derive(Debug, PartialEq)]
enum LexError {
    Unbalanced,
    UnterminatedString,
}

fn lex(text: &str, python: bool) -> Result<Vec<LexedLine>, LexError> {
    let chars: Vec<char> = text.chars().collect();
    let mut lines = Vec::new();
    let mut stack: Vec<char> = Vec::new();
    let mut code = String::new();
    let mut line_depth = 0;
    let mut line_in_string = false;
    // Some((quote char, triple)) while inside a string
    let mut string: Option<(char, bool)> = None;
    let mut block_comment = false;
    let mut i = 0;

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            if let Some((_, false)) = string {
                if !(python && code.ends_with('\\')) {
                    return Err(LexError::UnterminatedString);
                }
            }
            lines.push(LexedLine {
                code: std::mem::take(&mut code),
                depth_before: line_depth,
                in_string_before: line_in_string,
            });
            line_depth = stack.len();
            line_in_string = string.is_some() || block_comment;
            i += 1;
            continue;
        }
        if block_comment {
            if c == '*' && chars.get(i + 1) == Some(&'/') {
                block_comment = false;
                i += 2;
            } else {
                i += 1;
            }
            continue;
        }
        if let Some((q, triple)) = string {
            if c == '\\' {
                code.push(' ');
                i += 2;
                continue;
            }
            if c == q {
                if !triple {
                    string = None;
                    code.push(q);
                    i += 1;
                    continue;
                }
                if chars.get(i + 1) == Some(&q) && chars.get(i + 2) == Some(&q) {
                    string = None;
                    code.push(q);
                    i += 3;
                    continue;
                }
            }
            i += 1;
            continue;
        }
        match c {
            '#' if python => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '/' if !python && chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '/' if !python && chars.get(i + 1) == Some(&'*') => {
                block_comment = true;
                i += 2;
                continue;
            }
            '"' | '\'' => {
                let triple = chars.get(i + 1) == Some(&c) && chars.get(i + 2) == Some(&c);
                // Java char literals and Python strings behave alike here
                if triple && (python || c == '"') {
                    string = Some((c, true));
                    i += 3;
                } else {
                    string = Some((c, false));
                    i += 1;
                }
                code.push(c);
                continue;
            }
            '(' | '[' | '{' => stack.push(c),
            ')' | ']' | '}' => {
                let open = match c {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                if stack.pop() != Some(open) {
                    return Err(LexError::Unbalanced);
                }
            }
            _ => {}
        }
        code.push(c);
        i += 1;
    }
    if string.is_some() || block_comment {
        return Err(LexError::UnterminatedString);
    }
    if !stack.is_empty() {
        return Err(LexError::Unbalanced);
    }
    lines.push(LexedLine {
        code,
        depth_before: line_depth,
        in_string_before: line_in_string,
    });
    Ok(lines)
}

fn first_word(code: &str) -> &str {
    code.trim_start()
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .next()
        .unwrap_or("")
}

const PY_CONTINUATION_KEYWORDS: &[&str] = &["else", "elif", "except", "finally"];
const JAVA_HEADERS: &[&str] = &["if", "for", "while", "else", "do", "try", "switch", "synchronized"];
const TRAILING_OPERATORS: &[&str] = &[
    "+", "-", "*", "/", "%", "=", "&&", "||", "&", "|", "^", "<", ">", ".", ",", "!", "~", "?",
];

fn leading_indent(line: &str) -> usize {
    line.chars().take_while(|c| *c == ' ' || *c == '\t').map(|c| if c == '\t' { 8 } else { 1 }).sum()
}

impl Structural {
    fn check(&self, text: &str) -> Validity {
        if text.trim().is_empty() {
            return Validity::Invalid;
        }
        let python = self.indentation_sensitive;
        let lines = match lex(text, python) {
            Ok(lines) => lines,
            Err(_) => return Validity::Invalid,
        };
        // statement-starting lines: not inside brackets, strings, or a continuation
        let mut statements: Vec<&LexedLine> = Vec::new();
        let mut continued = false;
        for line in &lines {
            let starts_statement = line.depth_before == 0 && !line.in_string_before && !continued;
            let code = line.code.trim_end();
            continued = python && code.ends_with('\\');
            if starts_statement && !code.trim().is_empty() {
                statements.push(line);
            }
        }
        let Some(last) = lines.iter().rev().find(|l| !l.code.trim().is_empty()) else {
            // only comments
            return Validity::Invalid;
        };
        let last_code = last.code.trim();
        if TRAILING_OPERATORS
            .iter()
            .any(|op| last_code.ends_with(op) && !(python && *op == ","))
            || last_code.ends_with('\\')
        {
            return Validity::Invalid;
        }

        if python {
            if last_code.ends_with(':') && last.depth_before == 0 {
                return Validity::Invalid;
            }
            self.check_python_indentation(&statements)
        } else {
            let last_stmt = statements.last().map(|l| l.code.trim()).unwrap_or("");
            let word = first_word(last_stmt);
            let dangling = JAVA_HEADERS.contains(&word)
                && !last_stmt.ends_with(';')
                && !last_stmt.ends_with('}')
                && std::ptr::eq(*statements.last().unwrap(), last);
            if dangling {
                Validity::Invalid
            } else {
                Validity::Valid
            }
        }
    }

    fn check_python_indentation(&self, statements: &[&LexedLine]) -> Validity {
        let base = statements.iter().map(|l| leading_indent(&l.code)).min().unwrap_or(0);
        let mut levels: Vec<usize> = vec![0];
        let mut expect_indent = false;
        let mut seen_at_level: Vec<bool> = vec![false];
        for line in statements {
            let indent = leading_indent(&line.code) - base;
            let code = line.code.trim();
            let top = *levels.last().unwrap();
            if expect_indent {
                if indent <= top {
                    return Validity::Invalid;
                }
                levels.push(indent);
                seen_at_level.push(false);
            } else if indent > top {
                return Validity::Invalid;
            } else if indent < top {
                while *levels.last().unwrap() > indent {
                    levels.pop();
                    seen_at_level.pop();
                }
                if *levels.last().unwrap() != indent {
                    return Validity::Invalid;
                }
            }
            let word = first_word(code);
            if PY_CONTINUATION_KEYWORDS.contains(&word) && !*seen_at_level.last().unwrap() {
                return Validity::Invalid;
            }
            *seen_at_level.last_mut().unwrap() = true;
            expect_indent = code.ends_with(':');
        }
        if expect_indent {
            Validity::Invalid
        } else {
            Validity::Valid
        }
    }
}

impl SnippetValidator for Structural {
    fn validate(&self, text: &str) -> Result<Validity, String> {
        Ok(self.check(text))
    }
}
