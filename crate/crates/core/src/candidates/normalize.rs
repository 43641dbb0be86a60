use crate::types::Language;

/// Strips one interpreter prompt from the start of `line`, if present.
fn strip_prompt<'a>(line: &'a str, language: &Language) -> Option<&'a str> {
    for prompt in [">>> ", "... "] {
        if let Some(rest) = line.strip_prefix(prompt) {
            return Some(rest);
        }
    }
    if line == ">>>" || line == "..." && language.is_indentation_sensitive() {
        return Some("");
    }
    if let Some(rest) = strip_ipython(line) {
        return Some(rest);
    }
    if language.as_str() == "java" {
        if let Some(rest) = line.strip_prefix("jshell> ") {
            return Some(rest);
        }
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix("...> ") {
            return Some(rest);
        }
    }
    None
}

/// `In [12]: ` and `Out[3]: ` style prompts.
fn strip_ipython(line: &str) -> Option<&str> {
    let rest = line
        .strip_prefix("In")
        .or_else(|| line.strip_prefix("Out"))?;
    let rest = rest.strip_prefix(' ').unwrap_or(rest);
    let rest = rest.strip_prefix('[')?;
    let close = rest.find(']')?;
    if !rest[..close].chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let rest = rest[close + 1..].strip_prefix(':')?;
    Some(rest.strip_prefix(' ').unwrap_or(rest))
}

/// Removes leading interpreter prompts from every line. Prompts are stripped
/// repeatedly, so applying the function twice gives the same text.
pub fn normalize_snippet(text: &str, language: &Language) -> String {
    text.split('\n')
        .map(|line| {
            let mut current = line;
            while let Some(rest) = strip_prompt(current, language) {
                if rest.len() == current.len() {
                    break;
                }
                current = rest;
            }
            current
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn py() -> Language {
        Language::new("python")
    }

    #[test]
    fn python_prompt() {
        assert_eq!(normalize_snippet(">>> t = list(set(t))", &py()), "t = list(set(t))");
    }

    #[test]
    fn no_prompt() {
        assert_eq!(normalize_snippet("x = 1", &py()), "x = 1");
    }

    #[test]
    fn ipython_prompts() {
        assert_eq!(normalize_snippet("In [3]: a.append(b)", &py()), "a.append(b)");
        assert_eq!(normalize_snippet("Out[3]: [1, 2]", &py()), "[1, 2]");
        assert_eq!(normalize_snippet("In[12]: x", &py()), "x");
        assert_eq!(normalize_snippet("Index [3]: x", &py()), "Index [3]: x");
    }

    #[test]
    fn continuation_lines() {
        let text = ">>> for x in y:\n...     print(x)\n>>>";
        assert_eq!(normalize_snippet(text, &py()), "for x in y:\n    print(x)\n");
    }

    #[test]
    fn jshell_prompt() {
        let java = Language::new("java");
        assert_eq!(normalize_snippet("jshell> int x = 1;", &java), "int x = 1;");
    }

    proptest! {
        #[test]
        fn idempotent(lines in prop::collection::vec(
            prop_oneof![
                Just(">>> ".to_string()), Just("... ".to_string()), Just("In [1]: ".to_string()),
                Just("Out[2]: ".to_string()), Just("jshell> ".to_string()), "[a-z =()\\[\\]>.]{0,12}",
            ], 1..8)
        ) {
            let text = lines.concat();
            for lang in ["python", "java"] {
                let lang = Language::new(lang);
                let once = normalize_snippet(&text, &lang);
                prop_assert_eq!(normalize_snippet(&once, &lang), once);
            }
        }
    }
}
