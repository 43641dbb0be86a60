//! Display code block extraction from post HTML.
//!
//! Only `<pre><code>` pairs are treated as code. Inline `<code>` spans and
//! everything else in the body are ignored.

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    pub blocks: Vec<Vec<String>>,
    /// Unbalanced or unexpected tags that forced a block boundary.
    pub warnings: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TagKind {
    PreOpen,
    PreClose,
    CodeOpen,
    CodeClose,
    Other,
}

struct Tag {
    kind: TagKind,
    start: usize,
    end: usize,
}

/// Finds the next tag at or after `from`. Returns `None` when no `<` starts
/// a well-formed tag in the rest of the input.
fn next_tag(html: &str, from: usize) -> Option<Tag> {
    let bytes = html.as_bytes();
    let mut pos = from;
    while let Some(off) = html[pos..].find('<') {
        let start = pos + off;
        let close_off = html[start..].find('>')?;
        let end = start + close_off + 1;
        let inner = &html[start + 1..end - 1];
        let (closing, name_part) = match inner.strip_prefix('/') {
            Some(rest) => (true, rest),
            None => (false, inner),
        };
        let name: String = name_part
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        if name.is_empty() && !closing && bytes.get(start + 1) != Some(&b'!') {
            // a stray '<' in text, not a tag
            pos = start + 1;
            continue;
        }
        let kind = match (name.as_str(), closing) {
            ("pre", false) => TagKind::PreOpen,
            ("pre", true) => TagKind::PreClose,
            ("code", false) => TagKind::CodeOpen,
            ("code", true) => TagKind::CodeClose,
            _ => TagKind::Other,
        };
        return Some(Tag { kind, start, end });
    }
    None
}

fn finish_block(raw: &str, blocks: &mut Vec<Vec<String>>) {
    let decoded = html_escape::decode_html_entities(raw);
    let text = decoded.strip_suffix('\n').unwrap_or(&decoded);
    if text.trim().is_empty() {
        return;
    }
    blocks.push(text.split('\n').map(str::to_owned).collect());
}

pub fn extract_code_blocks_with_warnings(body_html: &str) -> Extraction {
    let mut out = Extraction::default();
    let mut pos = 0;
    while let Some(tag) = next_tag(body_html, pos) {
        pos = tag.end;
        if tag.kind != TagKind::PreOpen {
            continue;
        }
        // a display block is <pre ...> followed by <code ...> with only whitespace between
        let Some(code) = next_tag(body_html, pos) else { break };
        if code.kind != TagKind::CodeOpen || !body_html[pos..code.start].trim().is_empty() {
            continue;
        }
        let content_start = code.end;
        let mut cursor = content_start;
        loop {
            match next_tag(body_html, cursor) {
                Some(t) if t.kind == TagKind::CodeClose => {
                    finish_block(&body_html[content_start..t.start], &mut out.blocks);
                    pos = t.end;
                    match next_tag(body_html, pos) {
                        Some(p) if p.kind == TagKind::PreClose
                            && body_html[pos..p.start].trim().is_empty() =>
                        {
                            pos = p.end
                        }
                        _ => out.warnings += 1,
                    }
                    break;
                }
                Some(t) if matches!(t.kind, TagKind::PreClose | TagKind::PreOpen | TagKind::CodeOpen) => {
                    // unbalanced: close the block at the next recognized tag
                    out.warnings += 1;
                    finish_block(&body_html[content_start..t.start], &mut out.blocks);
                    pos = if t.kind == TagKind::PreClose { t.end } else { t.start };
                    break;
                }
                Some(t) => cursor = t.end,
                None => {
                    out.warnings += 1;
                    finish_block(&body_html[content_start..], &mut out.blocks);
                    pos = body_html.len();
                    break;
                }
            }
        }
    }
    out
}

/// Returns the line lists of every display code block, in document order.
pub fn extract_code_blocks(body_html: &str) -> Vec<Vec<String>> {
    extract_code_blocks_with_warnings(body_html).blocks
}

/// Renders blocks back into the HTML shape the dump uses.
pub fn render_code_blocks(blocks: &[Vec<String>]) -> String {
    blocks
        .iter()
        .map(|lines| {
            let text = lines.join("\n");
            format!("<pre><code>{}\n</code></pre>\n", html_escape::encode_text(&text))
        })
        .collect()
}
