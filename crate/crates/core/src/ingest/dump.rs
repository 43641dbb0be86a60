//! Streaming reader for the Stack Exchange `Posts.xml` dump format.

use std::io::BufRead;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostType {
    Question,
    Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RawPost {
    pub id: u64,
    pub post_type: PostType,
    pub parent_id: Option<u64>,
    pub title: Option<String>,
    pub body_html: String,
    pub tags: Vec<String>,
    pub score: i64,
    pub view_count: Option<u64>,
    pub accepted_answer_id: Option<u64>,
}

/// Counters for rows that were read but not turned into posts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DumpStats {
    pub rows: usize,
    pub other_types: usize,
    pub skipped: usize,
}

/// Iterator over the posts of a dump. Holds one row in memory at a time.
///
/// A structural XML error ends iteration with `Error::Xml`; a row with a
/// missing or unparsable required attribute is skipped and counted.
pub struct DumpReader<R: BufRead> {
    reader: Reader<R>,
    buf: Vec<u8>,
    stats: DumpStats,
    depth: usize,
    done: bool,
}

impl<R: BufRead> DumpReader<R> {
    pub fn new(input: R) -> Self {
        let mut reader = Reader::from_reader(input);
        reader.config_mut().trim_text(true);
        DumpReader {
            reader,
            buf: Vec::with_capacity(4096),
            stats: DumpStats::default(),
            depth: 0,
            done: false,
        }
    }

    pub fn stats(&self) -> &DumpStats {
        &self.stats
    }
}

impl<R: BufRead> Iterator for DumpReader<R> {
    type Item = Result<RawPost>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            let event = match self.reader.read_event_into(&mut self.buf) {
                Ok(event) => event,
                Err(err) => {
                    self.done = true;
                    return Some(Err(Error::Xml {
                        offset: self.reader.error_position(),
                        message: err.to_string(),
                    }));
                }
            };
            match event {
                Event::Eof => {
                    self.done = true;
                    if self.depth > 0 {
                        return Some(Err(Error::Xml {
                            offset: self.reader.buffer_position(),
                            message: "unexpected end of document inside an open element".into(),
                        }));
                    }
                }
                Event::End(_) => self.depth = self.depth.saturating_sub(1),
                Event::Start(ref e) if e.name().as_ref() != b"row" => self.depth += 1,
                Event::Empty(ref e) | Event::Start(ref e) if e.name().as_ref() == b"row" => {
                    if matches!(event, Event::Start(_)) {
                        self.depth += 1;
                    }
                    self.stats.rows += 1;
                    match row_to_post(e) {
                        Ok(Some(post)) => return Some(Ok(post)),
                        Ok(None) => self.stats.other_types += 1,
                        Err(msg) => {
                            log::warn!(
                                "skipping row near byte {}: {msg}",
                                self.reader.buffer_position()
                            );
                            self.stats.skipped += 1;
                        }
                    }
                }
                _ => {}
            }
        }
        None
    }
}

/// Parses a whole dump held in memory. Equivalent to collecting a [`DumpReader`].
pub fn parse_dump<R: BufRead>(input: R) -> Result<(Vec<RawPost>, DumpStats)> {
    let mut reader = DumpReader::new(input);
    let mut posts = Vec::new();
    for post in reader.by_ref() {
        posts.push(post?);
    }
    Ok((posts, reader.stats.clone()))
}

#[derive(Default)]
struct RowAttrs {
    id: Option<String>,
    post_type: Option<String>,
    parent_id: Option<String>,
    title: Option<String>,
    body: Option<String>,
    tags: Option<String>,
    score: Option<String>,
    view_count: Option<String>,
    accepted_answer_id: Option<String>,
}

fn row_to_post(e: &BytesStart<'_>) -> std::result::Result<Option<RawPost>, String> {
    let mut attrs = RowAttrs::default();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| err.to_string())?;
        let slot = match attr.key.as_ref() {
            b"Id" => &mut attrs.id,
            b"PostTypeId" => &mut attrs.post_type,
            b"ParentId" => &mut attrs.parent_id,
            b"Title" => &mut attrs.title,
            b"Body" => &mut attrs.body,
            b"Tags" => &mut attrs.tags,
            b"Score" => &mut attrs.score,
            b"ViewCount" => &mut attrs.view_count,
            b"AcceptedAnswerId" => &mut attrs.accepted_answer_id,
            _ => continue,
        };
        *slot = Some(attr.unescape_value().map_err(|err| err.to_string())?.into_owned());
    }

    let post_type = match attrs.post_type.as_deref() {
        Some("1") => PostType::Question,
        Some("2") => PostType::Answer,
        Some(_) => return Ok(None),
        None => return Err("missing PostTypeId".into()),
    };
    let id = required_int(&attrs.id, "Id")?;
    let body_html = attrs.body.ok_or("missing Body")?;
    let score = attrs
        .score
        .as_deref()
        .ok_or("missing Score")?
        .parse::<i64>()
        .map_err(|_| "bad Score")?;
    let view_count = optional_int(&attrs.view_count, "ViewCount")?;
    let accepted_answer_id = optional_int(&attrs.accepted_answer_id, "AcceptedAnswerId")?;
    let tags = attrs.tags.as_deref().map(split_tags).unwrap_or_default();

    let (parent_id, title) = match post_type {
        PostType::Question => (None, Some(attrs.title.ok_or("question without Title")?)),
        PostType::Answer => (Some(required_int(&attrs.parent_id, "ParentId")?), None),
    };
    Ok(Some(RawPost {
        id,
        post_type,
        parent_id,
        title,
        body_html,
        tags,
        score,
        view_count,
        accepted_answer_id,
    }))
}

fn required_int(value: &Option<String>, name: &str) -> std::result::Result<u64, String> {
    optional_int(value, name)?.ok_or_else(|| format!("missing {name}"))
}

fn optional_int(value: &Option<String>, name: &str) -> std::result::Result<Option<u64>, String> {
    value
        .as_deref()
        .map(|v| v.trim().parse::<u64>().map_err(|_| format!("bad {name}: {v:?}")))
        .transpose()
}

/// Splits a dump tag string. Older dumps use `<a><b>`, newer ones `|a|b|`.
pub fn split_tags(raw: &str) -> Vec<String> {
    raw.split(['<', '>', '|'])
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n";

    fn parse(xml: &str) -> Result<(Vec<RawPost>, DumpStats)> {
        parse_dump(xml.as_bytes())
    }

    #[test]
    fn question_row_with_tags() {
        let xml = format!(
            "{HEADER}<posts>\n  <row Id=\"7961363\" PostTypeId=\"1\" AcceptedAnswerId=\"7961390\" Score=\"800\" \
             ViewCount=\"1500000\" Body=\"&lt;p&gt;x&lt;/p&gt;\" Title=\"Removing duplicates in lists\" \
             Tags=\"&lt;python&gt;&lt;list&gt;\" />\n</posts>"
        );
        let (posts, stats) = parse(&xml).unwrap();
        assert_eq!(stats.rows, 1);
        assert_eq!(posts.len(), 1);
        let q = &posts[0];
        assert_eq!(q.post_type, PostType::Question);
        assert_eq!(q.title.as_deref(), Some("Removing duplicates in lists"));
        assert_eq!(q.tags, vec!["python", "list"]);
        assert_eq!(q.body_html, "<p>x</p>");
        assert_eq!(q.accepted_answer_id, Some(7961390));
        assert_eq!(q.view_count, Some(1_500_000));
    }

    #[test]
    fn empty_document() {
        let (posts, stats) = parse(&format!("{HEADER}<posts>\n</posts>")).unwrap();
        assert!(posts.is_empty());
        assert_eq!(stats, DumpStats::default());
    }

    #[test]
    fn other_post_types_are_skipped() {
        let xml = format!("{HEADER}<posts><row Id=\"1\" PostTypeId=\"5\" Score=\"0\" Body=\"\" /></posts>");
        let (posts, stats) = parse(&xml).unwrap();
        assert!(posts.is_empty());
        assert_eq!(stats.other_types, 1);
    }

    #[test]
    fn missing_required_attribute_skips_row() {
        let xml = format!(
            "{HEADER}<posts><row PostTypeId=\"2\" ParentId=\"1\" Score=\"0\" Body=\"\" />\
             <row Id=\"3\" PostTypeId=\"2\" ParentId=\"1\" Score=\"0\" Body=\"ok\" /></posts>"
        );
        let (posts, stats) = parse(&xml).unwrap();
        assert_eq!(posts.len(), 1);
        assert_eq!(posts[0].id, 3);
        assert_eq!(stats.skipped, 1);
    }

    #[test]
    fn malformed_xml_reports_offset() {
        let xml = format!("{HEADER}<posts><row Id=\"1\" PostTypeId=\"1\" Score=\"1\"></posts>");
        let err = parse(&xml).unwrap_err();
        assert!(matches!(err, Error::Xml { offset, .. } if offset > 0), "{err}");
    }

    #[test]
    fn truncated_document_is_an_error() {
        let xml = format!("{HEADER}<posts><row Id=\"1\" PostTypeId=\"2\" ParentId=\"3\" Score=\"1\" Body=\"\" />");
        let mut reader = DumpReader::new(xml.as_bytes());
        assert!(reader.next().unwrap().is_ok());
        assert!(matches!(reader.next(), Some(Err(Error::Xml { .. }))));
        assert!(reader.next().is_none());
    }

    #[test]
    fn pipe_separated_tags() {
        assert_eq!(split_tags("|java|arrays|"), vec!["java", "arrays"]);
        assert_eq!(split_tags("<Python><list>"), vec!["python", "list"]);
        assert!(split_tags("").is_empty());
    }
}
