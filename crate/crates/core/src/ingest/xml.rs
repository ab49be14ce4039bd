use std::collections::HashMap;
use std::path::Path;

use chrono::{NaiveDateTime, TimeZone, Utc};
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{clean_tags, IngestError, IngestIssue, IngestOutcome, RawPost, Source};

/// Parses a `Posts.xml` dump into question threads.
pub fn parse_stackexchange_xml(path: &Path, source: Source) -> Result<IngestOutcome, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_stackexchange_xml_str(&text, source)
}

fn line_of(text: &str, pos: u64) -> usize {
    let pos = (pos as usize).min(text.len());
    text.as_bytes()[..pos].iter().filter(|&&b| b == b'\n').count() + 1
}

/// Decodes `<php><security>` or `|php|security|` tag strings.
fn decode_tags(raw: &str) -> Vec<String> {
    let raw = raw.trim();
    if raw.starts_with('|') {
        return clean_tags(raw.split('|'));
    }
    clean_tags(
        raw.split(['<', '>'])
            .filter(|t| !t.trim().is_empty()),
    )
}

fn parse_created(raw: &str) -> Option<chrono::DateTime<Utc>> {
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(raw) {
        return Some(dt.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
        .map(|naive| Utc.from_utc_datetime(&naive))
}

struct Row {
    line: usize,
    attrs: HashMap<String, String>,
}

fn read_row(e: &BytesStart<'_>, line: usize) -> Result<Row, IngestError> {
    let mut attrs = HashMap::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| IngestError::Xml {
            line,
            message: err.to_string(),
        })?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|err| IngestError::Xml {
                line,
                message: err.to_string(),
            })?
            .into_owned();
        attrs.insert(key, value);
    }
    Ok(Row { line, attrs })
}

pub fn parse_stackexchange_xml_str(text: &str, source: Source) -> Result<IngestOutcome, IngestError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);

    let mut rows = Vec::new();
    loop {
        let pos = reader.buffer_position();
        // skip inter-element whitespace so the line is that of the tag itself
        let start = pos + text[pos as usize..].find('<').unwrap_or(0) as u64;
        match reader.read_event() {
            Ok(Event::Empty(e)) | Ok(Event::Start(e)) if e.name().as_ref() == b"row" => {
                rows.push(read_row(&e, line_of(text, start))?);
            }
            Ok(Event::Eof) => break,
            Ok(_) => {}
            Err(err) => {
                return Err(IngestError::Xml {
                    line: line_of(text, reader.error_position()),
                    message: err.to_string(),
                })
            }
        }
    }
    Ok(link_rows(rows, source))
}

fn link_rows(rows: Vec<Row>, source: Source) -> IngestOutcome {
    let mut outcome = IngestOutcome::default();
    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut answers: Vec<(usize, u64, String)> = Vec::new();

    for row in rows {
        let get = |k: &str| row.attrs.get(k).map(String::as_str);
        let id = match get("Id").and_then(|v| v.trim().parse::<u64>().ok()) {
            Some(id) => id,
            None => {
                outcome.issues.push(IngestIssue {
                    line: row.line,
                    message: "row without a numeric Id".into(),
                });
                continue;
            }
        };
        match get("PostTypeId").map(str::trim) {
            Some("1") => {
                let tags = get("Tags").map(decode_tags).unwrap_or_default();
                if tags.is_empty() {
                    outcome.issues.push(IngestIssue {
                        line: row.line,
                        message: format!("question {id} has no tags; skipped"),
                    });
                    continue;
                }
                if index.contains_key(&id) {
                    outcome.issues.push(IngestIssue {
                        line: row.line,
                        message: format!("duplicate question id {id}; skipped"),
                    });
                    continue;
                }
                index.insert(id, outcome.posts.len());
                outcome.posts.push(RawPost {
                    id,
                    source,
                    title: get("Title").unwrap_or_default().to_string(),
                    question_html: get("Body").unwrap_or_default().to_string(),
                    answers_html: Vec::new(),
                    tags,
                    score: get("Score").and_then(|s| s.trim().parse().ok()).unwrap_or(0),
                    created: get("CreationDate").and_then(parse_created),
                });
            }
            Some("2") => match get("ParentId").and_then(|v| v.trim().parse::<u64>().ok()) {
                Some(parent) => answers.push((
                    row.line,
                    parent,
                    get("Body").unwrap_or_default().to_string(),
                )),
                None => outcome.orphan_answers += 1,
            },
            // wiki excerpts, tag wikis and the like
            _ => {}
        }
    }

    for (_, parent, body) in answers {
        match index.get(&parent) {
            Some(&i) => {
                outcome.posts[i].answers_html.push(body);
                outcome.linked_answers += 1;
            }
            None => outcome.orphan_answers += 1,
        }
    }
    outcome
}
