use std::io::Write;
use std::path::Path;

use super::{clean_tags, IngestError, IngestIssue, IngestOutcome, RawPost};

/// Reads one post per line. Bad lines are reported and skipped.
pub fn parse_jsonl(path: &Path) -> Result<IngestOutcome, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(parse_jsonl_str(&text))
}

pub(crate) fn parse_jsonl_str(text: &str) -> IngestOutcome {
    let mut outcome = IngestOutcome::default();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut post: RawPost = match serde_json::from_str(line) {
            Ok(p) => p,
            Err(err) => {
                outcome.issues.push(IngestIssue {
                    line: line_no,
                    message: err.to_string(),
                });
                continue;
            }
        };
        post.tags = clean_tags(&post.tags);
        if post.tags.is_empty() {
            outcome.issues.push(IngestIssue {
                line: line_no,
                message: format!("post {} has no tags; skipped", post.id),
            });
            continue;
        }
        if !seen.insert(post.id) {
            outcome.issues.push(IngestIssue {
                line: line_no,
                message: format!("duplicate post id {}; skipped", post.id),
            });
            continue;
        }
        outcome.linked_answers += post.answers_html.len();
        outcome.posts.push(post);
    }
    outcome
}

pub fn write_jsonl<W: Write>(posts: &[RawPost], mut out: W) -> Result<(), IngestError> {
    for post in posts {
        let line = serde_json::to_string(post).map_err(|e| IngestError::Export {
            id: post.id,
            message: e.to_string(),
        })?;
        writeln!(out, "{line}").map_err(|e| IngestError::Export {
            id: post.id,
            message: e.to_string(),
        })?;
    }
    Ok(())
}

pub fn export_jsonl(posts: &[RawPost]) -> Result<String, IngestError> {
    let mut buf = Vec::new();
    write_jsonl(posts, &mut buf)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}
