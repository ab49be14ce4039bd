//! Best-effort HTML to plain text conversion for post bodies.
//!
//! Code blocks (`<pre>` and `<code>`) are dropped together with their
//! content; every other tag is removed while its text is kept. A code block
//! that is never closed runs until the enclosing element closes, or to the
//! end of the input.

const BLOCK_TAGS: &[&str] = &[
    "p", "div", "br", "li", "ul", "ol", "h1", "h2", "h3", "h4", "h5", "h6", "blockquote", "pre",
    "table", "tr", "td", "th", "hr", "dl", "dt", "dd", "section", "article",
];

fn is_code_tag(name: &str) -> bool {
    name == "pre" || name == "code"
}

#[derive(Debug)]
struct Tag {
    name: String,
    closing: bool,
    self_closing: bool,
}

/// Parses the tag starting at `input[start]` (which is `<`). Returns the tag
/// and the byte offset just past `>`, or `None` when this `<` does not begin
/// a tag.
fn parse_tag(input: &str, start: usize) -> Option<(Tag, usize)> {
    let rest = &input[start + 1..];
    let (closing, body) = match rest.strip_prefix('/') {
        Some(b) => (true, b),
        None => (false, rest),
    };
    if !body.starts_with(|c: char| c.is_ascii_alphabetic()) {
        return None;
    }
    let name_len = body
        .find(|c: char| !c.is_ascii_alphanumeric())
        .unwrap_or(body.len());
    let name = body[..name_len].to_ascii_lowercase();

    // scan to the closing '>' outside quotes
    let offset = start + 1 + usize::from(closing) + name_len;
    let mut quote: Option<char> = None;
    for (i, c) in input[offset..].char_indices() {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '"' | '\'') => quote = Some(c),
            (None, '>') => {
                let inner = &input[offset..offset + i];
                let tag = Tag {
                    name,
                    closing,
                    self_closing: inner.trim_end().ends_with('/'),
                };
                return Some((tag, offset + i + 1));
            }
            (None, _) => {}
        }
    }
    // unterminated tag: swallow the rest
    Some((
        Tag {
            name,
            closing,
            self_closing: false,
        },
        input.len(),
    ))
}

/// Removes code blocks and markup, decodes entities and collapses whitespace.
pub fn strip_code_and_html(html: &str) -> String {
    let mut out = String::with_capacity(html.len());
    let mut text_start = 0;
    let mut open: Vec<String> = Vec::new();
    // (code tag name, nesting depth, size of `open` when the block started)
    let mut skipping: Option<(String, usize, usize)> = None;
    let mut pos = 0;

    let flush = |out: &mut String, text: &str| {
        out.push_str(&html_escape::decode_html_entities(text));
    };

    while let Some(rel) = html[pos..].find('<') {
        let lt = pos + rel;
        if html[lt..].starts_with("<!--") {
            if skipping.is_none() {
                flush(&mut out, &html[text_start..lt]);
            }
            let end = html[lt + 4..].find("-->").map_or(html.len(), |e| lt + 4 + e + 3);
            pos = end;
            text_start = end;
            continue;
        }
        let Some((tag, end)) = parse_tag(html, lt) else {
            pos = lt + 1;
            continue;
        };

        if let Some((code_name, depth, base)) = skipping.as_mut() {
            if tag.name == *code_name && !tag.self_closing {
                if tag.closing {
                    *depth -= 1;
                } else {
                    *depth += 1;
                }
                if *depth == 0 {
                    skipping = None;
                    out.push(' ');
                    text_start = end;
                }
                pos = end;
                continue;
            }
            // an enclosing element closes: the unclosed code block ends here
            let enclosing = tag.closing && open[..*base].iter().any(|n| *n == tag.name);
            if !enclosing {
                pos = end;
                continue;
            }
            skipping = None;
            out.push(' ');
        } else {
            flush(&mut out, &html[text_start..lt]);
        }

        if is_code_tag(&tag.name) && !tag.closing {
            if !tag.self_closing {
                skipping = Some((tag.name.clone(), 1, open.len()));
            }
        } else if tag.closing {
            if let Some(idx) = open.iter().rposition(|n| *n == tag.name) {
                open.truncate(idx);
            }
        } else if !tag.self_closing && tag.name != "br" && tag.name != "hr" && tag.name != "img" {
            open.push(tag.name.clone());
        }
        if BLOCK_TAGS.contains(&tag.name.as_str()) {
            out.push(' ');
        }
        pos = end;
        text_start = end;
    }
    if skipping.is_none() && text_start < html.len() {
        flush(&mut out, &html[text_start..]);
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paragraph() {
        assert_eq!(strip_code_and_html("<p>Hello</p>"), "Hello");
    }

    #[test]
    fn code_block_removed() {
        assert_eq!(
            strip_code_and_html("<p>use</p><pre><code>SELECT *</code></pre><p>PDO</p>"),
            "use PDO"
        );
    }

    #[test]
    fn inline_code_removed() {
        assert_eq!(
            strip_code_and_html("<p>call <code>md5()</code> twice</p>"),
            "call twice"
        );
    }

    #[test]
    fn entities_decoded() {
        assert_eq!(
            strip_code_and_html("<p>a &amp; b &lt;c&gt; &quot;d&quot;&nbsp;e</p>"),
            "a & b <c> \"d\"\u{a0}e".split_whitespace().collect::<Vec<_>>().join(" ")
        );
    }

    #[test]
    fn unclosed_code_runs_to_enclosing_block() {
        assert_eq!(
            strip_code_and_html("<p>see <code>foo bar</p><p>after</p>"),
            "see after"
        );
        assert_eq!(strip_code_and_html("text <pre>never closed"), "text");
    }

    #[test]
    fn stray_angle_brackets_kept() {
        assert_eq!(strip_code_and_html("<p>1 < 2 and 3 > 2</p>"), "1 < 2 and 3 > 2");
    }

    #[test]
    fn comments_and_attributes() {
        assert_eq!(
            strip_code_and_html("<!-- x --><a href=\"x>y\">link</a> text"),
            "link text"
        );
    }

    #[test]
    fn inline_markup_does_not_split_words() {
        assert_eq!(strip_code_and_html("<p><b>bold</b>ly</p>"), "boldly");
    }
}
