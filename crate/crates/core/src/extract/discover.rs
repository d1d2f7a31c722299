use std::cell::RefCell;
use std::collections::HashSet;
use std::sync::LazyLock;

use lol_html::{element, text, HtmlRewriter, Settings};
use regex::Regex;
use url::Url;

use super::{DiscoveredResource, ResourceOrigin};

/// Embedded references found in one document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Discovery {
    pub resources: Vec<DiscoveredResource>,
    /// References dropped because they did not resolve to an http(s) URI,
    /// plus any region the parser had to give up on.
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentKind {
    Html,
    Css,
    Other,
}

impl DocumentKind {
    pub fn from_content_type(content_type: &str) -> Self {
        let essence = content_type
            .split(';')
            .next()
            .unwrap_or("")
            .trim()
            .to_ascii_lowercase();
        match essence.as_str() {
            "text/html" | "application/xhtml+xml" => Self::Html,
            "text/css" => Self::Css,
            _ => Self::Other,
        }
    }
}

/// Lists the resources a document embeds, resolved against `base`.
///
/// `source_depth` is the depth of the document itself; discovered resources
/// sit one level below it. Duplicates are collapsed on the resolved URI,
/// keeping the first occurrence.
pub fn discover_resources(body: &[u8], content_type: &str, base: &str, source_depth: u32) -> Discovery {
    let (raw, mut skipped, base_href) = match DocumentKind::from_content_type(content_type) {
        DocumentKind::Html => scan_html(body),
        DocumentKind::Css => (scan_css(&String::from_utf8_lossy(body)), 0, None),
        DocumentKind::Other => return Discovery::default(),
    };

    let document = Url::parse(base).ok();
    let effective_base = match (&document, base_href) {
        (Some(doc), Some(href)) => doc.join(href.trim()).ok().or_else(|| document.clone()),
        _ => document.clone(),
    };

    let mut seen = HashSet::new();
    let mut resources = Vec::new();
    for (reference, origin) in raw {
        match resolve_reference(&reference, effective_base.as_ref()) {
            Some(resolved) => {
                if seen.insert(resolved.clone()) {
                    resources.push(DiscoveredResource {
                        raw_reference: reference,
                        resolved_uri: resolved,
                        origin,
                        source_uri: base.to_string(),
                        depth: source_depth + 1,
                    });
                }
            }
            None => skipped += 1,
        }
    }
    Discovery { resources, skipped }
}

/// Resolves a markup reference to an absolute http(s) URI.
///
/// Absolute references are kept verbatim so that embedded original URIs
/// (with explicit default ports, say) survive untouched.
pub fn resolve_reference(reference: &str, base: Option<&Url>) -> Option<String> {
    let reference = reference.trim();
    if reference.is_empty() || reference.starts_with('#') {
        return None;
    }
    if let Ok(abs) = Url::parse(reference) {
        return matches!(abs.scheme(), "http" | "https").then(|| reference.to_string());
    }
    let base = base?;
    if reference.starts_with('/') && !reference.starts_with("//") {
        // path-absolute: keep the path bytes as written, e.g. "/web/<ts>/http://..."
        let mut origin = format!("{}://{}", base.scheme(), base.host_str()?);
        if let Some(port) = base.port() {
            origin.push_str(&format!(":{port}"));
        }
        return Some(format!("{origin}{reference}"));
    }
    let joined = base.join(reference).ok()?;
    matches!(joined.scheme(), "http" | "https").then(|| joined.to_string())
}

type RawRefs = Vec<(String, ResourceOrigin)>;

fn scan_html(body: &[u8]) -> (RawRefs, usize, Option<String>) {
    let refs: RefCell<RawRefs> = RefCell::new(Vec::new());
    let base_href: RefCell<Option<String>> = RefCell::new(None);
    let style_text = RefCell::new(String::new());

    let push = |value: Option<String>, origin| {
        if let Some(v) = value {
            refs.borrow_mut().push((v, origin));
        }
    };

    let mut skipped = 0;
    {
        let settings = Settings {
            element_content_handlers: vec![
                element!("base[href]", |el| {
                    base_href.borrow_mut().get_or_insert_with(|| el.get_attribute("href").unwrap_or_default());
                    Ok(())
                }),
                element!("img", |el| {
                    push(el.get_attribute("src"), ResourceOrigin::ImgSrc);
                    if let Some(srcset) = el.get_attribute("srcset") {
                        for candidate in parse_srcset(&srcset) {
                            push(Some(candidate), ResourceOrigin::ImgSrcset);
                        }
                    }
                    Ok(())
                }),
                element!("script[src]", |el| {
                    push(el.get_attribute("src"), ResourceOrigin::ScriptSrc);
                    Ok(())
                }),
                element!("link[href]", |el| {
                    let rel = el.get_attribute("rel").unwrap_or_default().to_ascii_lowercase();
                    let rels: Vec<&str> = rel.split_whitespace().collect();
                    if rels.contains(&"stylesheet") {
                        push(el.get_attribute("href"), ResourceOrigin::StylesheetHref);
                    } else if rels.iter().any(|r| r.contains("icon")) {
                        push(el.get_attribute("href"), ResourceOrigin::LinkIconHref);
                    }
                    Ok(())
                }),
                element!("iframe[src]", |el| {
                    push(el.get_attribute("src"), ResourceOrigin::IframeSrc);
                    Ok(())
                }),
                element!("frame[src]", |el| {
                    push(el.get_attribute("src"), ResourceOrigin::FrameSrc);
                    Ok(())
                }),
                element!("object[data]", |el| {
                    push(el.get_attribute("data"), ResourceOrigin::ObjectData);
                    Ok(())
                }),
                element!("embed[src]", |el| {
                    push(el.get_attribute("src"), ResourceOrigin::EmbedSrc);
                    Ok(())
                }),
                element!("[style]", |el| {
                    if let Some(style) = el.get_attribute("style") {
                        refs.borrow_mut().extend(scan_css(&style));
                    }
                    Ok(())
                }),
                text!("style", |chunk| {
                    style_text.borrow_mut().push_str(chunk.as_str());
                    if chunk.last_in_text_node() {
                        let css = std::mem::take(&mut *style_text.borrow_mut());
                        refs.borrow_mut().extend(scan_css(&css));
                    }
                    Ok(())
                }),
            ],
            strict: false,
            ..Settings::new()
        };
        let mut rewriter = HtmlRewriter::new(settings, |_: &[u8]| {});
        if rewriter.write(body).is_err() || rewriter.end().is_err() {
            skipped += 1;
        }
    }
    (refs.into_inner(), skipped, base_href.into_inner())
}

static CSS_COMMENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)/\*.*?\*/").unwrap());
static CSS_REF: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"(?i)@import\s+(?:"([^"]*)"|'([^']*)')|url\(\s*(?:"([^"]*)"|'([^']*)'|([^)"'\s]*))\s*\)"#,
    )
    .unwrap()
});

/// `url(...)` and `@import "..."` references in a stylesheet, in source order.
pub(crate) fn scan_css(css: &str) -> RawRefs {
    let without_comments = CSS_COMMENT.replace_all(css, " ");
    CSS_REF
        .captures_iter(&without_comments)
        .filter_map(|caps| {
            (1..=5)
                .find_map(|i| caps.get(i))
                .map(|m| (m.as_str().to_string(), ResourceOrigin::CssUrl))
        })
        .collect()
}

/// Every candidate URL of a `srcset`, descriptors dropped.
pub(crate) fn parse_srcset(srcset: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = srcset;
    loop {
        rest = rest.trim_start_matches(|c: char| c.is_whitespace() || c == ',');
        if rest.is_empty() {
            break;
        }
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let mut url = &rest[..end];
        rest = &rest[end..];
        if url.ends_with(',') {
            url = url.trim_end_matches(',');
        } else {
            // skip the descriptor up to the next top-level comma
            let mut depth = 0usize;
            let mut cut = rest.len();
            for (i, c) in rest.char_indices() {
                match c {
                    '(' => depth += 1,
                    ')' => depth = depth.saturating_sub(1),
                    ',' if depth == 0 => {
                        cut = i + 1;
                        break;
                    }
                    _ => {}
                }
            }
            rest = &rest[cut..];
        }
        if !url.is_empty() {
            out.push(url.to_string());
        }
    }
    out
}
