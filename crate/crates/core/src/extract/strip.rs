use lol_html::html_content::Element;
use lol_html::{doc_comments, element, ElementContentHandlers, HtmlRewriter, Selector, Settings};

use crate::config::{ArchiveConfig, DenyPattern};

pub const ARCHIVE_COMMENT_MARKER: &str = "FILE ARCHIVED ON";

/// What `strip_archive_markup` removes from a replayed page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripProfile {
    pub banner_selectors: Vec<String>,
    pub script_deny: Vec<DenyPattern>,
    pub comment_marker: String,
}

impl StripProfile {
    pub fn from_config(config: &ArchiveConfig) -> Self {
        Self {
            banner_selectors: config.banner_selectors.clone(),
            script_deny: config.deny.clone(),
            comment_marker: ARCHIVE_COMMENT_MARKER.to_string(),
        }
    }
}

impl Default for StripProfile {
    fn default() -> Self {
        Self::from_config(&ArchiveConfig::default())
    }
}

/// Removes archive-inserted comments, banner elements and deny-listed
/// scripts. All other bytes are passed through untouched; input that cannot
/// be rewritten is returned as is.
pub fn strip_archive_markup(body: &[u8], profile: &StripProfile) -> Vec<u8> {
    let selectors: Vec<Selector> = profile
        .banner_selectors
        .iter()
        .filter_map(|s| s.parse().ok())
        .collect();

    let remove = |el: &mut Element| {
        el.remove();
        Ok(())
    };
    let mut handlers: Vec<(std::borrow::Cow<'_, Selector>, ElementContentHandlers<'_>)> = selectors
        .iter()
        .map(|s| {
            (
                std::borrow::Cow::Borrowed(s),
                ElementContentHandlers::default().element(remove),
            )
        })
        .collect();
    handlers.push(element!("script[src]", |el| {
        let src = el.get_attribute("src").unwrap_or_default();
        if profile.script_deny.iter().any(|p| p.matches(src.trim())) {
            el.remove();
        }
        Ok(())
    }));

    let mut out = Vec::with_capacity(body.len());
    let settings = Settings {
        element_content_handlers: handlers,
        document_content_handlers: vec![doc_comments!(|c| {
            if c.text().contains(profile.comment_marker.as_str()) {
                c.remove();
            }
            Ok(())
        })],
        strict: false,
        ..Settings::new()
    };
    let mut rewriter = HtmlRewriter::new(settings, |chunk: &[u8]| out.extend_from_slice(chunk));
    if rewriter.write(body).is_err() || rewriter.end().is_err() {
        return body.to_vec();
    }
    out
}
