//! Replay rewriting and banner injection.

use std::sync::LazyLock;

use lol_html::html_content::ContentType;
use lol_html::{element, end, rewrite_str, HtmlRewriter, RewriteStrSettings, Settings};
use regex::{Captures, Regex};
use url::Url;

pub const BANNER_SCRIPT: &str = "/_static/js/banner.js";
pub const TOOLBAR_LOGO: &str = "/assets/toolbar/logo.png";

/// Inputs for one replayed document.
pub struct ReplayContext<'a> {
    pub uri_r: &'a str,
    /// Timestamp used in rewritten links: the capture being replayed.
    pub timestamp: &'a str,
    pub is_archived: &'a dyn Fn(&str) -> bool,
}

impl ReplayContext<'_> {
    fn rewrite(&self, reference: &str, modifier: &str) -> Option<String> {
        let resolved = resolve(self.uri_r, reference.trim())?;
        (self.is_archived)(&resolved).then(|| format!("/web/{}{modifier}/{resolved}", self.timestamp))
    }
}

fn resolve(base: &str, reference: &str) -> Option<String> {
    if reference.starts_with("http://") || reference.starts_with("https://") {
        return Some(reference.to_string());
    }
    let joined = Url::parse(base).ok()?.join(reference).ok()?;
    matches!(joined.scheme(), "http" | "https").then(|| joined.to_string())
}

/// Rewrites embedded references that point at archived resources to
/// root-relative replay URIs. Everything else is left as written, which is
/// how live-web leaks survive replay.
pub fn rewrite_html(body: &[u8], ctx: &ReplayContext<'_>) -> Vec<u8> {
    let attr = |el: &mut lol_html::html_content::Element, name: &str, modifier: &str| {
        if let Some(value) = el.get_attribute(name) {
            if let Some(new) = ctx.rewrite(&value, modifier) {
                let _ = el.set_attribute(name, &new);
            }
        }
    };
    let mut out = Vec::with_capacity(body.len() + 256);
    let mut rewriter = HtmlRewriter::new(
        Settings {
            element_content_handlers: vec![
                element!("img[src], source[src], embed[src]", |el| {
                    attr(el, "src", "im_");
                    Ok(())
                }),
                element!("object[data]", |el| {
                    attr(el, "data", "im_");
                    Ok(())
                }),
                element!("script[src]", |el| {
                    attr(el, "src", "js_");
                    Ok(())
                }),
                element!("link[href]", |el| {
                    attr(el, "href", "cs_");
                    Ok(())
                }),
                element!("iframe[src], frame[src]", |el| {
                    attr(el, "src", "if_");
                    Ok(())
                }),
                element!("a[href]", |el| {
                    attr(el, "href", "");
                    Ok(())
                }),
            ],
            strict: false,
            ..Settings::new()
        },
        |chunk: &[u8]| out.extend_from_slice(chunk),
    );
    if rewriter.write(body).is_err() || rewriter.end().is_err() {
        return body.to_vec();
    }
    out
}

static CSS_URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"url\(\s*(['"]?)([^'")]+)(['"]?)\s*\)"#).unwrap());
static CSS_IMPORT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"@import\s+(['"])([^'"]+)(['"])"#).unwrap());

pub fn rewrite_css(body: &[u8], ctx: &ReplayContext<'_>) -> Vec<u8> {
    let Ok(text) = std::str::from_utf8(body) else {
        return body.to_vec();
    };
    let text = CSS_IMPORT.replace_all(text, |c: &Captures| match ctx.rewrite(&c[2], "cs_") {
        Some(new) => format!("@import {}{new}{}", &c[1], &c[3]),
        None => c[0].to_string(),
    });
    let text = CSS_URL.replace_all(&text, |c: &Captures| match ctx.rewrite(&c[2], "im_") {
        Some(new) => format!("url({}{new}{})", &c[1], &c[3]),
        None => c[0].to_string(),
    });
    text.into_owned().into_bytes()
}

pub struct Banner {
    pub version: u32,
    pub captures: usize,
    /// Formatted capture time for the trailing comment.
    pub archived_on: String,
}

impl Banner {
    pub fn markup(&self) -> String {
        format!(
            "<script src=\"{BANNER_SCRIPT}\"></script><div id=\"wm-ipp\"><img src=\"{TOOLBAR_LOGO}\" alt=\"archive\"> \
             <span class=\"count\">{} captures</span> <span class=\"ver\">toolbar v{}</span></div>",
            self.captures, self.version
        )
    }

    pub fn comment(&self) -> String {
        format!(
            "<!--\n     FILE ARCHIVED ON {} AND RETRIEVED FROM THE\n     ARCHIVE SIMULATOR.\n     TOOLBAR VERSION {}.\n-->",
            self.archived_on, self.version
        )
    }
}

/// Injects the banner after the opening `<body>` tag and the archive
/// comment at the end of the document.
pub fn inject_banner(html: &[u8], banner: &Banner) -> Vec<u8> {
    let Ok(text) = std::str::from_utf8(html) else {
        return html.to_vec();
    };
    let markup = banner.markup();
    let comment = banner.comment();
    let settings = RewriteStrSettings {
        element_content_handlers: vec![element!("body", |el| {
            el.prepend(&markup, ContentType::Html);
            Ok(())
        })],
        document_content_handlers: vec![end!(|end| {
            end.append(&comment, ContentType::Html);
            Ok(())
        })],
        strict: false,
        ..RewriteStrSettings::new()
    };
    match rewrite_str(text, settings) {
        Ok(out) => out.into_bytes(),
        Err(_) => html.to_vec(),
    }
}
