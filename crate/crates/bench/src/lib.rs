//! Synthetic inputs shared by the benchmarks.

use memento_fixity::fixity::HashAlgorithm;

pub const PREFIX: &str = "https://web.archive.org/web/";
pub const TS: &str = "20170717185130";

/// A replayed page with `refs` rewritten images and a Wayback-style banner.
pub fn replay_page(refs: usize) -> Vec<u8> {
    let mut html = String::from("<html><head><script src=\"/_static/js/banner.js\"></script></head><body>");
    html.push_str("<div id=\"wm-ipp\"><img src=\"/_static/images/logo.png\"> 27,770 captures</div>");
    for i in 0..refs {
        html.push_str(&format!(
            "<p>item {i}</p><img src=\"{PREFIX}{TS}im_/http://www.example.com/img/{i}.png\">"
        ));
    }
    html.push_str("</body></html><!--\n     FILE ARCHIVED ON 18:51:30 Jul 17, 2017 AND RETRIEVED FROM THE\n     INTERNET ARCHIVE ON 10:12:00 Sep 21, 2017.\n-->");
    html.into_bytes()
}

/// `n` distinct SHA-256 hex digests.
pub fn digests(n: usize) -> Vec<String> {
    (0..n as u64)
        .map(|i| HashAlgorithm::Sha256.digest(&i.to_le_bytes()))
        .collect()
}

/// `n` URI-Ms with varied modifiers and targets.
pub fn memento_uris(n: usize) -> Vec<String> {
    let mods = ["", "id_", "im_", "js_", "cs_"];
    (0..n)
        .map(|i| format!("{PREFIX}{TS}{}/http://host{}.example.com/path/{i}.html", mods[i % mods.len()], i % 97))
        .collect()
}
