use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use memento_fixity_sim::{parse_scenario, serve, validate_scenario, ServerHandle};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn start(name: &str) -> ServerHandle {
    let scenario = validate_scenario(&fixtures().join(name).join("scenario.json")).unwrap();
    serve(scenario, SocketAddr::from(([127, 0, 0, 1], 0))).unwrap()
}

fn client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .no_proxy()
        .redirect(reqwest::redirect::Policy::none())
        .build()
        .unwrap()
}

fn get(url: &str) -> reqwest::blocking::Response {
    client().get(url).send().unwrap()
}

#[test]
fn committed_scenarios_validate() {
    let mut count = 0;
    for entry in std::fs::read_dir(fixtures()).unwrap() {
        let path = entry.unwrap().path().join("scenario.json");
        if path.exists() {
            validate_scenario(&path).unwrap_or_else(|e| panic!("{e}"));
            count += 1;
        }
    }
    assert!(count >= 7);
}

#[test]
fn missing_body_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
  "name": "broken",
  "root": "http://a.example/",
  "resources": [
    {"uri_r": "http://a.example/", "timestamp": "20170101000000", "body": "nope.html", "content_type": "text/html"}
  ]
}"#;
    let errors = parse_scenario(text, dir.path()).unwrap_err();
    assert!(errors.iter().any(|d| d.message.contains("nope.html") && d.line == Some(5)), "{errors:?}");
}

#[test]
fn overlapping_routes_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.html"), "<p>a</p>").unwrap();
    let text = r#"{
  "name": "overlap",
  "root": "http://a.example/",
  "resources": [
    {"uri_r": "http://a.example/", "timestamp": "20170101000000", "body": "a.html", "content_type": "text/html"},
    {"uri_r": "http://a.example/", "timestamp": "20170101000000", "body": "a.html", "content_type": "text/html"}
  ]
}"#;
    let errors = parse_scenario(text, dir.path()).unwrap_err();
    assert!(errors.iter().any(|d| d.message.contains("declared twice")), "{errors:?}");
}

#[test]
fn undeclared_reference_rejected_unless_dangling() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.html"), "<img src=\"/x.gif\">").unwrap();
    let mut text = r#"{
  "name": "refs",
  "root": "http://a.example/",
  "resources": [
    {"uri_r": "http://a.example/", "timestamp": "20170101000000", "body": "a.html", "content_type": "text/html"}
  ]DANGLING
}"#
    .to_string();
    let errors = parse_scenario(&text.replace("DANGLING", ""), dir.path()).unwrap_err();
    assert!(errors[0].message.contains("http://a.example/x.gif"));
    text = text.replace("DANGLING", r#", "dangling": ["http://a.example/x.gif"]"#);
    parse_scenario(&text, dir.path()).unwrap();
}

#[test]
fn raw_is_verbatim_and_replay_carries_banner() {
    let server = start("co2");
    let root = server.scenario().root().clone();
    let raw_uri = format!("{}{}id_/{}", server.prefix(), root.spec.timestamp, root.spec.uri_r);
    let raw = get(&raw_uri);
    assert_eq!(raw.status(), 200);
    assert!(raw.headers().get("memento-datetime").is_some());
    let raw = raw.bytes().unwrap();
    assert_eq!(raw.as_ref(), root.body.as_slice());
    for marker in ["wm-ipp", "FILE ARCHIVED ON", "/_static/", "/web/"] {
        assert!(!String::from_utf8_lossy(&raw).contains(marker), "{marker}");
    }

    let replay = get(&server.root_uri()).text().unwrap();
    assert!(replay.contains("id=\"wm-ipp\""));
    assert!(replay.contains("FILE ARCHIVED ON 18:51:30 Jul 17, 2017"));
    assert!(replay.contains("src=\"/web/20170717185130im_/http://climate.example.gov/system/charts/15_co2_left_061316.gif\""));
}

#[test]
fn nearest_capture_redirect_is_path_absolute() {
    let server = start("co2");
    let uri = format!(
        "{}20170717185130im_/http://climate.example.gov/system/charts/15_co2_left_061316.gif",
        server.prefix()
    );
    let r = get(&uri);
    assert_eq!(r.status(), 302);
    assert_eq!(
        r.headers()["location"],
        "/web/20170718000000im_/http://climate.example.gov/system/charts/15_co2_left_061316.gif"
    );
}

#[test]
fn tamper_event_switches_body() {
    let server = start("co2");
    let raw_uri = server.root_uri().replace("/20170717185130/", "/20170717185130id_/");
    assert!(get(&raw_uri).text().unwrap().contains("406.31 ppm"));
    let r = client()
        .post(format!("{}/_control/tamper-text", server.base_url()))
        .send()
        .unwrap();
    assert_eq!(r.status(), 200);
    assert!(get(&raw_uri).text().unwrap().contains("270.31 ppm"));
    let r = client().post(format!("{}/_control/no-such-event", server.base_url())).send().unwrap();
    assert_eq!(r.status(), 404);
}

#[test]
fn cache_script_replays_stale_copy() {
    let server = start("cache");
    let uri = format!("{}20170601000000id_/http://www.cache.example.net/report/chart.gif", server.prefix());
    let first = get(&uri);
    assert_eq!(first.headers()["x-page-cache"], "MISS");
    let original = first.bytes().unwrap();
    server.fire("tamper-chart").unwrap();
    for _ in 0..2 {
        let r = get(&uri);
        assert_eq!(r.headers()["x-page-cache"], "HIT");
        assert_eq!(r.bytes().unwrap(), original);
    }
    let fourth = get(&uri);
    assert_eq!(fourth.headers()["x-page-cache"], "MISS");
    assert_ne!(fourth.bytes().unwrap(), original);
}

#[test]
fn no_cache_header_forces_a_miss() {
    let server = start("cache");
    let uri = format!("{}20170601000000id_/http://www.cache.example.net/report/chart.gif", server.prefix());
    get(&uri);
    let r = client().get(&uri).header("Cache-Control", "no-cache").send().unwrap();
    assert_eq!(r.headers()["x-page-cache"], "MISS");
}

#[test]
fn timemap_advances_on_event() {
    let server = start("timemap");
    let img = "http://news.bbcimg.co.uk/media/images/83351000/jpg/_83351965_explorer.jpg";
    let before = get(&server.timemap_uri(img)).text().unwrap();
    assert!(!before.contains("memento"));
    server.fire("capture-image").unwrap();
    let after = get(&server.timemap_uri(img)).text().unwrap();
    assert!(after.contains("/web/20170807230527/"));
    assert!(after.contains("datetime=\"Mon, 07 Aug 2017 23:05:27 GMT\""));
}

#[test]
fn donotnegotiate_and_toolbar_assets() {
    let server = start("banner");
    let r = client()
        .head(format!("{}20170406234215js_/https://stats.example.org/js/counter.js", server.prefix()))
        .send()
        .unwrap();
    assert!(r.headers()["link"].to_str().unwrap().contains("donotnegotiate"));
    let r = client().head(format!("{}/assets/toolbar/logo.png", server.base_url())).send().unwrap();
    assert!(r.headers()["link"].to_str().unwrap().contains("donotnegotiate"));
}

#[test]
fn banner_bump_changes_replay_only() {
    let server = start("banner");
    let raw_uri = server.root_uri().replace("/20170406234215/", "/20170406234215id_/");
    let (replay1, raw1) = (get(&server.root_uri()).bytes().unwrap(), get(&raw_uri).bytes().unwrap());
    server.fire("bump-banner").unwrap();
    let (replay2, raw2) = (get(&server.root_uri()).bytes().unwrap(), get(&raw_uri).bytes().unwrap());
    assert_ne!(replay1, replay2);
    assert_eq!(raw1, raw2);
}

#[test]
fn proxied_requests_are_logged_as_live() {
    let server = start("live-leak");
    let proxy = reqwest::Proxy::http(server.base_url()).unwrap();
    let client = reqwest::blocking::Client::builder().proxy(proxy).build().unwrap();
    let body = client.get("http://cdn.example.com/js/trb-1.js").send().unwrap().text().unwrap();
    assert!(body.contains("served live"));
    let hits = server.hits();
    assert!(hits.iter().any(|h| h.proxied && h.host == "cdn.example.com" && h.path == "/js/trb-1.js"));
}

#[test]
fn responses_identical_across_restarts() {
    let bodies = |server: &ServerHandle| {
        let prefix = server.prefix();
        let uris = [
            server.root_uri(),
            format!("{prefix}20170717185130cs_/http://climate.example.gov/css/site.css"),
            format!("{prefix}20170718000000id_/http://climate.example.gov/system/charts/15_co2_left_061316.gif"),
        ];
        uris.iter()
            .map(|u| get(u).bytes().unwrap().to_vec())
            .map(|b| String::from_utf8_lossy(&b).replace(&server.addr().to_string(), "HOST"))
            .collect::<Vec<_>>()
    };
    let a = bodies(&start("co2"));
    let b = bodies(&start("co2"));
    assert_eq!(a, b);
}
