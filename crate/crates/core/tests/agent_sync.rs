use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use kbts_core::agent::{
    extract_rules, run_periodic, sync, Agent, FetchError, Fetcher, SourceConfig, StopSignal,
};
use kbts_core::rule_model::{seed_corpus, RuleDraft};
use kbts_core::RuleStore;

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    std::fs::read_to_string(path).unwrap()
}

/// Serves fixture pages by URL; anything else is unreachable.
struct FixtureFetcher {
    pages: HashMap<String, String>,
    delay: Duration,
    calls: AtomicUsize,
}

impl FixtureFetcher {
    fn new(pages: &[(&str, &str)]) -> Self {
        Self {
            pages: pages
                .iter()
                .map(|(url, file)| (url.to_string(), fixture(file)))
                .collect(),
            delay: Duration::ZERO,
            calls: AtomicUsize::new(0),
        }
    }
}

impl Fetcher for FixtureFetcher {
    fn fetch(&self, url: &str, _timeout: Duration) -> Result<String, FetchError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        thread::sleep(self.delay);
        self.pages
            .get(url)
            .cloned()
            .ok_or_else(|| FetchError(format!("no route to {url}")))
    }
}

fn two_sources() -> (SourceConfig, FixtureFetcher) {
    let config = SourceConfig {
        sources: vec![
            "https://kb.example/monitor".into(),
            "https://kb.example/network".into(),
        ],
        ..Default::default()
    };
    let fetcher = FixtureFetcher::new(&[
        ("https://kb.example/monitor", "monitor.html"),
        ("https://kb.example/network", "network.html"),
    ]);
    (config, fetcher)
}

#[test]
fn fixture_pages_extract_cleanly() {
    let monitor = extract_rules(&fixture("monitor.html"));
    assert_eq!((monitor.candidates.len(), monitor.malformed), (4, 0));
    assert_eq!(monitor.candidates[3].condition_b, "Tray won't Open");
    let network = extract_rules(&fixture("network.html"));
    assert_eq!((network.candidates.len(), network.malformed), (4, 0));
    let audio = extract_rules(&fixture("seed_overlap.html"));
    assert_eq!((audio.candidates.len(), audio.malformed), (4, 1));
}

#[test]
fn two_sources_with_one_overlap() {
    let (config, fetcher) = two_sources();
    let mut rb = seed_corpus();
    let report = sync(&mut rb, &config, &fetcher);
    assert_eq!(report.added(), 7);
    assert_eq!(report.skipped_duplicates(), 1);
    assert_eq!(report.sources[1].skipped_duplicates, 1);
    assert!(report.is_balanced());
    assert_eq!(rb.len(), 40);
    assert_eq!(rb.rules().last().unwrap().id, 40);
    assert!(rb.find_pair("Network", "Slow Transfers").is_some());
}

#[test]
fn second_sync_adds_nothing() {
    let (config, fetcher) = two_sources();
    let mut rb = seed_corpus();
    sync(&mut rb, &config, &fetcher);
    let version = rb.version();
    let again = sync(&mut rb, &config, &fetcher);
    assert_eq!(again.added(), 0);
    assert_eq!(again.skipped_duplicates(), 8);
    assert!(again.is_balanced());
    assert_eq!(rb.version(), version);
}

#[test]
fn seed_page_is_all_duplicates_plus_malformed() {
    let config = SourceConfig {
        sources: vec!["u".into()],
        ..Default::default()
    };
    let fetcher = FixtureFetcher::new(&[("u", "seed_overlap.html")]);
    let mut rb = seed_corpus();
    let report = sync(&mut rb, &config, &fetcher);
    let s = &report.sources[0];
    assert_eq!(
        (s.candidates, s.added, s.skipped_duplicates, s.malformed),
        (5, 0, 4, 1)
    );
}

#[test]
fn failing_source_does_not_block_others() {
    let (mut config, fetcher) = two_sources();
    config.sources.insert(0, "https://down.example/".into());
    let mut rb = seed_corpus();
    let report = sync(&mut rb, &config, &fetcher);
    assert!(!report.sources[0].fetched);
    assert!(report.sources[1].fetched && report.sources[2].fetched);
    assert_eq!(report.added(), 7);
}

#[test]
fn hostile_pages_keep_invariants() {
    let pages = [
        "<table class=kb-rules><tr><td>h<tr><td>a<td>b<td>c<td>d<tr><td>A<td>B<td>x<td>y</table>",
        "<table class=\"kb-rules\"><tr><tr><td></td><td></td><td></td><td></td><tr><td>&#0;<td>&bogus;<td>&lt;<td>&gt;",
        "<table class='kb-rules'><tr><td>",
        "<<<table class=kb-rules>>>><tr><td>x</td><td>y</td></tr>",
    ];
    let config = SourceConfig {
        sources: (0..pages.len()).map(|i| i.to_string()).collect(),
        ..Default::default()
    };
    let fetcher =
        move |url: &str, _: Duration| Ok(pages[url.parse::<usize>().unwrap()].to_string());
    let mut rb = seed_corpus();
    let report = sync(&mut rb, &config, &fetcher);
    assert!(report.is_balanced());
    let mut keys: Vec<_> = rb.rules().iter().map(|r| r.pair_key()).collect();
    let n = keys.len();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), n);
    assert_eq!(report.sources[0].added, 1);
    assert_eq!(report.sources[0].skipped_duplicates, 1);
}

fn agent_with(fetcher: FixtureFetcher) -> (Arc<RuleStore>, Agent, Arc<FixtureFetcher>) {
    let store = Arc::new(RuleStore::in_memory(seed_corpus()));
    let (config, _) = two_sources();
    let fetcher = Arc::new(fetcher);
    let agent = Agent::new(store.clone(), config, fetcher.clone());
    (store, agent, fetcher)
}

#[test]
fn periodic_stop_before_first_tick() {
    let (store, agent, fetcher) = agent_with(two_sources().1);
    let stop = StopSignal::new();
    stop.stop();
    let stats = run_periodic(&agent, Duration::from_millis(50), &stop);
    assert_eq!(stats.syncs, 0);
    assert_eq!(fetcher.calls.load(Ordering::SeqCst), 0);
    assert_eq!(store.snapshot().len(), 33);
}

#[test]
fn periodic_ticks_are_idempotent() {
    let (store, agent, _) = agent_with(two_sources().1);
    let stop = StopSignal::new();
    let stats = thread::scope(|s| {
        let runner = s.spawn(|| run_periodic(&agent, Duration::from_millis(100), &stop));
        // Ticks at 100, 200, 300 ms.
        thread::sleep(Duration::from_millis(350));
        stop.stop();
        runner.join().unwrap()
    });
    assert_eq!(stats.syncs, 3);
    let reports = agent.recent_reports();
    assert_eq!(
        reports.iter().map(|r| r.added()).collect::<Vec<_>>(),
        [7, 0, 0]
    );
    assert_eq!(store.snapshot().len(), 40);
}

#[test]
fn slow_sync_skips_overlapping_tick() {
    let mut fetcher = two_sources().1;
    // Two sources at 225 ms each: one sync spans 450 ms, i.e. 1.5 intervals.
    fetcher.delay = Duration::from_millis(225);
    let (_, agent, _) = agent_with(fetcher);
    let stop = StopSignal::new();
    let started = Instant::now();
    let stats = thread::scope(|s| {
        let runner = s.spawn(|| run_periodic(&agent, Duration::from_millis(300), &stop));
        // Sync runs 300..750 ms; the 600 ms tick falls inside it; stop before 900 ms.
        thread::sleep(Duration::from_millis(825).saturating_sub(started.elapsed()));
        stop.stop();
        runner.join().unwrap()
    });
    assert_eq!(stats.syncs, 1);
    assert_eq!(stats.skipped_ticks, 1);
}

#[test]
fn manual_sync_blocks_periodic_tick() {
    let mut fetcher = two_sources().1;
    fetcher.delay = Duration::from_millis(100);
    let (_, agent, _) = agent_with(fetcher);
    let stop = StopSignal::new();
    let stats = thread::scope(|s| {
        let manual = s.spawn(|| agent.sync_now().unwrap());
        thread::sleep(Duration::from_millis(20));
        let runner = s.spawn(|| run_periodic(&agent, Duration::from_millis(50), &stop));
        let report = manual.join().unwrap();
        assert_eq!(report.added(), 7);
        thread::sleep(Duration::from_millis(10));
        stop.stop();
        runner.join().unwrap()
    });
    assert!(stats.skipped_ticks >= 1, "{stats:?}");
}

#[test]
fn agent_log_gets_one_line_per_sync() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(RuleStore::in_memory(seed_corpus()));
    let (mut config, fetcher) = two_sources();
    config.log_path = Some(dir.path().join("agent.jsonl"));
    let agent = Agent::new(store, config.clone(), Arc::new(fetcher));
    agent.sync_now().unwrap();
    agent.sync_now().unwrap();
    let text = std::fs::read_to_string(config.log_path.unwrap()).unwrap();
    let lines: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0]["started_at"].is_string());
    assert_eq!(lines[0]["sources"][0]["added"], 4);
    assert_eq!(lines[1]["sources"][0]["added"], 0);
}

#[test]
fn add_path_is_the_rulebase_insert() {
    // A scraped rule that only differs by whitespace from an existing pair is
    // treated like an admin insert would treat it.
    let page = r#"<table class="kb-rules"><tr><th>h</th></tr><tr><td>Hard   Disk</td><td> SMART Warning Displayed</td><td>x</td><td>y</td></tr></table>"#;
    let mut rb = seed_corpus();
    let err = rb.add_rule(&RuleDraft::new(
        "Hard   Disk",
        " SMART Warning Displayed",
        "x",
        "y",
    ));
    assert!(err.is_err());
    let config = SourceConfig {
        sources: vec!["p".into()],
        ..Default::default()
    };
    let report = sync(&mut rb, &config, &move |_: &str, _: Duration| {
        Ok(page.to_string())
    });
    assert_eq!(report.added(), 0);
}
