//! Page transport for the acquisition agent: `http(s)://` and `file://`.

use std::time::Duration;

use kbts_core::agent::{FetchError, Fetcher};
use url::Url;

#[derive(Debug, Default, Clone)]
pub struct HttpFetcher;

impl Fetcher for HttpFetcher {
    fn fetch(&self, source: &str, timeout: Duration) -> Result<String, FetchError> {
        let url = Url::parse(source).map_err(|e| FetchError(format!("bad url {source:?}: {e}")))?;
        match url.scheme() {
            "file" => {
                let path = url
                    .to_file_path()
                    .map_err(|_| FetchError(format!("bad file url {source:?}")))?;
                std::fs::read_to_string(&path)
                    .map_err(|e| FetchError(format!("{}: {e}", path.display())))
            }
            "http" | "https" => {
                let client = reqwest::blocking::Client::builder()
                    .timeout(timeout)
                    .build()
                    .map_err(|e| FetchError(e.to_string()))?;
                let response = client
                    .get(url)
                    .send()
                    .and_then(|r| r.error_for_status())
                    .map_err(|e| FetchError(e.to_string()))?;
                response.text().map_err(|e| FetchError(e.to_string()))
            }
            other => Err(FetchError(format!("unsupported scheme {other:?}"))),
        }
    }
}
