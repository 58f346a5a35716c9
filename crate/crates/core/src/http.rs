//! Blocking JSON-over-HTTP transport shared by the remote clients.

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("client unavailable: {0}")]
    Unavailable(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// Validates that `url` is an absolute http(s) URL.
pub fn check_url(url: &str) -> Result<url::Url, String> {
    let parsed = url::Url::parse(url).map_err(|e| format!("{url}: {e}"))?;
    match parsed.scheme() {
        "http" | "https" => Ok(parsed),
        other => Err(format!("{url}: unsupported scheme `{other}`")),
    }
}

pub(crate) fn join(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path.trim_start_matches('/'))
}

/// POSTs `body` as JSON and decodes a JSON response. Any transport failure
/// or non-200 status is `Unavailable`; an undecodable body is `Protocol`.
pub(crate) fn post_json<B: Serialize, R: DeserializeOwned>(
    url: &str,
    body: &B,
) -> Result<R, ClientError> {
    let mut resp = ureq::post(url)
        .header("content-type", "application/json")
        .send_json(body)
        .map_err(|e| ClientError::Unavailable(format!("{url}: {e}")))?;
    if resp.status() != 200 {
        return Err(ClientError::Unavailable(format!(
            "{url}: HTTP {}",
            resp.status()
        )));
    }
    resp.body_mut()
        .read_json()
        .map_err(|e| ClientError::Protocol(format!("{url}: {e}")))
}

pub(crate) fn get_json<R: DeserializeOwned>(url: &str) -> Result<R, ClientError> {
    let mut resp = ureq::get(url)
        .call()
        .map_err(|e| ClientError::Unavailable(format!("{url}: {e}")))?;
    resp.body_mut()
        .read_json()
        .map_err(|e| ClientError::Protocol(format!("{url}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_validation() {
        assert!(check_url("http://localhost:8080").is_ok());
        assert!(check_url("ftp://x").is_err());
        assert!(check_url("not a url").is_err());
    }

    #[test]
    fn join_paths() {
        assert_eq!(join("http://h:1/", "/embed"), "http://h:1/embed");
        assert_eq!(join("http://h:1", "embed"), "http://h:1/embed");
    }
}
