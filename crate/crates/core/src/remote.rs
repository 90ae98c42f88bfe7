//! Minimal blocking JSON-over-HTTP helpers shared by the remote scorer and encoder.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub(crate) fn client(timeout: Duration) -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .expect("HTTP client construction")
}

pub(crate) fn join(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path)
}

pub(crate) fn get_json<T: DeserializeOwned>(client: &reqwest::blocking::Client, url: &str) -> Result<T, String> {
    let resp = client.get(url).send().map_err(|e| format!("transport: {e}"))?;
    decode(resp)
}

pub(crate) fn post_json<B: Serialize, T: DeserializeOwned>(
    client: &reqwest::blocking::Client,
    url: &str,
    body: &B,
) -> Result<T, String> {
    let resp = client.post(url).json(body).send().map_err(|e| format!("transport: {e}"))?;
    decode(resp)
}

fn decode<T: DeserializeOwned>(resp: reqwest::blocking::Response) -> Result<T, String> {
    let status = resp.status();
    let body = resp.text().map_err(|e| format!("transport: {e}"))?;
    if !status.is_success() {
        return Err(format!("HTTP {status}: {}", body.chars().take(200).collect::<String>()));
    }
    serde_json::from_str(&body).map_err(|e| format!("malformed response: {e}"))
}
