use std::time::Duration;

/// Remote calls give up after this long unless a binding says otherwise.
pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

/// Every provider is served at `<endpoint>/invoke`.
pub fn invoke_url(endpoint: &str) -> String {
    format!("{}/invoke", endpoint.trim_end_matches('/'))
}

/// POST a JSON body to `<endpoint>/invoke`; returns status and body text.
/// Connection failures and timeouts come back as `Err(message)`.
pub(crate) fn post_json(endpoint: &str, body: &str, timeout_ms: u64) -> Result<(u16, String), String> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(timeout_ms)))
        .http_status_as_error(false)
        .build()
        .into();
    let mut resp = agent
        .post(&invoke_url(endpoint))
        .header("content-type", "application/json")
        .send(body)
        .map_err(|e| e.to_string())?;
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
    Ok((status, text))
}
