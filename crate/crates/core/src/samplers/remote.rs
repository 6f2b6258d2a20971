use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::ising::{IsingProblem, SpinVector};
use crate::samples::{Level, SampleSet};

/// Connection to an external sampling service.
///
/// The request is an HTTP POST with body
/// `{"problem": {"n", "h": [[i, v]], "J": [[i, j, v]]}, "n_reads", "params"}`
/// and the reply must be `{"reads": [{"state": [±1, ...], "count"}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemoteBackendConfig {
    pub endpoint: String,
    #[serde(default)]
    pub token: Option<String>,
    /// Passed through verbatim as `params`.
    #[serde(default)]
    pub params: Value,
    #[serde(default = "RemoteBackendConfig::default_timeout")]
    pub timeout_secs: u64,
}

impl RemoteBackendConfig {
    fn default_timeout() -> u64 {
        300
    }

    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteBackendConfig {
            endpoint: endpoint.into(),
            token: None,
            params: Value::Null,
            timeout_secs: Self::default_timeout(),
        }
    }
}

#[derive(Deserialize)]
struct Reply {
    reads: Vec<Read>,
}

#[derive(Deserialize)]
struct Read {
    state: Vec<i8>,
    count: u64,
}

pub fn request_body(problem: &IsingProblem, n_reads: usize, params: &Value) -> Value {
    let h: Vec<Value> = problem
        .fields()
        .iter()
        .enumerate()
        .map(|(i, v)| json!([i, v]))
        .collect();
    let j: Vec<Value> = problem.couplers().map(|(a, b, v)| json!([a, b, v])).collect();
    let params = if params.is_null() { json!({}) } else { params.clone() };
    json!({
        "problem": {"n": problem.n_vars(), "h": h, "J": j},
        "n_reads": n_reads,
        "params": params,
    })
}

/// Parse a reply body into physical-level samples of width `n`.
pub fn parse_reply(body: &str, n: usize) -> Result<SampleSet> {
    let reply: Reply =
        serde_json::from_str(body).map_err(|e| Error::Protocol(format!("malformed reply: {e}")))?;
    let mut set = SampleSet::new(Level::Physical, n);
    for (k, read) in reply.reads.into_iter().enumerate() {
        if read.state.len() != n {
            return Err(Error::Protocol(format!(
                "read {k} has {} spins, expected {n}",
                read.state.len()
            )));
        }
        let state = SpinVector::new(read.state)
            .map_err(|_| Error::Protocol(format!("read {k} contains a value other than ±1")))?;
        if read.count == 0 {
            return Err(Error::Protocol(format!("read {k} has zero count")));
        }
        set.insert(state, read.count)?;
    }
    Ok(set)
}

/// Send a physical problem to the configured service and collect its reads.
pub fn remote_sample(cfg: &RemoteBackendConfig, problem: &IsingProblem, n_reads: usize) -> Result<SampleSet> {
    if cfg.endpoint.trim().is_empty() {
        return Err(Error::domain("remote endpoint must not be empty"));
    }
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(cfg.timeout_secs))
        .build()
        .map_err(|e| Error::Network(e.to_string()))?;
    let mut request = client
        .post(&cfg.endpoint)
        .json(&request_body(problem, n_reads, &cfg.params));
    if let Some(token) = &cfg.token {
        request = request.bearer_auth(token);
    }
    let response = request.send().map_err(|e| Error::Network(e.to_string()))?;
    let status = response.status();
    if status.as_u16() == 401 || status.as_u16() == 403 {
        return Err(Error::Auth(status.as_u16()));
    }
    if !status.is_success() {
        return Err(Error::Protocol(format!("unexpected HTTP status {status}")));
    }
    let body = response.text().map_err(|e| Error::Network(e.to_string()))?;
    parse_reply(&body, problem.n_vars())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read as _, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;
    use std::thread;

    /// Serve one request with a canned status and body; hand back what was
    /// received.
    fn one_shot(status: &'static str, body: &'static str) -> (String, mpsc::Receiver<(String, String)>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/sample", listener.local_addr().unwrap());
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = String::new();
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                headers.push_str(&line);
            }
            let mut request = vec![0u8; length];
            reader.read_exact(&mut request).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            tx.send((headers, String::from_utf8(request).unwrap())).unwrap();
        });
        (url, rx)
    }

    fn problem() -> IsingProblem {
        IsingProblem::from_parts(vec![0.5, -0.25, 0.0], [(0, 1, -1.0), (1, 2, 0.75)]).unwrap()
    }

    #[test]
    fn round_trip_through_loopback() {
        let (url, rx) = one_shot(
            "200 OK",
            r#"{"reads":[{"state":[1,-1,1],"count":3},{"state":[-1,-1,1],"count":2}]}"#,
        );
        let mut cfg = RemoteBackendConfig::new(url);
        cfg.token = Some("secret".into());
        cfg.params = json!({"anneal_time": 20});
        let set = remote_sample(&cfg, &problem(), 5).unwrap();
        assert_eq!(set.n_total(), 5);
        assert_eq!(set.count(&SpinVector::new(vec![1, -1, 1]).unwrap()), 3);
        assert_eq!(set.count(&SpinVector::new(vec![-1, -1, 1]).unwrap()), 2);

        let (headers, body) = rx.recv().unwrap();
        assert!(headers.to_ascii_lowercase().contains("authorization: bearer secret"));
        let sent: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(sent["n_reads"], 5);
        assert_eq!(sent["problem"]["n"], 3);
        assert_eq!(sent["problem"]["J"][1], json!([1, 2, 0.75]));
        assert_eq!(sent["params"]["anneal_time"], 20);
    }

    #[test]
    fn malformed_reply_is_protocol_error() {
        let (url, _rx) = one_shot("200 OK", r#"{"samples": []}"#);
        let err = remote_sample(&RemoteBackendConfig::new(url), &problem(), 1).unwrap_err();
        assert!(matches!(err, Error::Protocol(_)));
        assert!(matches!(parse_reply(r#"{"reads":[{"state":[1,0,1],"count":1}]}"#, 3), Err(Error::Protocol(_))));
        assert!(matches!(parse_reply(r#"{"reads":[{"state":[1],"count":1}]}"#, 3), Err(Error::Protocol(_))));
    }

    #[test]
    fn auth_and_network_errors_are_distinct() {
        let (url, _rx) = one_shot("401 Unauthorized", "{}");
        let err = remote_sample(&RemoteBackendConfig::new(url), &problem(), 1).unwrap_err();
        assert!(matches!(err, Error::Auth(401)));

        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/", listener.local_addr().unwrap());
        drop(listener);
        let err = remote_sample(&RemoteBackendConfig::new(url), &problem(), 1).unwrap_err();
        assert!(matches!(err, Error::Network(_)));
        assert!(remote_sample(&RemoteBackendConfig::new(" "), &problem(), 1).is_err());
    }
}
