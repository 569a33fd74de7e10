use std::io::Read;
use std::time::Duration;

use super::{PageSource, RawResponse, SourceError};

/// Bodies larger than this are truncated.
const MAX_BODY_BYTES: u64 = 10 * 1024 * 1024;

/// Live HTTP source. Redirects are returned, not followed, so the
/// [`super::Fetcher`] can apply its own policy to every hop.
pub struct HttpSource {
    agent: ureq::Agent,
}

impl Default for HttpSource {
    fn default() -> Self {
        Self::new()
    }
}

impl HttpSource {
    pub fn new() -> Self {
        let config = ureq::Agent::config_builder()
            .max_redirects(0)
            .http_status_as_error(false)
            .build();
        HttpSource {
            agent: ureq::Agent::new_with_config(config),
        }
    }
}

impl PageSource for HttpSource {
    fn get(&self, url: &str, timeout: Duration, user_agent: &str) -> Result<RawResponse, SourceError> {
        let result = self
            .agent
            .get(url)
            .config()
            .timeout_global(Some(timeout))
            .build()
            .header("User-Agent", user_agent)
            .call();
        let mut response = match result {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(SourceError::Timeout),
            Err(e) => return Err(SourceError::Transport(e.to_string())),
        };
        let status = response.status().as_u16();
        let headers = response
            .headers()
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_ascii_lowercase(), v.to_str().ok()?.to_string())))
            .collect();
        let mut body = Vec::new();
        let read = response
            .body_mut()
            .as_reader()
            .take(MAX_BODY_BYTES)
            .read_to_end(&mut body);
        match read {
            Ok(_) => Ok(RawResponse {
                status,
                headers,
                body,
            }),
            Err(e) if e.kind() == std::io::ErrorKind::TimedOut => Err(SourceError::Timeout),
            Err(e) => Err(SourceError::Transport(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use std::net::TcpListener;

    #[test]
    fn reads_status_headers_and_body_without_following_redirects() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = [0u8; 1024];
            let n = stream.read(&mut buf).unwrap();
            let request = String::from_utf8_lossy(&buf[..n]).to_string();
            stream
                .write_all(b"HTTP/1.1 301 Moved\r\nLocation: /next\r\nContent-Length: 2\r\nConnection: close\r\n\r\nhi")
                .unwrap();
            request
        });
        let src = HttpSource::new();
        let r = src
            .get(&format!("http://{addr}/start"), Duration::from_secs(5), "webcorpus-test")
            .unwrap();
        assert_eq!(r.status, 301);
        assert_eq!(r.header("location"), Some("/next"));
        assert_eq!(r.body, b"hi");
        let request = server.join().unwrap();
        assert!(request.to_ascii_lowercase().contains("user-agent: webcorpus-test"));
    }

    #[test]
    fn refused_connection_is_transport_error() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        let r = HttpSource::new().get(&format!("http://{addr}/"), Duration::from_secs(2), "t");
        assert!(matches!(r, Err(SourceError::Transport(_))));
    }
}
