use std::fs;
use std::path::PathBuf;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use super::IngestError;

/// Fetches a URL body as text.
pub trait HttpClient: Send + Sync {
    fn get(&self, url: &str) -> Result<String, IngestError>;
}

/// Blocking client with a minimum delay between requests.
pub struct LiveHttp {
    agent: ureq::Agent,
    delay: Duration,
    last: Mutex<Option<Instant>>,
}

impl LiveHttp {
    pub fn new(delay: Duration) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(30))
            .user_agent(concat!("cyents/", env!("CARGO_PKG_VERSION")))
            .build();
        LiveHttp { agent, delay, last: Mutex::new(None) }
    }
}

impl Default for LiveHttp {
    fn default() -> Self {
        Self::new(Duration::from_secs(1))
    }
}

impl HttpClient for LiveHttp {
    fn get(&self, url: &str) -> Result<String, IngestError> {
        {
            let mut last = self.last.lock().expect("politeness lock");
            if let Some(t) = *last {
                let since = t.elapsed();
                if since < self.delay {
                    thread::sleep(self.delay - since);
                }
            }
            *last = Some(Instant::now());
        }
        let net = |message: String| IngestError::Network { url: url.to_string(), message };
        let resp = self.agent.get(url).call().map_err(|e| net(e.to_string()))?;
        resp.into_string().map_err(|e| net(e.to_string()))
    }
}

/// File name a URL is recorded under: scheme dropped, then every char
/// outside `[A-Za-z0-9._-]` replaced by `_`.
pub fn fixture_name(url: &str) -> String {
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    let name: String = rest
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect();
    if name.is_empty() {
        "_".into()
    } else {
        name
    }
}

/// Serves recorded responses from a directory; a missing file is a 404.
#[derive(Debug, Clone)]
pub struct FixtureHttp {
    dir: PathBuf,
}

impl FixtureHttp {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureHttp { dir: dir.into() }
    }
}

impl HttpClient for FixtureHttp {
    fn get(&self, url: &str) -> Result<String, IngestError> {
        let path = self.dir.join(fixture_name(url));
        fs::read_to_string(&path).map_err(|_| IngestError::Network {
            url: url.to_string(),
            message: format!("404 not found (no recording at {})", path.display()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_names() {
        assert_eq!(fixture_name("https://blog.example.com/feed.xml"), "blog.example.com_feed.xml");
        assert_eq!(fixture_name("http://a.b/x?y=1&z"), "a.b_x_y_1_z");
        assert_eq!(fixture_name(""), "_");
    }
}
