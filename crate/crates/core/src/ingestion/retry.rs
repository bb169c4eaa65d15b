use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::{MetadataProvider, ProviderError, ProviderResult};
use crate::model::VideoRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_secs(1),
            factor: 2,
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(attempts: u32) -> Self {
        RetryPolicy {
            attempts,
            base_delay: Duration::ZERO,
            factor: 2,
        }
    }

    /// Delay before retry number `retry` (0-based).
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay * self.factor.saturating_pow(retry)
    }

    pub fn run<T>(&self, what: &str, mut f: impl FnMut() -> ProviderResult<T>) -> ProviderResult<T> {
        let attempts = self.attempts.max(1);
        let mut retry = 0;
        loop {
            match f() {
                Err(e) if e.is_retryable() && retry + 1 < attempts => {
                    let d = self.delay(retry);
                    log::warn!("{what}: {e}; retrying in {d:?}");
                    std::thread::sleep(d);
                    retry += 1;
                }
                other => return other,
            }
        }
    }
}

/// Wraps a provider so that retryable failures are retried with
/// exponential backoff.
#[derive(Debug)]
pub struct Retrying<P> {
    inner: P,
    policy: RetryPolicy,
}

impl<P> Retrying<P> {
    pub fn new(inner: P, policy: RetryPolicy) -> Self {
        Retrying { inner, policy }
    }

    pub fn into_inner(self) -> P {
        self.inner
    }
}

impl<P: MetadataProvider> MetadataProvider for Retrying<P> {
    fn search(&self, keyword: &str, n: usize) -> ProviderResult<Vec<String>> {
        self.policy.run(&format!("search `{keyword}`"), || self.inner.search(keyword, n))
    }
    fn channel_uploads(&self, channel_id: &str) -> ProviderResult<Vec<String>> {
        self.policy
            .run(&format!("channel `{channel_id}`"), || self.inner.channel_uploads(channel_id))
    }
    fn random_sample(&self, n: usize) -> ProviderResult<Vec<String>> {
        self.policy.run("random sample", || self.inner.random_sample(n))
    }
    fn popular(&self, region: &str, n: usize) -> ProviderResult<Vec<String>> {
        self.policy.run(&format!("popular {region}"), || self.inner.popular(region, n))
    }
    fn recommendations(&self, video_id: &str, n: usize) -> ProviderResult<Vec<String>> {
        self.policy
            .run(&format!("recommendations of {video_id}"), || self.inner.recommendations(video_id, n))
    }
    fn fetch(&self, video_id: &str) -> ProviderResult<VideoRecord> {
        self.policy.run(&format!("fetch {video_id}"), || self.inner.fetch(video_id))
    }
}

/// Token-bucket rate limiter shared by concurrent requesters.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    per_second: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(capacity: u32, per_second: f64) -> Result<Self, ProviderError> {
        if capacity == 0 || !(per_second > 0.0) {
            return Err(ProviderError::BadResponse(
                "rate limit needs a positive capacity and refill rate".into(),
            ));
        }
        Ok(TokenBucket {
            capacity: capacity as f64,
            per_second,
            state: Mutex::new((capacity as f64, Instant::now())),
        })
    }

    /// Take one token, sleeping until one is available.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut s = self.state.lock().expect("rate limiter poisoned");
                let now = Instant::now();
                s.0 = (s.0 + now.duration_since(s.1).as_secs_f64() * self.per_second).min(self.capacity);
                s.1 = now;
                if s.0 >= 1.0 {
                    s.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - s.0) / self.per_second)
            };
            std::thread::sleep(wait);
        }
    }
}
