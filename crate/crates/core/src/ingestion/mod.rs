//! Seed collection, snowball crawling through recommendations, and
//! availability audits, all against a [`MetadataProvider`].

mod crawl;
mod fixture;
mod live;
mod retry;

use serde::{Deserialize, Serialize};

use crate::model::VideoRecord;

pub use crawl::{
    audit_availability, audit_tsv, collect_seeds, snowball, snowball_resumable, AuditRow, AvailabilityAudit, Crawl,
    CrawlPlan, FailedRequest,
};
pub use fixture::{FixtureProvider, Op, Recorder};
pub use live::{KeyPool, LiveProvider, DEFAULT_API_BASE, DEFAULT_KEY_ENV};
pub use retry::{RetryPolicy, Retrying, TokenBucket};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum ProviderError {
    #[error("quota exhausted: {0}")]
    Quota(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("no recorded response for {0}")]
    NotRecorded(String),
    #[error("unexpected response: {0}")]
    BadResponse(String),
    #[error("missing credentials: {0}")]
    Credentials(String),
}

impl ProviderError {
    /// Quota and transport failures are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Quota(_) | ProviderError::Transport(_))
    }
}

pub type ProviderResult<T> = std::result::Result<T, ProviderError>;

/// Source of video metadata. Listing operations return video ids; [`fetch`]
/// resolves an id to its metadata.
///
/// A removed video is reported by `fetch` with
/// [`Availability::Removed`](crate::model::Availability::Removed), not as an
/// error.
///
/// [`fetch`]: MetadataProvider::fetch
pub trait MetadataProvider: Send + Sync {
    fn search(&self, keyword: &str, n: usize) -> ProviderResult<Vec<String>>;
    fn channel_uploads(&self, channel_id: &str) -> ProviderResult<Vec<String>>;
    fn random_sample(&self, n: usize) -> ProviderResult<Vec<String>>;
    /// Most popular videos in `region` (ISO 3166 code) at request time.
    fn popular(&self, region: &str, n: usize) -> ProviderResult<Vec<String>>;
    /// At most `n` recommended video ids for `video_id`.
    fn recommendations(&self, video_id: &str, n: usize) -> ProviderResult<Vec<String>>;
    fn fetch(&self, video_id: &str) -> ProviderResult<VideoRecord>;
}

impl<P: MetadataProvider + ?Sized> MetadataProvider for &P {
    fn search(&self, keyword: &str, n: usize) -> ProviderResult<Vec<String>> {
        (**self).search(keyword, n)
    }
    fn channel_uploads(&self, channel_id: &str) -> ProviderResult<Vec<String>> {
        (**self).channel_uploads(channel_id)
    }
    fn random_sample(&self, n: usize) -> ProviderResult<Vec<String>> {
        (**self).random_sample(n)
    }
    fn popular(&self, region: &str, n: usize) -> ProviderResult<Vec<String>> {
        (**self).popular(region, n)
    }
    fn recommendations(&self, video_id: &str, n: usize) -> ProviderResult<Vec<String>> {
        (**self).recommendations(video_id, n)
    }
    fn fetch(&self, video_id: &str) -> ProviderResult<VideoRecord> {
        (**self).fetch(video_id)
    }
}

impl<P: MetadataProvider + ?Sized> MetadataProvider for Box<P> {
    fn search(&self, keyword: &str, n: usize) -> ProviderResult<Vec<String>> {
        (**self).search(keyword, n)
    }
    fn channel_uploads(&self, channel_id: &str) -> ProviderResult<Vec<String>> {
        (**self).channel_uploads(channel_id)
    }
    fn random_sample(&self, n: usize) -> ProviderResult<Vec<String>> {
        (**self).random_sample(n)
    }
    fn popular(&self, region: &str, n: usize) -> ProviderResult<Vec<String>> {
        (**self).popular(region, n)
    }
    fn recommendations(&self, video_id: &str, n: usize) -> ProviderResult<Vec<String>> {
        (**self).recommendations(video_id, n)
    }
    fn fetch(&self, video_id: &str) -> ProviderResult<VideoRecord> {
        (**self).fetch(video_id)
    }
}
