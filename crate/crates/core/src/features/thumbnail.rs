//! Thumbnail embeddings from a pluggable image backbone.
//!
//! Images are rescaled to 299×299 RGB and handed to an [`EmbeddingBackbone`]
//! that returns a 2048-long feature vector (the pooled output of an
//! ImageNet-pretrained Inception-v3 in the reference setup). Results are cached
//! by the SHA-256 of the encoded image bytes, in memory and optionally on disk
//! as `<cache>/<backbone>/<hash>.bin` (2048 little-endian `f32`s). A cache
//! directory filled by an external feature extractor therefore acts as a
//! precomputed backbone.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use image::imageops::FilterType;
use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::atomic_write;

pub const THUMBNAIL_DIM: usize = 2048;
pub const INPUT_SIDE: u32 = 299;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThumbnailEmbedding {
    pub values: Vec<f32>,
    /// Set when the thumbnail was absent or could not be decoded; `values`
    /// is then all zeros.
    #[serde(default)]
    pub missing: bool,
}

impl ThumbnailEmbedding {
    pub fn zeros() -> Self {
        ThumbnailEmbedding {
            values: vec![0.0; THUMBNAIL_DIM],
            missing: true,
        }
    }

    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.len() != THUMBNAIL_DIM {
            return Err(Error::DimensionMismatch {
                what: "thumbnail embedding",
                expected: THUMBNAIL_DIM,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite thumbnail embedding".into()));
        }
        Ok(ThumbnailEmbedding {
            values,
            missing: false,
        })
    }
}

/// An image feature extractor. Implementations receive 299×299 RGB images.
pub trait EmbeddingBackbone: Send + Sync {
    /// Stable identifier, used to namespace the on-disk cache.
    fn name(&self) -> &str;

    fn embed(&self, image: &RgbImage) -> Result<Vec<f32>>;
}

/// Deterministic stand-in backbone: the vector is drawn from a ChaCha stream
/// seeded by the SHA-256 of the seed and the pixel bytes. Useful offline and
/// in tests; carries no visual semantics.
#[derive(Debug, Clone, Default)]
pub struct StubBackbone {
    pub seed: u64,
}

impl EmbeddingBackbone for StubBackbone {
    fn name(&self) -> &str {
        "stub"
    }

    fn embed(&self, image: &RgbImage) -> Result<Vec<f32>> {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(image.width().to_le_bytes());
        h.update(image.height().to_le_bytes());
        h.update(image.as_raw());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(seed);
        Ok((0..THUMBNAIL_DIM).map(|_| rng.gen::<f32>()).collect())
    }
}

/// Backbone that only serves the on-disk cache and fails on a miss.
#[derive(Debug, Clone)]
pub struct PrecomputedBackbone {
    pub name: String,
}

impl EmbeddingBackbone for PrecomputedBackbone {
    fn name(&self) -> &str {
        &self.name
    }

    fn embed(&self, _image: &RgbImage) -> Result<Vec<f32>> {
        Err(Error::InvalidArgument(format!(
            "no precomputed `{}` embedding for this image",
            self.name
        )))
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Decode and rescale to the backbone's 299×299×3 input.
pub fn prepare_image(bytes: &[u8]) -> Result<RgbImage> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::Image(e.to_string()))?;
    Ok(img
        .resize_exact(INPUT_SIDE, INPUT_SIDE, FilterType::Triangle)
        .to_rgb8())
}

pub struct ThumbnailEmbedder {
    backbone: Arc<dyn EmbeddingBackbone>,
    memory: RwLock<HashMap<String, Arc<Vec<f32>>>>,
    disk: Option<PathBuf>,
}

impl ThumbnailEmbedder {
    pub fn new(backbone: Arc<dyn EmbeddingBackbone>) -> Self {
        ThumbnailEmbedder {
            backbone,
            memory: RwLock::new(HashMap::new()),
            disk: None,
        }
    }

    pub fn with_disk_cache(mut self, dir: impl Into<PathBuf>) -> Self {
        self.disk = Some(dir.into());
        self
    }

    pub fn stub(seed: u64) -> Self {
        Self::new(Arc::new(StubBackbone { seed }))
    }

    pub fn backbone_name(&self) -> &str {
        self.backbone.name()
    }

    fn disk_path(&self, hash: &str) -> Option<PathBuf> {
        self.disk
            .as_ref()
            .map(|d| d.join(self.backbone.name()).join(format!("{hash}.bin")))
    }

    fn read_disk(&self, hash: &str) -> Option<Vec<f32>> {
        let bytes = fs::read(self.disk_path(hash)?).ok()?;
        if bytes.len() != THUMBNAIL_DIM * 4 {
            return None;
        }
        Some(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        )
    }

    fn write_disk(&self, hash: &str, v: &[f32]) {
        if let Some(path) = self.disk_path(hash) {
            let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
            if let Err(e) = atomic_write(&path, &bytes) {
                log::warn!("could not cache embedding {hash}: {e}");
            }
        }
    }

    /// Embed encoded image bytes; the strict variant of [`Self::embed_bytes`].
    pub fn try_embed_bytes(&self, bytes: &[u8]) -> Result<ThumbnailEmbedding> {
        let hash = content_hash(bytes);
        if let Some(v) = self.memory.read().expect("cache lock").get(&hash) {
            return ThumbnailEmbedding::new(v.as_ref().clone());
        }
        let values = match self.read_disk(&hash) {
            Some(v) => v,
            None => {
                let v = self.backbone.embed(&prepare_image(bytes)?)?;
                ThumbnailEmbedding::new(v.clone())?;
                self.write_disk(&hash, &v);
                v
            }
        };
        let emb = ThumbnailEmbedding::new(values)?;
        self.memory
            .write()
            .expect("cache lock")
            .insert(hash, Arc::new(emb.values.clone()));
        Ok(emb)
    }

    /// Embed encoded image bytes, falling back to the flagged zero vector when
    /// the image cannot be decoded or embedded.
    pub fn embed_bytes(&self, bytes: &[u8]) -> ThumbnailEmbedding {
        self.try_embed_bytes(bytes).unwrap_or_else(|e| {
            log::debug!("thumbnail unavailable: {e}");
            ThumbnailEmbedding::zeros()
        })
    }

    /// Resolve a thumbnail locator (local path, relative to `base_dir` when not
    /// absolute, or an `http(s)://` address) and embed it.
    pub fn embed_ref(&self, thumbnail_ref: Option<&str>, base_dir: Option<&Path>) -> ThumbnailEmbedding {
        let Some(loc) = thumbnail_ref.filter(|s| !s.trim().is_empty()) else {
            return ThumbnailEmbedding::zeros();
        };
        match fetch_locator(loc, base_dir) {
            Ok(bytes) => self.embed_bytes(&bytes),
            Err(e) => {
                log::debug!("thumbnail {loc} unavailable: {e}");
                ThumbnailEmbedding::zeros()
            }
        }
    }

    pub fn cached_entries(&self) -> usize {
        self.memory.read().expect("cache lock").len()
    }
}

fn fetch_locator(loc: &str, base_dir: Option<&Path>) -> Result<Vec<u8>> {
    if loc.starts_with("http://") || loc.starts_with("https://") {
        let mut resp = ureq::get(loc)
            .call()
            .map_err(|e| Error::Image(format!("fetch {loc}: {e}")))?;
        return resp
            .body_mut()
            .read_to_vec()
            .map_err(|e| Error::Image(format!("read {loc}: {e}")));
    }
    let path = Path::new(loc);
    let path = match base_dir {
        Some(base) if path.is_relative() => base.join(path),
        _ => path.to_path_buf(),
    };
    fs::read(&path).map_err(|e| Error::io(path, e))
}
