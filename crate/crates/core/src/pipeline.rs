//! End-to-end synthesis and dataset emission.
//!
//! Image `i` of a dataset is a pure function of `(master_seed, i)` and the
//! rest of the config. The stream for image `i` is consumed in this order:
//! slot A (coin, then content), slot B (coin, then content), mask `m0`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cutmix::{cutmix, refine_mask, sample_pair, MaskRefineConfig, PriorSource};
use crate::error::{Error, Result};
use crate::image::PriorImage;
use crate::noise::{mix_hierarchical, ScalePlan, UpscaleMode};
use crate::rng::{derive_stream, RngStream};
use crate::shard::{sha256_hex, ShardHeader, ShardWriter};
use crate::transform::{apply_nonlinear, ElasticParams};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Stage order recorded in every manifest and folded into the config hash.
pub const STAGE_ORDER: [&str; 5] = [
    "hierarchical_noise",
    "rotate",
    "elastic",
    "crop",
    "semantic_cutmix",
];

/// Images generated per parallel batch before being written out.
const BATCH: usize = 256;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    F32bin,
    Png,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32bin" => Ok(OutputFormat::F32bin),
            "png" => Ok(OutputFormat::Png),
            other => Err(Error::invalid(format!("unknown output format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub count: u64,
    pub master_seed: u64,
    pub upscale_mode: UpscaleMode,
    pub elastic: ElasticParams,
    pub mask: MaskRefineConfig,
    pub mono_prob: f64,
    pub format: OutputFormat,
    pub shard_size: u64,
}

impl SynthesisConfig {
    /// Defaults for the given image shape; size-dependent parameters scale with `max(H, W)`.
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        let side = height.max(width);
        Self {
            channels,
            height,
            width,
            count: 10_000,
            master_seed: 0,
            upscale_mode: UpscaleMode::Nearest,
            elastic: ElasticParams::default_for_side(side),
            mask: MaskRefineConfig::default_for_side(side),
            mono_prob: 0.25,
            format: OutputFormat::F32bin,
            shard_size: 10_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::invalid("channels, height and width must be positive"));
        }
        if self.count == 0 {
            return Err(Error::invalid("count must be at least 1"));
        }
        if self.shard_size == 0 {
            return Err(Error::invalid("shard_size must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.mono_prob) {
            return Err(Error::invalid(format!("mono_prob {} is outside [0, 1]", self.mono_prob)));
        }
        if self.format == OutputFormat::Png && self.channels > 4 {
            return Err(Error::invalid("png output supports at most 4 channels"));
        }
        self.elastic.validate()?;
        self.mask.validate()
    }

    /// Hex SHA-256 over the stage order and the canonical JSON of the config.
    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(STAGE_ORDER.join(">").as_bytes());
        hasher.update(b"\n");
        hasher.update(serde_json::to_vec(self).expect("config serializes"));
        hex::encode(hasher.finalize())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Manifest(format!("config: {e}")))
    }
}

/// Image shapes and synthetic budgets used for the standard benchmarks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Mnist,
    Fmnist,
    Svhn,
    Cifar10,
    Cifar100,
    TinyImagenet,
}

impl Preset {
    pub fn config(self) -> SynthesisConfig {
        let (c, side, count) = match self {
            Preset::Mnist => (1, 28, 20_000),
            Preset::Fmnist => (1, 28, 50_000),
            Preset::Svhn => (3, 32, 50_000),
            Preset::Cifar10 => (3, 32, 50_000),
            Preset::Cifar100 => (3, 32, 100_000),
            Preset::TinyImagenet => (3, 64, 500_000),
        };
        SynthesisConfig {
            count,
            ..SynthesisConfig::new(c, side, side)
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mnist" => Preset::Mnist,
            "fmnist" => Preset::Fmnist,
            "svhn" => Preset::Svhn,
            "cifar10" => Preset::Cifar10,
            "cifar100" => Preset::Cifar100,
            "tiny-imagenet" => Preset::TinyImagenet,
            other => return Err(Error::invalid(format!("unknown preset {other:?}"))),
        })
    }
}

/// Hierarchical noise followed by the nonlinear transform, cropped to the target shape.
pub struct TransformedNoise<'a> {
    cfg: &'a SynthesisConfig,
    plan: ScalePlan,
}

impl<'a> TransformedNoise<'a> {
    pub fn new(cfg: &'a SynthesisConfig) -> Result<Self> {
        Ok(Self {
            cfg,
            plan: ScalePlan::for_target(cfg.height, cfg.width, cfg.upscale_mode)?,
        })
    }
}

impl PriorSource for TransformedNoise<'_> {
    fn channels(&self) -> usize {
        self.cfg.channels
    }

    fn height(&self) -> usize {
        self.cfg.height
    }

    fn width(&self) -> usize {
        self.cfg.width
    }

    fn draw(&self, rng: &mut RngStream) -> Result<PriorImage> {
        let (hn, _) = mix_hierarchical(rng, self.cfg.channels, &self.plan)?;
        apply_nonlinear(&hn, rng, self.cfg.height, self.cfg.width, self.cfg.elastic)
    }
}

/// Generates image `index` of the dataset described by `cfg`.
pub fn synthesize_one(cfg: &SynthesisConfig, index: u64) -> Result<PriorImage> {
    cfg.validate()?;
    synthesize_unchecked(cfg, index)
}

fn synthesize_unchecked(cfg: &SynthesisConfig, index: u64) -> Result<PriorImage> {
    let mut rng = derive_stream(cfg.master_seed, index);
    let pool = TransformedNoise::new(cfg)?;
    let ((a, _), (b, _)) = sample_pair(&mut rng, &pool, cfg.mono_prob)?;
    let refined = refine_mask(&mut rng, cfg.height, cfg.width, &cfg.mask)?;
    cutmix(&a, &b, &refined.mask)
}

/// Generates `indices` in parallel; the result is in index order.
pub fn synthesize_batch(cfg: &SynthesisConfig, indices: std::ops::Range<u64>) -> Result<Vec<PriorImage>> {
    cfg.validate()?;
    indices
        .into_par_iter()
        .map(|i| synthesize_unchecked(cfg, i))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardEntry {
    /// Path relative to the manifest's directory.
    pub path: String,
    pub start: u64,
    pub count: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub config: SynthesisConfig,
    pub config_hash: String,
    pub stage_order: Vec<String>,
    pub total_count: u64,
    pub created_unix: u64,
    pub shards: Vec<ShardEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Checks that shard ranges partition `[0, total_count)` in order.
    pub fn check_partition(&self) -> Result<()> {
        let mut next = 0u64;
        for s in &self.shards {
            if s.start != next || s.count == 0 {
                return Err(Error::Manifest(format!(
                    "shard {} covers [{}, {}) but the next expected start is {next}",
                    s.path,
                    s.start,
                    s.start + s.count
                )));
            }
            next += s.count;
        }
        if next != self.total_count || self.total_count != self.config.count {
            return Err(Error::Manifest(format!(
                "shards cover {next} images, manifest declares {} (config {})",
                self.total_count, self.config.count
            )));
        }
        Ok(())
    }
}

pub fn shard_name(index: u64, format: OutputFormat) -> String {
    match format {
        OutputFormat::F32bin => format!("shard-{index:05}.dipf"),
        OutputFormat::Png => format!("shard-{index:05}"),
    }
}

pub fn png_name(image_index: u64) -> String {
    format!("{image_index:08}.png")
}

/// Writes the dataset with rayon's global pool.
pub fn synthesize_dataset(cfg: &SynthesisConfig, out_dir: &Path) -> Result<DatasetManifest> {
    write_dataset(cfg, out_dir)
}

/// Writes the dataset using exactly `workers` threads. Output does not depend on `workers`.
pub fn synthesize_dataset_with_workers(
    cfg: &SynthesisConfig,
    out_dir: &Path,
    workers: usize,
) -> Result<DatasetManifest> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    pool.install(|| write_dataset(cfg, out_dir))
}

fn write_dataset(cfg: &SynthesisConfig, out_dir: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut created: Vec<PathBuf> = Vec::new();
    match write_shards(cfg, out_dir, &mut created) {
        Ok(shards) => {
            let manifest = DatasetManifest {
                format_version: MANIFEST_VERSION,
                config: cfg.clone(),
                config_hash: cfg.config_hash(),
                stage_order: STAGE_ORDER.iter().map(|s| s.to_string()).collect(),
                total_count: cfg.count,
                created_unix: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
                shards,
            };
            let path = out_dir.join(MANIFEST_FILE);
            if let Err(e) = manifest.save(&path) {
                remove_all(&created);
                return Err(e);
            }
            Ok(manifest)
        }
        Err(e) => {
            remove_all(&created);
            Err(e)
        }
    }
}

fn remove_all(paths: &[PathBuf]) {
    for p in paths.iter().rev() {
        let _ = if p.is_dir() {
            fs::remove_dir_all(p)
        } else {
            fs::remove_file(p)
        };
    }
}

fn write_shards(cfg: &SynthesisConfig, out_dir: &Path, created: &mut Vec<PathBuf>) -> Result<Vec<ShardEntry>> {
    let shard_count = cfg.count.div_ceil(cfg.shard_size);
    let mut entries = Vec::with_capacity(shard_count as usize);
    for s in 0..shard_count {
        let start = s * cfg.shard_size;
        let count = cfg.shard_size.min(cfg.count - start);
        let name = shard_name(s, cfg.format);
        let sha256 = match cfg.format {
            OutputFormat::F32bin => write_f32_shard(cfg, out_dir, &name, start, count, created)?,
            OutputFormat::Png => write_png_shard(cfg, out_dir, &name, start, count, created)?,
        };
        entries.push(ShardEntry {
            path: name,
            start,
            count,
            sha256,
        });
    }
    Ok(entries)
}

fn for_each_batch(
    cfg: &SynthesisConfig,
    start: u64,
    count: u64,
    mut sink: impl FnMut(u64, &PriorImage) -> Result<()>,
) -> Result<()> {
    let end = start + count;
    let mut at = start;
    while at < end {
        let stop = (at + BATCH as u64).min(end);
        let images = synthesize_batch(cfg, at..stop)?;
        for (offset, img) in images.iter().enumerate() {
            sink(at + offset as u64, img)?;
        }
        at = stop;
    }
    Ok(())
}

fn write_f32_shard(
    cfg: &SynthesisConfig,
    out_dir: &Path,
    name: &str,
    start: u64,
    count: u64,
    created: &mut Vec<PathBuf>,
) -> Result<String> {
    let final_path = out_dir.join(name);
    let tmp_path = out_dir.join(format!("{name}.partial"));
    created.push(tmp_path.clone());
    let header = ShardHeader {
        channels: cfg.channels as u32,
        height: cfg.height as u32,
        width: cfg.width as u32,
        image_count: count,
    };
    let mut writer = ShardWriter::create(&tmp_path, header)?;
    for_each_batch(cfg, start, count, |_, img| writer.write_image(img))?;
    let digest = writer.finish()?;
    fs::rename(&tmp_path, &final_path).map_err(|e| Error::io(&final_path, e))?;
    created.pop();
    created.push(final_path);
    Ok(digest)
}

/// Quantises to 8 bits and encodes one PNG.
pub fn encode_png(img: &PriorImage) -> Result<Vec<u8>> {
    use image::{ExtendedColorType, ImageEncoder};

    let (c, h, w) = (img.channels(), img.height(), img.width());
    let color = match c {
        1 => ExtendedColorType::L8,
        2 => ExtendedColorType::La8,
        3 => ExtendedColorType::Rgb8,
        4 => ExtendedColorType::Rgba8,
        _ => return Err(Error::invalid(format!("png cannot hold {c} channels"))),
    };
    let plane = h * w;
    let mut interleaved = Vec::with_capacity(c * plane);
    for p in 0..plane {
        for ch in 0..c {
            interleaved.push((img.data()[ch * plane + p] * 255.0).round() as u8);
        }
    }
    let mut buf = Vec::new();
    image::codecs::png::PngEncoder::new(&mut buf)
        .write_image(&interleaved, w as u32, h as u32, color)
        .map_err(|e| Error::Internal(format!("png encoding: {e}")))?;
    Ok(buf)
}

fn write_png_shard(
    cfg: &SynthesisConfig,
    out_dir: &Path,
    name: &str,
    start: u64,
    count: u64,
    created: &mut Vec<PathBuf>,
) -> Result<String> {
    let dir = out_dir.join(name);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    created.push(dir.clone());
    let mut hasher = Sha256::new();
    for_each_batch(cfg, start, count, |i, img| {
        let bytes = encode_png(img)?;
        hasher.update(&bytes);
        let path = dir.join(png_name(i));
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))
    })?;
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Clone, Debug, Serialize)]
pub struct ShardCheck {
    pub path: String,
    pub passed: bool,
    pub problems: Vec<String>,
    pub images_checked: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub manifest: PathBuf,
    pub manifest_problems: Vec<String>,
    pub shards: Vec<ShardCheck>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.manifest_problems.is_empty() && self.shards.iter().all(|s| s.passed)
    }
}

/// Evenly spaced indices in `0..count`, or all of them when `sample` is `None`.
fn sample_indices(count: u64, sample: Option<u64>) -> Vec<u64> {
    match sample {
        Some(n) if n < count => {
            if n == 0 {
                return Vec::new();
            }
            (0..n).map(|i| i * count / n).collect()
        }
        _ => (0..count).collect(),
    }
}

/// Recomputes checksums and checks shapes and value range.
///
/// `sample` bounds how many images per shard are decoded and range-checked;
/// checksums always cover the whole shard.
pub fn verify_dataset(manifest_path: &Path, sample: Option<u64>) -> Result<VerificationReport> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let mut manifest_problems = Vec::new();
    if manifest.format_version != MANIFEST_VERSION {
        manifest_problems.push(format!("unsupported manifest version {}", manifest.format_version));
    }
    if let Err(e) = manifest.check_partition() {
        manifest_problems.push(e.to_string());
    }
    if let Err(e) = manifest.config.validate() {
        manifest_problems.push(e.to_string());
    }
    if manifest.config_hash != manifest.config.config_hash() {
        manifest_problems.push("config hash does not match the recorded config".into());
    }

    let shards = manifest
        .shards
        .iter()
        .map(|entry| {
            let mut check = ShardCheck {
                path: entry.path.clone(),
                passed: true,
                problems: Vec::new(),
                images_checked: 0,
            };
            let path = root.join(&entry.path);
            match manifest.config.format {
                OutputFormat::F32bin => verify_f32_shard(&manifest.config, entry, &path, sample, &mut check),
                OutputFormat::Png => verify_png_shard(&manifest.config, entry, &path, sample, &mut check),
            }
            check.passed = check.problems.is_empty();
            check
        })
        .collect();

    Ok(VerificationReport {
        manifest: manifest_path.to_path_buf(),
        manifest_problems,
        shards,
    })
}

fn verify_f32_shard(
    cfg: &SynthesisConfig,
    entry: &ShardEntry,
    path: &Path,
    sample: Option<u64>,
    check: &mut ShardCheck,
) {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            check.problems.push(format!("cannot read shard: {e}"));
            return;
        }
    };
    if sha256_hex(&bytes) != entry.sha256 {
        check.problems.push("checksum mismatch".into());
    }
    let shard = match crate::shard::Shard::parse(&bytes) {
        Ok(s) => s,
        Err(e) => {
            check.problems.push(e.to_string());
            return;
        }
    };
    let h = shard.header;
    if (h.channels as usize, h.height as usize, h.width as usize) != (cfg.channels, cfg.height, cfg.width) {
        check.problems.push(format!(
            "shape {}x{}x{} does not match config {}x{}x{}",
            h.channels, h.height, h.width, cfg.channels, cfg.height, cfg.width
        ));
        return;
    }
    if h.image_count != entry.count {
        check
            .problems
            .push(format!("header holds {} images, manifest expects {}", h.image_count, entry.count));
        return;
    }
    for i in sample_indices(entry.count, sample) {
        if let Err(e) = shard.image(i as usize) {
            check.problems.push(format!("image {}: {e}", entry.start + i));
        }
        check.images_checked += 1;
    }
}

fn verify_png_shard(
    cfg: &SynthesisConfig,
    entry: &ShardEntry,
    dir: &Path,
    sample: Option<u64>,
    check: &mut ShardCheck,
) {
    let mut hasher = Sha256::new();
    let mut files = Vec::with_capacity(entry.count as usize);
    for i in entry.start..entry.start + entry.count {
        let path = dir.join(png_name(i));
        match fs::read(&path) {
            Ok(bytes) => {
                hasher.update(&bytes);
                files.push(Some(bytes));
            }
            Err(e) => {
                check.problems.push(format!("cannot read {}: {e}", path.display()));
                files.push(None);
            }
        }
    }
    if check.problems.is_empty() && hex::encode(hasher.finalize()) != entry.sha256 {
        check.problems.push("checksum mismatch".into());
    }
    for i in sample_indices(entry.count, sample) {
        let Some(bytes) = &files[i as usize] else { continue };
        check.images_checked += 1;
        match image::load_from_memory_with_format(bytes, image::ImageFormat::Png) {
            Ok(img) => {
                let channels = img.color().channel_count() as usize;
                if (channels, img.height() as usize, img.width() as usize) != (cfg.channels, cfg.height, cfg.width) {
                    check.problems.push(format!(
                        "image {}: shape {}x{}x{} does not match config",
                        entry.start + i,
                        channels,
                        img.height(),
                        img.width()
                    ));
                }
            }
            Err(e) => check.problems.push(format!("image {}: {e}", entry.start + i)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(count: u64, shard_size: u64) -> SynthesisConfig {
        SynthesisConfig {
            count,
            shard_size,
            master_seed: 17,
            ..SynthesisConfig::new(3, 32, 32)
        }
    }

    #[test]
    fn same_index_is_bit_identical() {
        let cfg = small(4, 4);
        assert_eq!(synthesize_one(&cfg, 3).unwrap(), synthesize_one(&cfg, 3).unwrap());
    }

    #[test]
    fn mnist_shape() {
        let cfg = Preset::Mnist.config();
        assert_eq!(cfg.count, 20_000);
        let img = synthesize_one(&cfg, 0).unwrap();
        assert_eq!((img.channels(), img.height(), img.width()), (1, 28, 28));
        let (lo, hi) = img.min_max();
        assert!(lo >= 0.0 && hi <= 1.0);
    }

    #[test]
    fn non_square_targets() {
        let cfg = SynthesisConfig::new(3, 48, 64);
        let img = synthesize_one(&cfg, 5).unwrap();
        assert_eq!((img.height(), img.width()), (48, 64));
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = small(1, 1);
        for bad in [
            SynthesisConfig { count: 0, ..base.clone() },
            SynthesisConfig { shard_size: 0, ..base.clone() },
            SynthesisConfig { mono_prob: 1.5, ..base.clone() },
            SynthesisConfig { channels: 0, ..base.clone() },
        ] {
            assert!(synthesize_one(&bad, 0).is_err());
        }
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = SynthesisConfig {
            mono_prob: 0.1 + 0.2,
            ..small(7, 3)
        };
        assert_eq!(SynthesisConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = small(10, 5);
        let b = SynthesisConfig { master_seed: 18, ..a.clone() };
        assert_eq!(a.config_hash(), a.clone().config_hash());
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn sampling_spreads_over_the_shard() {
        assert_eq!(sample_indices(10, Some(3)), vec![0, 3, 6]);
        assert_eq!(sample_indices(3, Some(10)), vec![0, 1, 2]);
        assert_eq!(sample_indices(3, None), vec![0, 1, 2]);
        assert!(sample_indices(3, Some(0)).is_empty());
    }

    #[test]
    fn partition_check() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = synthesize_dataset(&small(5, 2), dir.path()).unwrap();
        assert_eq!(m.shards.len(), 3);
        assert!(m.check_partition().is_ok());
        m.shards[1].start = 3;
        assert!(m.check_partition().is_err());
    }
}
