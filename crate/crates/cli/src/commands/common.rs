//! Flag groups and small helpers shared across subcommands.

use std::fs;
use std::io::{BufReader, Write};
use std::path::Path;

use clap::Args;

use graspkit::assembly::PrototypeStack;
use graspkit::datasets::{self, DetectionRecord, Scene};
use graspkit::maskcodec::CodecConfig;

use super::Failure;

#[derive(Args, Debug)]
pub struct CodecFlags {
    /// Width normalization constant in pixels
    #[arg(long, default_value_t = 150.0)]
    pub width_max: f64,
    /// Fraction of the rectangle extent along the grasp axis that carries
    /// position/angle/width values
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub center_fraction: f64,
    /// Quality threshold below which decoded candidates are dropped
    #[arg(long, default_value_t = 0.1)]
    pub q_min: f64,
    /// height = ratio * width when a source provides no jaw size
    #[arg(long, default_value_t = 0.5)]
    pub height_ratio: f64,
    /// Strict transfer: use the raw sigmoid of the overlap count as quality
    #[arg(long)]
    pub raw_sigmoid_quality: bool,
}

impl CodecFlags {
    pub fn config(&self) -> Result<CodecConfig, Failure> {
        let cfg = CodecConfig {
            width_max: self.width_max,
            center_fraction: self.center_fraction,
            q_min: self.q_min,
            default_height_ratio: self.height_ratio,
            raw_sigmoid_quality: self.raw_sigmoid_quality,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses "HxW" into `(h, w)`.
pub fn parse_image_size(s: &str) -> Result<(u32, u32), Failure> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let bad = || Failure::User(format!("image size must be HxW, got '{s}'"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let h: u32 = parts[0].trim().parse().map_err(|_| bad())?;
    let w: u32 = parts[1].trim().parse().map_err(|_| bad())?;
    if h == 0 || w == 0 {
        return Err(bad());
    }
    Ok((h, w))
}

pub fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    let values: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(Failure::User(format!("{what} must be a comma-separated number list, got '{s}'"))),
    }
}

pub fn require_exists(path: &Path, what: &str) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::User(format!("{what} not found: {}", path.display())))
    }
}

pub fn read_scenes_file(path: &Path) -> Result<Vec<Scene>, Failure> {
    require_exists(path, "scenes file")?;
    let file = fs::File::open(path)
        .map_err(|e| Failure::User(format!("cannot open {}: {e}", path.display())))?;
    datasets::read_scenes(BufReader::new(file))
        .map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

pub fn write_scenes_file(path: &Path, scenes: &[Scene]) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| Failure::User(format!("cannot create {}: {e}", parent.display())))?;
    }
    let mut file = fs::File::create(path)
        .map_err(|e| Failure::User(format!("cannot write {}: {e}", path.display())))?;
    datasets::write_scenes(&mut file, scenes)
        .map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

pub fn read_detections_file(path: &Path) -> Result<Vec<DetectionRecord>, Failure> {
    require_exists(path, "detections file")?;
    let file = fs::File::open(path)
        .map_err(|e| Failure::User(format!("cannot open {}: {e}", path.display())))?;
    datasets::read_detections(BufReader::new(file))
        .map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

pub fn load_prototypes(path: &Path) -> Result<PrototypeStack, Failure> {
    let bytes = fs::read(path)
        .map_err(|e| Failure::User(format!("cannot read {}: {e}", path.display())))?;
    let tensor = datasets::read_tensor(&bytes)
        .map_err(|e| Failure::User(format!("{}: {e}", path.display())))?;
    let data = tensor
        .to_array3()
        .map_err(|e| Failure::User(format!("{}: {e}", path.display())))?;
    PrototypeStack::new(data).map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

/// Writes to the file when given, standard output otherwise.
pub fn write_output(path: Option<&Path>, content: &str) -> Result<(), Failure> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)
                    .map_err(|e| Failure::User(format!("cannot create {}: {e}", parent.display())))?;
            }
            fs::write(p, content)
                .map_err(|e| Failure::User(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(content.as_bytes())
                .and_then(|_| {
                    if content.ends_with('\n') {
                        Ok(())
                    } else {
                        lock.write_all(b"\n")
                    }
                })
                .map_err(|e| Failure::Internal(format!("cannot write to stdout: {e}")))
        }
    }
}

pub fn build_pool(parallelism: usize) -> Result<rayon::ThreadPool, Failure> {
    if parallelism == 0 {
        return Err(Failure::User("parallelism must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Failure::Internal(format!("cannot build worker pool: {e}")))
}
