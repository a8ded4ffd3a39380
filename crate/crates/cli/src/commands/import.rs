use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use log::debug;

use graspkit::datasets::{import_jacquard, import_ocid, Scene};

use super::common::{parse_image_size, require_exists, write_scenes_file};
use super::{CmdResult, Failure};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ImportFormat {
    /// Semicolon-separated "x; y; theta_deg; opening; jaw" lines, one
    /// class-agnostic object per file
    Jacquard,
    /// Class-token sections of 4-corner groups, "x y" per line
    Ocid,
}

#[derive(Args, Debug)]
pub struct ImportArgs {
    #[arg(long, value_enum)]
    pub format: ImportFormat,
    /// Directory of annotation .txt files (one scene per file)
    #[arg(long)]
    pub input: PathBuf,
    /// Output canonical scenes file (JSON-lines)
    #[arg(long)]
    pub out: PathBuf,
    /// Image size as HxW; defaults to 1024x1024 (jacquard) or 480x640 (ocid)
    #[arg(long)]
    pub image_size: Option<String>,
    /// JSON object mapping class names to ids (required for ocid)
    #[arg(long)]
    pub class_map: Option<PathBuf>,
    /// Treat the first corner edge as the gripper-opening side (ocid)
    #[arg(long)]
    pub opening_first: bool,
}

pub fn run(args: &ImportArgs) -> CmdResult {
    require_exists(&args.input, "input directory")?;
    let image_size = match &args.image_size {
        Some(s) => parse_image_size(s)?,
        None => match args.format {
            ImportFormat::Jacquard => (1024, 1024),
            ImportFormat::Ocid => (480, 640),
        },
    };
    let class_map: Option<BTreeMap<String, u32>> = match (&args.class_map, args.format) {
        (Some(path), _) => {
            require_exists(path, "class map")?;
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::User(format!("cannot read {}: {e}", path.display())))?;
            Some(serde_json::from_str(&text).map_err(|e| {
                Failure::User(format!("{}: not a name-to-id object: {e}", path.display()))
            })?)
        }
        (None, ImportFormat::Ocid) => {
            return Err(Failure::User("--class-map is required for the ocid format".into()))
        }
        (None, ImportFormat::Jacquard) => None,
    };

    let mut files: Vec<PathBuf> = fs::read_dir(&args.input)
        .map_err(|e| Failure::User(format!("cannot read {}: {e}", args.input.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::User(format!(
            "no annotation files found in {}",
            args.input.display()
        )));
    }

    let mut scenes: Vec<Scene> = Vec::with_capacity(files.len());
    for path in &files {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::User(format!("cannot read {}: {e}", path.display())))?;
        let scene_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        debug!("importing {}", path.display());
        let scene = match args.format {
            ImportFormat::Jacquard => import_jacquard(&text, &scene_id, image_size),
            ImportFormat::Ocid => import_ocid(
                &text,
                class_map.as_ref().expect("checked above"),
                &scene_id,
                image_size,
                args.opening_first,
            ),
        }
        .map_err(|e| Failure::User(format!("{}: {e}", path.display())))?;
        scenes.push(scene);
    }

    write_scenes_file(&args.out, &scenes)?;
    let objects: usize = scenes.iter().map(|s| s.objects.len()).sum();
    let grasps: usize = scenes
        .iter()
        .flat_map(|s| s.objects.iter().map(|o| o.grasps.len()))
        .sum();
    println!("imported {} scenes, {objects} objects, {grasps} grasps", scenes.len());
    Ok(())
}
