use std::fs;
use std::path::PathBuf;

use clap::Args;

use graspkit::datasets::read_tensor;
use graspkit::geometry::BoundingBox;
use graspkit::maskcodec::decode_grasps;

use super::common::{write_output, CodecFlags};
use super::{CmdResult, Failure};

#[derive(Args, Debug)]
pub struct DecodeArgs {
    /// Grasp-map tensor ([5, h, w] GKT1 file)
    #[arg(long)]
    pub tensor: PathBuf,
    /// Maximum number of grasp candidates
    #[arg(long, default_value_t = 1)]
    pub top_n: usize,
    /// Decode region as x_min,y_min,x_max,y_max (default: full map)
    #[arg(long)]
    pub region: Option<String>,
    /// Output file for the JSON candidate list (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub codec: CodecFlags,
}

pub fn run(args: &DecodeArgs) -> CmdResult {
    let cfg = args.codec.config()?;
    let bytes = fs::read(&args.tensor)
        .map_err(|e| Failure::User(format!("cannot read {}: {e}", args.tensor.display())))?;
    let maps = read_tensor(&bytes)
        .and_then(|t| t.to_grasp_maps())
        .map_err(|e| Failure::User(format!("{}: {e}", args.tensor.display())))?;
    let (h, w) = maps.dims();
    let region = match &args.region {
        Some(spec) => {
            let parts: Result<Vec<f64>, _> =
                spec.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let bad =
                || Failure::User(format!("region must be x_min,y_min,x_max,y_max, got '{spec}'"));
            let parts = parts.map_err(|_| bad())?;
            if parts.len() != 4 {
                return Err(bad());
            }
            BoundingBox::new(parts[0], parts[1], parts[2], parts[3])
                .map_err(|e| Failure::User(e.to_string()))?
        }
        None => BoundingBox::full(h, w),
    };
    let grasps = decode_grasps(&maps, &region, args.top_n, &cfg);
    let json = serde_json::to_string_pretty(&grasps)
        .map_err(|e| Failure::Internal(format!("serialization failed: {e}")))?;
    write_output(args.out.as_deref(), &json)
}
