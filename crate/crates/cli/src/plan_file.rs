//! Channel-plan file loading.
//!
//! Two JSON layouts are accepted:
//!
//! ```json
//! {"f0": 16.0, "delta_f": 1.0, "amplitudes": [1, 1, 1]}
//! {"frequencies": [5, 7, 10, 14], "amplitudes": [1, 1, 1, 1]}
//! ```
//!
//! The first places channel k at `f0 + (k-1)*delta_f`; the second grids
//! arbitrary carrier frequencies by inserting pseudo channels.

use anyhow::{bail, Context, Result};
use im3_kit::ChannelPlan;
use serde_json::Value;
use std::path::Path;

fn number_field(obj: &serde_json::Map<String, Value>, name: &str) -> Result<f64> {
    let v = obj
        .get(name)
        .with_context(|| format!("missing field \"{name}\""))?;
    v.as_f64()
        .with_context(|| format!("field \"{name}\" must be a number, got {v}"))
}

fn number_array(obj: &serde_json::Map<String, Value>, name: &str) -> Result<Vec<f64>> {
    let v = obj
        .get(name)
        .with_context(|| format!("missing field \"{name}\""))?;
    let arr = v
        .as_array()
        .with_context(|| format!("field \"{name}\" must be an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| {
            x.as_f64()
                .with_context(|| format!("field \"{name}[{i}]\" must be a number, got {x}"))
        })
        .collect()
}

/// Load a plan file, gridding with `rel_tolerance` when the file lists
/// explicit frequencies.
pub fn load_plan(path: &Path, rel_tolerance: f64) -> Result<ChannelPlan> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read plan file {}", path.display()))?;
    let value: Value = serde_json::from_str(&text)
        .with_context(|| format!("plan file {} is not valid JSON", path.display()))?;
    let obj = match value.as_object() {
        Some(obj) => obj,
        None => bail!("plan file {} must contain a JSON object", path.display()),
    };

    let plan = if obj.contains_key("frequencies") {
        let frequencies = number_array(obj, "frequencies")?;
        let amplitudes = number_array(obj, "amplitudes")?;
        ChannelPlan::gridify(&frequencies, &amplitudes, rel_tolerance)
            .context("cannot grid the frequency plan")?
    } else if obj.contains_key("f0") || obj.contains_key("delta_f") {
        let f0 = number_field(obj, "f0")?;
        let delta_f = number_field(obj, "delta_f")?;
        let amplitudes = number_array(obj, "amplitudes")?;
        ChannelPlan::uniform(f0, delta_f, &amplitudes).context("invalid uniform plan")?
    } else {
        bail!(
            "plan file {} needs either \"f0\"/\"delta_f\"/\"amplitudes\" or \
             \"frequencies\"/\"amplitudes\"",
            path.display()
        );
    };
    Ok(plan)
}
