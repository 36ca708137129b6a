//! Published confusion tables of the three plane groups, shipped as JSON.

use std::path::Path;

use crate::experiment::{ConfusionMatrix, ExperimentError, PlaneGroup};

const XY: &str = include_str!("../fixtures/confusion_xy.json");
const XZ: &str = include_str!("../fixtures/confusion_xz.json");
const ZY: &str = include_str!("../fixtures/confusion_zy.json");

pub fn file_name(group: PlaneGroup) -> String {
    format!("confusion_{}.json", group.name())
}

/// The embedded published table for `group`.
pub fn builtin(group: PlaneGroup) -> ConfusionMatrix {
    let text = match group {
        PlaneGroup::XY => XY,
        PlaneGroup::XZ => XZ,
        PlaneGroup::ZY => ZY,
    };
    let m = ConfusionMatrix::from_json(text).expect("embedded fixture parses");
    debug_assert_eq!(m.group, group);
    m
}

pub fn builtin_all() -> Vec<ConfusionMatrix> {
    PlaneGroup::ALL.iter().map(|&g| builtin(g)).collect()
}

/// Loads `confusion_{xy,xz,zy}.json` from `dir`, skipping groups without a file.
pub fn load_dir(dir: &Path) -> Result<Vec<ConfusionMatrix>, ExperimentError> {
    let mut out = Vec::new();
    for g in PlaneGroup::ALL {
        let path = dir.join(file_name(g));
        if path.exists() {
            let m = ConfusionMatrix::from_json(&std::fs::read_to_string(&path)?)?;
            if m.group != g {
                return Err(ExperimentError::Invalid(format!(
                    "{} holds group {}",
                    path.display(),
                    m.group
                )));
            }
            out.push(m);
        }
    }
    Ok(out)
}
