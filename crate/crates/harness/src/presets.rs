// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

//! Named experiments shipped with the binary.

use crate::config::ConfigDocument;
use crate::HarnessError;

pub const PRESETS: &[(&str, &str)] = &[
    ("prop41", include_str!("../presets/prop41.toml")),
    ("prop42", include_str!("../presets/prop42.toml")),
    ("thm31", include_str!("../presets/thm31.toml")),
    ("dyck-ood-backtrack", include_str!("../presets/dyck-ood-backtrack.toml")),
    ("dyck-backtrack-sweep", include_str!("../presets/dyck-backtrack-sweep.toml")),
    ("dyck-argmax-ablation", include_str!("../presets/dyck-argmax-ablation.toml")),
    ("dyck-diversity", include_str!("../presets/dyck-diversity.toml")),
    ("knapsack", include_str!("../presets/knapsack.toml")),
];

pub fn preset_source(name: &str) -> Result<&'static str, HarnessError> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| HarnessError::UnknownPreset(name.to_string()))
}

pub fn load_preset(name: &str) -> Result<ConfigDocument, HarnessError> {
    ConfigDocument::parse(preset_source(name)?)
}

/// The leading comment of a preset.
pub fn describe(source: &str) -> &str {
    source.lines().next().and_then(|l| l.strip_prefix("# ")).unwrap_or("")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for (name, text) in PRESETS {
            let doc = ConfigDocument::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(doc.name, *name);
            assert!(!describe(text).is_empty());
        }
        assert_eq!(load_preset("prop41").unwrap().grid.len(), 6);
        assert_eq!(load_preset("dyck-backtrack-sweep").unwrap().grid.len(), 12);
        assert!(matches!(load_preset("nope"), Err(HarnessError::UnknownPreset(_))));
    }
}
