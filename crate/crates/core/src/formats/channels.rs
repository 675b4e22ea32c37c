use crate::montage::Montage;

const PREFIXES: [&str; 1] = ["eeg "];
const SUFFIXES: [&str; 5] = ["-ref", "-le", "-a1", "-a2", "-avg"];

/// Canonical form of a channel label.
///
/// Strips surrounding whitespace, a leading `EEG ` and reference suffixes
/// (`-REF`, `-LE`, `-A1`, `-A2`, `-AVG`) until none remain, then restores
/// 10-20 capitalisation for known electrode names (`FP1` -> `Fp1`).
/// Anything else passes through trimmed. The function is idempotent.
pub fn normalize_channel_name(raw: &str) -> String {
    let mut name = raw.trim().to_string();
    loop {
        let before = name.len();
        let lower = name.to_ascii_lowercase();
        if let Some(p) = PREFIXES.iter().find(|p| lower.starts_with(*p)) {
            name = name[p.len()..].to_string();
        }
        let lower = name.to_ascii_lowercase();
        if let Some(s) = SUFFIXES.iter().find(|s| lower.ends_with(*s)) {
            name.truncate(name.len() - s.len());
        }
        name = name.trim().to_string();
        if name.len() == before {
            break;
        }
    }
    match Montage::standard_1010().canonical_label(&name) {
        Some(canonical) => canonical.to_string(),
        None => name,
    }
}
