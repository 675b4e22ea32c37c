//! Electrode positions of the 10-20 / 10-10 systems on the unit sphere.
//!
//! Coordinates are idealised: the vertex (Cz) sits at +z, the nose points
//! along +y and the right ear along +x. Positions on the outer ring
//! (Fpz-T7-Oz) lie 72 degrees from the vertex, in 18 degree azimuth steps;
//! intermediate electrodes of a row are spaced evenly along the great
//! circle from the row's midline electrode to its ring electrode.

use std::collections::HashMap;
use std::sync::OnceLock;

pub type Position = [f64; 3];

#[derive(Debug, Clone)]
pub struct Montage {
    labels: Vec<String>,
    positions: Vec<Position>,
    index: HashMap<String, usize>,
}

impl Montage {
    /// Builds a montage, normalising every position onto the unit sphere.
    /// Zero vectors are rejected.
    pub fn from_positions<I, S>(entries: I) -> Option<Montage>
    where
        I: IntoIterator<Item = (S, Position)>,
        S: Into<String>,
    {
        let mut labels = Vec::new();
        let mut positions = Vec::new();
        let mut index = HashMap::new();
        for (label, pos) in entries {
            let norm = (pos[0] * pos[0] + pos[1] * pos[1] + pos[2] * pos[2]).sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return None;
            }
            let label = label.into();
            index.insert(label.to_ascii_lowercase(), labels.len());
            labels.push(label);
            positions.push([pos[0] / norm, pos[1] / norm, pos[2] / norm]);
        }
        Some(Montage {
            labels,
            positions,
            index,
        })
    }

    /// The embedded 10-20 / 10-10 table (with legacy aliases T3/T4/T5/T6).
    pub fn standard_1010() -> &'static Montage {
        static MONTAGE: OnceLock<Montage> = OnceLock::new();
        MONTAGE.get_or_init(build_standard)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Case-insensitive lookup of the canonical spelling of `name`.
    pub fn canonical_label(&self, name: &str) -> Option<&str> {
        self.index
            .get(&name.to_ascii_lowercase())
            .map(|&i| self.labels[i].as_str())
    }

    /// Case-insensitive position lookup.
    pub fn position(&self, name: &str) -> Option<Position> {
        self.index
            .get(&name.to_ascii_lowercase())
            .map(|&i| self.positions[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Position)> {
        self.labels
            .iter()
            .map(String::as_str)
            .zip(self.positions.iter().copied())
    }
}

/// Great-circle distance between two unit vectors, in radians.
pub fn geodesic_distance(a: Position, b: Position) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    dot.clamp(-1.0, 1.0).acos()
}

fn spherical(inclination_deg: f64, azimuth_deg: f64) -> Position {
    let (t, p) = (inclination_deg.to_radians(), azimuth_deg.to_radians());
    [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]
}

fn slerp(a: Position, b: Position, frac: f64) -> Position {
    let omega = geodesic_distance(a, b);
    if omega < 1e-12 {
        return a;
    }
    let (wa, wb) = (
        ((1.0 - frac) * omega).sin() / omega.sin(),
        (frac * omega).sin() / omega.sin(),
    );
    [
        wa * a[0] + wb * b[0],
        wa * a[1] + wb * b[1],
        wa * a[2] + wb * b[2],
    ]
}

fn mirror(p: Position) -> Position {
    [-p[0], p[1], p[2]]
}

fn build_standard() -> Montage {
    let mut entries: Vec<(String, Position)> = Vec::new();
    let mut push = |name: &str, pos: Position| entries.push((name.to_string(), pos));

    // Midline, signed inclination: positive towards the nose.
    let midline = [
        ("Nz", 90.0),
        ("Fpz", 72.0),
        ("AFz", 54.0),
        ("Fz", 36.0),
        ("FCz", 18.0),
        ("Cz", 0.0),
        ("CPz", -18.0),
        ("Pz", -36.0),
        ("POz", -54.0),
        ("Oz", -72.0),
        ("Iz", -90.0),
    ];
    let mid_pos = |incl: f64| {
        if incl >= 0.0 {
            spherical(incl, 90.0)
        } else {
            spherical(-incl, 270.0)
        }
    };
    for (name, incl) in midline {
        push(name, mid_pos(incl));
    }

    // Row prefix, midline inclination, left ring electrode name and azimuth.
    let rows: [(&str, f64, &str, f64); 8] = [
        ("Fp", 72.0, "Fp1", 108.0),
        ("AF", 54.0, "AF7", 126.0),
        ("F", 36.0, "F7", 144.0),
        ("FC", 18.0, "FT7", 162.0),
        ("C", 0.0, "T7", 180.0),
        ("CP", -18.0, "TP7", 198.0),
        ("P", -36.0, "P7", 216.0),
        ("PO", -54.0, "PO7", 234.0),
    ];
    for (prefix, incl, ring_name, azimuth) in rows {
        let ring = spherical(72.0, azimuth);
        push(ring_name, ring);
        push(&mirror_name(ring_name), mirror(ring));
        if prefix == "Fp" {
            continue;
        }
        let centre = mid_pos(incl);
        for (step, num) in [(1.0, 1), (2.0, 3), (3.0, 5)] {
            let p = slerp(centre, ring, step / 4.0);
            push(&format!("{prefix}{num}"), p);
            push(&format!("{prefix}{}", num + 1), mirror(p));
        }
    }
    let o1 = spherical(72.0, 252.0);
    push("O1", o1);
    push("O2", mirror(o1));

    // Inferior row on the equator.
    for (name, azimuth) in [
        ("F9", 144.0),
        ("FT9", 162.0),
        ("T9", 180.0),
        ("TP9", 198.0),
        ("P9", 216.0),
    ] {
        let p = spherical(90.0, azimuth);
        push(name, p);
        push(&mirror_name(name), mirror(p));
    }
    let a1 = spherical(100.0, 180.0);
    push("A1", a1);
    push("A2", mirror(a1));

    // Legacy 10-20 aliases.
    for (alias, azimuth) in [("T3", 180.0), ("T5", 216.0)] {
        let p = spherical(72.0, azimuth);
        push(alias, p);
        push(&mirror_name(alias), mirror(p));
    }

    Montage::from_positions(entries).expect("embedded montage is well formed")
}

/// Left-hemisphere odd number -> right-hemisphere even number.
fn mirror_name(name: &str) -> String {
    let split = name
        .find(|c: char| c.is_ascii_digit())
        .unwrap_or(name.len());
    let (prefix, digits) = name.split_at(split);
    let n: u32 = digits.parse().unwrap_or(0);
    format!("{prefix}{}", n + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_table_is_unit_norm_and_large_enough() {
        let m = Montage::standard_1010();
        assert!(m.len() >= 64, "only {} labels", m.len());
        for (label, p) in m.iter() {
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((n - 1.0).abs() < 1e-6, "{label} has norm {n}");
        }
    }

    #[test]
    fn orientation_matches_convention() {
        let m = Montage::standard_1010();
        let cz = m.position("cz").unwrap();
        assert!((cz[2] - 1.0).abs() < 1e-12);
        let t8 = m.position("T8").unwrap();
        assert!(t8[0] > 0.9);
        let c3 = m.position("C3").unwrap();
        let c4 = m.position("C4").unwrap();
        assert!(c3[0] < 0.0 && (c3[0] + c4[0]).abs() < 1e-12);
        assert!(m.position("Fpz").unwrap()[1] > 0.9);
        assert_eq!(m.position("T3"), m.position("T7"));
    }

    #[test]
    fn canonical_labels_are_case_insensitive() {
        let m = Montage::standard_1010();
        assert_eq!(m.canonical_label("FP1"), Some("Fp1"));
        assert_eq!(m.canonical_label("fcz"), Some("FCz"));
        assert_eq!(m.canonical_label("TRIG"), None);
    }

    #[test]
    fn c_row_is_evenly_spaced_from_vertex() {
        let m = Montage::standard_1010();
        let cz = m.position("Cz").unwrap();
        for (name, deg) in [("C1", 18.0), ("C3", 36.0), ("C5", 54.0), ("T7", 72.0)] {
            let d = geodesic_distance(cz, m.position(name).unwrap()).to_degrees();
            assert!((d - deg).abs() < 1e-9, "{name}: {d}");
        }
    }
}
