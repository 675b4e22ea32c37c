//! Channel selection, reordering and inverse-distance interpolation of
//! missing channels on the montage sphere.

use ndarray::Array2;

use super::{unit_list, UnificationError};
use crate::montage::{geodesic_distance, Montage, Position};
use crate::recording::{Recording, Unit};

const NEIGHBOURS: usize = 4;

fn find_channel(rec: &Recording, name: &str) -> Option<usize> {
    let names = rec.channel_names();
    names
        .iter()
        .position(|n| n == name)
        .or_else(|| names.iter().position(|n| n.eq_ignore_ascii_case(name)))
}

/// Donor indices and normalised weights for a target position: the four
/// nearest donors, weights proportional to 1/d^2. A donor at distance 0 gets
/// the whole weight.
pub fn interpolation_weights(target: Position, donors: &[(usize, Position)]) -> Vec<(usize, f64)> {
    let mut by_distance: Vec<(usize, f64)> = donors
        .iter()
        .map(|&(i, p)| (i, geodesic_distance(target, p)))
        .collect();
    by_distance.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    by_distance.truncate(NEIGHBOURS);
    if let Some(&(i, d)) = by_distance.first() {
        if d < 1e-12 {
            return vec![(i, 1.0)];
        }
    }
    let raw: Vec<(usize, f64)> = by_distance
        .iter()
        .map(|&(i, d)| (i, 1.0 / (d * d)))
        .collect();
    let total: f64 = raw.iter().map(|(_, w)| w).sum();
    raw.into_iter().map(|(i, w)| (i, w / total)).collect()
}

/// Output has exactly `channel_order`, in that order. Channels the recording
/// lacks are interpolated from the nearest channels it has.
pub fn align_channels(
    rec: &Recording,
    channel_order: &[String],
    montage: &Montage,
) -> Result<Recording, UnificationError> {
    let donors: Vec<(usize, Position)> = rec
        .channel_names()
        .iter()
        .enumerate()
        .filter_map(|(i, n)| montage.position(n).map(|p| (i, p)))
        .collect();

    let n = rec.n_samples();
    let mut data = Array2::zeros((channel_order.len(), n));
    let mut names = Vec::with_capacity(channel_order.len());
    let mut units = Vec::with_capacity(channel_order.len());
    for (row, name) in channel_order.iter().enumerate() {
        if let Some(src) = find_channel(rec, name) {
            data.row_mut(row).assign(&rec.data().row(src));
            names.push(rec.channel_names()[src].clone());
            units.push(rec.units()[src]);
            continue;
        }
        let target = montage
            .position(name)
            .ok_or_else(|| UnificationError::UnknownChannel(name.clone()))?;
        if donors.is_empty() {
            return Err(UnificationError::NoDonorChannels);
        }
        let weights = interpolation_weights(target, &donors);
        let donor_units: Vec<Unit> = weights.iter().map(|&(i, _)| rec.units()[i]).collect();
        if donor_units.iter().any(|u| *u != donor_units[0]) {
            return Err(UnificationError::MixedDonorUnits {
                channel: name.clone(),
                units: unit_list(&donor_units),
            });
        }
        let mut dst = data.row_mut(row);
        for &(i, w) in &weights {
            dst.scaled_add(w, &rec.data().row(i));
        }
        names.push(montage.canonical_label(name).unwrap_or(name).to_string());
        units.push(donor_units[0]);
    }
    Ok(Recording::new(
        data,
        rec.sampling_rate(),
        names,
        units,
        rec.events().to_vec(),
        rec.source_path(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(names: &[&str], values: &[f64]) -> Recording {
        let data = Array2::from_shape_fn((names.len(), 8), |(c, _)| values[c]);
        Recording::new(
            data,
            100.0,
            names.iter().map(|s| s.to_string()).collect(),
            vec![Unit::Microvolt; names.len()],
            vec![],
            "",
        )
        .unwrap()
    }

    fn order(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn reorder_only() {
        let r = rec(&["Cz", "C3", "C4"], &[1.0, 2.0, 3.0]);
        let out = align_channels(&r, &order(&["C4", "Cz"]), Montage::standard_1010()).unwrap();
        assert_eq!(out.channel_names(), ["C4", "Cz"]);
        assert_eq!(out.data().row(0)[0], 3.0);
        assert_eq!(out.data().row(1)[0], 1.0);
    }

    #[test]
    fn weights_sum_to_one() {
        let m = Montage::standard_1010();
        let donors: Vec<(usize, Position)> = ["C3", "C4", "Fz", "Pz", "O1", "T7"]
            .iter()
            .enumerate()
            .map(|(i, n)| (i, m.position(n).unwrap()))
            .collect();
        let w = interpolation_weights(m.position("Cz").unwrap(), &donors);
        assert_eq!(w.len(), 4);
        assert!((w.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_and_donorless() {
        let r = rec(&["Cz"], &[1.0]);
        assert!(matches!(
            align_channels(&r, &order(&["Xyz"]), Montage::standard_1010()),
            Err(UnificationError::UnknownChannel(_))
        ));
        let r = rec(&["ch1"], &[1.0]);
        assert!(matches!(
            align_channels(&r, &order(&["Cz"]), Montage::standard_1010()),
            Err(UnificationError::NoDonorChannels)
        ));
    }

    #[test]
    fn mixed_donor_units_are_rejected() {
        let r = rec(&["C3", "C4", "Fz", "Pz"], &[1.0; 4]);
        let (data, sr, names, mut units, ev, src) = r.into_parts();
        units[1] = Unit::Millivolt;
        let r = Recording::new(data, sr, names, units, ev, src).unwrap();
        assert!(matches!(
            align_channels(&r, &order(&["Cz"]), Montage::standard_1010()),
            Err(UnificationError::MixedDonorUnits { .. })
        ));
    }
}
