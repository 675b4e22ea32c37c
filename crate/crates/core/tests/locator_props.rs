mod common;

use std::collections::HashSet;

use eegunify::locator::{
    effective_metadata, to_csv_string, CmpOp, Column, Condition, LocatorError, SourceMetadata,
};
use eegunify::{filter_rows, load_locator, merge_locators, save_locator, LocatorTable, Predicate};
use proptest::prelude::*;

fn reload(table: &LocatorTable, dir: &std::path::Path) -> (String, LocatorTable, String) {
    let path = dir.join("loc.csv");
    save_locator(table, &path).unwrap();
    let first = std::fs::read_to_string(&path).unwrap();
    let back = load_locator(&path).unwrap();
    save_locator(&back, &path).unwrap();
    let second = std::fs::read_to_string(&path).unwrap();
    (first, back, second)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn save_load_is_identity_and_byte_stable(table in common::table()) {
        let dir = tempfile::tempdir().unwrap();
        let (first, back, second) = reload(&table, dir.path());
        prop_assert_eq!(back.rows(), table.rows());
        prop_assert_eq!(first, second);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn merge_of_disjoint_tables_sums_rows(a in common::table(), b in common::table(), c in common::table()) {
        // Retag so the three tables cannot share a key.
        let retag = |t: &LocatorTable, tag: &str| {
            let rows = t.rows().iter().cloned().map(|mut r| { r.domain_tag = format!("{tag}{}", r.domain_tag); r }).collect();
            t.replace_rows(rows).unwrap()
        };
        let (a, b, c) = (retag(&a, "a_"), retag(&b, "b_"), retag(&c, "c_"));
        let merged = merge_locators(&[a.clone(), b.clone(), c.clone()]).unwrap();
        prop_assert_eq!(merged.len(), a.len() + b.len() + c.len());

        let left = merge_locators(&[merge_locators(&[a.clone(), b.clone()]).unwrap(), c.clone()]).unwrap();
        let right = merge_locators(&[a.clone(), merge_locators(&[b, c]).unwrap()]).unwrap();
        prop_assert_eq!(left.rows(), right.rows());
        prop_assert_eq!(left.rows(), merged.rows());

        if !a.is_empty() {
            let dup = merge_locators(&[a.clone(), a]);
            prop_assert!(
                matches!(dup, Err(LocatorError::DuplicateEntry { .. })),
                "duplicate merge must fail"
            );
        }
    }

    #[test]
    fn filter_matches_brute_force(table in common::table(), threshold in 0.0..100.0f64) {
        let quality = Predicate::all(vec![Condition::new(Column::QualityScore, CmpOp::Gt, threshold.to_string())]);
        let completed = Predicate::all(vec![Condition::new(Column::Completeness, CmpOp::Eq, "Completed")]);

        let got = filter_rows(&table, &quality).unwrap();
        let expected: Vec<_> = table
            .rows()
            .iter()
            .filter(|r| r.quality_score.is_some_and(|q| q > threshold))
            .cloned()
            .collect();
        prop_assert_eq!(got.rows(), &expected[..]);

        let both = filter_rows(&table, &quality.clone().and(completed.clone())).unwrap();
        let q_keys: HashSet<_> = got.rows().iter().map(|r| (r.domain_tag.clone(), r.file_path.clone())).collect();
        let c_rows = filter_rows(&table, &completed).unwrap();
        let intersection: Vec<_> = c_rows
            .rows()
            .iter()
            .filter(|r| q_keys.contains(&(r.domain_tag.clone(), r.file_path.clone())))
            .cloned()
            .collect();
        prop_assert_eq!(both.rows(), &intersection[..]);
        // The input is untouched.
        prop_assert!(table.len() >= got.len());
    }

    #[test]
    fn effective_metadata_is_idempotent(row in common::row(), other in common::row()) {
        let parsed = SourceMetadata {
            file_type: Some(other.file_type),
            channel_names: Some(other.channel_names.clone()),
            sampling_rate: other.sampling_rate,
            duration: other.duration,
            units: other.units.clone(),
            events: other.events.clone(),
        };
        let once = effective_metadata(&row, Some(&parsed));
        let twice = effective_metadata(&row, Some(&once));
        prop_assert_eq!(&once, &twice);
        if let Some(sr) = row.sampling_rate {
            prop_assert_eq!(once.sampling_rate, Some(sr));
        }
    }

    #[test]
    fn serialisation_without_base_keeps_absolute_paths(table in common::table()) {
        let text = to_csv_string(&table, None).unwrap();
        for row in table.rows() {
            let needle = row.file_path.replace('"', "\"\"");
            prop_assert!(text.contains(&needle));
        }
    }
}

#[test]
fn unknown_filter_column_is_rejected() {
    let table = LocatorTable::new(vec![]).unwrap();
    let p = Predicate::parse("Nonexistent Column > 3").unwrap();
    assert!(matches!(
        filter_rows(&table, &p),
        Err(LocatorError::UnknownColumn(_))
    ));
}
