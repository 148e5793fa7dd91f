//! Dataset schemas, CSV loading, feature encoding and protected groups.

mod encode;
mod groups;
mod schema;
mod table;

pub use encode::{encode_features, encode_labels, EncodedDataset, Encoder, NormalizationParams};
pub use groups::{extract_groups, GroupIndex};
pub use schema::{
    ColumnKind, ColumnRole, ColumnSpec, DatasetSpec, PositiveMeaning, ReferencePolicy,
};
pub use table::{load_dataset, RawColumn, RawTable};

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::*;
    use crate::error::Error;

    fn spec(columns: &str) -> DatasetSpec {
        let text = format!(
            r#"
            name = "toy"
            source = "toy.csv"
            label = "y"
            positive_class = "yes"
            positive_meaning = "assistive"
            protected = ["group"]
            missing_values = ["", "NA"]
            {columns}
            [[columns]]
            name = "group"
            kind = "categorical"
            [[columns]]
            name = "y"
            kind = "binary"
            role = "label"
            "#
        );
        DatasetSpec::from_toml_str(&text, Path::new(".")).unwrap()
    }

    fn table(spec: &DatasetSpec, csv: &str) -> crate::error::Result<RawTable> {
        table::read_table(csv.as_bytes(), Path::new("toy.csv"), spec)
    }

    const NUMERIC: &str = r#"
        [[columns]]
        name = "x"
        kind = "numeric"
    "#;

    #[test]
    fn numeric_zscore_uses_population_std() {
        let s = spec(NUMERIC);
        let t = table(&s, "x,group,y\n1,a,yes\n2,b,no\n3,a,yes\n").unwrap();
        let enc = encode_features(&t, &s).unwrap();
        let x = enc.design_matrix.column(0);
        let expect = [-1.224744871391589, 0.0, 1.224744871391589];
        for (a, b) in x.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert_eq!(enc.labels, vec![true, false, true]);
        assert_eq!(enc.normalization_params[0].mean, 2.0);
    }

    #[test]
    fn ordinal_ranks_then_zscores() {
        let s = spec(
            r#"
            [[columns]]
            name = "size"
            kind = "ordinal"
            levels = ["low", "medium", "high"]
        "#,
        );
        let t = table(&s, "size,group,y\nhigh,a,yes\nlow,b,no\nmedium,a,no\n").unwrap();
        let enc = encode_features(&t, &s).unwrap();
        let p = &enc.normalization_params[0];
        assert_eq!(p.mean, 1.0);
        let col = enc.design_matrix.column(0);
        assert!(col[1] < col[2] && col[2] < col[0]);
        assert!(col.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn categorical_one_hot_rows_sum_to_one() {
        let s = spec(
            r#"
            [[columns]]
            name = "colour"
            kind = "categorical"
        "#,
        );
        let t = table(&s, "colour,group,y\nred,a,yes\ngreen,b,no\nblue,a,no\nred,b,yes\n").unwrap();
        let enc = encode_features(&t, &s).unwrap();
        assert_eq!(&enc.column_names[..3], ["colour=blue", "colour=green", "colour=red"]);
        for row in enc.design_matrix.iter_rows() {
            assert_eq!(row[..3].iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn zero_variance_column_encodes_as_zero() {
        let s = spec(NUMERIC);
        let t = table(&s, "x,group,y\n4,a,yes\n4,b,no\n").unwrap();
        let enc = encode_features(&t, &s).unwrap();
        assert_eq!(enc.design_matrix.column(0), vec![0.0, 0.0]);
        assert_eq!(enc.warnings.len(), 1);
    }

    #[test]
    fn single_valued_categorical_is_an_error() {
        let s = spec(
            r#"
            [[columns]]
            name = "colour"
            kind = "categorical"
        "#,
        );
        let t = table(&s, "colour,group,y\nred,a,yes\nred,b,no\n").unwrap();
        assert!(matches!(encode_features(&t, &s), Err(Error::Encoding { .. })));
    }

    #[test]
    fn bad_number_names_row_and_column() {
        let s = spec(NUMERIC);
        let err = table(&s, "x,group,y\n1,a,yes\nabc,b,no\n").unwrap_err();
        match err {
            Error::BadNumber { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (3, "x", "abc"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_column_is_reported() {
        let s = spec(NUMERIC);
        let err = table(&s, "group,y\na,yes\n").unwrap_err();
        assert!(matches!(err, Error::MissingColumn { column, .. } if column == "x"));
    }

    #[test]
    fn header_only_file_yields_empty_table() {
        let s = spec(NUMERIC);
        let t = table(&s, "x,group,y\n").unwrap();
        assert_eq!(t.n_rows, 0);
        assert!(crate::splits::make_folds(t.n_rows, &Default::default(), 0).is_err());
    }

    #[test]
    fn rows_with_missing_values_are_dropped() {
        let s = spec(NUMERIC);
        let t = table(&s, "x,group,y,extra\n1,a,yes,z\nNA,b,no,z\n3,,no,z\n4,b,no,z\n").unwrap();
        assert_eq!(t.n_rows, 2);
        assert_eq!(t.dropped_rows, 2);
        assert_eq!(t.missing_cells[0], ("x".to_string(), 1));
    }

    #[test]
    fn excluded_groups_are_removed() {
        let mut s = spec(NUMERIC);
        s.exclude_groups.insert("group".into(), vec!["c".into()]);
        let t = table(&s, "x,group,y\n1,a,yes\n2,c,no\n3,b,no\n4,c,yes\n").unwrap();
        assert_eq!(t.n_rows, 2);
        assert_eq!(t.excluded_rows, 2);
        let g = extract_groups(&t, &s).unwrap();
        assert_eq!(g[0].labels, vec!["a", "b"]);

        s.reference_groups.insert("group".into(), "c".into());
        assert!(s.validate().is_err());
    }

    #[test]
    fn quoted_fields_follow_rfc4180() {
        let s = spec(NUMERIC);
        let t = table(&s, "x,group,y\n1,\"a, b\",yes\n2,\"c \"\"d\"\"\",no\n").unwrap();
        assert_eq!(t.column("group").unwrap().text, vec!["a, b", "c \"d\""]);
    }

    #[test]
    fn encoding_is_deterministic_and_idempotent() {
        let s = spec(NUMERIC);
        let csv = "x,group,y\n1.5,a,yes\n2.25,b,no\n-3,a,yes\n7,b,no\n";
        let a = encode_features(&table(&s, csv).unwrap(), &s).unwrap();
        let b = encode_features(&table(&s, csv).unwrap(), &s).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());

        // re-encoding z-scores leaves them unchanged
        let zs = a.design_matrix.column(0);
        let rewritten: String = zs
            .iter()
            .zip(["a", "b", "a", "b"])
            .zip(["yes", "no", "yes", "no"])
            .map(|((x, g), y)| format!("{x:?},{g},{y}\n"))
            .collect();
        let again = encode_features(&table(&s, &format!("x,group,y\n{rewritten}")).unwrap(), &s).unwrap();
        for (p, q) in zs.iter().zip(again.design_matrix.column(0)) {
            assert!((p - q).abs() < 1e-9);
        }
        let g = &a.groups[0];
        assert_eq!(g.sizes.iter().sum::<usize>(), 4);
    }
}
