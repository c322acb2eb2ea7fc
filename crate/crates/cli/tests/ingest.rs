use std::io::Write;

use proptest::prelude::*;
use trigfree::infer::Dataset;
use trigfree_cli::ingest::{csv_ingest, emit, ingest_reader, Schema};
use trigfree_cli::CliError;

fn schema(factors: &[&str]) -> Schema {
    Schema { response: "y".into(), factors: factors.iter().map(|s| s.to_string()).collect(), columns: None }
}

#[test]
fn three_rows_by_hand() {
    let text = "y,age,dose\n0,31.5,1\n4,40,0.25\n12,28,2\n";
    let d = ingest_reader(text.as_bytes(), &schema(&[])).unwrap();
    let want = Dataset::new(
        vec![0, 4, 12],
        vec!["age".into(), "dose".into()],
        vec![vec![31.5, 40.0, 28.0], vec![1.0, 0.25, 2.0]],
    )
    .unwrap();
    assert_eq!(d, want);
}

#[test]
fn factor_levels_become_indicators() {
    let text = "y,health,x\n1,poor,0\n2,average,1\n0,excellent,2\n3,poor,3\n";
    let d = ingest_reader(text.as_bytes(), &schema(&["health"])).unwrap();
    // Three levels, sorted; "average" is dropped as the reference.
    assert_eq!(d.names, vec!["healthexcellent", "healthpoor", "x"]);
    assert_eq!(d.columns[0], vec![0.0, 0.0, 1.0, 0.0]);
    assert_eq!(d.columns[1], vec![1.0, 0.0, 0.0, 1.0]);
    let numeric = "y,grade\n1,10\n2,9\n3,2\n";
    let d = ingest_reader(numeric.as_bytes(), &schema(&["grade"])).unwrap();
    assert_eq!(d.names, vec!["grade9", "grade10"]);
}

#[test]
fn column_selection() {
    let text = "a,y,b\n1,2,3\n4,5,6\n";
    let s = Schema { columns: Some(vec!["b".into()]), ..schema(&[]) };
    let d = ingest_reader(text.as_bytes(), &s).unwrap();
    assert_eq!(d.names, vec!["b"]);
    assert_eq!(d.responses, vec![2, 5]);
    let s = Schema { columns: Some(vec!["zzz".into()]), ..schema(&[]) };
    assert!(matches!(ingest_reader(text.as_bytes(), &s), Err(CliError::Usage(_))));
}

fn parse_error(text: &str, factors: &[&str]) -> (u64, String, String) {
    match ingest_reader(text.as_bytes(), &schema(factors)) {
        Err(CliError::Parse { line, column, message }) => (line, column, message),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn missing_values_report_line_and_column() {
    let (line, col, msg) = parse_error("y,x\n1,2\n3,NA\n", &[]);
    assert_eq!((line, col.as_str()), (3, "x"));
    assert!(msg.contains("missing"));
    let (line, col, _) = parse_error("y,x\n1,2\n,4\n", &[]);
    assert_eq!((line, col.as_str()), (3, "y"));
    let (line, col, _) = parse_error("y,g\n1,a\n2,\n", &["g"]);
    assert_eq!((line, col.as_str()), (3, "g"));
}

#[test]
fn bad_responses_and_covariates() {
    assert_eq!(parse_error("y,x\n1.5,2\n", &[]).1, "y");
    assert_eq!(parse_error("y,x\n-1,2\n", &[]).1, "y");
    assert_eq!(parse_error("y,x\nabc,2\n", &[]).1, "y");
    let (line, col, msg) = parse_error("y,x\n1,2\n2,3\n4,male\n", &[]);
    assert_eq!((line, col.as_str()), (4, "x"));
    assert!(msg.contains("factor"));
    // Integral floats are accepted as counts.
    let d = ingest_reader("y,x\n3.0,1\n".as_bytes(), &schema(&[])).unwrap();
    assert_eq!(d.responses, vec![3]);
}

#[test]
fn comments_are_skipped_and_files_read() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(f, "# exported\ny,x\n2,0.5\n").unwrap();
    let d = csv_ingest(f.path(), &schema(&[])).unwrap();
    assert_eq!(d.responses, vec![2]);
    let missing = csv_ingest(std::path::Path::new("/nonexistent/file.csv"), &schema(&[]));
    assert_eq!(missing.unwrap_err().exit_code(), 2);
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..20, 0usize..4).prop_flat_map(|(n, k)| {
        (
            proptest::collection::vec(0u64..1_000_000, n),
            proptest::collection::vec(proptest::collection::vec(-1e12f64..1e12, n), k),
        )
            .prop_map(move |(y, cols)| {
                let names = (0..k).map(|j| format!("x{j}")).collect();
                Dataset::new(y, names, cols).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn emit_then_ingest_is_identity(d in dataset()) {
        let text = emit(&d, "y");
        let back = ingest_reader(text.as_bytes(), &schema(&[])).unwrap();
        prop_assert_eq!(back, d);
    }
}
