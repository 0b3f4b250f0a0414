use std::path::PathBuf;

use rand::Rng as _;
use uqsurro_core::data::*;
use uqsurro_core::rng;
use uqsurro_core::{Error, Matrix};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/v1")
        .join(name)
}

fn read_rows(path: &PathBuf) -> Vec<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(|c| c.parse().unwrap()).collect())
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn strata_ok(unit: &Matrix) -> bool {
    let n = unit.rows();
    (0..unit.cols()).all(|j| {
        let mut seen = vec![false; n];
        for i in 0..n {
            let k = (unit[(i, j)] * n as f64).floor() as usize;
            if k >= n || seen[k] {
                return false;
            }
            seen[k] = true;
        }
        true
    })
}

#[test]
fn lhs_stratification_and_maximin_monotonicity() {
    let mut meta = rng::seeded(77);
    for c in 0..100u64 {
        let n = meta.random_range(1..=40);
        let d = meta.random_range(1..=6);
        let iterations = meta.random_range(1..=30);
        let design = maximin_lhs_unit(n, d, iterations, &mut rng::seeded(c)).unwrap();
        assert!(strata_ok(&design.unit), "config {c}: n={n} d={d}");
        assert!(design.min_distance >= design.first_candidate_min_distance);
        // the first candidate is the design a single iteration returns
        let first = maximin_lhs_unit(n, d, 1, &mut rng::seeded(c)).unwrap();
        assert_eq!(first.min_distance, design.first_candidate_min_distance);
    }
}

#[test]
fn two_point_design_and_mapped_bounds() {
    let schema = InputSchema::new(vec![InputParameter::new("x", 0.0, 1.0, InputDistribution::Uniform)]).unwrap();
    let d = maximin_lhs(2, &schema, 5, &mut rng::seeded(1)).unwrap();
    let mut v = [d[(0, 0)], d[(1, 0)]];
    v.sort_by(f64::total_cmp);
    assert!(v[0] < 0.5 && v[1] >= 0.5);

    let fgr = maximin_lhs(200, &fgr_schema(), 20, &mut rng::seeded(2)).unwrap();
    assert_eq!(fgr.shape(), (200, 5));
    fgr_schema().check_within(&fgr).unwrap();
    let bad = InputSchema::new(vec![InputParameter::new("x", 1.0, 1.0, InputDistribution::Uniform)]);
    assert!(matches!(bad, Err(Error::Schema(_))));
}

#[test]
fn split_sizes_follow_floor_rule() {
    for (n, f, want) in [
        (200, (0.85, 0.05, 0.1), (170, 10, 20)),
        (2580, (0.7, 0.15, 0.15), (1806, 387, 387)),
        (10, (0.5, 0.3, 0.2), (5, 3, 2)),
    ] {
        let data = linear_problem(n).unwrap();
        let fr = SplitFractions::new(f.0, f.1, f.2).unwrap();
        let a = split(&data, fr, &mut rng::seeded(3)).unwrap();
        let b = split(&data, fr, &mut rng::seeded(3)).unwrap();
        assert_eq!(a.partition(), b.partition());
        let got = (
            a.indices(Partition::Train).len(),
            a.indices(Partition::Val).len(),
            a.indices(Partition::Test).len(),
        );
        assert_eq!(got, want);
    }
}

#[test]
fn standardization_roundtrip() {
    let mut rng = rng::seeded(4);
    let x = Matrix::from_vec(30, 3, (0..90).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap();
    let y = Matrix::from_vec(30, 2, (0..60).map(|_| rng.random_range(0.0..100.0)).collect()).unwrap();
    let names = |p: &str, k: usize| (0..k).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let data = Dataset::new(names("x", 3), names("y", 2), x, y).unwrap();
    let data = split(&data, SplitFractions::new(0.7, 0.15, 0.15).unwrap(), &mut rng).unwrap();
    let (scaled, scaler) = standardize(&data, true).unwrap();
    let back = scaler.inverse(&scaled).unwrap();
    for (a, b) in back.inputs().as_slice().iter().zip(data.inputs().as_slice()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    for (a, b) in back.outputs().as_slice().iter().zip(data.outputs().as_slice()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    let (tx, _) = scaled.partition_xy(Partition::Train);
    for j in 0..3 {
        let col = tx.column(j);
        let m = col.iter().sum::<f64>() / col.len() as f64;
        assert!(m.abs() < 1e-12);
    }
}

#[test]
fn fgr_oracle_matches_golden_nominal_curve() {
    let rows = read_rows(&fixture("fgr-1_nominal.csv"));
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(times, fgr_time_grid());
    let curve = fgr_curve(&[1.0; 5], &times);
    for (got, row) in curve.iter().zip(&rows) {
        assert!(close(*got, row[1]), "t={}: {got} vs {}", row[0], row[1]);
    }
    assert_eq!(FGR_ORACLE_VERSION, "fgr-1");
}

#[test]
fn fgr_values_are_percentages_and_pure() {
    let design = maximin_lhs(100, &fgr_schema(), 5, &mut rng::seeded(5)).unwrap();
    let times = fgr_time_grid();
    let a = synth_fgr(&design, &times).unwrap();
    assert!(a.as_slice().iter().all(|v| (0.0..=100.0).contains(v)));
    assert_eq!(a, synth_fgr(&design, &times).unwrap());
}

#[test]
fn void_oracle_matches_golden_row() {
    let rows = read_rows(&fixture("void-1_nominal.csv"));
    let got = void_fractions(&rows[0][..9]);
    for (g, w) in got.iter().zip(&rows[0][9..]) {
        assert!(close(*g, *w), "{got:?} vs {:?}", &rows[0][9..]);
    }
    assert_eq!(VOID_ORACLE_VERSION, "void-1");
}

#[test]
fn void_outputs_ordered_with_dry_plateau() {
    let design = void_design(86, 30, 5, &mut rng::seeded(6)).unwrap();
    assert_eq!(design.shape(), (2580, 9));
    let y = synth_voidfraction(&design).unwrap();
    let mut zeros = 0;
    for i in 0..y.rows() {
        let r = y.row(i);
        assert!(r.iter().all(|v| (0.0..=100.0).contains(v)));
        assert!(r.windows(2).all(|w| w[0] <= w[1]));
        zeros += usize::from(r[0] == 0.0);
    }
    assert!(zeros > y.rows() / 10, "only {zeros} dry rows for the first output");
    assert_eq!(
        void_fractions(&[5.5, 70.0, 0.5, 220.0, 1.0, 1.0, 1.0, 1.0, 1.0])[0],
        0.0
    );
}

#[test]
fn csv_loading_reports_locations() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    std::fs::write(&good, "a,b,y\n1,2,3\n4,5,6\n7,8,9\n").unwrap();
    let d = load_dataset(&good, &["a", "b"], &["y"]).unwrap();
    assert_eq!(d.n(), 3);

    let err = load_dataset(&good, &["a", "b"], &["z"]).unwrap_err();
    assert!(matches!(&err, Error::Parse { column, .. } if column == "z"), "{err}");

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b,y\n1,2,3\n4,x,6\n").unwrap();
    let err = load_dataset(&bad, &["a", "b"], &["y"]).unwrap_err();
    assert!(
        matches!(&err, Error::Parse { row: 2, column, .. } if column == "b"),
        "{err}"
    );

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "a,b,y\n").unwrap();
    assert!(matches!(load_dataset(&empty, &["a"], &["y"]), Err(Error::Parse { .. })));
}

#[test]
fn trace_sized_file_roundtrips() {
    let design = void_design(86, 30, 2, &mut rng::seeded(8)).unwrap();
    let y = synth_voidfraction(&design).unwrap();
    let names: Vec<String> = void_schema().names();
    let data = Dataset::new(
        names.clone(),
        VOID_OUTPUTS.iter().map(|s| s.to_string()).collect(),
        design,
        y,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("void.csv");
    write_dataset_csv(&path, &data).unwrap();
    let ins: Vec<&str> = names.iter().map(String::as_str).collect();
    let back = load_dataset(&path, &ins, &VOID_OUTPUTS).unwrap();
    assert_eq!(back.n(), 2580);
    assert_eq!(back.inputs(), data.inputs());
    assert_eq!(back.outputs(), data.outputs());
}
