use itcg::files::{dataset_csv, parse_dataset_csv, Outputs};
use itcg_core::tgo::TgoSample;
use proptest::prelude::*;

#[test]
fn dataset_header_is_checked() {
    assert!(parse_dataset_csv(b"v,gamma,x,y\n1,2,3,4\n").is_err());
    assert!(parse_dataset_csv(b"v,gamma,x,y,tgo\n1,2,3,4,nan\n").is_err());
    assert!(parse_dataset_csv(b"v,gamma,x,y,tgo\n").unwrap().is_empty());
}

#[test]
fn outputs_are_written_only_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let mut out = Outputs::default();
    out.add("a.csv", b"x\n1\n".to_vec());
    out.add_json("b.json", &[1, 2]);
    assert_eq!(out.names().collect::<Vec<_>>(), ["a.csv", "b.json"]);
    let target = dir.path().join("run");
    assert!(!target.exists());
    out.write_to(&target).unwrap();
    assert_eq!(std::fs::read(target.join("a.csv")).unwrap(), b"x\n1\n");
    assert_eq!(out.digests().len(), 2);
}

proptest! {
    #[test]
    fn dataset_csv_round_trips(rows in prop::collection::vec(prop::array::uniform5(-1e6f64..1e6), 0..20)) {
        let samples: Vec<TgoSample> = rows
            .iter()
            .map(|r| TgoSample { v: r[0], gamma: r[1], x: r[2], y: r[3], t_go: r[4] })
            .collect();
        let back = parse_dataset_csv(&dataset_csv(&samples)).unwrap();
        prop_assert_eq!(back, samples);
    }
}
