use fracle::io::{
    dump_field, load_field, parse_config, read_table, write_table, Command, FieldKind, FieldRef, RunConfig, Table,
};
use fracle::{BoxDomain, Error, Grid, GridFunction};
use proptest::prelude::*;

fn config_strategy() -> impl Strategy<Value = RunConfig> {
    (
        prop_oneof![Just(Command::Solve), Just(Command::Sweep), Just(Command::Hls), Just(Command::Kernels)],
        1.5f64..2.5,
        prop::collection::vec(0.005f64..0.05, 1..5),
        4usize..40,
        0.16f64..0.34,
        any::<u64>(),
        any::<bool>(),
    )
        .prop_map(|(command, p, mut eps, k, ring, seed, fields)| {
            let mut c = RunConfig::defaults(command, 2);
            c.p = p;
            eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
            eps.dedup();
            if command == Command::Solve {
                eps.truncate(1);
            }
            c.epsilon = eps;
            c.cutoff = vec![k, k + 1];
            c.points = vec![2 * k + 2, 2 * k + 2];
            c.ring_radius = ring;
            c.kernel_seed = seed;
            c.write_fields = fields;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_text_round_trips(cfg in config_strategy()) {
        let back = parse_config(&cfg.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn tables_round_trip_bitwise(rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 3), 0..20)) {
        let mut t = Table::new(&["a", "b", "c"]);
        for r in &rows {
            t.push(r.clone()).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_table(&t, &path, &serde_json::json!({ "k": 1 })).unwrap();
        let back = read_table(&path).unwrap();
        prop_assert_eq!(back.columns, t.columns);
        for (a, b) in back.rows.iter().zip(&t.rows) {
            for (x, y) in a.iter().zip(b) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        prop_assert!(dir.path().join("t.json").exists());
    }
}

#[test]
fn grid_field_dump_round_trips() {
    let d = BoxDomain::new(vec![1.0, 0.5], 0.5).unwrap();
    let g = Grid::new(&d, &[12, 6]).unwrap();
    let f = GridFunction::from_fn(&g, |x| (x[0] * 3.1).sin() * x[1]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.bin");
    dump_field(FieldRef::Grid(&f), &path).unwrap();
    assert!(dir.path().join("f.bin.txt").exists());
    let loaded = load_field(&path).unwrap();
    assert_eq!(loaded.kind, FieldKind::Grid);
    let back = loaded.into_grid_function().unwrap();
    assert_eq!(back.grid().points(), f.grid().points());
    for (a, b) in back.values().iter().zip(f.values()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn config_errors_point_at_the_line() {
    let text = "[run]\ncommand = sweep\n\n[exponents]\np = 2.5\np = 2.0\n";
    let err = parse_config(text).unwrap_err().to_string();
    assert!(err.contains("line 6"), "{err}");
    let text = "[run]\ncommand = sweep\n[domain]\nwidth = 3\n";
    let err = parse_config(text).unwrap_err().to_string();
    assert!(err.contains("line 4") && err.contains("width"), "{err}");
    let text = "[run]\ncommand = solve\n[exponents]\nepsilon = 0.2\n";
    match parse_config(text) {
        Err(Error::Config(v)) => assert!(v.iter().any(|m| m.contains("q >= p")), "{v:?}"),
        other => panic!("{other:?}"),
    }
}
