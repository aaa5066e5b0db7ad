use nemel::io::*;
use nemel::sim::{run, LogRow, Simulation};
use nemel::energy::EnergyReport;
use proptest::prelude::*;
use std::fs;

const CONFIG: &str = r#"
[grid]
nx = 12
ny = 10

[leslie]
alpha1 = 0.1
alpha2 = -0.8
alpha3 = 0.1
alpha4 = 1.0
alpha5 = 1.0
alpha6 = 0.3

[species.1]
valence = 1
diffusivity = 1.0
mass = 1.0

[species.2]
valence = -1
diffusivity = 1.0
mass = 1.0

[permittivity]
eps_perp = 1.0
eps_a = 0.5
"#;

fn config(extra: &str) -> RunConfig {
    parse_config_str(&format!("{CONFIG}\n{extra}")).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fields_round_trip_bit_identically(
        (nx, ny, data) in (1usize..7, 1usize..7).prop_flat_map(|(nx, ny)| (Just(nx), Just(ny), prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), nx * ny))),
        t in any::<f64>().prop_filter("finite", |x| x.is_finite()),
    ) {
        let h = SnapshotHeader { field: "c1".into(), nx, ny, lx: 1.0, ly: 2.0, t };
        let text = format_field(&h, &data);
        prop_assert_eq!(text.lines().count(), ny + 1);
        let (h2, back) = parse_field(&text).unwrap();
        prop_assert_eq!(h2.t.to_bits(), t.to_bits());
        for (a, b) in data.iter().zip(&back) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn log_values_reparse_exactly(vals in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 13)) {
        let row = LogRow {
            step: 7,
            t: vals[0],
            dt: vals[1],
            report: EnergyReport {
                e_kinetic: vals[2],
                e_elastic: vals[3],
                e_entropy: vals[4],
                e_electric: vals[5],
                e_total: vals[6],
                d_ionic: vals[7],
                d_viscous: vals[8],
                d_rotational: vals[9],
                ..Default::default()
            },
            audit_r: vals[10],
            masses: vec![vals[11], vals[12]],
            min_c: vals[0],
            max_len_dev: vals[1],
            div_inf: vals[2],
        };
        let text = format!("{}\n{}\n", log_header(2), format_log_row(&row));
        let (_, rows) = parse_log(&text).unwrap();
        let expect = [7.0, vals[0], vals[1], vals[2], vals[3], vals[4], vals[5], vals[6], vals[7], vals[8], vals[9], vals[10], vals[11], vals[12], vals[0], vals[1], vals[2]];
        for (a, b) in rows[0].iter().zip(expect) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn truncated_snapshot_reports_its_byte_offset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("[time]\nt_final = 0.05\n");
    let sim = initial_simulation(&cfg).unwrap();
    write_state(dir.path(), &cfg.grid, &sim.state, 0).unwrap();
    let path = dir.path().join("phi.txt");
    let text = fs::read_to_string(&path).unwrap();
    let cut = text.len() / 2;
    let cut = text[..cut].rfind('\n').unwrap() + 1;
    fs::write(&path, &text[..cut]).unwrap();
    match read_state(dir.path(), &cfg.grid, 2).unwrap_err() {
        nemel::Error::Snapshot { offset, .. } => assert_eq!(offset, cut),
        e => panic!("unexpected error {e}"),
    }
}

#[test]
fn snapshot_dimensions_are_checked_against_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("[time]\nt_final = 0.05\n");
    let sim = initial_simulation(&cfg).unwrap();
    write_state(dir.path(), &cfg.grid, &sim.state, 0).unwrap();
    let other = nemel::grid::Grid::new(10, 12, 1.0, 1.0).unwrap();
    let e = read_state(dir.path(), &other, 2).unwrap_err();
    assert!(e.to_string().contains("do not match"), "{e}");
}

#[test]
fn state_round_trips_through_a_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("[time]\nt_final = 0.05\n");
    let mut sim = initial_simulation(&cfg).unwrap();
    for _ in 0..3 {
        sim.advance(1e-3).unwrap();
    }
    write_state(dir.path(), &cfg.grid, &sim.state, sim.step).unwrap();
    let (back, step) = read_state(dir.path(), &cfg.grid, 2).unwrap();
    assert_eq!(step, 3);
    assert_eq!(back, sim.state);
}

#[test]
fn zero_final_time_writes_only_the_initial_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("[time]\nt_final = 0.05\n");
    cfg.control.t_final = 0.0;
    let out = run_to_dir(&cfg, dir.path(), None).unwrap();
    assert_eq!(out.summary.steps, 0);
    let snaps: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("snap_"))
        .collect();
    assert_eq!(snaps.len(), 1);
    let (_, rows) = parse_log(&fs::read_to_string(&out.log).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
}

#[test]
fn resumed_run_reproduces_the_uninterrupted_log() {
    let base = tempfile::tempdir().unwrap();
    let full_dir = base.path().join("full");
    let cfg = config("[output]\nsnapshot_every = 10\n[time]\ndt = 1e-3\nt_final = 0.04\n");
    let full = run_to_dir(&cfg, &full_dir, None).unwrap();
    assert_eq!(full.summary.steps, 40);

    let mut resumed = cfg.clone();
    resumed.restart = Some(full_dir.join("snap_000010"));
    let part_dir = base.path().join("part");
    run_to_dir(&resumed, &part_dir, None).unwrap();

    let (_, a) = parse_log(&fs::read_to_string(full_dir.join("energy.csv")).unwrap()).unwrap();
    let (_, b) = parse_log(&fs::read_to_string(part_dir.join("energy.csv")).unwrap()).unwrap();
    assert_eq!(b.len(), 30);
    let a = &a[11..];
    let mut worst: f64 = 0.0;
    for (ra, rb) in a.iter().zip(&b) {
        assert_eq!(ra[0], rb[0]);
        for (x, y) in ra.iter().zip(rb).skip(1) {
            worst = worst.max((x - y).abs() / x.abs().max(1.0));
        }
    }
    assert!(worst <= 1e-12, "worst deviation {worst:e}");
}

#[test]
fn observer_sees_strictly_increasing_times() {
    let cfg = config("[time]\nt_final = 0.05\n");
    let mut sim: Simulation = initial_simulation(&cfg).unwrap();
    let mut last = f64::NEG_INFINITY;
    run(&mut sim, &cfg.control, |_, row| {
        assert!(row.t > last);
        last = row.t;
        Ok(())
    })
    .unwrap();
}
