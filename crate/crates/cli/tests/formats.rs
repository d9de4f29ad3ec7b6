use paired_equiv::io::{
    format_value, read_counts_csv, read_surface_csv, read_surface_json, surface_json, surface_svg,
    write_boundary_csv, write_surface_csv, Meta,
};
use paired_equiv::sweep::{pool, power_sweep, size_sweep, MonteCarlo};
use paired_equiv_core::evaluation::{PowerGrid, SizeGrid};
use paired_equiv_core::{decision_map, power_surface, region_boundary, size_surface, Method};
use proptest::prelude::*;

fn small_size_grid() -> SizeGrid {
    SizeGrid {
        rho_min: -0.9,
        rho_max: 0.9,
        rho_steps: 13,
        pi_steps: 11,
    }
}

fn small_power_grid() -> PowerGrid {
    PowerGrid {
        steps: 12,
        ..PowerGrid::default()
    }
}

#[test]
fn size_surface_csv_round_trip_is_bit_exact() {
    let map = decision_map(37, 0.05, Method::Margin).unwrap();
    let grid = size_surface(&map, &small_size_grid()).unwrap();
    assert!(grid.values.iter().any(Option::is_none));
    let mut buf = Vec::new();
    write_surface_csv(&mut buf, &grid, None).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("axis1,axis2,value\n"));
    assert!(
        text.lines().any(|l| l.ends_with(',')),
        "out-of-domain cells are empty"
    );
    assert!(read_surface_csv(buf.as_slice()).unwrap().matches(&grid));
}

#[test]
fn power_surface_json_round_trip_is_bit_exact() {
    let map = decision_map(23, 0.35, Method::McNemar).unwrap();
    let grid = power_surface(&map, &small_power_grid()).unwrap();
    let doc = surface_json(
        &grid,
        Meta::new("power", 23, 0.35, Some(Method::McNemar)),
        None,
    );
    let text = serde_json::to_string(&doc).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["meta", "axes", "values"] {
        assert!(parsed.get(key).is_some(), "missing {key}");
    }
    assert_eq!(parsed["meta"]["method"], "mcnemar");
    assert!(read_surface_json(&parsed).unwrap().matches(&grid));
}

#[test]
fn monte_carlo_columns_follow_the_exact_value() {
    let map = decision_map(20, 0.05, Method::McNemar).unwrap();
    let pool = pool(2).unwrap();
    let mc = MonteCarlo {
        trials: 500,
        seed: 3,
    };
    let sweep = power_sweep(&pool, &map, &small_power_grid(), Some(mc)).unwrap();
    let mut buf = Vec::new();
    write_surface_csv(&mut buf, &sweep.surface, sweep.monte_carlo.as_deref()).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("axis1,axis2,value,mc_estimate,mc_stderr\n"));
    assert!(read_surface_csv(buf.as_slice())
        .unwrap()
        .matches(&sweep.surface));
}

#[test]
fn parallel_sweeps_match_serial_surfaces() {
    let pool = pool(4).unwrap();
    for method in Method::ALL {
        let map = decision_map(31, 0.1, method).unwrap();
        let serial = size_surface(&map, &small_size_grid()).unwrap();
        let parallel = size_sweep(&pool, &map, &small_size_grid(), None)
            .unwrap()
            .surface;
        assert_eq!(serial, parallel);
        let serial = power_surface(&map, &small_power_grid()).unwrap();
        let parallel = power_sweep(&pool, &map, &small_power_grid(), None)
            .unwrap()
            .surface;
        assert_eq!(serial, parallel);
    }
}

#[test]
fn boundary_csv_lists_each_method() {
    let boundaries: Vec<_> = Method::ALL
        .into_iter()
        .map(|m| (m, region_boundary(&decision_map(30, 0.05, m).unwrap())))
        .collect();
    let mut buf = Vec::new();
    write_boundary_csv(&mut buf, &boundaries).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,x10,x01"));
    let rows: Vec<&str> = lines.collect();
    let total: usize = boundaries.iter().map(|(_, b)| b.len()).sum();
    assert_eq!(rows.len(), total);
    assert!(rows.iter().any(|r| r.starts_with("mcnemar,")));
    assert!(rows.iter().any(|r| r.starts_with("margin,")));
}

#[test]
fn svg_heatmap_outlines_level_crossings() {
    let map = decision_map(40, 0.05, Method::McNemar).unwrap();
    let grid = size_surface(&map, &small_size_grid()).unwrap();
    let svg = surface_svg(&grid, 0.05);
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("<rect"));
}

#[test]
fn counts_csv_accepts_optional_columns() {
    let input = "n,x10,x01,x00,x11\n21,7,1,,\n,27,9,20,9\n";
    let rows = read_counts_csv(input.as_bytes()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].n, rows[0].x00), (Some(21), None));
    assert_eq!(
        (rows[1].n, rows[1].x00, rows[1].x11),
        (None, Some(20), Some(9))
    );
    assert!(read_counts_csv("n,x10\n3,x\n".as_bytes()).is_err());
}

proptest! {
    #[test]
    fn printed_values_parse_back_exactly(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        prop_assume!(v.is_finite());
        let back: f64 = format_value(v).parse().unwrap();
        prop_assert_eq!(back.to_bits(), v.to_bits());
    }
}
