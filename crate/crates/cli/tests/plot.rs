use ces_cli::plot::{day_series, read_dispatch, render_dispatch_svg, Axis, DispatchRecord, PlotError};
use sha2::{Digest, Sha256};

fn record(s: usize, t: usize, omega: f64, soc: f64, grid: f64, ces: f64) -> DispatchRecord {
    DispatchRecord {
        ets: "ETS1".into(),
        node: 2,
        s,
        t,
        omega,
        e_ch_kwh: 0.0,
        e_dis_kwh: 0.0,
        soc_kwh: soc,
        grid_trade_kwh: grid,
        ces_trade_kwh: ces,
    }
}

/// `(x, y)` pairs of the polyline tagged `id`.
fn points(svg: &str, id: &str) -> Vec<(f64, f64)> {
    let line = svg.lines().find(|l| l.contains(&format!("data-series=\"{id}\""))).unwrap();
    let list = line.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    list.split(' ')
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

#[test]
fn all_zero_dispatch_gives_three_flat_series_at_zero() {
    let rows: Vec<_> = (0..24).map(|t| record(0, t, 1.0, 0.0, 0.0, 0.0)).collect();
    let svg = render_dispatch_svg(&rows, 0).unwrap();
    let zero = Axis::covering([0.0]).y(0.0);
    for id in ["grid", "ces", "soc"] {
        let pts = points(&svg, id);
        assert_eq!(pts.len(), 24);
        assert!(pts.iter().all(|&(_, y)| (y - zero).abs() < 0.005), "{id}");
    }
}

#[test]
fn soc_at_capacity_plateaus() {
    let cap = 80.0;
    let soc = |t: usize| match t {
        0..=7 => 10.0 * t as f64,
        8..=14 => cap,
        _ => cap - 5.0 * (t - 14) as f64,
    };
    let rows: Vec<_> = (0..24).map(|t| record(0, t, 1.0, soc(t), 1.0, -0.5)).collect();
    let series = day_series(&rows, 0).unwrap();
    assert!(series.soc[8..=14].iter().all(|&v| v == cap));
    let pts = points(&render_dispatch_svg(&rows, 0).unwrap(), "soc");
    let top = Axis::covering(series.soc.iter().chain(&series.grid).chain(&series.ces).copied()).y(cap);
    for (h, &(_, y)) in pts.iter().enumerate() {
        if (8..=14).contains(&h) {
            assert!((y - top).abs() < 0.005);
        } else {
            assert!(y > top + 1.0, "hour {h} should lie below the plateau");
        }
    }
}

#[test]
fn scenarios_are_weighted_by_omega() {
    let mut rows = Vec::new();
    for t in 0..24 {
        rows.push(record(0, t, 0.25, 4.0, 2.0, 1.0));
        rows.push(record(1, t, 0.75, 8.0, -2.0, 3.0));
    }
    let s = day_series(&rows, 0).unwrap();
    assert_eq!((s.soc[5], s.grid[5], s.ces[5]), (7.0, -1.0, 2.5));
}

#[test]
fn identical_input_gives_identical_bytes() {
    let rows: Vec<_> = (24..48).map(|t| record(0, t, 1.0, (t % 7) as f64 * 1.3, (t as f64).sin(), 0.1 * t as f64)).collect();
    let mut csv_text = String::from("ets,node,s,t,omega,e_ch_kwh,e_dis_kwh,soc_kwh,grid_trade_kwh,ces_trade_kwh\n");
    for r in &rows {
        csv_text += &format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.ets, r.node, r.s, r.t, r.omega, r.e_ch_kwh, r.e_dis_kwh, r.soc_kwh, r.grid_trade_kwh, r.ces_trade_kwh
        );
    }
    let a = render_dispatch_svg(&read_dispatch(csv_text.as_bytes()).unwrap(), 1).unwrap();
    let b = render_dispatch_svg(&read_dispatch(csv_text.as_bytes()).unwrap(), 1).unwrap();
    assert_eq!(Sha256::digest(a.as_bytes()), Sha256::digest(b.as_bytes()));
    assert!(a.starts_with("<svg") && a.contains("viewBox=\"0 0 800 420\""));
}

#[test]
fn empty_or_partial_days_are_errors() {
    let rows: Vec<_> = (0..24).map(|t| record(0, t, 1.0, 0.0, 0.0, 0.0)).collect();
    assert!(matches!(render_dispatch_svg(&rows, 1), Err(PlotError::EmptyDay(1))));
    assert!(matches!(render_dispatch_svg(&rows[..20], 0), Err(PlotError::MissingHour { day: 0, hour: 20 })));
    let mut mixed = rows.clone();
    mixed[3].ets = "ETS2".into();
    assert!(matches!(render_dispatch_svg(&mixed, 0), Err(PlotError::MixedSchemes(_))));
}

#[test]
fn axis_ticks_cover_the_data_in_round_steps() {
    let axis = Axis::covering([-3.2, 17.9]);
    assert_eq!(axis.step, 5.0);
    assert_eq!(axis.ticks(), vec![-5.0, 0.0, 5.0, 10.0, 15.0, 20.0]);
    let small = Axis::covering([0.0, 0.37]);
    assert_eq!(small.step, 0.1);
    assert!((small.max - 0.4).abs() < 1e-12);
}
