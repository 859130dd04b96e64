//! SVG chart of one day of dispatch: prosumer trades with the grid and with
//! the CES, and the energy stored in the CES.

use std::fmt::Write as _;
use std::io::Read;

use serde::Deserialize;
use thiserror::Error;

/// One row of `dispatch.csv`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct DispatchRecord {
    pub ets: String,
    pub node: usize,
    pub s: usize,
    pub t: usize,
    pub omega: f64,
    pub e_ch_kwh: f64,
    pub e_dis_kwh: f64,
    pub soc_kwh: f64,
    pub grid_trade_kwh: f64,
    pub ces_trade_kwh: f64,
}

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("no dispatch rows for day {0}")]
    EmptyDay(usize),
    #[error("day {day} has no rows for hour {hour}")]
    MissingHour { day: usize, hour: usize },
    #[error("dispatch rows mix schemes {0:?}; select one with --ets")]
    MixedSchemes(Vec<String>),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn read_dispatch<R: Read>(input: R) -> Result<Vec<DispatchRecord>, PlotError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    Ok(rdr.deserialize().collect::<Result<Vec<DispatchRecord>, _>>()?)
}

/// Probability-weighted hourly totals over nodes and scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct DaySeries {
    pub grid: [f64; 24],
    pub ces: [f64; 24],
    pub soc: [f64; 24],
}

pub fn day_series(rows: &[DispatchRecord], day: usize) -> Result<DaySeries, PlotError> {
    let in_day: Vec<&DispatchRecord> = rows.iter().filter(|r| r.t / 24 == day).collect();
    if in_day.is_empty() {
        return Err(PlotError::EmptyDay(day));
    }
    let mut schemes: Vec<String> = in_day.iter().map(|r| r.ets.clone()).collect();
    schemes.sort();
    schemes.dedup();
    if schemes.len() > 1 {
        return Err(PlotError::MixedSchemes(schemes));
    }
    let mut out = DaySeries { grid: [0.0; 24], ces: [0.0; 24], soc: [0.0; 24] };
    let mut seen = [false; 24];
    for r in in_day {
        let h = r.t % 24;
        seen[h] = true;
        out.grid[h] += r.omega * r.grid_trade_kwh;
        out.ces[h] += r.omega * r.ces_trade_kwh;
        out.soc[h] += r.omega * r.soc_kwh;
    }
    if let Some(hour) = seen.iter().position(|s| !s) {
        return Err(PlotError::MissingHour { day, hour });
    }
    Ok(out)
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

pub const SERIES: [(&str, &str, &str); 3] = [
    ("grid", "Grid trade (kWh)", "#1f77b4"),
    ("ces", "CES trade (kWh)", "#ff7f0e"),
    ("soc", "CES energy (kWh)", "#2ca02c"),
];

/// Smallest of 1, 2 or 5 times a power of ten that is at least `raw`.
fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw * (1.0 - 1e-12)).unwrap_or(10.0 * mag)
}

/// Vertical axis covering the data and zero, in whole tick steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Axis {
    pub fn covering(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo < 1e-12 {
            return Axis { min: 0.0, max: 1.0, step: 0.2 };
        }
        let step = nice_step((hi - lo) / 5.0);
        Axis { min: (lo / step).floor() * step, max: (hi / step).ceil() * step, step }
    }

    pub fn ticks(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step).round() as usize;
        (0..=n).map(|k| self.min + k as f64 * self.step).collect()
    }

    fn decimals(&self) -> usize {
        (-self.step.log10().floor()).max(0.0) as usize
    }

    pub fn y(&self, v: f64) -> f64 {
        TOP + (self.max - v) / (self.max - self.min) * (HEIGHT - TOP - BOTTOM)
    }
}

pub fn x(hour: usize) -> f64 {
    LEFT + hour as f64 / 23.0 * (WIDTH - LEFT - RIGHT)
}

/// Renders day `day` of `rows`. Coordinates carry two decimals, so equal
/// input gives byte-identical output.
pub fn render_dispatch_svg(rows: &[DispatchRecord], day: usize) -> Result<String, PlotError> {
    let series = day_series(rows, day)?;
    let data = [&series.grid, &series.ces, &series.soc];
    let axis = Axis::covering(data.iter().flat_map(|d| d.iter().copied()));
    let digits = axis.decimals();
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (TOP, HEIGHT - BOTTOM);

    let mut svg = String::new();
    let w = &mut svg;
    // Writing to a String cannot fail.
    let _ = writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(w, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(w, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">Day {day} dispatch</text>"#, WIDTH / 2.0);

    for tick in axis.ticks() {
        let y = axis.y(tick);
        let _ = writeln!(w, r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#dddddd"/>"##);
        let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{tick:.digits$}</text>"#, x0 - 6.0, y + 4.0);
    }
    for hour in (0..24).step_by(3) {
        let x = x(hour);
        let _ = writeln!(w, r##"<line x1="{x:.2}" y1="{y1:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000000"/>"##, y1 + 5.0);
        let _ = writeln!(w, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{hour}</text>"#, y1 + 20.0);
    }
    let _ = writeln!(w, r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#000000"/>"##, x1 - x0, y1 - y0);
    let zero = axis.y(0.0);
    let _ = writeln!(w, r##"<line x1="{x0:.2}" y1="{zero:.2}" x2="{x1:.2}" y2="{zero:.2}" stroke="#888888" stroke-dasharray="4 3"/>"##);
    let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Hour</text>"#, (x0 + x1) / 2.0, HEIGHT - 12.0);
    let _ = writeln!(w, r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">kWh</text>"#, (y0 + y1) / 2.0, (y0 + y1) / 2.0);

    for (k, ((id, label, colour), values)) in SERIES.iter().zip(data).enumerate() {
        let points: Vec<String> = values.iter().enumerate().map(|(h, v)| format!("{:.2},{:.2}", x(h), axis.y(*v))).collect();
        let _ = writeln!(w, r#"<polyline data-series="{id}" fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#, points.join(" "));
        let lx = x0 + 10.0 + 180.0 * k as f64;
        let _ = writeln!(w, r#"<line x1="{lx:.2}" y1="36" x2="{:.2}" y2="36" stroke="{colour}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(w, r#"<text x="{:.2}" y="40">{label}</text>"#, lx + 26.0);
    }
    let _ = writeln!(w, "</svg>");
    Ok(svg)
}
