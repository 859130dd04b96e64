//! Grid time-of-use price and the CES provider price of each trading scheme.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{invalid, CesError, Result};

/// How the CES provider price follows the grid price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ets {
    /// Daily mean of the grid price.
    AvgPrice,
    /// `δ · λ_G(t)`.
    Scaled(f64),
}

impl Ets {
    pub fn validate(self) -> Result<()> {
        match self {
            Ets::AvgPrice => Ok(()),
            Ets::Scaled(d) if !(d > 0.0) || !d.is_finite() => Err(invalid(format!("scaling factor {d} must be positive"))),
            Ets::Scaled(d) if d == 1.0 => Err(invalid("scaling factor 1 makes the CES price equal the grid price")),
            Ets::Scaled(_) => Ok(()),
        }
    }

    /// Short label used in reports: `ETS1` for the average price, `ETS2`
    /// above the grid price, `ETS3` below it.
    pub fn label(self) -> &'static str {
        match self {
            Ets::AvgPrice => "ETS1",
            Ets::Scaled(d) if d > 1.0 => "ETS2",
            Ets::Scaled(_) => "ETS3",
        }
    }
}

impl fmt::Display for Ets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ets::AvgPrice => f.write_str("avg"),
            Ets::Scaled(d) => write!(f, "scaled:{d}"),
        }
    }
}

impl FromStr for Ets {
    type Err = CesError;

    /// Accepts `avg` or `scaled:<delta>`.
    fn from_str(s: &str) -> Result<Self> {
        let ets = match s.trim() {
            "avg" => Ets::AvgPrice,
            other => {
                let d = other
                    .strip_prefix("scaled:")
                    .and_then(|d| d.parse::<f64>().ok())
                    .ok_or_else(|| invalid(format!("unknown trading scheme `{s}`; expected `avg` or `scaled:<delta>`")))?;
                Ets::Scaled(d)
            }
        };
        ets.validate()?;
        Ok(ets)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TariffSchedule {
    pub lambda_g: Vec<f64>,
    pub scheme: Ets,
    pub lambda_c: Vec<f64>,
    /// Mean grid price of each 24 h day.
    pub lambda_g_avg: Vec<f64>,
}

pub fn derive_ces_price(lambda_g: &[f64], scheme: Ets) -> Result<TariffSchedule> {
    scheme.validate()?;
    if lambda_g.is_empty() || lambda_g.len() % 24 != 0 {
        return Err(invalid(format!("price series of length {} is not a positive multiple of 24", lambda_g.len())));
    }
    if let Some(t) = lambda_g.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(invalid(format!("grid price at t={t} must be positive")));
    }
    let lambda_g_avg: Vec<f64> = lambda_g.chunks(24).map(|d| d.iter().sum::<f64>() / 24.0).collect();
    let lambda_c = match scheme {
        Ets::AvgPrice => (0..lambda_g.len()).map(|t| lambda_g_avg[t / 24]).collect(),
        Ets::Scaled(d) => lambda_g.iter().map(|v| d * v).collect(),
    };
    Ok(TariffSchedule { lambda_g: lambda_g.to_vec(), scheme, lambda_c, lambda_g_avg })
}

/// Reads `t,lambda_g_aud_per_kwh`. A 24-row profile is repeated to fill a
/// longer horizon; otherwise the file must cover the horizon exactly.
pub fn load_tariff(path: &Path, horizon: usize) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let perr = |line: u64, msg: String| CesError::Parse { path: path.to_path_buf(), line, msg };
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["t", "lambda_g_aud_per_kwh"] {
        return Err(perr(1, "expected header `t,lambda_g_aud_per_kwh`".into()));
    }
    let mut prices = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(perr(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let t: usize = rec[0].parse().map_err(|_| perr(line, format!("bad hour `{}`", &rec[0])))?;
        if t != prices.len() {
            return Err(perr(line, format!("expected t={}, found t={t}", prices.len())));
        }
        prices.push(rec[1].parse::<f64>().map_err(|_| perr(line, format!("bad price `{}`", &rec[1])))?);
    }
    if prices.len() == 24 && horizon % 24 == 0 {
        return Ok(prices.iter().copied().cycle().take(horizon).collect());
    }
    if prices.len() != horizon {
        return Err(invalid(format!("tariff has {} hours, horizon is {horizon}", prices.len())));
    }
    Ok(prices)
}

pub fn write_tariff_csv<W: std::io::Write>(lambda_g: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "lambda_g_aud_per_kwh"])?;
    for (t, v) in lambda_g.iter().enumerate() {
        w.write_record([t.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
