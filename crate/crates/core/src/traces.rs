//! Per-prosumer hourly mean load, reactive load and PV energy.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{invalid, CesError, Result};

/// Dense `|U| x |T|` arrays of expected energies per interval (kWh, kvarh).
#[derive(Debug, Clone, PartialEq)]
pub struct ProsumerTraceSet {
    pub prosumer_ids: Vec<String>,
    pub horizon_hours: usize,
    pub delta_t: f64,
    pub mu_load: Vec<Vec<f64>>,
    pub mu_reactive: Vec<Vec<f64>>,
    pub mu_pv: Vec<Vec<f64>>,
}

impl ProsumerTraceSet {
    pub fn zeros(ids: Vec<String>, horizon: usize) -> Self {
        let n = ids.len();
        ProsumerTraceSet {
            prosumer_ids: ids,
            horizon_hours: horizon,
            delta_t: 1.0,
            mu_load: vec![vec![0.0; horizon]; n],
            mu_reactive: vec![vec![0.0; horizon]; n],
            mu_pv: vec![vec![0.0; horizon]; n],
        }
    }

    pub fn num_prosumers(&self) -> usize {
        self.prosumer_ids.len()
    }

    pub fn num_days(&self) -> usize {
        self.horizon_hours / 24
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.prosumer_ids.iter().position(|p| p == id)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.prosumer_ids.len();
        let t = self.horizon_hours;
        if t == 0 || t % 24 != 0 {
            return Err(invalid(format!("horizon of {t} hours is not a positive multiple of 24")));
        }
        if !(self.delta_t > 0.0) {
            return Err(invalid("delta_t must be positive"));
        }
        for (name, arr) in [("load", &self.mu_load), ("reactive", &self.mu_reactive), ("pv", &self.mu_pv)] {
            if arr.len() != n || arr.iter().any(|r| r.len() != t) {
                return Err(invalid(format!("{name} array is not {n} x {t}")));
            }
            if arr.iter().flatten().any(|v| !v.is_finite()) {
                return Err(invalid(format!("{name} contains a non-finite value")));
            }
        }
        for (u, id) in self.prosumer_ids.iter().enumerate() {
            if let Some(h) = (0..t).find(|&h| self.mu_load[u][h] < 0.0 || self.mu_pv[u][h] < 0.0) {
                return Err(invalid(format!("prosumer {id} has negative load or PV at t={h}")));
            }
        }
        Ok(())
    }

    /// Writes `prosumer,t,load_kwh,reactive_kvarh,pv_kwh` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["prosumer", "t", "load_kwh", "reactive_kvarh", "pv_kwh"])?;
        for (u, id) in self.prosumer_ids.iter().enumerate() {
            for t in 0..self.horizon_hours {
                w.write_record([
                    id.clone(),
                    t.to_string(),
                    self.mu_load[u][t].to_string(),
                    self.mu_reactive[u][t].to_string(),
                    self.mu_pv[u][t].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a trace CSV. `horizon` fixes `|T|`; otherwise it is the largest `t`
/// plus one. Prosumers keep their order of first appearance.
pub fn read_traces<R: Read>(input: R, source: &Path, horizon: Option<usize>) -> Result<ProsumerTraceSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let expected = ["prosumer", "t", "load_kwh", "reactive_kvarh", "pv_kwh"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(CesError::Parse {
            path: source.to_path_buf(),
            line: 1,
            msg: format!("expected header `{}`", expected.join(",")),
        });
    }
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut cells: Vec<(usize, usize, [f64; 3], u64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let perr = |msg: String| CesError::Parse { path: source.to_path_buf(), line, msg };
        if rec.len() != 5 {
            return Err(perr(format!("expected 5 fields, found {}", rec.len())));
        }
        let t: usize = rec[1].parse().map_err(|_| perr(format!("bad hour `{}`", &rec[1])))?;
        let mut vals = [0.0; 3];
        for k in 0..3 {
            vals[k] = rec[2 + k].parse().map_err(|_| perr(format!("bad number `{}`", &rec[2 + k])))?;
        }
        let u = *index.entry(rec[0].to_string()).or_insert_with(|| {
            ids.push(rec[0].to_string());
            ids.len() - 1
        });
        cells.push((u, t, vals, line));
    }
    if ids.is_empty() {
        return Err(invalid(format!("{} contains no trace rows", source.display())));
    }
    let horizon = match horizon {
        Some(h) => h,
        None => cells.iter().map(|c| c.1).max().unwrap() + 1,
    };
    let mut set = ProsumerTraceSet::zeros(ids, horizon);
    let mut seen = vec![vec![false; horizon]; set.num_prosumers()];
    for (u, t, [l, q, pv], line) in cells {
        let perr = |msg: String| CesError::Parse { path: source.to_path_buf(), line, msg };
        if t >= horizon {
            return Err(perr(format!("hour {t} is outside the horizon 0..{}", horizon - 1)));
        }
        if seen[u][t] {
            return Err(perr(format!("duplicate row for {} at t={t}", set.prosumer_ids[u])));
        }
        if l < 0.0 || pv < 0.0 {
            return Err(invalid(format!("line {line}: negative load or PV")));
        }
        seen[u][t] = true;
        set.mu_load[u][t] = l;
        set.mu_reactive[u][t] = q;
        set.mu_pv[u][t] = pv;
    }
    for (u, row) in seen.iter().enumerate() {
        if let Some(t) = row.iter().position(|s| !s) {
            return Err(invalid(format!("missing trace for {} at t={t}", set.prosumer_ids[u])));
        }
    }
    set.validate()?;
    Ok(set)
}

pub fn load_traces(path: &Path, horizon: Option<usize>) -> Result<ProsumerTraceSet> {
    let file = std::fs::File::open(path)?;
    read_traces(std::io::BufReader::new(file), path, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, horizon: Option<usize>) -> Result<ProsumerTraceSet> {
        read_traces(text.as_bytes(), Path::new("t.csv"), horizon)
    }

    fn rows(ids: &[&str], f: impl Fn(&str, usize) -> String) -> String {
        let mut s = String::from("prosumer,t,load_kwh,reactive_kvarh,pv_kwh\n");
        for id in ids {
            for t in 0..24 {
                s.push_str(&f(id, t));
                s.push('\n');
            }
        }
        s
    }

    #[test]
    fn zero_traces_load() {
        let set = parse(&rows(&["a", "b"], |id, t| format!("{id},{t},0,0,0")), None).unwrap();
        assert_eq!(set.num_prosumers(), 2);
        assert!(set.mu_load.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn fields_map_directly() {
        let text = rows(&["p1"], |id, t| if t == 3 { format!("{id},3,1.5,0.2,0.0") } else { format!("{id},{t},0,0,0") });
        let set = parse(&text, None).unwrap();
        assert_eq!(set.mu_load[0][3], 1.5);
        assert_eq!(set.mu_reactive[0][3], 0.2);
    }

    #[test]
    fn hour_past_horizon_is_rejected() {
        let mut text = rows(&["p1"], |id, t| format!("{id},{t},0,0,0"));
        text.push_str("p1,24,0,0,0\n");
        let err = parse(&text, Some(24)).unwrap_err();
        assert!(matches!(err, CesError::Parse { line: 26, .. }), "{err}");
    }

    #[test]
    fn missing_cell_is_an_error() {
        let text = rows(&["p1"], |id, t| if t == 5 { String::new() } else { format!("{id},{t},0,0,0") });
        assert!(parse(&text, Some(24)).unwrap_err().to_string().contains("t=5"));
    }

    #[test]
    fn negative_pv_is_rejected() {
        let text = rows(&["p1"], |id, t| format!("{id},{t},1,0,{}", if t == 2 { -1 } else { 0 }));
        assert!(matches!(parse(&text, None), Err(CesError::Validation(_))));
    }

    #[test]
    fn malformed_number_reports_line() {
        let text = rows(&["p1"], |id, t| if t == 1 { format!("{id},1,x,0,0") } else { format!("{id},{t},0,0,0") });
        assert!(matches!(parse(&text, None), Err(CesError::Parse { line: 3, .. })));
    }
}
