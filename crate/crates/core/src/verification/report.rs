//! Plain `key: value` rendering of the verification reports.

use std::fmt::Write;

use crate::solver::Region;

use super::comparison::{ComparisonReport, SandwichReport};
use super::estimates::EstimateReport;

/// Reports that flatten to ordered `key: value` pairs.
pub trait KeyValue {
    fn key_values(&self) -> Vec<(String, String)>;

    fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.key_values() {
            // Writing to a String cannot fail.
            let _ = writeln!(out, "{k}: {v}");
        }
        out
    }
}

/// `report_<region>_<eps>.json`.
pub fn report_file_name(region: Region, eps: f64) -> String {
    format!("report_{}_{}.json", region.label(), eps)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".into(), |v| format!("{v:e}"))
}

impl KeyValue for EstimateReport {
    fn key_values(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("region".into(), self.region.to_string()),
            ("eps".into(), self.eps.to_string()),
            ("t0".into(), format!("{:e}", self.t0)),
            ("delta".into(), self.delta.to_string()),
            ("tolerance".into(), format!("{:e}", self.tolerance)),
        ];
        for f in &self.families {
            let p = &f.name;
            kv.push((format!("{p}.measured"), format!("{:e}", f.measured)));
            kv.push((format!("{p}.bound"), opt(f.bound)));
            kv.push((format!("{p}.margin"), opt(f.margin)));
            kv.push((format!("{p}.passed"), f.passed.to_string()));
        }
        let c = &self.constants;
        for (k, v) in [
            ("m1", c.m1),
            ("m2", c.m2),
            ("m3", c.m3),
            ("m4", c.m4),
            ("m5", c.m5),
            ("m6", c.m6),
            ("m7", c.m7),
        ] {
            kv.push((format!("constants.{k}"), format!("{v:e}")));
        }
        kv.push(("passed".into(), self.passed.to_string()));
        kv
    }
}

impl KeyValue for ComparisonReport {
    fn key_values(&self) -> Vec<(String, String)> {
        let mut kv = vec![(
            format!("{}.role", self.name),
            format!("{:?}", self.role).to_lowercase(),
        )];
        for m in self.boundary.iter().chain(std::iter::once(&self.interior)) {
            kv.push((format!("{}.{}", self.name, m.piece), format!("{:e}", m.margin)));
        }
        kv.push((format!("{}.passed", self.name), self.passed.to_string()));
        kv
    }
}

impl KeyValue for SandwichReport {
    fn key_values(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("region".into(), self.region.to_string()),
            ("eps".into(), self.eps.to_string()),
            ("tolerance".into(), format!("{:e}", self.tolerance)),
        ];
        for b in &self.bounds {
            kv.push((format!("{}.margin", b.candidate), format!("{:e}", b.worst_margin)));
        }
        for b in &self.induced {
            kv.push((format!("{}.excess", b.name), format!("{:e}", b.worst_excess)));
        }
        kv.push(("passed".into(), self.passed.to_string()));
        kv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_name_follows_the_layout() {
        assert_eq!(report_file_name(Region::Q1, 0.05), "report_q1_0.05.json");
        assert_eq!(report_file_name(Region::T, 0.025), "report_t_0.025.json");
    }
}
