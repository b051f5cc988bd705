//! The controller × volume comparison table.

use serde::{Deserialize, Serialize};
use srz_core::{ControllerKind, MetricsReport};

/// Marker placed in the column for the variable-speed-limit controller,
/// which this crate does not implement.
pub const VSL_MARKER: &str = "not implemented";

/// Volumes of the comparison sweep, veh/h.
pub const VOLUMES: [f64; 3] = [1620.0, 1800.0, 1980.0];

/// Published reductions against the baseline, in percent.
pub const REPORTED_FUEL_BAND: (f64, f64) = (19.0, 22.0);
pub const REPORTED_TRAVEL_TIME_BAND: (f64, f64) = (26.0, 30.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub controller: ControllerKind,
    pub volume_vph: f64,
    pub replications: u32,
    pub mean_fuel_per_vehicle: f64,
    pub ci95_fuel_per_vehicle: Option<f64>,
    pub mean_travel_time_s: f64,
    pub ci95_travel_time_s: Option<f64>,
    pub throughput_vph: f64,
    pub ci95_throughput_vph: Option<f64>,
    /// `100 (this - optimal) / this`; empty on the optimal rows.
    pub optimal_fuel_reduction_pct: Option<f64>,
    pub optimal_travel_time_reduction_pct: Option<f64>,
    /// Same convention, so a negative value means optimal moved more vehicles.
    pub optimal_throughput_reduction_pct: Option<f64>,
    pub vsl: String,
}

/// Percentage improvement of `optimal` over `alt`, `(alt - optimal) / alt`.
pub fn improvement_pct(alt: f64, optimal: f64) -> f64 {
    100.0 * (alt - optimal) / alt
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    /// Builds the table from one summarized report per cell.
    ///
    /// Rows are ordered by volume, then controller. Cells without an
    /// optimal counterpart at the same volume get no improvement figures.
    pub fn from_cells(cells: &[(ControllerKind, f64, MetricsReport)]) -> Self {
        let mut sorted: Vec<_> = cells.iter().collect();
        sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| rank(a.0).cmp(&rank(b.0))));
        let optimal_at = |volume: f64| {
            cells
                .iter()
                .find(|(c, v, _)| *c == ControllerKind::Optimal && *v == volume)
                .map(|(_, _, r)| r)
        };
        let rows = sorted
            .into_iter()
            .map(|(controller, volume, r)| {
                let opt = optimal_at(*volume).filter(|_| *controller != ControllerKind::Optimal);
                ComparisonRow {
                    controller: *controller,
                    volume_vph: *volume,
                    replications: r.replications,
                    mean_fuel_per_vehicle: r.mean_fuel_per_vehicle,
                    ci95_fuel_per_vehicle: r.ci95_fuel_per_vehicle,
                    mean_travel_time_s: r.mean_travel_time_s,
                    ci95_travel_time_s: r.ci95_travel_time_s,
                    throughput_vph: r.throughput_vph,
                    ci95_throughput_vph: r.ci95_throughput_vph,
                    optimal_fuel_reduction_pct: opt
                        .map(|o| improvement_pct(r.mean_fuel_per_vehicle, o.mean_fuel_per_vehicle)),
                    optimal_travel_time_reduction_pct: opt
                        .map(|o| improvement_pct(r.mean_travel_time_s, o.mean_travel_time_s)),
                    optimal_throughput_reduction_pct: opt
                        .map(|o| improvement_pct(r.throughput_vph, o.throughput_vph)),
                    vsl: VSL_MARKER.to_string(),
                }
            })
            .collect();
        ComparisonTable { rows }
    }

    pub fn row(&self, controller: ControllerKind, volume: f64) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.controller == controller && r.volume_vph == volume)
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self, csv::Error> {
        let rows = csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<Vec<ComparisonRow>, _>>()?;
        Ok(ComparisonTable { rows })
    }

    /// Plain-text summary for the terminal.
    pub fn summary(&self) -> String {
        let ci = |x: Option<f64>| x.map_or("n/a".to_string(), |c| format!("±{c:.2}"));
        let mut s = String::new();
        s.push_str(&format!(
            "{:<10} {:>7} {:>18} {:>20} {:>20}\n",
            "controller", "veh/h", "fuel/veh", "travel time [s]", "throughput [veh/h]"
        ));
        for r in &self.rows {
            s.push_str(&format!(
                "{:<10} {:>7} {:>9.2} {:>8} {:>11.2} {:>8} {:>11.1} {:>8}\n",
                r.controller.as_str(),
                r.volume_vph,
                r.mean_fuel_per_vehicle,
                ci(r.ci95_fuel_per_vehicle),
                r.mean_travel_time_s,
                ci(r.ci95_travel_time_s),
                r.throughput_vph,
                ci(r.ci95_throughput_vph),
            ));
        }
        s.push_str(&format!(
            "vsl: {VSL_MARKER}\n\noptimal vs alternatives, (alt - optimal) / alt:\n"
        ));
        for r in self
            .rows
            .iter()
            .filter(|r| r.optimal_fuel_reduction_pct.is_some())
        {
            s.push_str(&format!(
                "  vs {:<9} at {:>6} veh/h: fuel {:+.1}%, travel time {:+.1}%, throughput {:+.1}%\n",
                r.controller.as_str(),
                r.volume_vph,
                r.optimal_fuel_reduction_pct.unwrap_or(f64::NAN),
                r.optimal_travel_time_reduction_pct.unwrap_or(f64::NAN),
                r.optimal_throughput_reduction_pct.unwrap_or(f64::NAN),
            ));
        }
        s.push_str(&format!(
            "published reductions vs baseline: fuel {}-{}%, travel time {}-{}%\n",
            REPORTED_FUEL_BAND.0,
            REPORTED_FUEL_BAND.1,
            REPORTED_TRAVEL_TIME_BAND.0,
            REPORTED_TRAVEL_TIME_BAND.1
        ));
        s
    }
}

fn rank(c: ControllerKind) -> usize {
    ControllerKind::ALL
        .iter()
        .position(|&k| k == c)
        .unwrap_or(usize::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(fuel: f64, tt: f64, q: f64, ci: Option<f64>) -> MetricsReport {
        MetricsReport {
            rows: Vec::new(),
            mean_travel_time_s: tt,
            mean_fuel_per_vehicle: fuel,
            throughput_vph: q,
            ci95_travel_time_s: ci,
            ci95_fuel_per_vehicle: ci,
            ci95_throughput_vph: ci,
            observation_window_s: 3600.0,
            replications: 1,
        }
    }

    fn table(ci: Option<f64>) -> ComparisonTable {
        let mut cells = Vec::new();
        for (i, &v) in VOLUMES.iter().enumerate() {
            let k = i as f64;
            cells.push((
                ControllerKind::Optimal,
                v,
                report(70.0 + k, 100.0 + k, 1700.0, ci),
            ));
            cells.push((
                ControllerKind::Baseline,
                v,
                report(0.1 + 80.0 / 3.0, 200.0, 1500.0 + k, ci),
            ));
            cells.push((
                ControllerKind::SpdHarm,
                v,
                report(85.0, 1.0 / 3.0 + 200.0, 1400.0, ci),
            ));
        }
        ComparisonTable::from_cells(&cells)
    }

    #[test]
    fn nine_rows_in_fixed_order() {
        let t = table(Some(1.5));
        assert_eq!(t.rows.len(), 9);
        assert_eq!(t.rows[0].controller, ControllerKind::Baseline);
        assert_eq!(t.rows[2].controller, ControllerKind::Optimal);
        assert_eq!(t.rows[8].volume_vph, 1980.0);
        assert!(t.rows.iter().all(|r| r.vsl == VSL_MARKER));
    }

    #[test]
    fn improvement_convention() {
        assert_eq!(improvement_pct(200.0, 150.0), 25.0);
        let t = table(None);
        let b = t.row(ControllerKind::Baseline, 1800.0).unwrap();
        assert_eq!(
            b.optimal_travel_time_reduction_pct,
            Some(improvement_pct(200.0, 101.0))
        );
        assert!(b.optimal_throughput_reduction_pct.unwrap() < 0.0);
        assert!(t
            .row(ControllerKind::Optimal, 1800.0)
            .unwrap()
            .optimal_fuel_reduction_pct
            .is_none());
    }

    #[test]
    fn csv_round_trips_exactly() {
        for ci in [Some(0.1 + 0.2), None] {
            let t = table(ci);
            let text = t.to_csv().unwrap();
            assert_eq!(ComparisonTable::from_csv(&text).unwrap(), t);
        }
    }

    #[test]
    fn missing_intervals_are_marked() {
        assert!(table(None).summary().contains("n/a"));
        assert!(table(Some(1.0)).summary().contains(VSL_MARKER));
    }
}
