//! Grid aggregation, outbreak flags, heatmap export and narrowcast
//! selection. Everything here is a pure function of a set of reports, so
//! results do not depend on ingestion order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::report::{AgeGroup, SurveillanceReport};
use crate::SurveillanceError;

pub const DEFAULT_CELL_DEG: f64 = 0.01;
pub const DEFAULT_TAU: f64 = 0.5;
pub const DEFAULT_MIN_REPORTS: usize = 5;
pub const DEFAULT_DELTA: f64 = 0.2;

/// Slack so that coordinates sitting on a cell edge (51.5 at 0.01°) are not
/// pushed into the cell below by floating-point division.
const EDGE_TOLERANCE: f64 = 1e-9;

/// Half-open time window `[start, end)` in UTC seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub start: i64,
    pub end: i64,
}

impl Window {
    pub fn new(start: i64, end: i64) -> Result<Self, SurveillanceError> {
        if start < end {
            Ok(Window { start, end })
        } else {
            Err(SurveillanceError::InvalidWindow(format!("start {start} must precede end {end}")))
        }
    }

    /// Everything representable.
    pub fn all() -> Self {
        Window { start: i64::MIN, end: i64::MAX }
    }

    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t < self.end
    }

    pub fn len(&self) -> i64 {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    /// The window of the same length ending where this one starts.
    pub fn previous(&self) -> Result<Self, SurveillanceError> {
        let start = self
            .start
            .checked_sub(self.len())
            .ok_or_else(|| SurveillanceError::InvalidWindow("no room for a previous window".into()))?;
        Window::new(start, self.start)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub cell_deg: f64,
}

impl GridSpec {
    pub fn new(cell_deg: f64) -> Result<Self, SurveillanceError> {
        if cell_deg > 0.0 && cell_deg <= 90.0 && cell_deg.is_finite() {
            Ok(GridSpec { cell_deg })
        } else {
            Err(SurveillanceError::InvalidRequest(format!("cell size {cell_deg} must lie in (0, 90]")))
        }
    }

    pub fn cell_of(&self, latitude: f64, longitude: f64) -> CellId {
        let index = |x: f64| (x / self.cell_deg + EDGE_TOLERANCE).floor() as i64;
        CellId { row: index(latitude), col: index(longitude) }
    }

    /// `[min_lon, min_lat, max_lon, max_lat]`.
    pub fn bounds(&self, cell: CellId) -> [f64; 4] {
        let c = self.cell_deg;
        [cell.col as f64 * c, cell.row as f64 * c, (cell.col + 1) as f64 * c, (cell.row + 1) as f64 * c]
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { cell_deg: DEFAULT_CELL_DEG }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub row: i64,
    pub col: i64,
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.row, self.col)
    }
}

impl std::str::FromStr for CellId {
    type Err = SurveillanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SurveillanceError::InvalidRequest(format!("cell id {s:?} is not row:col"));
        let (r, c) = s.split_once(':').ok_or_else(bad)?;
        Ok(CellId { row: r.trim().parse().map_err(|_| bad())?, col: c.trim().parse().map_err(|_| bad())? })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskStats {
    pub count: usize,
    /// `None` when `count` is zero.
    pub mean_p: Option<f64>,
    pub high_risk_fraction: Option<f64>,
}

impl RiskStats {
    /// Order-independent statistics: values are sorted before summing.
    fn from_values(mut values: Vec<f64>, tau: f64) -> Self {
        if values.is_empty() {
            return RiskStats { count: 0, mean_p: None, high_risk_fraction: None };
        }
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let mean = (values.iter().sum::<f64>() / n as f64).clamp(values[0], values[n - 1]);
        let high = values.iter().filter(|&&p| p >= tau).count();
        RiskStats { count: n, mean_p: Some(mean), high_risk_fraction: Some(high as f64 / n as f64) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCellAggregate {
    pub cell: CellId,
    pub bounds: [f64; 4],
    pub window: Window,
    pub count: usize,
    pub mean_p: f64,
    pub high_risk_fraction: f64,
    pub by_age: BTreeMap<AgeGroup, RiskStats>,
}

/// Per-cell statistics over reports in `window`, sorted by cell id. Cells
/// without reports are left out.
pub fn aggregate_grid<'a>(
    reports: impl IntoIterator<Item = &'a SurveillanceReport>,
    window: Window,
    grid: GridSpec,
    tau: f64,
) -> Vec<GridCellAggregate> {
    let mut cells: BTreeMap<CellId, BTreeMap<AgeGroup, Vec<f64>>> = BTreeMap::new();
    for r in reports.into_iter().filter(|r| window.contains(r.timestamp)) {
        cells
            .entry(grid.cell_of(r.latitude, r.longitude))
            .or_default()
            .entry(r.age_group)
            .or_default()
            .push(r.p_covid);
    }
    cells
        .into_iter()
        .map(|(cell, by_age)| {
            let all: Vec<f64> = by_age.values().flatten().copied().collect();
            let total = RiskStats::from_values(all, tau);
            let by_age = AgeGroup::ALL
                .iter()
                .map(|g| (*g, RiskStats::from_values(by_age.get(g).cloned().unwrap_or_default(), tau)))
                .collect();
            GridCellAggregate {
                cell,
                bounds: grid.bounds(cell),
                window,
                count: total.count,
                mean_p: total.mean_p.expect("non-empty cell"),
                high_risk_fraction: total.high_risk_fraction.expect("non-empty cell"),
                by_age,
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutbreakRule {
    pub min_reports: usize,
    /// Required rise of the cell mean over its previous-window mean.
    pub delta: f64,
}

impl Default for OutbreakRule {
    fn default() -> Self {
        OutbreakRule { min_reports: DEFAULT_MIN_REPORTS, delta: DEFAULT_DELTA }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutbreakFlag {
    pub cell: CellId,
    pub window: Window,
    pub count: usize,
    pub mean_p: f64,
    /// Mean of the same cell over the previous window, 0 if it had no reports.
    pub baseline_mean_p: f64,
    pub rule: OutbreakRule,
}

/// Cells in `current` with at least `min_reports` reports whose mean risk
/// rose by at least `delta` over the same cell in `previous`.
pub fn detect_outbreaks<'a>(
    reports: impl IntoIterator<Item = &'a SurveillanceReport> + Clone,
    current: Window,
    previous: Window,
    grid: GridSpec,
    rule: OutbreakRule,
) -> Result<Vec<OutbreakFlag>, SurveillanceError> {
    if previous.end != current.start || previous.len() != current.len() || current.is_empty() {
        return Err(SurveillanceError::InvalidWindow(
            "previous window must directly precede the current one and have the same length".into(),
        ));
    }
    let baseline: BTreeMap<CellId, f64> = aggregate_grid(reports.clone(), previous, grid, 1.0)
        .into_iter()
        .map(|a| (a.cell, a.mean_p))
        .collect();
    Ok(aggregate_grid(reports, current, grid, 1.0)
        .into_iter()
        .filter_map(|a| {
            let base = baseline.get(&a.cell).copied().unwrap_or(0.0);
            (a.count >= rule.min_reports && a.mean_p >= base + rule.delta).then_some(OutbreakFlag {
                cell: a.cell,
                window: current,
                count: a.count,
                mean_p: a.mean_p,
                baseline_mean_p: base,
                rule,
            })
        })
        .collect())
}

#[derive(Serialize)]
struct FeatureCollection<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    features: Vec<Feature<'a>>,
}

#[derive(Serialize)]
struct Feature<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    id: String,
    geometry: Polygon,
    properties: &'a GridCellAggregate,
}

#[derive(Serialize)]
struct Polygon {
    #[serde(rename = "type")]
    kind: &'static str,
    coordinates: [[[f64; 2]; 5]; 1],
}

/// GeoJSON FeatureCollection with one square per aggregate, in the order
/// given (cell order for output of [`aggregate_grid`]).
pub fn export_heatmap(aggregates: &[GridCellAggregate]) -> Vec<u8> {
    let features = aggregates
        .iter()
        .map(|a| {
            let [x0, y0, x1, y1] = a.bounds;
            Feature {
                kind: "Feature",
                id: a.cell.to_string(),
                geometry: Polygon { kind: "Polygon", coordinates: [[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]] },
                properties: a,
            }
        })
        .collect();
    serde_json::to_vec(&FeatureCollection { kind: "FeatureCollection", features }).expect("plain data serializes")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NarrowcastSelection {
    pub cells: Vec<CellId>,
    pub window: Window,
    pub app_uids: Vec<String>,
}

/// Ids of app installs that reported from any of `cells` during `window`.
pub fn select_narrowcast<'a>(
    reports: impl IntoIterator<Item = &'a SurveillanceReport>,
    cells: &[CellId],
    window: Window,
    grid: GridSpec,
) -> Result<NarrowcastSelection, SurveillanceError> {
    if cells.is_empty() {
        return Err(SurveillanceError::InvalidRequest("no target cells".into()));
    }
    if window.is_empty() {
        return Err(SurveillanceError::InvalidWindow("empty window".into()));
    }
    let targets: BTreeSet<CellId> = cells.iter().copied().collect();
    let uids: BTreeSet<String> = reports
        .into_iter()
        .filter(|r| window.contains(r.timestamp) && targets.contains(&grid.cell_of(r.latitude, r.longitude)))
        .filter_map(|r| r.app_uid.clone())
        .collect();
    Ok(NarrowcastSelection { cells: targets.into_iter().collect(), window, app_uids: uids.into_iter().collect() })
}
