use std::fmt;

use serde::{Deserialize, Serialize};

/// Reports may be stamped at most this far ahead of the server clock.
pub const MAX_CLOCK_SKEW_SECS: i64 = 24 * 3600;
pub const MAX_UID_LEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeGroup {
    #[serde(rename = "under65")]
    Under65,
    #[serde(rename = "over65")]
    Over65,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 2] = [AgeGroup::Under65, AgeGroup::Over65];

    pub fn as_str(self) -> &'static str {
        match self {
            AgeGroup::Under65 => "under65",
            AgeGroup::Over65 => "over65",
        }
    }
}

/// The minimal triple plus a timestamp and an optional per-install id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveillanceReport {
    pub p_covid: f64,
    pub latitude: f64,
    pub longitude: f64,
    pub age_group: AgeGroup,
    /// UTC seconds.
    pub timestamp: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app_uid: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String")]
pub enum RejectReason {
    ProbabilityOutOfRange,
    BadCoordinates,
    FutureTimestamp,
    BadUid,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::ProbabilityOutOfRange => "probability out of range",
            RejectReason::BadCoordinates => "bad coordinates",
            RejectReason::FutureTimestamp => "future timestamp",
            RejectReason::BadUid => "bad uid",
        })
    }
}

impl From<RejectReason> for String {
    fn from(r: RejectReason) -> String {
        r.to_string()
    }
}

impl SurveillanceReport {
    pub fn validate(&self, now: i64) -> Result<(), RejectReason> {
        if !(0.0..=1.0).contains(&self.p_covid) {
            return Err(RejectReason::ProbabilityOutOfRange);
        }
        if !(-90.0..=90.0).contains(&self.latitude) || !(-180.0..=180.0).contains(&self.longitude) {
            return Err(RejectReason::BadCoordinates);
        }
        if self.timestamp > now.saturating_add(MAX_CLOCK_SKEW_SECS) {
            return Err(RejectReason::FutureTimestamp);
        }
        if let Some(uid) = &self.app_uid {
            if uid.is_empty() || uid.len() > MAX_UID_LEN {
                return Err(RejectReason::BadUid);
            }
        }
        Ok(())
    }
}
