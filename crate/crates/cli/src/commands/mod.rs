pub mod attack;
pub mod certify;
pub mod landscape;
pub mod toy;
pub mod train;

use crate::args::Overrides;
use crate::config_error;
use crate::CliResult;

pub(crate) fn overrides(result: Result<Overrides, String>) -> CliResult<Overrides> {
    result.map_err(config_error)
}

/// `metric,value` rows.
pub(crate) fn key_value_csv(rows: &[(String, String)]) -> String {
    let mut s = String::from("metric,value\n");
    for (k, v) in rows {
        s.push_str(&format!("{k},{v}\n"));
    }
    s
}
