//! CSV rate tables.

use std::fs;
use std::path::Path;

use crate::verification::RateTable;

use super::IoError;

pub const RATE_HEADER: &str = "resolution,err_u_L2,rate,err_u_21,rate,err_T_L2,rate,err_T_21,rate";

pub fn render_rate_table(table: &RateTable) -> String {
    let mut out = String::from(RATE_HEADER);
    out.push('\n');
    for (row, rates) in table.rows.iter().zip(table.rates()) {
        let mut cells = vec![format!("{:.16e}", row.resolution)];
        for (e, r) in row.errors().iter().zip(rates) {
            cells.push(format!("{e:.16e}"));
            cells.push(r.map(|r| format!("{r:.16e}")).unwrap_or_default());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_rate_table(table: &RateTable, path: &Path) -> Result<(), IoError> {
    fs::write(path, render_rate_table(table))
        .map_err(|e| IoError::Io { path: path.display().to_string(), message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verification::RateRow;

    fn row(r: f64, e: f64) -> RateRow {
        RateRow { resolution: r, err_u_l2: e, err_u_21: e, err_t_l2: e, err_t_21: e, failure: None }
    }

    #[test]
    fn one_row_has_no_rates() {
        let text = render_rate_table(&RateTable { rows: vec![row(0.25, 1e-2)] });
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], RATE_HEADER);
        assert_eq!(lines[1].split(',').filter(|c| c.is_empty()).count(), 4);
    }

    #[test]
    fn rate_column_is_log2_ratio() {
        let text = render_rate_table(&RateTable { rows: vec![row(0.5, 4e-2), row(0.25, 1e-2)] });
        let last: Vec<&str> = text.lines().last().unwrap().split(',').collect();
        assert_eq!(last[2].parse::<f64>().unwrap(), 2.0);
    }
}
