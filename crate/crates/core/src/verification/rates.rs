use serde::{Deserialize, Serialize};

/// Errors below this are treated as exact and get no rate.
pub const RATE_FLOOR: f64 = 1e-12;

/// `log2(coarse / fine)`, or `None` when either error is at solver scale.
pub fn observed_rate(coarse: f64, fine: f64) -> Option<f64> {
    if coarse.is_finite() && fine.is_finite() && coarse > RATE_FLOOR && fine > RATE_FLOOR {
        Some((coarse / fine).log2())
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    /// `dt` for temporal studies, `h` for spatial ones.
    pub resolution: f64,
    pub err_u_l2: f64,
    pub err_u_21: f64,
    pub err_t_l2: f64,
    pub err_t_21: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl RateRow {
    pub fn errors(&self) -> [f64; 4] {
        [self.err_u_l2, self.err_u_21, self.err_t_l2, self.err_t_21]
    }

    pub fn failed(resolution: f64, message: String) -> RateRow {
        RateRow {
            resolution,
            err_u_l2: f64::NAN,
            err_u_21: f64::NAN,
            err_t_l2: f64::NAN,
            err_t_21: f64::NAN,
            failure: Some(message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

pub const NORM_NAMES: [&str; 4] = ["err_u_L2", "err_u_21", "err_T_L2", "err_T_21"];

impl RateTable {
    /// Rates against the previous row, `None` on the first row.
    pub fn rates(&self) -> Vec<[Option<f64>; 4]> {
        let mut out = vec![[None; 4]];
        for w in self.rows.windows(2) {
            let (c, f) = (w[0].errors(), w[1].errors());
            out.push(std::array::from_fn(|i| observed_rate(c[i], f[i])));
        }
        out.truncate(self.rows.len());
        out
    }

    /// Rates of the finest pair.
    pub fn last_rates(&self) -> Option<[Option<f64>; 4]> {
        if self.rows.len() < 2 {
            return None;
        }
        self.rates().last().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(r: f64, e: f64) -> RateRow {
        RateRow { resolution: r, err_u_l2: e, err_u_21: e, err_t_l2: e, err_t_21: e, failure: None }
    }

    #[test]
    fn log2_arithmetic() {
        assert_eq!(observed_rate(4e-2, 1e-2), Some(2.0));
        assert_eq!(observed_rate(1e-15, 1e-16), None);
        let t = RateTable { rows: vec![row(0.5, 4e-2), row(0.25, 1e-2)] };
        let r = t.rates();
        assert_eq!(r[0], [None; 4]);
        assert_eq!(r[1], [Some(2.0); 4]);
        assert!(RateTable { rows: vec![row(0.5, 1.0)] }.last_rates().is_none());
    }
}
