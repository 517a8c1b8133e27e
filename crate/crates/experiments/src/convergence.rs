use std::fmt::Write as _;
use std::io;
use std::path::Path;

pub const CSV_HEADER: &str = "h,dt,err_rho_linf,err_phi_linf,order_rho,order_phi";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub dt: f64,
    pub err_rho_linf: f64,
    pub err_phi_linf: f64,
    /// `log2(err(2h) / err(h))` against the previous row; NaN on the first.
    pub order_rho: f64,
    pub order_phi: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

fn order(coarse: f64, fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (coarse / fine).ln() / (h_coarse / h_fine).ln()
}

fn fmt_real(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

impl ConvergenceTable {
    /// Rows sorted from coarse to fine, with observed orders filled in.
    pub fn from_errors(mut entries: Vec<(f64, f64, f64, f64)>) -> Self {
        entries.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(entries.len());
        for (h, dt, er, ep) in entries {
            let (order_rho, order_phi) = match rows.last() {
                Some(prev) => (order(prev.err_rho_linf, er, prev.h, h), order(prev.err_phi_linf, ep, prev.h, h)),
                None => (f64::NAN, f64::NAN),
            };
            rows.push(ConvergenceRow { h, dt, err_rho_linf: er, err_phi_linf: ep, order_rho, order_phi });
        }
        Self { rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_real(r.h),
                fmt_real(r.dt),
                fmt_real(r.err_rho_linf),
                fmt_real(r.err_phi_linf),
                fmt_real(r.order_rho),
                fmt_real(r.order_phi)
            );
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self, (usize, String)> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            _ => return Err((1, format!("expected header `{CSV_HEADER}`"))),
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| (i + 1, e.to_string()))?;
            if vals.len() != 6 {
                return Err((i + 1, format!("expected 6 columns, got {}", vals.len())));
            }
            rows.push(ConvergenceRow {
                h: vals[0],
                dt: vals[1],
                err_rho_linf: vals[2],
                err_phi_linf: vals[3],
                order_rho: vals[4],
                order_phi: vals[5],
            });
        }
        Ok(Self { rows })
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_csv())
    }

    /// Orders between the two finest resolutions.
    pub fn finest_orders(&self) -> Option<(f64, f64)> {
        let last = self.rows.last()?;
        (self.rows.len() >= 2).then_some((last.order_rho, last.order_phi))
    }
}
