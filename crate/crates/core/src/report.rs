//! Sweep CSV and the per-figure data files derived from it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluation::SweepResult;
use crate::forgery::Strategy;

pub const SIGNIFICANT_DIGITS: usize = 12;

const LEADING: [&str; 6] = [
    "strategy",
    "rho",
    "mean_initial_risk_bits",
    "mean_final_risk_bits",
    "mean_risk_reduction",
    "frac_users_risk_increased",
];
const TRAILING: [&str; 2] = ["num_users_evaluated", "num_infinite_risk"];

pub const RISK_FILE: &str = "risk_vs_rho.csv";
pub const UTILITY_FILE: &str = "utility_vs_rho.csv";
pub const INCREASE_FILE: &str = "risk_increase_vs_rho.csv";

/// Formats with 12 significant digits in plain decimal notation, trailing
/// zeros removed. Non-finite values print as `inf`, `-inf` and `nan`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();

    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if exp < 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(&digits);
    } else {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            out.push_str(&digits);
            out.extend(std::iter::repeat_n('0', int_len - digits.len()));
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    if out.contains('.') {
        while out.ends_with('0') {
            out.pop();
        }
        if out.ends_with('.') {
            out.pop();
        }
    }
    out
}

fn parse_float(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        _ => s.parse().ok(),
    }
}

pub fn sweep_header(top_v: &[usize]) -> Vec<String> {
    LEADING
        .iter()
        .map(|s| s.to_string())
        .chain(top_v.iter().map(|v| format!("p_at_{}", v)))
        .chain(TRAILING.iter().map(|s| s.to_string()))
        .collect()
}

pub fn write_sweep_csv<W: Write>(mut out: W, results: &[SweepResult], top_v: &[usize]) -> std::io::Result<()> {
    writeln!(out, "{}", sweep_header(top_v).join(","))?;
    for r in results {
        let mut row = vec![
            r.strategy.to_string(),
            format_float(r.rho),
            format_float(r.mean_initial_risk),
            format_float(r.mean_final_risk),
            format_float(r.mean_risk_reduction),
            format_float(r.frac_users_risk_increased),
        ];
        for v in top_v {
            row.push(format_float(r.p_at(*v).unwrap_or(f64::NAN)));
        }
        row.push(r.num_users_evaluated.to_string());
        row.push(r.num_infinite_risk.to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Parses a sweep CSV back into results. The header must follow the sweep
/// schema, with any number of `p_at_V` columns.
pub fn parse_sweep_csv(text: &str, origin: &Path) -> Result<(Vec<SweepResult>, Vec<usize>)> {
    let schema = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| schema(1, "empty sweep file".into()))?;
    let cols: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    let n = cols.len();
    if n < LEADING.len() + TRAILING.len() || cols[..LEADING.len()] != LEADING || cols[n - TRAILING.len()..] != TRAILING
    {
        return Err(schema(
            1,
            format!("header {:?} does not match the sweep schema", header),
        ));
    }
    let top_v: Vec<usize> = cols[LEADING.len()..n - TRAILING.len()]
        .iter()
        .map(|c| c.strip_prefix("p_at_").and_then(|v| v.parse().ok()))
        .collect::<Option<_>>()
        .ok_or_else(|| schema(1, "precision columns must be named p_at_<V>".into()))?;

    let mut results = Vec::new();
    for (k, line) in lines {
        let line_no = k + 1;
        let fields: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
        if fields.len() != n {
            return Err(schema(
                line_no,
                format!("expected {} fields, found {}", n, fields.len()),
            ));
        }
        let num =
            |i: usize| parse_float(fields[i]).ok_or_else(|| schema(line_no, format!("invalid number {:?}", fields[i])));
        let count = |i: usize| {
            fields[i]
                .parse::<usize>()
                .map_err(|_| schema(line_no, format!("invalid count {:?}", fields[i])))
        };
        let strategy: Strategy = fields[0]
            .parse()
            .map_err(|_| schema(line_no, format!("unknown strategy {:?}", fields[0])))?;
        let mut precision = Vec::with_capacity(top_v.len());
        for (j, v) in top_v.iter().enumerate() {
            precision.push((*v, num(LEADING.len() + j)?));
        }
        results.push(SweepResult {
            strategy,
            rho: num(1)?,
            mean_initial_risk: num(2)?,
            mean_final_risk: num(3)?,
            mean_risk_reduction: num(4)?,
            frac_users_risk_increased: num(5)?,
            precision,
            num_users_evaluated: count(n - 2)?,
            num_infinite_risk: count(n - 1)?,
        });
    }
    if results.is_empty() {
        return Err(schema(2, "sweep file has no data rows".into()));
    }
    Ok((results, top_v))
}

pub fn read_sweep_csv(path: impl AsRef<Path>) -> Result<(Vec<SweepResult>, Vec<usize>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sweep_csv(&text, path)
}

/// Writes the three figure-family files (risk, utility, risk increase) into
/// `dir`, one row per `(strategy, rho)`. Returns the written paths.
pub fn write_figure_data(dir: impl AsRef<Path>, results: &[SweepResult], top_v: &[usize]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut risk = String::from(
        "strategy,rho,mean_initial_risk_bits,mean_final_risk_bits,mean_risk_reduction,num_infinite_risk\n",
    );
    let mut utility = String::from("strategy,rho");
    for v in top_v {
        utility.push_str(&format!(",p_at_{}", v));
    }
    utility.push('\n');
    let mut increase = String::from("strategy,rho,frac_users_risk_increased\n");

    for r in results {
        let key = format!("{},{}", r.strategy, format_float(r.rho));
        risk.push_str(&format!(
            "{},{},{},{},{}\n",
            key,
            format_float(r.mean_initial_risk),
            format_float(r.mean_final_risk),
            format_float(r.mean_risk_reduction),
            r.num_infinite_risk
        ));
        utility.push_str(&key);
        for v in top_v {
            utility.push(',');
            utility.push_str(&format_float(r.p_at(*v).unwrap_or(f64::NAN)));
        }
        utility.push('\n');
        increase.push_str(&format!("{},{}\n", key, format_float(r.frac_users_risk_increased)));
    }

    let mut written = Vec::new();
    for (name, body) in [(RISK_FILE, risk), (UTILITY_FILE, utility), (INCREASE_FILE, increase)] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
