//! Text output: numbers, CSV tables and matrix rows.

use adiascope::{ComplexMatrix, ModulationTrace, SweepResult};

/// Significant digits of every number written to a table.
pub const SIG_DIGITS: usize = 12;

/// Formats `x` like C's `%.{digits}g`.
pub fn format_g(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exponent) = sci.split_once('e').expect("exponent marker");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if exponent < -4 || exponent >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exponent.abs())
    } else {
        let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn num(x: f64) -> String {
    format_g(x, SIG_DIGITS)
}

/// Provenance line heading every output file.
pub fn header_line(config_hash: &str, seed: u64) -> String {
    format!(
        "# adiascope {} config_hash={config_hash} seed={seed}\n",
        env!("CARGO_PKG_VERSION")
    )
}

pub const SWEEP_COLUMNS: &str = "sweep_var,kind,delta_u_err,residual,n_pulses_or_nprime,theta,seed";

pub fn sweep_csv(result: &SweepResult, config_hash: &str) -> String {
    let mut out = header_line(config_hash, result.seed);
    out.push_str(SWEEP_COLUMNS);
    out.push('\n');
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            num(r.sweep_var),
            r.kind,
            num(r.delta_u_err),
            num(r.residual),
            num(r.n_pulses_or_nprime),
            num(r.theta),
            result.seed
        ));
    }
    out
}

/// Column names for a row-major matrix of dimension `dim`.
pub fn matrix_columns(dim: usize) -> String {
    let mut cols = vec!["factor".to_string()];
    for i in 0..dim {
        for j in 0..dim {
            cols.push(format!("m{i}{j}_re"));
            cols.push(format!("m{i}{j}_im"));
        }
    }
    cols.join(",")
}

/// One CSV row: the name followed by the entries row-major as `re,im` pairs.
pub fn matrix_row(name: &str, m: &ComplexMatrix) -> String {
    let mut fields = vec![name.to_string()];
    for i in 0..m.dim() {
        for j in 0..m.dim() {
            fields.push(num(m[(i, j)].re));
            fields.push(num(m[(i, j)].im));
        }
    }
    fields.join(",")
}

pub fn modulation_csv(trace: &ModulationTrace, config_hash: &str, seed: u64) -> String {
    let mut out = header_line(config_hash, seed);
    out.push_str(&format!(
        "# labels={},{} window={},{}\n",
        trace.labels.0,
        trace.labels.1,
        num(trace.window.0),
        num(trace.window.1)
    ));
    out.push_str("x,s,f_re,f_im\n");
    for p in &trace.samples {
        out.push_str(&format!("{},{},{},{}\n", num(p.x), num(p.s), num(p.value.re), num(p.value.im)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_c_general_format() {
        let cases = [
            (1.0, "1"),
            (0.1, "0.1"),
            (-2.5, "-2.5"),
            (1e-5, "1e-05"),
            (1.5e-4, "0.00015"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (std::f64::consts::PI, "3.14159265359"),
            (0.999999999999951, "0.999999999999951"),
            (0.9999999999999995, "1"),
            (6.95e-4, "0.000695"),
            (2.0e300, "2e+300"),
        ];
        for (x, expected) in cases {
            let digits = if x == 0.999999999999951 { 15 } else { 12 };
            assert_eq!(format_g(x, digits), expected, "{x}");
        }
    }

    #[test]
    fn rounding_carries_into_exponent() {
        assert_eq!(format_g(9.9999999999999e-5, 12), "0.0001");
        assert_eq!(format_g(999999999999.9, 12), "1e+12");
    }

    #[test]
    fn matrix_row_is_row_major_pairs() {
        let m = ComplexMatrix::identity(2);
        assert_eq!(matrix_columns(2), "factor,m00_re,m00_im,m01_re,m01_im,m10_re,m10_im,m11_re,m11_im");
        assert_eq!(matrix_row("u", &m), "u,1,0,0,0,0,0,1,0");
    }
}
