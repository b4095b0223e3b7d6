//! CSV, summary and SVG emitters for simulation logs.

use std::fmt::Write as _;

use crate::simulation::{LogRow, SimLog, TrackingMetrics};

/// Column order of `log.csv`.
pub const CSV_COLUMNS: [&str; 47] = [
    "t",
    "p_x",
    "p_y",
    "p_z",
    "q_w",
    "q_x",
    "q_y",
    "q_z",
    "v_x",
    "v_y",
    "v_z",
    "omega_x",
    "omega_y",
    "omega_z",
    "nom_p_x",
    "nom_p_y",
    "nom_p_z",
    "nom_q_w",
    "nom_q_x",
    "nom_q_y",
    "nom_q_z",
    "nom_v_x",
    "nom_v_y",
    "nom_v_z",
    "dp_x",
    "dp_y",
    "dp_z",
    "dtheta_x",
    "dtheta_y",
    "dtheta_z",
    "dv_x",
    "dv_y",
    "dv_z",
    "c_t",
    "omega_cmd_x",
    "omega_cmd_y",
    "omega_cmd_z",
    "tau_x",
    "tau_y",
    "tau_z",
    "dp_norm",
    "care_residual",
    "saturated",
    // trailing diagnostics
    "yaw_error",
    "dtheta_norm",
    "q_norm",
    "outer_tick",
];

/// `printf("%.*g")`: `digits` significant digits, trailing zeros removed.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let p = digits.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn push_row(out: &mut String, r: &LogRow, outer_tick: bool) {
    let s = &r.true_state;
    let n = &r.nominal;
    let e = &r.error;
    let mut vals: Vec<f64> = Vec::with_capacity(CSV_COLUMNS.len());
    vals.push(r.t);
    vals.extend(s.p.iter());
    vals.extend(s.q.coords());
    vals.extend(s.v.iter());
    vals.extend(s.omega.iter());
    vals.extend(n.p.iter());
    vals.extend(n.q.coords());
    vals.extend(n.v.iter());
    vals.extend(e.dp.iter());
    vals.extend(e.dtheta.iter());
    vals.extend(e.dv.iter());
    vals.push(r.c_t);
    vals.extend(r.omega_cmd.iter());
    vals.extend(r.tau.iter());
    vals.push(r.dp_norm);
    vals.push(r.care_residual);
    vals.push(f64::from(u8::from(r.saturated)));
    vals.push(r.yaw_error());
    vals.push(e.dtheta.norm());
    vals.push(s.q.norm());
    vals.push(f64::from(u8::from(outer_tick)));
    debug_assert_eq!(vals.len(), CSV_COLUMNS.len());
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format_sig(*v, 9));
    }
    out.push_str("\r\n");
}

/// Header plus one line per row, CRLF-terminated, 9 significant digits.
pub fn csv_string(log: &SimLog, outer_divisor: usize) -> String {
    let mut out = String::with_capacity(64 * 1024);
    out.push_str(&CSV_COLUMNS.join(","));
    out.push_str("\r\n");
    for (k, r) in log.rows.iter().enumerate() {
        push_row(&mut out, r, k % outer_divisor.max(1) == 0);
    }
    out
}

fn opt_seconds(v: Option<f64>) -> String {
    v.map_or_else(|| "not reached".into(), |s| format!("{} s", format_sig(s, 6)))
}

pub fn summary_string(
    name: &str,
    log: &SimLog,
    metrics: &TrackingMetrics,
    settle_threshold: f64,
    window_start: f64,
) -> String {
    let mut s = String::new();
    let duration = log.rows.last().map_or(0.0, |r| r.t);
    let _ = writeln!(s, "scenario: {name}");
    let _ = writeln!(s, "duration_s: {}", format_sig(duration, 9));
    let _ = writeln!(s, "rows: {}", log.rows.len());
    let _ = writeln!(s, "\n[tracking] window t >= {} s", format_sig(window_start, 6));
    let _ = writeln!(s, "rmse_position_m: {}", format_sig(metrics.rmse_position, 6));
    let _ = writeln!(s, "max_position_error_m: {}", format_sig(metrics.max_position_error, 6));
    let _ = writeln!(s, "max_yaw_error_rad: {}", format_sig(metrics.max_yaw_error, 6));
    let _ = writeln!(
        s,
        "settling_time (|dp| < {} m): {}",
        format_sig(settle_threshold, 6),
        opt_seconds(metrics.settling_time)
    );
    let _ = writeln!(
        s,
        "final_attitude_error_rad: {}",
        format_sig(metrics.final_attitude_error, 6)
    );
    let peak = log.rows.iter().map(|r| r.dp_norm).fold(0.0, f64::max);
    let _ = writeln!(s, "peak_position_error_m: {}", format_sig(peak, 6));
    let _ = writeln!(s, "\n[riccati]");
    let _ = writeln!(s, "solves: {}", log.care.solves);
    let _ = writeln!(s, "max_relative_residual: {}", format_sig(log.care.max_residual, 4));
    let _ = writeln!(
        s,
        "max_closed_loop_abscissa: {}",
        format_sig(log.care.max_closed_loop_abscissa, 6)
    );
    let _ = writeln!(s, "max_newton_refinements: {}", log.care.max_newton_iterations);
    let _ = writeln!(s, "\n[actuation]");
    let _ = writeln!(s, "thrust_saturated_rows: {}", log.saturation_count());
    let drift = log
        .rows
        .iter()
        .map(|r| (r.true_state.q.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    let _ = writeln!(s, "max_quaternion_norm_drift: {}", format_sig(drift, 3));
    s
}

/// A polyline series for [`line_chart`].
pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const MAX_POINTS: usize = 2000;

fn bounds(series: &[Series], equal_aspect: bool) -> (f64, f64, f64, f64) {
    let pts = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |lo: f64, hi: f64| {
        let span = (hi - lo).max(1e-9);
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    let (mut x0, mut x1) = pad(x0, x1);
    let (mut y0, mut y1) = pad(y0, y1);
    if equal_aspect {
        let sx = (x1 - x0) / (WIDTH - 2.0 * MARGIN);
        let sy = (y1 - y0) / (HEIGHT - 2.0 * MARGIN);
        let s = sx.max(sy);
        let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        x0 = cx - 0.5 * s * (WIDTH - 2.0 * MARGIN);
        x1 = cx + 0.5 * s * (WIDTH - 2.0 * MARGIN);
        y0 = cy - 0.5 * s * (HEIGHT - 2.0 * MARGIN);
        y1 = cy + 0.5 * s * (HEIGHT - 2.0 * MARGIN);
    }
    (x0, x1, y0, y1)
}

/// Static SVG line chart with a frame, min/max tick labels and a legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], equal_aspect: bool) -> String {
    let (x0, x1, y0, y1) = bounds(series, equal_aspect);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" text-anchor="middle" font-size="15">{title}</text>"#,
        WIDTH / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{y_label}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (v, anchor, x, y) in [
        (x0, "start", MARGIN, HEIGHT - MARGIN + 16.0),
        (x1, "end", WIDTH - MARGIN, HEIGHT - MARGIN + 16.0),
        (y0, "end", MARGIN - 4.0, HEIGHT - MARGIN),
        (y1, "end", MARGIN - 4.0, MARGIN + 10.0),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{}</text>"#,
            format_sig(v, 3)
        );
    }
    for (i, ser) in series.iter().enumerate() {
        let stride = ser.points.len().div_ceil(MAX_POINTS).max(1);
        let mut pts = String::new();
        let last = ser.points.len().saturating_sub(1);
        for (k, &(x, y)) in ser.points.iter().enumerate() {
            if (k % stride == 0 || k == last) && x.is_finite() && y.is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", px(x), py(y));
            }
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            ser.color,
            pts.trim_end()
        );
        let ly = MARGIN + 16.0 + 16.0 * i as f64;
        let lx = WIDTH - MARGIN - 140.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="2"/><text x="{}" y="{ly}">{}</text>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0,
            ser.color,
            lx + 26.0,
            ser.label
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Nominal and true horizontal paths.
pub fn trajectory_xy_svg(log: &SimLog) -> String {
    let nominal = Series {
        label: "nominal",
        color: "#1f77b4",
        points: log.rows.iter().map(|r| (r.nominal.p.x, r.nominal.p.y)).collect(),
    };
    let actual = Series {
        label: "true",
        color: "#d62728",
        points: log.rows.iter().map(|r| (r.true_state.p.x, r.true_state.p.y)).collect(),
    };
    line_chart("xy path", "x [m]", "y [m]", &[nominal, actual], true)
}

/// Position and attitude error norms over time.
pub fn error_norm_svg(log: &SimLog) -> String {
    let dp = Series {
        label: "|dp| [m]",
        color: "#1f77b4",
        points: log.rows.iter().map(|r| (r.t, r.dp_norm)).collect(),
    };
    let dtheta = Series {
        label: "|dtheta| [rad]",
        color: "#ff7f0e",
        points: log.rows.iter().map(|r| (r.t, r.error.dtheta.norm())).collect(),
    };
    line_chart("tracking error", "t [s]", "error norm", &[dp, dtheta], false)
}
