//! Minimal SVG line plots of the phase diagram.

use std::fmt::Write;

use crate::commands::PhaseRow;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// MSE of block `j` against `‖T_c‖_op`: bound as a solid line, SE as a
/// dashed line, AMP as points, one color per `ε`.
pub fn phase_plot(rows: &[PhaseRow], j: usize) -> String {
    let x_max = rows.iter().map(|r| r.norm_tc).fold(1.0, f64::max);
    let sx = |x: f64| PAD + (W - 2.0 * PAD) * x / x_max;
    let sy = |y: f64| H - PAD - (H - 2.0 * PAD) * y.clamp(0.0, 1.1) / 1.1;
    let mut eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{x0},{y0} H{x1} M{x0},{y0} V{y1}" stroke="black" fill="none"/>"#,
        x0 = PAD,
        y0 = H - PAD,
        x1 = W - PAD,
        y1 = PAD
    );
    for k in 0..=4 {
        let y = k as f64 * 0.25;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y:.2}</text>"#, PAD - 6.0, sy(y) + 4.0);
    }
    let ticks = x_max.ceil() as usize;
    for k in 0..=ticks {
        let x = k as f64;
        if x <= x_max {
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{k}</text>"#, sx(x), H - PAD + 16.0);
        }
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">‖T_c‖_op</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">MSE, block {}</text>"#, H / 2.0, H / 2.0, j + 1);

    for (i, e) in eps.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<&PhaseRow> = rows.iter().filter(|r| r.eps == *e).collect();
        let line = |f: &dyn Fn(&PhaseRow) -> f64| {
            pts.iter().map(|r| format!("{:.2},{:.2}", sx(r.norm_tc), sy(f(r)))).collect::<Vec<_>>().join(" ")
        };
        let _ = writeln!(s, r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, line(&|r| r.bound[j]));
        let _ = writeln!(s, r#"<polyline points="{}" stroke="{color}" fill="none" stroke-dasharray="4 3"/>"#, line(&|r| r.se_mse[j]));
        for r in &pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(r.norm_tc), sy(r.amp_mse[j]));
        }
        let ly = PAD + 16.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{color}">ε = {e}</text>"#, W - PAD - 70.0);
    }
    s.push_str("</svg>\n");
    s
}
