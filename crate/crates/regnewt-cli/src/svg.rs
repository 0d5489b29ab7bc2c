//! Hand-emitted SVG 1.1 log-log plots (no plotting dependency): axes with
//! decade ticks, data points, the fitted line and a reference-slope line.
//! Output is a pure function of the inputs.

const W: f64 = 640.0;
const H: f64 = 480.0;
const ML: f64 = 72.0;
const MR: f64 = 24.0;
const MT: f64 = 34.0;
const MB: f64 = 56.0;

struct LogAxis {
    lo: f64,
    hi: f64,
    px0: f64,
    px1: f64,
}

impl LogAxis {
    fn new(values: &[f64], px0: f64, px1: f64) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in values {
            if v > 0.0 {
                lo = lo.min(v.log10());
                hi = hi.max(v.log10());
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = -1.0;
            hi = 0.0;
        }
        if hi - lo < 0.5 {
            let mid = 0.5 * (lo + hi);
            lo = mid - 0.25;
            hi = mid + 0.25;
        }
        let pad = 0.06 * (hi - lo);
        LogAxis {
            lo: lo - pad,
            hi: hi + pad,
            px0,
            px1,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.px0 + (v.log10() - self.lo) / (self.hi - self.lo) * (self.px1 - self.px0)
    }

    fn decades(&self) -> Vec<i32> {
        let lo = self.lo.ceil() as i32;
        let hi = self.hi.floor() as i32;
        (lo..=hi).collect()
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Log-log scatter with a fitted power line and a reference-slope line
/// anchored at the first data point. `fit` is (slope, intercept) of
/// ln y = slope * ln x + intercept.
pub fn rate_plot_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[(f64, f64)],
    fit: (f64, f64),
    reference_slope: f64,
) -> String {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let ax = LogAxis::new(&xs, ML, W - MR);
    let ay = LogAxis::new(&ys, H - MB, MT);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-family=\"monospace\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        fmt(0.5 * W),
        title
    ));

    // frame
    s.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        fmt(ML),
        fmt(MT),
        fmt(W - ML - MR),
        fmt(H - MT - MB)
    ));

    // decade gridlines + labels
    for d in ax.decades() {
        let px = ax.map(10f64.powi(d));
        s.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#cccccc\" stroke-width=\"0.5\"/>\n",
            fmt(px),
            fmt(MT),
            fmt(H - MB)
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">1e{}</text>\n",
            fmt(px),
            fmt(H - MB + 16.0),
            d
        ));
    }
    for d in ay.decades() {
        let py = ay.map(10f64.powi(d));
        s.push_str(&format!(
            "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"#cccccc\" stroke-width=\"0.5\"/>\n",
            fmt(py),
            fmt(ML),
            fmt(W - MR)
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">1e{}</text>\n",
            fmt(ML - 6.0),
            fmt(py + 4.0),
            d
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        fmt(0.5 * (ML + W - MR)),
        fmt(H - 14.0),
        x_label
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        fmt(0.5 * (MT + H - MB)),
        fmt(0.5 * (MT + H - MB)),
        y_label
    ));

    // fitted and reference polylines over the x-range of the data
    let (xmin, xmax) = (
        xs.iter().cloned().fold(f64::INFINITY, f64::min),
        xs.iter().cloned().fold(0.0, f64::max),
    );
    let line = |slope: f64, anchor: (f64, f64), color: &str, dash: &str| -> String {
        let y_at = |x: f64| anchor.1 * (x / anchor.0).powf(slope);
        format!(
            "<polyline points=\"{},{} {},{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>\n",
            fmt(ax.map(xmin)),
            fmt(ay.map(y_at(xmin))),
            fmt(ax.map(xmax)),
            fmt(ay.map(y_at(xmax)))
        )
    };
    let (slope, intercept) = fit;
    let fit_anchor = (xmax, (intercept + slope * xmax.ln()).exp());
    s.push_str(&line(slope, fit_anchor, "#d62728", ""));
    s.push_str(&line(
        reference_slope,
        points[0],
        "#1f77b4",
        " stroke-dasharray=\"6 4\"",
    ));

    for (x, y) in points {
        s.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3.5\" fill=\"black\"/>\n",
            fmt(ax.map(*x)),
            fmt(ay.map(*y))
        ));
    }

    // legend
    let legend_y = MT + 16.0;
    s.push_str(&format!(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#d62728\" stroke-width=\"1.5\"/><text x=\"{3}\" y=\"{4}\" font-family=\"monospace\" font-size=\"11\">fit slope {5:.4}</text>\n",
        fmt(ML + 10.0),
        fmt(legend_y),
        fmt(ML + 40.0),
        fmt(ML + 46.0),
        fmt(legend_y + 4.0),
        slope
    ));
    s.push_str(&format!(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#1f77b4\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/><text x=\"{3}\" y=\"{4}\" font-family=\"monospace\" font-size=\"11\">reference slope {5:.4}</text>\n",
        fmt(ML + 10.0),
        fmt(legend_y + 18.0),
        fmt(ML + 40.0),
        fmt(ML + 46.0),
        fmt(legend_y + 22.0),
        reference_slope
    ));
    s.push_str("</svg>\n");
    s
}
