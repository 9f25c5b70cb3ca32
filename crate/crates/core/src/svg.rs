//! Standalone SVG plots (scree, elbow, scatter). Each file embeds its data as
//! CSV inside a `<metadata>` element.

use std::fmt::Write;

use crate::cluster::ElbowTable;

const W: f64 = 480.0;
const H: f64 = 320.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn new(x0: f64, y0: f64, w: f64, h: f64, xs: &[f64], ys: &[f64]) -> Self {
        let (xmin, xmax) = padded_range(xs);
        let (ymin, ymax) = padded_range(ys);
        Self { x0, y0, w, h, xmin, xmax, ymin, ymax }
    }

    fn px(&self, x: f64) -> f64 {
        self.x0 + MARGIN + (x - self.xmin) / (self.xmax - self.xmin) * (self.w - 1.5 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - MARGIN + (self.ymin - y) / (self.ymax - self.ymin) * (self.h - 1.5 * MARGIN)
    }

    fn axes(&self, out: &mut String, title: &str, xlab: &str, ylab: &str) {
        let (l, r) = (self.x0 + MARGIN, self.x0 + self.w - MARGIN / 2.0);
        let (t, b) = (self.y0 + MARGIN / 2.0, self.y0 + self.h - MARGIN);
        let _ = writeln!(
            out,
            r##"<rect x="{l:.1}" y="{t:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
            r - l,
            b - t
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
            (l + r) / 2.0,
            t - 8.0,
            escape(title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
            (l + r) / 2.0,
            b + 32.0,
            escape(xlab)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
            self.x0 + 14.0,
            (t + b) / 2.0,
            self.x0 + 14.0,
            (t + b) / 2.0,
            escape(ylab)
        );
        for (v, label) in [(self.ymin, self.ymin), (self.ymax, self.ymax)] {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="9">{}</text>"#,
                l - 3.0,
                self.py(v) + 3.0,
                tick(label)
            );
        }
        for v in [self.xmin, self.xmax] {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="9">{}</text>"#,
                self.px(v),
                b + 12.0,
                tick(v)
            );
        }
    }

    fn polyline(&self, out: &mut String, xs: &[f64], ys: &[f64], color: &str) {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter(|(_, y)| y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        for (&x, &y) in xs.iter().zip(ys).filter(|(_, y)| y.is_finite()) {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                self.px(x),
                self.py(y)
            );
        }
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn padded_range(v: &[f64]) -> (f64, f64) {
    let finite = v.iter().copied().filter(|x| x.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span <= 0.0 {
        let pad = lo.abs().max(1.0) * 0.1;
        (lo - pad, hi + pad)
    } else {
        (lo - 0.05 * span, hi + 0.05 * span)
    }
}

fn document(width: f64, height: f64, data_csv: &str, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n<metadata><![CDATA[\n{data_csv}]]></metadata>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Eigenvalues against component number, with the retention threshold drawn
/// as a dashed line.
pub fn scree_svg(title: &str, eigenvalues: &[f64], threshold: f64) -> String {
    let xs: Vec<f64> = (1..=eigenvalues.len()).map(|i| i as f64).collect();
    let mut ys_range = eigenvalues.to_vec();
    ys_range.push(threshold);
    let f = Frame::new(0.0, 0.0, W, H, &xs, &ys_range);
    let mut body = String::new();
    f.axes(&mut body, title, "Number", "Eigenvalue");
    let _ = writeln!(
        body,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
        f.px(f.xmin),
        f.py(threshold),
        f.px(f.xmax),
        f.py(threshold)
    );
    f.polyline(&mut body, &xs, eigenvalues, PALETTE[0]);
    let mut csv = String::from("number,eigenvalue\n");
    for (i, e) in eigenvalues.iter().enumerate() {
        let _ = writeln!(csv, "{},{e}", i + 1);
    }
    document(W, H, &csv, &body)
}

/// Four panels: WSS, log(WSS), η² and PRE against k.
pub fn elbow_svg(title: &str, table: &ElbowTable) -> String {
    let ks: Vec<f64> = table.rows.iter().map(|r| r.k as f64).collect();
    let panels: [(&str, Vec<f64>); 4] = [
        ("WSS", table.rows.iter().map(|r| r.wss).collect()),
        ("log(WSS)", table.rows.iter().map(|r| r.log_wss).collect()),
        ("eta-squared", table.rows.iter().map(|r| r.eta2).collect()),
        ("PRE", table.rows.iter().map(|r| r.pre.unwrap_or(f64::NAN)).collect()),
    ];
    let mut body = String::new();
    let _ = writeln!(
        body,
        r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        W,
        escape(title)
    );
    for (i, (name, ys)) in panels.iter().enumerate() {
        let f = Frame::new((i % 2) as f64 * W, 24.0 + (i / 2) as f64 * H, W, H, &ks, ys);
        f.axes(&mut body, name, "k", name);
        f.polyline(&mut body, &ks, ys, PALETTE[i]);
    }
    document(2.0 * W, 2.0 * H + 24.0, &crate::report::elbow_csv(table), &body)
}

/// Points coloured by group, one colour per distinct group id.
pub fn scatter_svg(title: &str, xlab: &str, ylab: &str, x: &[f64], y: &[f64], group: &[usize], names: &[String]) -> String {
    let f = Frame::new(0.0, 0.0, W, H, x, y);
    let mut body = String::new();
    f.axes(&mut body, title, xlab, ylab);
    let mut csv = String::from("name,x,y,group\n");
    for i in 0..x.len() {
        let color = PALETTE[group[i] % PALETTE.len()];
        let name = names.get(i).map(String::as_str).unwrap_or("");
        let _ = writeln!(
            body,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}" fill-opacity="0.8"><title>{}</title></circle>"#,
            f.px(x[i]),
            f.py(y[i]),
            escape(name)
        );
        let _ = writeln!(csv, "{name},{},{},{}", x[i], y[i], group[i] + 1);
    }
    document(W, H, &csv, &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::diagnostics_from_wss;

    #[test]
    fn scree_has_data_and_points() {
        let s = scree_svg("t <1>", &[2.5, 1.2, 0.3], 1.0);
        assert!(s.starts_with("<svg"));
        assert!(s.contains("number,eigenvalue\n1,2.5\n"));
        assert_eq!(s.matches("<circle").count(), 3);
        assert!(s.contains("t &lt;1&gt;"));
    }

    #[test]
    fn elbow_skips_undefined_pre() {
        let t = diagnostics_from_wss(&[10.0, 5.0, 4.0], 10.0).unwrap();
        let s = elbow_svg("elbow", &t);
        assert_eq!(s.matches("<circle").count(), 3 * 3 + 2);
    }
}
