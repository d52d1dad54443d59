use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Resolved configuration echoed as the first line of every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub params: serde_json::Value,
}

impl RunConfig {
    pub fn header(&self) -> String {
        // serde_json keeps map keys sorted, so the echo is stable across runs
        format!("# {}\n", serde_json::to_string(self).expect("config serializes"))
    }
}

pub struct OutDir {
    dir: PathBuf,
    config: RunConfig,
}

impl OutDir {
    pub fn create(dir: &Path, config: RunConfig) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), config })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `body` behind the config echo line.
    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.path(name);
        let mut out = self.config.header();
        out.push_str(body);
        fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    /// SVG carries the echo as an XML comment.
    pub fn svg(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.path(name);
        let echo = self.config.header();
        let echo = echo.trim_start_matches("# ").trim_end().replace("--", "- -");
        let out = format!("<!-- {echo} -->\n{body}");
        fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Log-log scatter of `(x, y)` with the fitted line `y = slope x + intercept`.
pub fn loglog_svg(points: &[(f64, f64)], fit: Option<(f64, f64)>, x_label: &str, y_label: &str) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const PAD: f64 = 48.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    for &(x, y) in points {
        let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="steelblue"/>"#, sx(x), sy(y));
    }
    if let Some((slope, intercept)) = fit {
        let _ = writeln!(
            s,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="firebrick"/>"#,
            sx(x0),
            sy(slope * x0 + intercept),
            sx(x1),
            sy(slope * x1 + intercept)
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12">slope {slope:.6}</text>"#, PAD + 8.0, PAD + 12.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{x_label}</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{y_label}</text>"#,
        H / 2.0,
        H / 2.0
    );
    s.push_str("</svg>\n");
    s
}
