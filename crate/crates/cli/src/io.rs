//! Curve CSV, chart PGM and JSON sidecars.

use crate::error::CliError;
use serde::{Deserialize, Serialize};
use std::path::Path;
use tonguetrace::floquet::{ChartSpec, Stability, StabilityChart};
use tonguetrace::solver::CurvePoint;

pub const STABLE: u8 = 170;
pub const UNSTABLE: u8 = 0;
pub const OVERLAY: u8 = 255;

/// Shortest round-trip form is not fixed width; `{:.16e}` always carries 17
/// significant digits, which is enough to recover any binary64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn curve_header(h_count: usize) -> Vec<String> {
    let mut cols = vec!["epsilon".to_string(), "delta".to_string()];
    cols.extend((1..=h_count).map(|i| format!("h{i}")));
    cols.extend(["zeta0", "newton_iters", "residual_norm", "floquet_check"].map(String::from));
    cols
}

pub fn write_curve_csv<W: std::io::Write>(w: W, points: &[CurvePoint]) -> Result<(), csv::Error> {
    let h_count = points.first().map_or(0, |p| p.h.len());
    let mut out = csv::Writer::from_writer(w);
    out.write_record(curve_header(h_count))?;
    for p in points {
        let mut rec = vec![fmt_f64(p.epsilon), fmt_f64(p.delta)];
        rec.extend(p.h.iter().map(|&h| fmt_f64(h)));
        rec.push(p.zeta0.map(fmt_f64).unwrap_or_default());
        rec.push(p.newton_iters.to_string());
        rec.push(fmt_f64(p.residual_norm));
        rec.push(fmt_f64(p.floquet_check));
        out.write_record(rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn curve_csv_string(points: &[CurvePoint]) -> String {
    let mut buf = Vec::new();
    write_curve_csv(&mut buf, points).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<CurvePoint>, String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    let h_count = header.len().checked_sub(6).ok_or("too few columns")?;
    let expected = curve_header(h_count);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number '{s}'"));
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| e.to_string())?;
            let f = |k: usize| num(&rec[k]).map_err(|e| format!("row {}: {e}", i + 1));
            let z = &rec[2 + h_count];
            Ok(CurvePoint {
                epsilon: f(0)?,
                delta: f(1)?,
                h: (0..h_count).map(|k| f(2 + k)).collect::<Result<_, _>>()?,
                zeta0: if z.is_empty() { None } else { Some(f(2 + h_count)?) },
                newton_iters: rec[3 + h_count]
                    .parse()
                    .map_err(|_| format!("row {}: bad iteration count", i + 1))?,
                residual_norm: f(4 + h_count)?,
                floquet_check: f(5 + h_count)?,
            })
        })
        .collect()
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurvePoint>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_curve_csv(&text).map_err(|message| CliError::Format {
        path: path.to_path_buf(),
        message,
    })
}

/// 8-bit raster with image row 0 at the top (largest ε).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Raster {
    pub fn from_chart(chart: &StabilityChart) -> Self {
        let (nx, ny) = (chart.spec.nx, chart.spec.ny);
        let mut pixels = Vec::with_capacity(nx * ny);
        for row in 0..ny {
            let j = ny - 1 - row;
            pixels.extend((0..nx).map(|i| match chart.at(i, j) {
                Stability::Stable => STABLE,
                Stability::Unstable => UNSTABLE,
            }));
        }
        Raster {
            width: nx,
            height: ny,
            pixels,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    fn plot(&mut self, x: f64, y: f64) {
        if x >= 0.0 && y >= 0.0 && (x as usize) < self.width && (y as usize) < self.height {
            self.pixels[y as usize * self.width + x as usize] = OVERLAY;
        }
    }

    /// Draw a polyline through `(δ, ε)` points with a DDA walk between
    /// consecutive points.
    pub fn overlay(&mut self, spec: &ChartSpec, points: &[(f64, f64)]) {
        let to_px = |(d, e): (f64, f64)| {
            let x = (d - spec.delta_range.0) / (spec.delta_range.1 - spec.delta_range.0) * spec.nx as f64;
            let y = (spec.eps_range.1 - e) / (spec.eps_range.1 - spec.eps_range.0) * spec.ny as f64;
            (x, y)
        };
        let px: Vec<_> = points.iter().map(|&p| to_px(p)).collect();
        if let [only] = px[..] {
            self.plot(only.0, only.1);
        }
        for w in px.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            let n = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
            for k in 0..=n {
                let s = k as f64 / n as f64;
                self.plot(x0 + s * (x1 - x0), y0 + s * (y1 - y0));
            }
        }
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self, String> {
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if bytes.get(pos) == Some(&b'#') {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err("truncated header".into());
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if fields[0] != "P5" || fields[3] != "255" {
            return Err(format!("not an 8-bit P5 image: {} maxval {}", fields[0], fields[3]));
        }
        let dim = |s: &str| s.parse::<usize>().map_err(|_| format!("bad dimension '{s}'"));
        let (width, height) = (dim(&fields[1])?, dim(&fields[2])?);
        let pixels = bytes.get(pos + 1..).unwrap_or_default().to_vec();
        if pixels.len() != width * height {
            return Err(format!("expected {} pixels, found {}", width * height, pixels.len()));
        }
        Ok(Raster { width, height, pixels })
    }
}

/// Written next to a chart as `<out>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartMeta {
    pub spec: ChartSpec,
    pub unstable_cells: usize,
    pub overlays: Vec<String>,
}

/// `solve-point` output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub variant: tonguetrace::Variant,
    pub branch: tonguetrace::Branch,
    pub order: usize,
    pub damping: f64,
    pub point: CurvePoint,
    /// Solution period `2π·λ(1)`.
    pub period: f64,
    pub initial_condition: (f64, f64),
    pub t: Vec<f64>,
    pub x_series: Vec<f64>,
    pub x_rk: Vec<f64>,
    pub rms_difference: f64,
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serialisable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use tonguetrace::Variant;

    fn point(eps: f64, zeta0: Option<f64>) -> CurvePoint {
        CurvePoint {
            epsilon: eps,
            delta: 0.1 + std::f64::consts::PI * 1e-7,
            h: vec![-1.0 / 3.0, 2.0e-300, f64::MIN_POSITIVE],
            zeta0,
            newton_iters: 4,
            residual_norm: 3.3e-12,
            floquet_check: 1.0 / 7.0,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let pts = vec![point(0.05, None), point(0.1 + 0.2, None)];
        let text = curve_csv_string(&pts);
        assert!(text.starts_with("epsilon,delta,h1,h2,h3,zeta0,newton_iters,residual_norm,floquet_check\n"));
        assert_eq!(parse_curve_csv(&text).unwrap(), pts);
        let damped = vec![point(1.0, Some(-0.123456789012345678))];
        assert_eq!(parse_curve_csv(&curve_csv_string(&damped)).unwrap(), damped);
    }

    #[test]
    fn csv_uses_seventeen_digits() {
        let s = fmt_f64(0.1);
        let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17, "{s}");
    }

    #[test]
    fn csv_rejects_foreign_header() {
        assert!(parse_curve_csv("a,b,c,d,e,f,g\n1,2,3,4,5,6,7\n").is_err());
    }

    fn spec() -> ChartSpec {
        ChartSpec {
            variant: Variant::Classical,
            delta_range: (0.0, 1.0),
            eps_range: (0.0, 1.0),
            nx: 10,
            ny: 5,
            damping: 0.0,
        }
    }

    #[test]
    fn pgm_round_trip() {
        let chart = StabilityChart {
            spec: spec(),
            cells: (0..50)
                .map(|k| if k % 3 == 0 { Stability::Unstable } else { Stability::Stable })
                .collect(),
        };
        let r = Raster::from_chart(&chart);
        // top image row is the largest ε row
        assert_eq!(r.get(0, 0), if 40 % 3 == 0 { UNSTABLE } else { STABLE });
        assert_eq!(r.get(0, 4), UNSTABLE);
        let bytes = r.to_pgm();
        assert!(bytes.starts_with(b"P5\n10 5\n255\n"));
        assert_eq!(Raster::from_pgm(&bytes).unwrap(), r);
    }

    #[test]
    fn overlay_draws_connected_line() {
        let chart = StabilityChart {
            spec: spec(),
            cells: vec![Stability::Stable; 50],
        };
        let mut r = Raster::from_chart(&chart);
        r.overlay(&spec(), &[(0.05, 0.05), (0.95, 0.95)]);
        for x in 0..10 {
            assert!((0..5).any(|y| r.get(x, y) == OVERLAY), "column {x} untouched");
        }
        assert_eq!(r.get(0, 4), OVERLAY);
        assert_eq!(r.get(9, 0), OVERLAY);
    }

    #[test]
    fn meta_json_round_trip() {
        let meta = ChartMeta {
            spec: spec(),
            unstable_cells: 7,
            overlays: vec!["a.csv".into()],
        };
        let back: ChartMeta = serde_json::from_str(&to_json(&meta)).unwrap();
        assert_eq!(back, meta);
    }
}
