use std::fmt::Write as _;
use std::path::Path;

use super::{Atmosphere, SolarModel};
use crate::error::{Error, Result};

pub const MODEL_HEADER: &str = "# heliosolve-model v1";

/// Reads a background table.  Atmosphere constants come from `# key = value`
/// header lines (c0, rho0, H, h_a, R_sun); missing keys fall back to
/// `defaults`.
pub fn load_background(path: &Path, defaults: Atmosphere) -> Result<SolarModel> {
    let text = std::fs::read_to_string(path)?;
    parse_background(&text, defaults)
}

pub fn parse_background(text: &str, defaults: Atmosphere) -> Result<SolarModel> {
    let mut atm = defaults;
    let mut seen_header = false;
    let (mut r, mut c, mut rho, mut gamma) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !seen_header {
            if line != MODEL_HEADER {
                return Err(Error::Parse { line: line_no, msg: format!("expected header `{MODEL_HEADER}`") });
            }
            seen_header = true;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                let slot = match key.trim() {
                    "c0" => &mut atm.c0,
                    "rho0" => &mut atm.rho0,
                    "H" => &mut atm.scale_height,
                    "h_a" => &mut atm.interface_height,
                    "R_sun" => &mut atm.solar_radius,
                    _ => continue,
                };
                *slot = value.trim().parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad value for {}", key.trim()),
                })?;
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse { line: line_no, msg: format!("expected 4 columns, found {}", fields.len()) });
        }
        let mut vals = [0.0f64; 4];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f.parse().map_err(|_| Error::Parse { line: line_no, msg: format!("not a number: {f}") })?;
        }
        if let Some(&last) = r.last() {
            if !(vals[0] > last) {
                return Err(Error::Parse { line: line_no, msg: "radius not strictly increasing".into() });
            }
        }
        r.push(vals[0]);
        c.push(vals[1]);
        rho.push(vals[2]);
        gamma.push(vals[3]);
    }
    if !seen_header {
        return Err(Error::Parse { line: 1, msg: format!("expected header `{MODEL_HEADER}`") });
    }
    SolarModel::new(atm, r, c, rho, gamma)
}

/// Text form of a model; floats use the shortest representation that reads
/// back to the same value.
pub fn write_background(model: &SolarModel) -> String {
    let a = model.atmosphere();
    let mut s = String::new();
    let _ = writeln!(s, "{MODEL_HEADER}");
    let _ = writeln!(s, "# c0 = {:e}", a.c0);
    let _ = writeln!(s, "# rho0 = {:e}", a.rho0);
    let _ = writeln!(s, "# H = {:e}", a.scale_height);
    let _ = writeln!(s, "# h_a = {:e}", a.interface_height);
    let _ = writeln!(s, "# R_sun = {:e}", a.solar_radius);
    let _ = writeln!(s, "# r_m c_m_per_s rho_kg_per_m3 gamma_rad_per_s");
    for i in 0..model.grid_r().len() {
        let _ = writeln!(
            s,
            "{:e} {:e} {:e} {:e}",
            model.grid_r()[i],
            model.c()[i],
            model.rho()[i],
            model.gamma()[i]
        );
    }
    s
}

pub fn save_background(model: &SolarModel, path: &Path) -> Result<()> {
    std::fs::write(path, write_background(model))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "# heliosolve-model v1\n\
        3.4785e8 6855 1 0\n\
        6.957e8 6855 1.575e-4 0\n\
        6.962e8 6855 2.886e-6 0\n";

    #[test]
    fn minimal_table_parses() {
        let m = parse_background(MINIMAL, Atmosphere::default()).unwrap();
        assert!(m.grid_r().len() > 3);
        assert_eq!(m.c()[0], 6855.0);
    }

    #[test]
    fn header_required() {
        let e = parse_background("3 4 5 6\n", Atmosphere::default()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn bad_row_reports_line() {
        let text = format!("{MINIMAL}7e8 6855 x 0\n");
        match parse_background(&text, Atmosphere::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_constants_override_defaults() {
        let text = MINIMAL.replacen("v1\n", "v1\n# H = 1.3e5\n", 1);
        let m = parse_background(&text, Atmosphere::default());
        // the density column no longer matches the changed scale height at
        // the appended points, but the interface value still does
        assert_eq!(m.unwrap().atmosphere().scale_height, 1.3e5);
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let m = parse_background(MINIMAL, Atmosphere::default()).unwrap();
        let text = write_background(&m);
        let back = parse_background(&text, Atmosphere { c0: 1.0, ..Atmosphere::default() }).unwrap();
        assert_eq!(back.atmosphere(), m.atmosphere());
        assert_eq!(back.grid_r(), m.grid_r());
        assert_eq!(back.c(), m.c());
        assert_eq!(back.rho(), m.rho());
        assert_eq!(back.gamma(), m.gamma());
        assert_eq!(write_background(&back), text);
    }
}
