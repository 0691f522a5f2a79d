//! CSV tables on disk.
//!
//! Floating-point fields carry 9 significant digits; files are UTF-8 with LF
//! line endings and are replaced atomically (temp file in the target
//! directory, then rename).

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{EstimateFlags, ProbeEstimate};
use crate::fisher::BoundsRow;
use crate::kinetics::TrajectoryPoint;
use crate::model::SettingAngle;
use crate::simulator::{MeasurementRecord, TruthRow};

pub const RECORDS_HEADER: [&str; 4] = ["t_s", "setting_rad", "window_s", "counts"];
pub const ESTIMATES_HEADER: [&str; 7] = [
    "t_s",
    "phi_rad",
    "phi_std_rad",
    "vis",
    "vis_std",
    "total_counts",
    "flags",
];
pub const TRUTH_HEADER: [&str; 3] = ["t_s", "phi_true_rad", "vis_true"];
pub const BOUNDS_HEADER: [&str; 8] = [
    "phi_rad",
    "var_phi_q_vmin",
    "var_phi_q_vmax",
    "var_phi_classical",
    "var_vis_q_vmin",
    "var_vis_q_vmax",
    "cov_q_vmin",
    "cov_q_vmax",
];
pub const KINETICS_HEADER: [&str; 6] = ["t_s", "sucrose", "glucose", "fructose", "rotation_deg", "phase_rad"];

/// Shortest decimal that round-trips `x` rounded to 9 significant digits.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    let a = rounded.abs();
    if (1e-5..1e15).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// Write `bytes` to `path` through a temporary sibling file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Atomic write of a JSON document with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Input(e.to_string()))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

fn to_csv<const N: usize>(path: &Path, header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

fn from_csv<const N: usize, T>(
    path: &Path,
    header: [&str; N],
    mut parse: impl FnMut(&csv::StringRecord, u64) -> Result<T>,
) -> Result<Vec<T>> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(csv_err)?;
    let found = r.headers().map_err(csv_err)?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Input(format!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            header.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push(parse(&rec, line).map_err(|e| match e {
            Error::Input(m) => Error::Input(format!("{}:{line}: {m}", path.display())),
            other => other,
        })?);
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let raw = rec.get(i).ok_or_else(|| Error::Input(format!("missing column {name}")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::Input(format!("cannot parse {name} = {raw:?}")))
}

pub fn write_records(path: &Path, records: &[MeasurementRecord]) -> Result<()> {
    to_csv(
        path,
        RECORDS_HEADER,
        records.iter().map(|r| {
            [
                format_float(r.t),
                format_float(r.setting.value()),
                format_float(r.window_s),
                r.counts.to_string(),
            ]
        }),
    )
}

pub fn read_records(path: &Path) -> Result<Vec<MeasurementRecord>> {
    from_csv(path, RECORDS_HEADER, |rec, _| {
        Ok(MeasurementRecord {
            t: field(rec, 0, "t_s")?,
            setting: SettingAngle::new(field(rec, 1, "setting_rad")?),
            window_s: field(rec, 2, "window_s")?,
            counts: field(rec, 3, "counts")?,
        })
    })
}

pub fn write_estimates(path: &Path, estimates: &[ProbeEstimate]) -> Result<()> {
    to_csv(
        path,
        ESTIMATES_HEADER,
        estimates.iter().map(|e| {
            [
                format_float(e.t),
                format_float(e.phi_mean),
                format_float(e.phi_std),
                format_float(e.vis_mean),
                format_float(e.vis_std),
                e.total_counts.to_string(),
                e.flags.to_string(),
            ]
        }),
    )
}

pub fn read_estimates(path: &Path) -> Result<Vec<ProbeEstimate>> {
    from_csv(path, ESTIMATES_HEADER, |rec, _| {
        Ok(ProbeEstimate {
            t: field(rec, 0, "t_s")?,
            phi_mean: field(rec, 1, "phi_rad")?,
            phi_std: field(rec, 2, "phi_std_rad")?,
            vis_mean: field(rec, 3, "vis")?,
            vis_std: field(rec, 4, "vis_std")?,
            total_counts: field(rec, 5, "total_counts")?,
            flags: rec.get(6).unwrap_or("").parse::<EstimateFlags>()?,
        })
    })
}

pub fn write_truth(path: &Path, truth: &[TruthRow]) -> Result<()> {
    to_csv(
        path,
        TRUTH_HEADER,
        truth
            .iter()
            .map(|r| [format_float(r.t), format_float(r.phi), format_float(r.vis)]),
    )
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRow>> {
    from_csv(path, TRUTH_HEADER, |rec, _| {
        Ok(TruthRow {
            t: field(rec, 0, "t_s")?,
            phi: field(rec, 1, "phi_true_rad")?,
            vis: field(rec, 2, "vis_true")?,
        })
    })
}

pub fn write_bounds(path: &Path, rows: &[BoundsRow]) -> Result<()> {
    to_csv(
        path,
        BOUNDS_HEADER,
        rows.iter().map(|r| {
            [
                r.phi,
                r.var_phi_q_vmin,
                r.var_phi_q_vmax,
                r.var_phi_classical,
                r.var_vis_q_vmin,
                r.var_vis_q_vmax,
                r.cov_q_vmin,
                r.cov_q_vmax,
            ]
            .map(format_float)
        }),
    )
}

pub fn read_bounds(path: &Path) -> Result<Vec<BoundsRow>> {
    from_csv(path, BOUNDS_HEADER, |rec, _| {
        let mut v = [0.0; 8];
        for (i, (slot, name)) in v.iter_mut().zip(BOUNDS_HEADER).enumerate() {
            *slot = field(rec, i, name)?;
        }
        let [phi, var_phi_q_vmin, var_phi_q_vmax, var_phi_classical, var_vis_q_vmin, var_vis_q_vmax, cov_q_vmin, cov_q_vmax] =
            v;
        Ok(BoundsRow {
            phi,
            var_phi_q_vmin,
            var_phi_q_vmax,
            var_phi_classical,
            var_vis_q_vmin,
            var_vis_q_vmax,
            cov_q_vmin,
            cov_q_vmax,
        })
    })
}

pub fn write_kinetics(path: &Path, points: &[TrajectoryPoint]) -> Result<()> {
    to_csv(
        path,
        KINETICS_HEADER,
        points.iter().map(|p| {
            [
                p.composition.t,
                p.composition.sucrose,
                p.composition.glucose,
                p.composition.fructose,
                p.rotation_deg,
                p.phase_rad,
            ]
            .map(format_float)
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn float_formatting() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(-0.0), "0");
        assert_eq!(format_float(30.0), "30");
        assert_eq!(format_float(0.617283950617), "0.617283951");
        assert_eq!(format_float(-1.25054094), "-1.25054094");
        assert_eq!(format_float(1.5e-7), "1.5e-7");
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!("inf".parse::<f64>().unwrap(), f64::INFINITY);
    }

    proptest! {
        #[test]
        fn formatting_keeps_nine_digits(x in -1e6f64..1e6) {
            let y: f64 = format_float(x).parse().unwrap();
            prop_assert!((y - x).abs() <= 5e-9 * x.abs().max(1e-300) + 1e-300);
            // idempotent on already-rounded values
            prop_assert_eq!(format_float(y), format_float(x));
        }
    }

    #[test]
    fn records_round_trip_with_lf_endings() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let records = vec![
            MeasurementRecord {
                t: 0.0,
                setting: SettingAngle::new(0.0),
                window_s: 2.0,
                counts: 17,
            },
            MeasurementRecord {
                t: 2.0,
                setting: SettingAngle::new(std::f64::consts::PI / 16.0),
                window_s: 2.0,
                counts: 0,
            },
        ];
        write_records(&path, &records).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t_s,setting_rad,window_s,counts\n"));
        assert!(!text.contains('\r'));
        let back = read_records(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].counts, 0);
        assert!(back[1].setting.matches(records[1].setting));
    }

    #[test]
    fn estimates_round_trip_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("est.csv");
        let e = ProbeEstimate {
            t: 30.0,
            phi_mean: 0.0123456789123,
            phi_std: 0.01,
            vis_mean: 0.85,
            vis_std: 0.02,
            total_counts: 1000,
            flags: EstimateFlags::NO_COUNTS | EstimateFlags::STD_CAPPED,
        };
        write_estimates(&path, &[e]).unwrap();
        let back = read_estimates(&path).unwrap();
        assert_eq!(back[0].flags, e.flags);
        assert_eq!(back[0].phi_mean, 0.0123456789);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t,setting,window,counts\n0,0,2,1\n").unwrap();
        let err = read_records(&path).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
        assert!(!err.is_io());
    }

    #[test]
    fn bad_field_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t_s,setting_rad,window_s,counts\n0,0,2,1\n2,0.19,2,x\n").unwrap();
        let msg = read_records(&path).unwrap_err().to_string();
        assert!(msg.contains(":3:"), "{msg}");
        assert!(msg.contains("counts"), "{msg}");
    }

    #[test]
    fn missing_file_is_io() {
        let err = read_records(Path::new("/nonexistent/dir/records.csv")).unwrap_err();
        assert!(err.is_io());
        let err = write_records(Path::new("/nonexistent/dir/records.csv"), &[]).unwrap_err();
        assert!(err.is_io());
    }
}
