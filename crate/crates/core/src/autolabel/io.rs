//! Point-cloud and trajectory files.
//!
//! Clouds are CSV with header `x,y,z,intensity`, or binary: `HPKC`, a
//! little-endian u64 point count, then `x, y, z, intensity` as f32 LE per
//! point. Trajectories are CSV `t,x,y,z,heading`.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::autolabel::types::{LidarPoint, Pose, Trajectory};
use crate::error::{Error, Result};

const CLOUD_MAGIC: &[u8; 4] = b"HPKC";

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(BufReader::new(file));
    let got = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {}, found {}", header.join(","), got.iter().collect::<Vec<_>>().join(",")),
        });
    }
    rdr.deserialize().map(|r| r.map_err(|e| csv_error(path, e))).collect()
}

fn write_csv<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn check_points(path: &Path, pts: &[LidarPoint]) -> Result<()> {
    match pts
        .iter()
        .position(|p| ![p.x, p.y, p.z, p.intensity].iter().all(|v| v.is_finite()))
    {
        Some(i) => Err(Error::Data(format!("{}: point {i} is not finite", path.display()))),
        None => Ok(()),
    }
}

/// Reads a cloud, choosing the format from the leading magic.
pub fn read_cloud(path: &Path) -> Result<Vec<LidarPoint>> {
    let mut head = [0u8; 4];
    let n = std::fs::File::open(path)
        .and_then(|mut f| f.read(&mut head))
        .map_err(|e| Error::io(path, e))?;
    let pts = if n == 4 && &head == CLOUD_MAGIC {
        read_cloud_binary(path)?
    } else {
        read_csv(path, &["x", "y", "z", "intensity"])?
    };
    check_points(path, &pts)?;
    Ok(pts)
}

pub fn write_cloud_csv(path: &Path, pts: &[LidarPoint]) -> Result<()> {
    write_csv(path, pts)
}

fn read_cloud_binary(path: &Path) -> Result<Vec<LidarPoint>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: m.to_string(),
    };
    if bytes.len() < 12 {
        return Err(bad("truncated header"));
    }
    let count = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if count.checked_mul(16) != Some(body.len()) {
        return Err(bad(&format!("header announces {count} points but payload is {} bytes", body.len())));
    }
    Ok(body
        .chunks_exact(16)
        .map(|c| {
            let f = |i: usize| f32::from_le_bytes(c[i * 4..i * 4 + 4].try_into().unwrap()) as f64;
            LidarPoint {
                x: f(0),
                y: f(1),
                z: f(2),
                intensity: f(3),
            }
        })
        .collect())
}

pub fn write_cloud_binary(path: &Path, pts: &[LidarPoint]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |b: &[u8]| w.write_all(b).map_err(|e| Error::io(path, e));
    put(CLOUD_MAGIC)?;
    put(&(pts.len() as u64).to_le_bytes())?;
    for p in pts {
        for v in [p.x, p.y, p.z, p.intensity] {
            put(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let poses: Vec<Pose> = read_csv(path, &["t", "x", "y", "z", "heading"])?;
    Trajectory::new(poses)
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    write_csv(path, traj.poses())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud() -> Vec<LidarPoint> {
        vec![
            LidarPoint {
                x: 1.5,
                y: -2.25,
                z: 0.0,
                intensity: 200.0,
            },
            LidarPoint {
                x: 3.0,
                y: 0.5,
                z: 0.125,
                intensity: 17.0,
            },
        ]
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("c.csv"), dir.path().join("c.bin"));
        write_cloud_csv(&a, &cloud()).unwrap();
        write_cloud_binary(&b, &cloud()).unwrap();
        assert_eq!(read_cloud(&a).unwrap(), cloud());
        assert_eq!(read_cloud(&b).unwrap(), cloud());
        let text = std::fs::read_to_string(&a).unwrap();
        assert!(text.starts_with("x,y,z,intensity\n"));
    }

    #[test]
    fn bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "x,y,z,intensity\n1,2,3,4\n1,2,oops,4\n").unwrap();
        match read_cloud(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "HPKC\x05\0\0\0\0\0\0\0").unwrap();
        assert!(read_cloud(&p).is_err());
        std::fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(read_cloud(&p).is_err());
    }

    #[test]
    fn trajectory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let t = Trajectory::new(
            (0..3)
                .map(|i| Pose {
                    t: i as f64 * 0.1,
                    x: i as f64,
                    y: 0.0,
                    z: 0.0,
                    heading: 0.0,
                })
                .collect(),
        )
        .unwrap();
        write_trajectory(&p, &t).unwrap();
        assert_eq!(read_trajectory(&p).unwrap(), t);
    }
}
