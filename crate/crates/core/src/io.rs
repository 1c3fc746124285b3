//! Trajectory persistence: a JSON header next to a flat little-endian
//! binary record stream. Each record is `t: f64, n: u64, n × (re, im): f64`.
//! Identical inputs produce identical bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{ScalarField, Trajectory};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrajectoryHeader {
    pub nu: f64,
    pub profile: String,
    pub dt: f64,
    pub n: usize,
    pub seed: u64,
}

impl TrajectoryHeader {
    pub fn of(traj: &Trajectory) -> Self {
        TrajectoryHeader {
            nu: traj.nu,
            profile: traj.profile.clone(),
            dt: traj.dt,
            n: traj.n,
            seed: traj.seed,
        }
    }
}

/// Write `<stem>.json` and `<stem>.bin`.
pub fn save_trajectory(traj: &Trajectory, stem: &Path) -> Result<()> {
    let header = TrajectoryHeader::of(traj);
    let json = serde_json::to_string_pretty(&header)
        .map_err(|e| Error::InvalidParameter(format!("header serialization: {e}")))?;
    std::fs::write(stem.with_extension("json"), json)?;

    let mut w = BufWriter::new(File::create(stem.with_extension("bin"))?);
    for s in &traj.samples {
        w.write_all(&s.t.to_le_bytes())?;
        w.write_all(&(s.values.len() as u64).to_le_bytes())?;
        for v in &s.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a trajectory written by [`save_trajectory`].
pub fn load_trajectory(stem: &Path) -> Result<Trajectory> {
    let json = std::fs::read_to_string(stem.with_extension("json"))?;
    let header: TrajectoryHeader = serde_json::from_str(&json)
        .map_err(|e| Error::BadTable(format!("trajectory header: {e}")))?;

    let mut r = BufReader::new(File::open(stem.with_extension("bin"))?);
    let mut samples = Vec::new();
    loop {
        let mut tb = [0u8; 8];
        match r.read_exact(&mut tb) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let t = f64::from_le_bytes(tb);
        let mut nb = [0u8; 8];
        r.read_exact(&mut nb)?;
        let n = u64::from_le_bytes(nb) as usize;
        if n != header.n {
            return Err(Error::BadTable(format!(
                "record length {n} disagrees with header n = {}",
                header.n
            )));
        }
        let mut buf = vec![0u8; 16 * n];
        r.read_exact(&mut buf)?;
        let values: Vec<Complex64> = buf
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[0..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..16].try_into().unwrap()),
                )
            })
            .collect();
        samples.push(ScalarField::new(values, t));
    }
    if samples.is_empty() {
        return Err(Error::BadTable("trajectory file holds no records".into()));
    }
    Ok(Trajectory {
        nu: header.nu,
        profile: header.profile,
        dt: header.dt,
        n: header.n,
        seed: header.seed,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shear::ShearProfile;
    use crate::solver::{make_initial, solve, InitialData, SolveConfig};
    use crate::grid::Grid;

    fn small_trajectory() -> Trajectory {
        let p = ShearProfile::sine();
        let grid = Grid::new(32).unwrap();
        let f0 =
            make_initial(&InitialData::RandomBand { seed: 3, m_max: 5 }, &grid, &p, 1e-2).unwrap();
        let config = SolveConfig {
            nu: 1e-2,
            dt: 0.05,
            t_end: 2.0,
            output_every: 10,
            profile: "sine".into(),
            seed: 3,
        };
        solve(&p, &config, &f0).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let traj = small_trajectory();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("traj");
        save_trajectory(&traj, &stem).unwrap();
        let back = load_trajectory(&stem).unwrap();
        assert_eq!(back.nu, traj.nu);
        assert_eq!(back.profile, traj.profile);
        assert_eq!(back.n, traj.n);
        assert_eq!(back.seed, traj.seed);
        assert_eq!(back.samples.len(), traj.samples.len());
        for (a, b) in back.samples.iter().zip(&traj.samples) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            for (x, y) in a.values.iter().zip(&b.values) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
    }

    #[test]
    fn writes_are_byte_deterministic() {
        let traj = small_trajectory();
        let dir = tempfile::tempdir().unwrap();
        let s1 = dir.path().join("a");
        let s2 = dir.path().join("b");
        save_trajectory(&traj, &s1).unwrap();
        save_trajectory(&traj, &s2).unwrap();
        let b1 = std::fs::read(s1.with_extension("bin")).unwrap();
        let b2 = std::fs::read(s2.with_extension("bin")).unwrap();
        assert_eq!(b1, b2);
        let j1 = std::fs::read(s1.with_extension("json")).unwrap();
        let j2 = std::fs::read(s2.with_extension("json")).unwrap();
        assert_eq!(j1, j2);
    }

    #[test]
    fn corrupt_record_length_is_rejected() {
        let traj = small_trajectory();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("traj");
        save_trajectory(&traj, &stem).unwrap();
        let mut bytes = std::fs::read(stem.with_extension("bin")).unwrap();
        bytes[8] ^= 0x01; // flip a bit of the first record's length field
        std::fs::write(stem.with_extension("bin"), &bytes).unwrap();
        assert!(matches!(load_trajectory(&stem), Err(Error::BadTable(_))));
    }
}
