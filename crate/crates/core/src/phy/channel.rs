use super::{ChannelState, PhyError};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Annular cell around the base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub radius_m: f64,
    pub min_distance_m: f64,
}

impl Default for CellGeometry {
    fn default() -> Self {
        Self {
            radius_m: 500.0,
            min_distance_m: 35.0,
        }
    }
}

impl CellGeometry {
    /// Distance of a user dropped uniformly over the annulus area.
    pub fn sample_distance<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (a, b) = (self.min_distance_m.powi(2), self.radius_m.powi(2));
        (a + (b - a) * rng.gen::<f64>()).sqrt()
    }
}

pub fn path_loss_db(distance_m: f64) -> f64 {
    128.1 + 37.6 * (distance_m / 1000.0).log10()
}

/// Thermal noise power in watts over `bandwidth` Hz.
pub fn noise_power(psd_dbm_hz: f64, bandwidth: f64) -> f64 {
    10f64.powf((psd_dbm_hz - 30.0) / 10.0) * bandwidth
}

/// Rayleigh-faded channels scaled by distance path loss.
pub fn generate_channels<R: Rng + ?Sized>(
    geometry: &CellGeometry,
    users: usize,
    antennas: usize,
    bandwidth: f64,
    noise_psd_dbm_hz: f64,
    rng: &mut R,
) -> Result<ChannelState, PhyError> {
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid deviation");
    let channels = (0..users)
        .map(|_| {
            let d = geometry.sample_distance(rng);
            let amp = 10f64.powf(-path_loss_db(d) / 20.0);
            (0..antennas)
                .map(|_| Complex64::new(normal.sample(rng), normal.sample(rng)) * amp)
                .collect()
        })
        .collect();
    ChannelState::new(channels, noise_power(noise_psd_dbm_hz, bandwidth), bandwidth)
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    user: usize,
    antenna: usize,
    re: f64,
    im: f64,
}

fn csv_err(e: csv::Error) -> PhyError {
    PhyError::Csv(e.to_string())
}

pub fn write_channels_csv<W: Write>(channels: &[Vec<Complex64>], out: W) -> Result<(), PhyError> {
    let mut w = csv::Writer::from_writer(out);
    for (user, h) in channels.iter().enumerate() {
        for (antenna, x) in h.iter().enumerate() {
            w.serialize(Record {
                user,
                antenna,
                re: x.re,
                im: x.im,
            })
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| PhyError::Csv(e.to_string()))
}

/// Reads channel vectors written by [`write_channels_csv`]. Every
/// `(user, antenna)` cell in the dense grid must appear exactly once.
pub fn read_channels_csv<R: Read>(input: R) -> Result<Vec<Vec<Complex64>>, PhyError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut records = Vec::new();
    for rec in rdr.deserialize::<Record>() {
        records.push(rec.map_err(csv_err)?);
    }
    let users = records.iter().map(|r| r.user + 1).max().ok_or(PhyError::Empty)?;
    let antennas = records.iter().map(|r| r.antenna + 1).max().unwrap_or(0);
    let mut grid = vec![vec![None; antennas]; users];
    for r in records {
        let cell = &mut grid[r.user][r.antenna];
        if cell.is_some() {
            return Err(PhyError::Csv(format!(
                "duplicate entry for user {} antenna {}",
                r.user, r.antenna
            )));
        }
        *cell = Some(Complex64::new(r.re, r.im));
    }
    grid.into_iter()
        .enumerate()
        .map(|(u, row)| {
            row.into_iter()
                .enumerate()
                .map(|(a, c)| {
                    c.ok_or_else(|| PhyError::Csv(format!("missing user {u} antenna {a}")))
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_loss_reference_points() {
        assert!((path_loss_db(1000.0) - 128.1).abs() < 1e-12);
        assert!((path_loss_db(100.0) - 90.5).abs() < 1e-12);
    }

    #[test]
    fn noise_power_at_one_megahertz() {
        // -174 dBm/Hz + 60 dB = -114 dBm
        let n = noise_power(-174.0, 1e6);
        assert!((n / 10f64.powf(-14.4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distances_stay_in_annulus() {
        let g = CellGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let d = g.sample_distance(&mut rng);
            assert!((35.0..=500.0).contains(&d));
        }
    }

    #[test]
    fn generated_channels_have_expected_power() {
        let g = CellGeometry {
            radius_m: 100.0,
            min_distance_m: 100.0 - 1e-9,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ch = generate_channels(&g, 200, 8, 1e6, -174.0, &mut rng).unwrap();
        let gain = 10f64.powf(-90.5 / 10.0);
        let mean: f64 = ch
            .channels()
            .iter()
            .flatten()
            .map(|x| x.norm_sqr())
            .sum::<f64>()
            / 1600.0;
        assert!((mean / gain - 1.0).abs() < 0.1, "{}", mean / gain);
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = generate_channels(&CellGeometry::default(), 3, 2, 1e6, -174.0, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_channels_csv(ch.channels(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("user,antenna,re,im\n"));
        assert_eq!(read_channels_csv(buf.as_slice()).unwrap(), ch.channels());
    }

    #[test]
    fn csv_rejects_holes_and_duplicates() {
        let hole = "user,antenna,re,im\n0,0,1,0\n1,1,1,0\n";
        assert!(read_channels_csv(hole.as_bytes()).is_err());
        let dup = "user,antenna,re,im\n0,0,1,0\n0,0,1,0\n";
        assert!(read_channels_csv(dup.as_bytes()).is_err());
        assert_eq!(read_channels_csv("user,antenna,re,im\n".as_bytes()), Err(PhyError::Empty));
    }
}
