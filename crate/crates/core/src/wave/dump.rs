//! Field dumps: CSV for inspection and a compact little-endian binary
//! (`SFLD`) for tooling.
//!
//! Binary layout: a 64-byte header (`b"SFLD"`, u32 version, u32 nx, u32 ny,
//! f64 pitch, f64 wavelength, f64 origin x, f64 origin y, f64 ambient index,
//! 8 reserved zero bytes) followed by `nx * ny` pairs of f32 (re, im), `y`
//! fastest. Lengths are metres.

use std::io::{self, BufWriter, Read, Write};

use ndarray::Array2;
use num_complex::Complex64;

use super::field::ScalarField;

pub const SFLD_MAGIC: &[u8; 4] = b"SFLD";
pub const SFLD_VERSION: u32 = 1;
pub const SFLD_HEADER_LEN: usize = 64;

pub fn write_csv<W: Write>(field: &ScalarField, out: W) -> io::Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "x_um,y_um,re,im,intensity")?;
    let xs = field.x_coords();
    let ys = field.y_coords();
    for ((i, j), v) in field.samples.indexed_iter() {
        writeln!(
            w,
            "{:.6},{:.6},{:.9e},{:.9e},{:.9e}",
            xs[i] * 1e6,
            ys[j] * 1e6,
            v.re,
            v.im,
            v.norm_sqr()
        )?;
    }
    w.flush()
}

pub fn write_sfld<W: Write>(field: &ScalarField, out: W) -> io::Result<()> {
    let mut w = BufWriter::new(out);
    let (nx, ny) = field.samples.dim();
    let mut header = Vec::with_capacity(SFLD_HEADER_LEN);
    header.extend_from_slice(SFLD_MAGIC);
    header.extend_from_slice(&SFLD_VERSION.to_le_bytes());
    header.extend_from_slice(&(nx as u32).to_le_bytes());
    header.extend_from_slice(&(ny as u32).to_le_bytes());
    for v in [
        field.pitch,
        field.wavelength,
        field.origin.0,
        field.origin.1,
        field.ambient_index,
    ] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    header.resize(SFLD_HEADER_LEN, 0);
    w.write_all(&header)?;
    for v in field.samples.iter() {
        w.write_all(&(v.re as f32).to_le_bytes())?;
        w.write_all(&(v.im as f32).to_le_bytes())?;
    }
    w.flush()
}

pub fn read_sfld<R: Read>(mut input: R) -> io::Result<ScalarField> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    let mut header = [0u8; SFLD_HEADER_LEN];
    input.read_exact(&mut header)?;
    if &header[0..4] != SFLD_MAGIC {
        return Err(bad("not an SFLD file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    if u32_at(4) != SFLD_VERSION {
        return Err(bad("unsupported SFLD version"));
    }
    let (nx, ny) = (u32_at(8) as usize, u32_at(12) as usize);
    let mut data = vec![0u8; nx * ny * 8];
    input.read_exact(&mut data)?;
    let values: Vec<Complex64> = data
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[0..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..8].try_into().unwrap());
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    let samples = Array2::from_shape_vec((nx, ny), values).map_err(|e| bad(&e.to_string()))?;
    Ok(ScalarField {
        samples,
        pitch: f64_at(16),
        wavelength: f64_at(24),
        origin: (f64_at(32), f64_at(40)),
        ambient_index: f64_at(48),
        clipped_fraction: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::beam_from_mfd;
    use crate::wave::field::{make_gaussian_field, Grid, Launch};

    fn field() -> ScalarField {
        let beam = beam_from_mfd(2e-6, 3e-6, 729e-9, 1.0).unwrap();
        let mut f = make_gaussian_field(
            &beam,
            Launch {
                tilt: (0.1, 0.0),
                ..Launch::default()
            },
            Grid::new(64, 64, 0.2e-6).unwrap(),
        )
        .unwrap();
        f.origin = (1e-6, -2e-6);
        f
    }

    #[test]
    fn sfld_round_trip() {
        let f = field();
        let mut buf = Vec::new();
        write_sfld(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), SFLD_HEADER_LEN + 64 * 64 * 8);
        assert_eq!(&buf[..4], b"SFLD");
        let g = read_sfld(buf.as_slice()).unwrap();
        assert_eq!(g.samples.dim(), (64, 64));
        assert_eq!((g.pitch, g.wavelength, g.origin), (f.pitch, f.wavelength, f.origin));
        for (a, b) in f.samples.iter().zip(g.samples.iter()) {
            assert!((a - b).norm() < 1e-6 * f.samples[(32, 32)].norm());
        }
        assert!(read_sfld(&b"NOPE"[..]).is_err());
    }

    #[test]
    fn csv_has_one_row_per_sample() {
        let mut buf = Vec::new();
        write_csv(&field(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 64 * 64);
        assert!(text.starts_with("x_um,y_um,re,im,intensity\n"));
    }
}
