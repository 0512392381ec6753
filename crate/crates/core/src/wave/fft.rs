use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Planned 2D FFT for a fixed `(nx, ny)` shape in standard layout
/// (`y` contiguous).
pub struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            fwd_x: planner.plan_fft_forward(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_x: planner.plan_fft_inverse(nx),
            inv_y: planner.plan_fft_inverse(ny),
        }
    }

    pub fn forward(&self, data: &mut Array2<Complex64>) {
        self.run(data, &self.fwd_x, &self.fwd_y);
    }

    /// Inverse transform, normalized so that `inverse(forward(a)) == a`.
    pub fn inverse(&self, data: &mut Array2<Complex64>) {
        self.run(data, &self.inv_x, &self.inv_y);
        let scale = 1.0 / (self.nx * self.ny) as f64;
        data.mapv_inplace(|v| v * scale);
    }

    fn run(&self, data: &mut Array2<Complex64>, fx: &Arc<dyn Fft<f64>>, fy: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.dim(), (self.nx, self.ny), "FFT shape mismatch");
        let buf = data.as_slice_mut().expect("field samples must be in standard layout");
        let mut scratch = vec![Complex64::default(); fy.get_inplace_scratch_len().max(fx.get_inplace_scratch_len())];
        fy.process_with_scratch(buf, &mut scratch);

        let mut t = vec![Complex64::default(); self.nx * self.ny];
        transpose(buf, &mut t, self.nx, self.ny);
        fx.process_with_scratch(&mut t, &mut scratch);
        transpose(&t, buf, self.ny, self.nx);
    }
}

/// `src` is `rows x cols` row-major; `dst` receives `cols x rows`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const TILE: usize = 32;
    for r0 in (0..rows).step_by(TILE) {
        for c0 in (0..cols).step_by(TILE) {
            for r in r0..(r0 + TILE).min(rows) {
                for c in c0..(c0 + TILE).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Signed FFT frequency of bin `i` for an `n`-point transform with sample
/// spacing `pitch`.
pub fn frequency(i: usize, n: usize, pitch: f64) -> f64 {
    let k = if i < n.div_ceil(2) {
        i as f64
    } else {
        i as f64 - n as f64
    };
    k / (n as f64 * pitch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_delta_spectrum() {
        let (nx, ny) = (16, 8);
        let fft = Fft2::new(nx, ny);
        let orig = Array2::from_shape_fn((nx, ny), |(i, j)| {
            Complex64::new((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64).sin())
        });
        let mut a = orig.clone();
        fft.forward(&mut a);
        fft.inverse(&mut a);
        for (x, y) in a.iter().zip(orig.iter()) {
            assert!((x - y).norm() < 1e-12);
        }

        let mut d = Array2::zeros((nx, ny));
        d[(0, 0)] = Complex64::new(1.0, 0.0);
        fft.forward(&mut d);
        assert!(d.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn frequencies_follow_fft_order() {
        assert_eq!(frequency(0, 8, 1.0), 0.0);
        assert_eq!(frequency(3, 8, 1.0), 3.0 / 8.0);
        assert_eq!(frequency(4, 8, 1.0), -4.0 / 8.0);
        assert_eq!(frequency(7, 8, 0.5), -1.0 / 4.0);
    }
}
