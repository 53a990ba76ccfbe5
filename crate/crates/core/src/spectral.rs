//! Zero-padded n-dimensional FFTs between the mode box and a physical grid.
//!
//! With a grid of `N ≥ 3K + 1` points per direction, the product of two
//! fields supported in `|α|∞ ≤ K` has no aliased contribution inside the
//! box, so transforming back and discarding modes outside the box yields
//! exactly the truncated Galerkin convolution.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::lattice::ModeBox;

/// Smallest `m ≥ 3K + 1` whose only prime factors are 2, 3 and 5.
pub fn padded_size(k: usize) -> usize {
    let mut m = 3 * k + 1;
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

pub(crate) struct SpectralGrid {
    geometry: ModeBox,
    size: usize,
    total: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    transposed: Vec<Complex64>,
    /// grid position of each box offset
    placement: Vec<usize>,
}

impl SpectralGrid {
    pub fn new(geometry: ModeBox) -> Self {
        let n = geometry.dim();
        let size = padded_size(geometry.cutoff());
        let total = size.pow(n as u32);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        let placement = geometry
            .iter()
            .map(|a| {
                a.entries()
                    .iter()
                    .fold(0usize, |acc, &e| acc * size + e.rem_euclid(size as i64) as usize)
            })
            .collect();
        SpectralGrid {
            geometry,
            size,
            total,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            transposed: vec![Complex64::new(0.0, 0.0); total],
            placement,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Physical values `Σ_α c_α exp(2πi α·x/N)` on the grid.
    pub fn synthesize(&mut self, coeffs: impl Iterator<Item = Complex64>, out: &mut [Complex64]) {
        out.fill(Complex64::new(0.0, 0.0));
        for (c, &p) in coeffs.zip(&self.placement) {
            out[p] = c;
        }
        self.transform(out, true);
    }

    /// Box coefficients of a grid function (normalised forward transform).
    /// `phys` is overwritten.
    pub fn analyze(&mut self, phys: &mut [Complex64], out: &mut [Complex64]) {
        self.transform(phys, false);
        let scale = 1.0 / self.total as f64;
        for (o, &p) in out.iter_mut().zip(&self.placement) {
            *o = phys[p] * scale;
        }
    }

    fn transform(&mut self, data: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(data.len(), self.total);
        let fft = if inverse { &self.inverse } else { &self.forward };
        let n = self.geometry.dim();
        let size = self.size;
        for axis in 0..n {
            let stride = size.pow((n - 1 - axis) as u32);
            if stride == 1 {
                fft.process_with_scratch(data, &mut self.scratch);
                continue;
            }
            let outer = self.total / (stride * size);
            let t = &mut self.transposed;
            let mut line = 0;
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * stride * size + inner;
                    for j in 0..size {
                        t[line * size + j] = data[base + j * stride];
                    }
                    line += 1;
                }
            }
            fft.process_with_scratch(t, &mut self.scratch);
            let mut line = 0;
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * stride * size + inner;
                    for j in 0..size {
                        data[base + j * stride] = t[line * size + j];
                    }
                    line += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::MultiIndex;

    #[test]
    fn padded_sizes() {
        assert_eq!(padded_size(1), 4);
        assert_eq!(padded_size(4), 15);
        assert_eq!(padded_size(16), 50);
        assert_eq!(padded_size(8), 25);
    }

    #[test]
    fn round_trip_recovers_box_coefficients() {
        for n in 1..=3 {
            let g = ModeBox::new(n, 3);
            let mut grid = SpectralGrid::new(g);
            let coeffs: Vec<Complex64> = (0..g.len())
                .map(|o| Complex64::new(o as f64 * 0.1, -(o as f64) * 0.03))
                .collect();
            let mut phys = vec![Complex64::new(0.0, 0.0); grid.total()];
            grid.synthesize(coeffs.iter().copied(), &mut phys);
            let mut back = vec![Complex64::new(0.0, 0.0); g.len()];
            grid.analyze(&mut phys, &mut back);
            for (a, b) in coeffs.iter().zip(&back) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_mode_is_a_plane_wave() {
        let g = ModeBox::new(2, 2);
        let mut grid = SpectralGrid::new(g);
        let target = g.offset(&MultiIndex::new(&[1, -2])).unwrap();
        let coeffs = (0..g.len()).map(|o| {
            if o == target {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let mut phys = vec![Complex64::new(0.0, 0.0); grid.total()];
        grid.synthesize(coeffs, &mut phys);
        let size = padded_size(2);
        let x = (2usize, 3usize);
        let theta = 2.0 * std::f64::consts::PI * (1.0 * x.0 as f64 - 2.0 * x.1 as f64) / size as f64;
        let expected = Complex64::new(theta.cos(), theta.sin());
        assert!((phys[x.0 * size + x.1] - expected).norm() < 1e-13);
    }
}
