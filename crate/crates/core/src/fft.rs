//! Forward discrete Fourier transforms.
//!
//! Power-of-two lengths run an iterative radix-2 Cooley-Tukey transform;
//! other lengths fall back to the direct O(n²) sum.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Precomputed forward transform of one length.
#[derive(Debug, Clone)]
pub struct Fft {
    len: usize,
    twiddles: Vec<Complex64>,
    bit_reverse: Vec<usize>,
}

impl Fft {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "transform length must be positive");
        // twiddles[k] = exp(-2πik/len), each evaluated directly
        let twiddles = (0..len)
            .map(|k| {
                let (s, c) = (-2.0 * PI * k as f64 / len as f64).sin_cos();
                Complex64::new(c, s)
            })
            .collect();
        let bit_reverse = if len.is_power_of_two() {
            let bits = len.trailing_zeros();
            (0..len)
                .map(|i| {
                    if bits == 0 {
                        0
                    } else {
                        i.reverse_bits() >> (usize::BITS - bits)
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        Self {
            len,
            twiddles,
            bit_reverse,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Transforms `data` in place. `scratch` is used by the direct path.
    pub fn process(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        assert_eq!(data.len(), self.len, "buffer length does not match the plan");
        if self.len.is_power_of_two() {
            self.radix2(data);
        } else {
            self.direct(data, scratch);
        }
    }

    fn radix2(&self, data: &mut [Complex64]) {
        let n = self.len;
        for (i, &j) in self.bit_reverse.iter().enumerate() {
            if i < j {
                data.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let step = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let w = self.twiddles[k * step];
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
    }

    fn direct(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let n = self.len;
        scratch.clear();
        scratch.extend_from_slice(data);
        for (k, out) in data.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &x) in scratch.iter().enumerate() {
                acc += x * self.twiddles[(j * k) % n];
            }
            *out = acc;
        }
    }
}

/// Unnormalized 2-D forward transform of a row-major `width`x`height` grid:
/// every row, then every column.
pub fn fft2(width: usize, height: usize, data: &mut [Complex64]) {
    assert_eq!(data.len(), width * height);
    let mut scratch = Vec::new();
    let rows = Fft::new(width);
    for row in data.chunks_exact_mut(width) {
        rows.process(row, &mut scratch);
    }
    let cols = Fft::new(height);
    let mut column = vec![Complex64::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = data[y * width + x];
        }
        cols.process(&mut column, &mut scratch);
        for y in 0..height {
            data[y * width + x] = column[y];
        }
    }
}
