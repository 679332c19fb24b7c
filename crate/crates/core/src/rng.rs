//! Seeded random ensembles.
//!
//! The generator is SplitMix64 (Steele, Lea & Flood), fixed here so that any
//! port can regenerate the same matrices from the same seed:
//!
//! ```text
//! state  += 0x9E3779B97F4A7C15
//! z       = state
//! z       = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z       = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! output  = z ^ (z >> 31)
//! ```
//!
//! Uniforms are `(output >> 11) · 2^-53` in `[0, 1)`. Normals use the
//! Box–Muller cosine branch on two consecutive uniforms (`u1` mapped to
//! `1 − u1` so the logarithm stays finite); the sine branch is discarded.
//! Trial `i` of an experiment seeded with `s` uses the stream `s ^ i`.

use crate::linalg::{spectral_norm, schatten_norm, ComplexMatrix, HermitianMatrix, SchattenIndex, C64};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Stream for trial `trial` of an experiment seeded with `seed`.
    pub fn for_trial(seed: u64, trial: u64) -> Self {
        SplitMix64::new(seed ^ trial)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        (self.uniform() * n as f64) as usize % n
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn complex_normal(&mut self) -> C64 {
        let re = self.normal();
        let im = self.normal();
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_complex(rng: &mut SplitMix64, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| rng.complex_normal())
}

/// GUE-style Hermitian matrix `(G + G*)/2`, unnormalized.
pub fn random_gue(rng: &mut SplitMix64, dim: usize) -> HermitianMatrix {
    HermitianMatrix::new(random_complex(rng, dim, dim)).expect("square")
}

/// GUE-style Hermitian matrix rescaled to `‖H‖_p = target`.
pub fn random_hermitian_with_norm(
    rng: &mut SplitMix64,
    dim: usize,
    p: SchattenIndex,
    target: f64,
) -> HermitianMatrix {
    let h = random_gue(rng, dim);
    let norm = match p {
        SchattenIndex::Infinity => spectral_norm(h.as_matrix()),
        _ => schatten_norm(h.as_matrix(), p),
    }
    .expect("Jacobi converges on well-scaled random input");
    if norm == 0.0 {
        return h;
    }
    HermitianMatrix::new(h.as_matrix().scale_real(target / norm)).expect("square")
}

/// Random complex matrix rescaled to Frobenius norm `target`.
pub fn random_complex_with_norm(rng: &mut SplitMix64, rows: usize, cols: usize, target: f64) -> ComplexMatrix {
    let m = random_complex(rng, rows, cols);
    let n = m.frobenius_norm();
    m.scale_real(target / n)
}
