use crate::rng::hash_normal;

const END: u64 = 0xE11D;
const MID: u64 = 0x3317;

/// Depth at which `value` stops refining and interpolates linearly.
pub const MAX_DEPTH: u32 = 48;

/// Brownian path addressable at dyadic times without storing it.
///
/// Time is cut into segments [0,1], [1,2], [2,4], [4,8], ...; segment
/// endpoints get independent Gaussian increments and each segment is filled
/// by Levy's midpoint construction. Every random number is a hash of the
/// node it belongs to, so the path is the same whatever order or resolution
/// it is queried at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BrownianDriver {
    pub seed: u64,
}

impl BrownianDriver {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Segment -1 is [0,1]; segment k >= 0 is [2^k, 2^{k+1}].
    pub fn segment_bounds(seg: i32) -> (f64, f64) {
        if seg < 0 {
            (0.0, 1.0)
        } else {
            let a = (seg as f64).exp2();
            (a, 2.0 * a)
        }
    }

    pub fn segment_of(t: f64) -> i32 {
        if t <= 1.0 {
            -1
        } else {
            (t.log2().floor() as i32).max(0)
        }
    }

    /// B at the right end of a segment (B at 1 for segment -1).
    pub fn segment_end(&self, seg: i32) -> f64 {
        let mut b = hash_normal(&[self.seed, END, 0]);
        for k in 0..=seg {
            b += (k as f64).exp2().sqrt() * hash_normal(&[self.seed, END, k as u64 + 1]);
        }
        b
    }

    pub fn segment_start(&self, seg: i32) -> f64 {
        if seg < 0 {
            0.0
        } else {
            self.segment_end(seg - 1)
        }
    }

    /// Midpoint value of the dyadic sub-interval `idx` at `level` within a
    /// segment, given its end values and length.
    #[inline]
    pub fn midpoint(&self, seg: i32, level: u32, idx: u64, left: f64, right: f64, len: f64) -> f64 {
        0.5 * (left + right) + 0.5 * len.sqrt() * hash_normal(&[self.seed, MID, seg as u64, level as u64, idx])
    }

    /// B_t, exact at dyadic points down to `MAX_DEPTH`, linear in between.
    pub fn value(&self, t: f64) -> f64 {
        assert!(t >= 0.0, "negative time");
        let seg = Self::segment_of(t);
        let (mut a, mut b) = Self::segment_bounds(seg);
        let (mut ba, mut bb) = (self.segment_start(seg), self.segment_end(seg));
        let mut idx = 0u64;
        for level in 0..MAX_DEPTH {
            if t == a {
                return ba;
            }
            if t == b {
                return bb;
            }
            let mid = 0.5 * (a + b);
            let bm = self.midpoint(seg, level, idx, ba, bb, b - a);
            if t < mid {
                b = mid;
                bb = bm;
                idx *= 2;
            } else {
                a = mid;
                ba = bm;
                idx = 2 * idx + 1;
            }
        }
        ba + (t - a) / (b - a) * (bb - ba)
    }

    /// Path on the uniform grid k * 2^-level, k = 0..=T 2^level, T = 2^p.
    pub fn grid_path(&self, level: u32, horizon_log2: i32) -> Vec<f64> {
        let horizon = (horizon_log2 as f64).exp2();
        let n = (horizon * (level as f64).exp2()) as usize;
        (0..=n).map(|k| self.value(k as f64 * horizon / n as f64)).collect()
    }
}
