//! Separable sliding-window kernels over clipped square windows.
//!
//! Both filters treat the window around `(x, y)` as
//! `[x - r, x + r] x [y - r, y + r]` intersected with the plane, so the
//! border samples see a smaller window rather than padded values.

use rayon::prelude::*;

use crate::plane::Plane;

/// Rows handed to one rayon task. Row results never depend on the split.
const ROWS_PER_TASK: usize = 16;

/// Sliding maximum of `src` with a clipped window of radius `radius`.
///
/// Monotone-queue formulation: each index enters and leaves `queue` once.
pub(crate) fn sliding_max_row<T: Copy + PartialOrd>(
    src: &[T],
    radius: usize,
    dst: &mut [T],
    queue: &mut Vec<usize>,
) {
    debug_assert_eq!(src.len(), dst.len());
    let n = src.len();
    queue.clear();
    let mut head = 0;
    for j in 0..n + radius {
        if j < n {
            while queue.len() > head && src[*queue.last().unwrap()] <= src[j] {
                queue.pop();
            }
            queue.push(j);
        }
        if j >= radius {
            let out = j - radius;
            let lo = out.saturating_sub(radius);
            while queue[head] < lo {
                head += 1;
            }
            dst[out] = src[queue[head]];
        }
    }
}

/// Sliding sum of `src` with a clipped window of radius `radius`.
pub(crate) fn sliding_sum_row(src: &[f64], radius: usize, dst: &mut [f64]) {
    debug_assert_eq!(src.len(), dst.len());
    let n = src.len();
    let mut acc = 0.0;
    for v in src.iter().take(radius.min(n)) {
        acc += v;
    }
    for out in 0..n {
        let enter = out + radius;
        if enter < n {
            acc += src[enter];
        }
        if out > radius {
            acc -= src[out - radius - 1];
        }
        dst[out] = acc;
    }
}

fn transpose<T: Copy + Default + Send + Sync>(src: &Plane<T>) -> Plane<T> {
    let (w, h) = src.dims();
    let mut out = vec![T::default(); w * h];
    let data = src.as_slice();
    out.par_chunks_mut(h * ROWS_PER_TASK)
        .enumerate()
        .for_each(|(chunk, block)| {
            for (k, row) in block.chunks_mut(h).enumerate() {
                let x = chunk * ROWS_PER_TASK + k;
                for (y, v) in row.iter_mut().enumerate() {
                    *v = data[y * w + x];
                }
            }
        });
    Plane::new(h, w, out).expect("transpose preserves sample count")
}

fn rows_max<T: Copy + PartialOrd + Default + Send + Sync>(
    src: &Plane<T>,
    radius: usize,
) -> Plane<T> {
    let w = src.width();
    let mut out = vec![T::default(); src.as_slice().len()];
    out.par_chunks_mut(w * ROWS_PER_TASK)
        .zip(src.as_slice().par_chunks(w * ROWS_PER_TASK))
        .for_each_init(Vec::new, |queue, (dst, rows)| {
            for (d, s) in dst.chunks_mut(w).zip(rows.chunks(w)) {
                sliding_max_row(s, radius, d, queue);
            }
        });
    Plane::new(w, src.height(), out).expect("same dims")
}

fn rows_sum(src: &Plane<f64>, radius: usize) -> Plane<f64> {
    let w = src.width();
    let mut out = vec![0.0; src.as_slice().len()];
    out.par_chunks_mut(w * ROWS_PER_TASK)
        .zip(src.as_slice().par_chunks(w * ROWS_PER_TASK))
        .for_each(|(dst, rows)| {
            for (d, s) in dst.chunks_mut(w).zip(rows.chunks(w)) {
                sliding_sum_row(s, radius, d);
            }
        });
    Plane::new(w, src.height(), out).expect("same dims")
}

/// 2-D maximum filter over `(2r+1) x (2r+1)` clipped windows.
pub fn max_filter<T: Copy + PartialOrd + Default + Send + Sync>(
    src: &Plane<T>,
    radius: usize,
) -> Plane<T> {
    let horizontal = rows_max(src, radius);
    transpose(&rows_max(&transpose(&horizontal), radius))
}

/// 2-D box sum over `(2r+1) x (2r+1)` clipped windows.
pub fn box_sum(src: &Plane<f64>, radius: usize) -> Plane<f64> {
    let horizontal = rows_sum(src, radius);
    transpose(&rows_sum(&transpose(&horizontal), radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_max(src: &Plane<f32>, r: usize, x: usize, y: usize) -> f32 {
        let mut m = f32::MIN;
        for yy in y.saturating_sub(r)..=(y + r).min(src.height() - 1) {
            for xx in x.saturating_sub(r)..=(x + r).min(src.width() - 1) {
                m = m.max(src.get(xx, yy));
            }
        }
        m
    }

    #[test]
    fn sliding_max_row_small() {
        let src = [1.0, 3.0, 2.0, 0.0, 5.0, 4.0];
        let mut dst = [0.0; 6];
        sliding_max_row(&src, 1, &mut dst, &mut Vec::new());
        assert_eq!(dst, [3.0, 3.0, 3.0, 5.0, 5.0, 5.0]);
        sliding_max_row(&src, 0, &mut dst, &mut Vec::new());
        assert_eq!(dst, src);
        sliding_max_row(&src, 10, &mut dst, &mut Vec::new());
        assert_eq!(dst, [5.0; 6]);
    }

    #[test]
    fn sliding_sum_row_small() {
        let src = [1.0, 2.0, 3.0, 4.0];
        let mut dst = [0.0; 4];
        sliding_sum_row(&src, 1, &mut dst);
        assert_eq!(dst, [3.0, 6.0, 9.0, 7.0]);
    }

    proptest! {
        #[test]
        fn max_filter_matches_brute_force(
            w in 1usize..20, h in 1usize..20, r in 0usize..8, seed in any::<u64>()
        ) {
            let mut s = seed;
            let src = Plane::from_fn(w, h, |_, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 40) % 7) as f32
            });
            let out = max_filter(&src, r);
            for y in 0..h {
                for x in 0..w {
                    prop_assert_eq!(out.get(x, y), brute_max(&src, r, x, y));
                }
            }
        }

        #[test]
        fn box_sum_matches_brute_force(
            w in 1usize..20, h in 1usize..20, r in 0usize..6, seed in any::<u64>()
        ) {
            let mut s = seed;
            let src = Plane::from_fn(w, h, |_, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            });
            let out = box_sum(&src, r);
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                        for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                            acc += src.get(xx, yy);
                        }
                    }
                    prop_assert!((out.get(x, y) - acc).abs() < 1e-12);
                }
            }
        }
    }
}
