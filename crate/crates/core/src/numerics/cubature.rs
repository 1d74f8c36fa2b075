//! Adaptive multidimensional cubature on hyperrectangles with the
//! Genz–Malik degree-7 rule and its embedded degree-5 error estimate.
//! Regions are bisected along the axis with the largest fourth difference.

use std::collections::BinaryHeap;

use super::{ByError, Integral, Tolerance};

const LAMBDA2: f64 = 0.358_568_582_800_318_1; // sqrt(9/70)
const LAMBDA4: f64 = 0.948_683_298_050_513_8; // sqrt(9/10)
const LAMBDA5: f64 = 0.688_247_201_611_685_3; // sqrt(9/19)
const RATIO: f64 = (LAMBDA2 * LAMBDA2) / (LAMBDA4 * LAMBDA4);

struct Region {
    center: Vec<f64>,
    half: Vec<f64>,
    value: f64,
    split: usize,
}

struct Rule {
    dim: usize,
    w: [f64; 5],
    we: [f64; 4],
    point: Vec<f64>,
    diff: Vec<f64>,
}

impl Rule {
    fn new(dim: usize) -> Self {
        let n = dim as f64;
        Self {
            dim,
            w: [
                (12824.0 - 9120.0 * n + 400.0 * n * n) / 19683.0,
                980.0 / 6561.0,
                (1820.0 - 400.0 * n) / 19683.0,
                200.0 / 19683.0,
                6859.0 / 19683.0 / 2f64.powi(dim as i32),
            ],
            we: [
                (729.0 - 950.0 * n + 50.0 * n * n) / 729.0,
                245.0 / 486.0,
                (265.0 - 100.0 * n) / 1458.0,
                25.0 / 729.0,
            ],
            point: vec![0.0; dim],
            diff: vec![0.0; dim],
        }
    }

    fn points(&self) -> usize {
        1 + 4 * self.dim + 2 * self.dim * (self.dim - 1) + (1 << self.dim)
    }

    /// Returns (value, error, split axis).
    fn eval<F: FnMut(&[f64]) -> f64>(&mut self, f: &mut F, c: &[f64], h: &[f64]) -> (f64, f64, usize) {
        let n = self.dim;
        let volume: f64 = h.iter().map(|x| 2.0 * x).product();
        self.point.copy_from_slice(c);
        let f0 = f(&self.point);
        let (mut s2, mut s3, mut s4, mut s5) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            self.point[i] = c[i] - LAMBDA2 * h[i];
            let a = f(&self.point);
            self.point[i] = c[i] + LAMBDA2 * h[i];
            let b = f(&self.point);
            self.point[i] = c[i] - LAMBDA4 * h[i];
            let a4 = f(&self.point);
            self.point[i] = c[i] + LAMBDA4 * h[i];
            let b4 = f(&self.point);
            self.point[i] = c[i];
            s2 += a + b;
            s3 += a4 + b4;
            self.diff[i] = ((a + b - 2.0 * f0) - RATIO * (a4 + b4 - 2.0 * f0)).abs();
        }
        for i in 0..n {
            for j in (i + 1)..n {
                for (si, sj) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                    self.point[i] = c[i] + si * LAMBDA4 * h[i];
                    self.point[j] = c[j] + sj * LAMBDA4 * h[j];
                    s4 += f(&self.point);
                }
                self.point[i] = c[i];
                self.point[j] = c[j];
            }
        }
        for mask in 0..(1usize << n) {
            for i in 0..n {
                let sign = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                self.point[i] = c[i] + sign * LAMBDA5 * h[i];
            }
            s5 += f(&self.point);
        }
        let w = &self.w;
        let we = &self.we;
        let value = volume * (w[0] * f0 + w[1] * s2 + w[2] * s3 + w[3] * s4 + w[4] * s5);
        let lower = volume * (we[0] * f0 + we[1] * s2 + we[2] * s3 + we[3] * s4);
        let error = (value - lower).abs();

        let mut split = 0;
        for i in 1..n {
            let (d, dbest) = (self.diff[i], self.diff[split]);
            if d > dbest * (1.0 + 1e-10) || (d >= dbest * (1.0 - 1e-10) && h[i] > h[split]) {
                split = i;
            }
        }
        (value, error, split)
    }
}

/// Adaptive integral of `f` over the box `[lower, upper]` (dimension ≥ 2).
pub fn cubature<F: FnMut(&[f64]) -> f64>(f: F, lower: &[f64], upper: &[f64], tol: Tolerance) -> Integral {
    cubature_regions(f, &[(lower.to_vec(), upper.to_vec())], tol)
}

/// Adaptive integral over a union of disjoint boxes sharing one error budget.
pub fn cubature_regions<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    boxes: &[(Vec<f64>, Vec<f64>)],
    tol: Tolerance,
) -> Integral {
    let dim = boxes.first().map(|b| b.0.len()).expect("at least one region");
    assert!(dim >= 2, "Genz–Malik cubature needs dimension >= 2");
    let mut rule = Rule::new(dim);
    let per_region = rule.points();
    let mut heap = BinaryHeap::new();
    let (mut value, mut error, mut evals) = (0.0, 0.0, 0usize);

    for (lo, hi) in boxes {
        assert_eq!(lo.len(), dim);
        assert_eq!(hi.len(), dim);
        if lo.iter().zip(hi).any(|(a, b)| b <= a) {
            continue;
        }
        let center: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
        let (v, e, split) = rule.eval(&mut f, &center, &half);
        evals += per_region;
        value += v;
        error += e;
        heap.push(ByError {
            error: e,
            item: Region {
                center,
                half,
                value: v,
                split,
            },
        });
    }

    while !tol.satisfied(value, error) && evals + 2 * per_region <= tol.max_evals {
        let Some(worst) = heap.pop() else { break };
        let region = worst.item;
        let axis = region.split;
        let quarter = 0.5 * region.half[axis];
        if region.center[axis] - quarter == region.center[axis] {
            heap.push(ByError {
                error: worst.error,
                item: region,
            });
            break;
        }
        value -= region.value;
        error -= worst.error;
        for sign in [-1.0, 1.0] {
            let mut center = region.center.clone();
            let mut half = region.half.clone();
            center[axis] += sign * quarter;
            half[axis] = quarter;
            let (v, e, split) = rule.eval(&mut f, &center, &half);
            value += v;
            error += e;
            heap.push(ByError {
                error: e,
                item: Region {
                    center,
                    half,
                    value: v,
                    split,
                },
            });
        }
        evals += 2 * per_region;
    }

    let (mut value, mut error) = (0.0, 0.0);
    for entry in heap.iter() {
        value += entry.item.value;
        error += entry.error;
    }
    Integral {
        value,
        error,
        evaluations: evals,
        converged: tol.satisfied(value, error),
    }
}
