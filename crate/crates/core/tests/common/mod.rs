//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use linekit::mc_sensitivity::ErrorBoxes;
use linekit::{Complex64 as C, LineSet};
use nalgebra::Matrix2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_c(rng: &mut ChaCha8Rng, scale: f64) -> C {
    C::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

/// Well-conditioned boxes with unit diagonal.
pub fn random_boxes(rng: &mut ChaCha8Rng) -> ErrorBoxes {
    let mut m = || Matrix2::new(C::new(1.0, 0.0), random_c(rng, 0.4), random_c(rng, 0.4), C::new(1.0, 0.0));
    let a = m();
    let b = m();
    ErrorBoxes { a, b, k: C::new(0.8, 0.3) }
}

/// Thru plus `n − 1` random lengths up to 8 mm.
pub fn random_lines(rng: &mut ChaCha8Rng, n: usize) -> LineSet {
    let mut l: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..8e-3)).collect();
    l[0] = 0.0;
    LineSet::new(l).unwrap()
}

/// Exhaustive 0.05 cm search over 0 < l2 < l3 < 6 cm with ends at 0 and 6 cm.
pub fn grid_search(loss: impl Fn(&LineSet) -> f64) -> (f64, (f64, f64)) {
    let mut best = (f64::INFINITY, (0.0, 0.0));
    for a in 1..120 {
        for b in (a + 1)..120 {
            let (l2, l3) = (a as f64 * 0.05, b as f64 * 0.05);
            let v = loss(&LineSet::from_cm(&[0.0, l2, l3, 6.0]).unwrap());
            if v < best.0 {
                best = (v, (l2, l3));
            }
        }
    }
    best
}

/// Shortest length of an order-`n` Golomb ruler, by depth-first search.
pub fn shortest_golomb(n: usize) -> u32 {
    fn extend(marks: &mut Vec<u32>, used: &mut [bool], n: usize, len: u32) -> bool {
        if marks.len() == n {
            return *marks.last().unwrap() == len;
        }
        let last = *marks.last().unwrap();
        for next in last + 1..=len {
            let diffs: Vec<u32> = marks.iter().map(|m| next - m).collect();
            // diffs from one new mark are distinct, so only clashes with
            // earlier differences matter
            if diffs.iter().any(|&d| used[d as usize]) {
                continue;
            }
            for &d in &diffs {
                used[d as usize] = true;
            }
            marks.push(next);
            let found = extend(marks, used, n, len);
            marks.pop();
            for &d in &diffs {
                used[d as usize] = false;
            }
            if found {
                return true;
            }
        }
        false
    }
    (0..)
        .find(|&len| {
            let mut used = vec![false; len as usize + 1];
            extend(&mut vec![0], &mut used, n, len)
        })
        .unwrap()
}
