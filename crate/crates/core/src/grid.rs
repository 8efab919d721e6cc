//! Dense row-major tensor grids (last axis fastest) and their cumulative sums.

use std::ops::AddAssign;

/// Number of cells, or `None` on overflow.
pub fn cell_count(shape: &[usize]) -> Option<usize> {
    shape.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n))
}

pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for a in (0..shape.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    strides
}

pub fn flat_index(strides: &[usize], index: &[usize]) -> usize {
    index.iter().zip(strides).map(|(i, s)| i * s).sum()
}

/// Turns cell weights into lower-orthant sums: afterwards `cells[i]` is the
/// total weight of all cells `j ⪯ i`.
pub fn cumulate<T: Copy + AddAssign>(shape: &[usize], cells: &mut [T]) {
    let strides = strides(shape);
    for (axis, &len) in shape.iter().enumerate() {
        let stride = strides[axis];
        let outer = cells.len() / (len * stride).max(1);
        for o in 0..outer {
            let base = o * len * stride;
            for k in 1..len {
                let (prev, cur) = cells[base + (k - 1) * stride..base + (k + 1) * stride].split_at_mut(stride);
                for (c, p) in cur.iter_mut().zip(prev.iter()) {
                    *c += *p;
                }
            }
        }
    }
}

/// Calls `f` with every multi-index of `shape` in row-major order.
pub fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize])) {
    if shape.iter().any(|&n| n == 0) {
        return;
    }
    let mut idx = vec![0usize; shape.len()];
    loop {
        f(&idx);
        let mut axis = shape.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < shape[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulate_matches_brute_force() {
        let shape = [3, 2, 4];
        let n = cell_count(&shape).unwrap();
        let weights: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64).collect();
        let mut cum = weights.clone();
        cumulate(&shape, &mut cum);
        let st = strides(&shape);
        for_each_index(&shape, |i| {
            let mut expect = 0.0;
            for_each_index(&shape, |j| {
                if j.iter().zip(i).all(|(a, b)| a <= b) {
                    expect += weights[flat_index(&st, j)];
                }
            });
            assert_eq!(cum[flat_index(&st, i)], expect);
        });
    }

    #[test]
    fn odometer_visits_everything_once() {
        let mut seen = Vec::new();
        for_each_index(&[2, 3], |i| seen.push(i.to_vec()));
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![0, 0]);
        assert_eq!(seen[5], vec![1, 2]);
    }
}
