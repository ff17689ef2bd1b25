//! Local extrema of a 1-D series.
//!
//! A run of equal values is a local minimum when every existing neighbour of
//! the run is strictly greater; it is reported at the first frame of the run.
//! Endpoint runs only need their single neighbour to qualify. A series that is
//! one constant run has no extrema.

fn runs(values: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] != values[start] {
            out.push((start, i));
            start = i;
        }
    }
    out
}

fn extrema(values: &[f64], better: impl Fn(f64, f64) -> bool) -> Vec<usize> {
    let runs = runs(values);
    if runs.len() < 2 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (k, &(start, _)) in runs.iter().enumerate() {
        let v = values[start];
        let left_ok = k == 0 || better(v, values[runs[k - 1].0]);
        let right_ok = k + 1 == runs.len() || better(v, values[runs[k + 1].0]);
        if left_ok && right_ok {
            out.push(start);
        }
    }
    out
}

/// Indices of local minima in ascending order.
pub fn local_minima(values: &[f64]) -> Vec<usize> {
    extrema(values, |v, n| v < n)
}

/// Indices of local maxima in ascending order.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    extrema(values, |v, n| v > n)
}

/// First index of the largest value in the open interval `(lo, hi)`.
pub fn argmax_open(values: &[f64], lo: usize, hi: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in lo + 1..hi.min(values.len()) {
        match best {
            Some(b) if values[i] <= values[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_minima() {
        assert_eq!(local_minima(&[0.0, 1.0, 0.5, 2.0, 1.0]), vec![0, 2, 4]);
        assert_eq!(local_maxima(&[0.0, 1.0, 0.5, 2.0, 1.0]), vec![1, 3]);
    }

    #[test]
    fn plateau_takes_first_frame() {
        assert_eq!(local_minima(&[3.0, 1.0, 1.0, 1.0, 2.0]), vec![1]);
        // a shelf that is not a valley is not a minimum
        assert_eq!(local_minima(&[3.0, 2.0, 2.0, 1.0, 4.0]), vec![3]);
        assert_eq!(local_minima(&[1.0, 1.0, 2.0]), vec![0]);
    }

    #[test]
    fn constant_and_short_series() {
        assert!(local_minima(&[]).is_empty());
        assert!(local_minima(&[1.0]).is_empty());
        assert!(local_minima(&[2.0, 2.0, 2.0]).is_empty());
        assert_eq!(local_minima(&[2.0, 1.0]), vec![1]);
    }

    #[test]
    fn argmax_open_interval() {
        let v = [0.0, 5.0, 7.0, 7.0, 1.0];
        assert_eq!(argmax_open(&v, 0, 4), Some(2));
        assert_eq!(argmax_open(&v, 2, 3), None);
        assert_eq!(argmax_open(&v, 3, 10), Some(4));
    }
}
