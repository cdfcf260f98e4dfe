use crate::error::{Error, Result};

/// Mean and sample standard deviation (`n − 1` denominator; 0 for one value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Ranks starting at 1, with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation: Pearson correlation of the average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument(
            "spearman needs two equally long series of at least 2 values".into(),
        ));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let (ma, _) = mean_std(&ra);
    let (mb, _) = mean_std(&rb);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::InvalidArgument("spearman of a constant series".into()));
    }
    Ok(cov / (va * vb).sqrt())
}

/// Means of `windows` consecutive, equally long chunks (a trailing remainder
/// joins the last chunk).
pub fn windowed_means(series: &[f64], windows: usize) -> Vec<f64> {
    if windows == 0 || series.len() < windows {
        return Vec::new();
    }
    let w = series.len() / windows;
    (0..windows)
        .map(|i| {
            let end = if i + 1 == windows { series.len() } else { (i + 1) * w };
            mean_std(&series[i * w..end]).0
        })
        .collect()
}

/// Whether every window mean is strictly below the previous one.
pub fn windowed_mean_decreasing(series: &[f64], windows: usize) -> bool {
    let m = windowed_means(series, windows);
    m.len() >= 2 && m.windows(2).all(|p| p[1] < p[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 35.0, 90.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn windows() {
        assert_eq!(windowed_means(&[4.0, 2.0, 3.0, 1.0, 0.0], 2), vec![3.0, 4.0 / 3.0]);
        assert!(windowed_mean_decreasing(&[5.0, 6.0, 3.0, 4.0, 1.0, 2.0], 3));
        assert!(!windowed_mean_decreasing(&[1.0, 2.0, 3.0], 3));
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
    }
}
