use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numcore::squared_distance;

/// Largest possible `C(n, k)` that [`dispersion_exact`] will enumerate.
pub const EXACT_SUBSET_LIMIT: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DispersionMethod {
    Greedy,
    Exact,
}

impl fmt::Display for DispersionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DispersionMethod::Greedy => "greedy",
            DispersionMethod::Exact => "exact",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispersionResult {
    pub k: usize,
    /// Smallest pairwise distance inside `witness`.
    pub value: f64,
    pub witness: Vec<usize>,
    pub method: DispersionMethod,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

fn check_k(points: &[Vec<f64>], k: usize) -> Result<()> {
    if k < 2 || k > points.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 2..={}",
            points.len()
        )));
    }
    let d = points[0].len();
    points.iter().try_for_each(|p| crate::error::ensure_dim(d, p.len()))
}

/// Farthest-point order: the farthest pair first, then repeatedly the point
/// whose distance to the chosen set is largest. Ties go to the lower index.
/// Returns the order and, for each prefix length `j ≥ 2`, the minimum pairwise
/// distance of the first `j` points.
fn greedy_order(points: &[Vec<f64>], k: usize) -> (Vec<usize>, Vec<f64>) {
    let n = points.len();
    let (mut a, mut b, mut best) = (0, 1, f64::NEG_INFINITY);
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(&points[i], &points[j]);
            if d > best {
                (a, b, best) = (i, j, d);
            }
        }
    }
    let mut order = vec![a, b];
    let mut prefix_min = vec![f64::INFINITY, f64::INFINITY, best];
    let mut gap: Vec<f64> = points
        .iter()
        .map(|p| dist(p, &points[a]).min(dist(p, &points[b])))
        .collect();
    let mut taken = vec![false; n];
    taken[a] = true;
    taken[b] = true;
    while order.len() < k {
        let (mut next, mut far) = (usize::MAX, f64::NEG_INFINITY);
        for (i, &g) in gap.iter().enumerate() {
            if !taken[i] && g > far {
                (next, far) = (i, g);
            }
        }
        taken[next] = true;
        order.push(next);
        prefix_min.push(prefix_min.last().unwrap().min(far));
        for (i, g) in gap.iter_mut().enumerate() {
            if !taken[i] {
                *g = g.min(dist(&points[i], &points[next]));
            }
        }
    }
    (order, prefix_min)
}

/// Farthest-point greedy approximation of the `k`-dispersion, within a factor
/// of two of the optimum.
pub fn dispersion_greedy(points: &[Vec<f64>], k: usize) -> Result<DispersionResult> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("no points".into()));
    }
    check_k(points, k)?;
    let (order, prefix_min) = greedy_order(points, k);
    Ok(DispersionResult {
        k,
        value: prefix_min[k],
        witness: order,
        method: DispersionMethod::Greedy,
    })
}

/// Greedy dispersion for every `k` in `ks`, sharing one farthest-point pass.
pub fn dispersion_profile(points: &[Vec<f64>], ks: &[usize]) -> Result<Vec<DispersionResult>> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("no points".into()));
    }
    for &k in ks {
        check_k(points, k)?;
    }
    let Some(&kmax) = ks.iter().max() else {
        return Ok(Vec::new());
    };
    let (order, prefix_min) = greedy_order(points, kmax);
    Ok(ks
        .iter()
        .map(|&k| DispersionResult {
            k,
            value: prefix_min[k],
            witness: order[..k].to_vec(),
            method: DispersionMethod::Greedy,
        })
        .collect())
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| {
        acc.saturating_mul((n - i) as u128) / (i as u128 + 1)
    })
}

/// Exhaustive maximum over all `k`-subsets. Refuses when there are more than
/// [`EXACT_SUBSET_LIMIT`] of them.
pub fn dispersion_exact(points: &[Vec<f64>], k: usize) -> Result<DispersionResult> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("no points".into()));
    }
    check_k(points, k)?;
    let n = points.len();
    let subsets = binomial(n, k);
    if subsets > EXACT_SUBSET_LIMIT {
        return Err(Error::TooManySubsets(subsets));
    }
    let mut table = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            table[i * n + j] = dist(&points[i], &points[j]);
        }
    }

    struct Search<'a> {
        n: usize,
        k: usize,
        table: &'a [f64],
        chosen: Vec<usize>,
        best: f64,
        witness: Vec<usize>,
    }
    impl Search<'_> {
        fn go(&mut self, start: usize, current: f64) {
            if self.chosen.len() == self.k {
                if current > self.best {
                    self.best = current;
                    self.witness = self.chosen.clone();
                }
                return;
            }
            let need = self.k - self.chosen.len();
            for i in start..=self.n - need {
                let m = self
                    .chosen
                    .iter()
                    .map(|&c| self.table[c * self.n + i])
                    .fold(current, f64::min);
                // The minimum only shrinks as points are added.
                if m > self.best {
                    self.chosen.push(i);
                    self.go(i + 1, m);
                    self.chosen.pop();
                }
            }
        }
    }
    let mut s = Search {
        n,
        k,
        table: &table,
        chosen: Vec::with_capacity(k),
        best: f64::NEG_INFINITY,
        witness: Vec::new(),
    };
    s.go(0, f64::INFINITY);
    Ok(DispersionResult {
        k,
        value: s.best,
        witness: s.witness,
        method: DispersionMethod::Exact,
    })
}

/// `k,value,method` rows.
pub fn write_dispersion_csv<W: Write>(profile: &[DispersionResult], mut w: W) -> Result<()> {
    writeln!(w, "k,value,method")?;
    for r in profile {
        writeln!(w, "{},{:e},{}", r.k, r.value, r.method)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn min_pairwise(points: &[Vec<f64>], subset: &[usize]) -> f64 {
        let mut m = f64::INFINITY;
        for (a, &i) in subset.iter().enumerate() {
            for &j in &subset[a + 1..] {
                m = m.min(dist(&points[i], &points[j]));
            }
        }
        m
    }

    fn square() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]
    }

    #[test]
    fn unit_square_corners() {
        assert_eq!(dispersion_greedy(&square(), 4).unwrap().value, 1.0);
        assert_eq!(dispersion_exact(&square(), 3).unwrap().value, 1.0);
        assert_eq!(dispersion_exact(&square(), 2).unwrap().value, 2f64.sqrt());
    }

    #[test]
    fn collinear_pair() {
        let line: Vec<Vec<f64>> = (0..7).map(|i| vec![f64::from(i)]).collect();
        let g = dispersion_greedy(&line, 2).unwrap();
        let e = dispersion_exact(&line, 2).unwrap();
        assert_eq!((g.value, e.value), (6.0, 6.0));
        assert_eq!(g.witness, vec![0, 6]);
    }

    #[test]
    fn cluster_collapses() {
        let mut pts: Vec<Vec<f64>> = (0..3).map(|i| vec![f64::from(i)]).collect();
        pts.extend((0..5).map(|i| vec![1e-9 * f64::from(i)]));
        let profile = dispersion_profile(&pts, &[2, 3, 4, 5]).unwrap();
        assert!(profile[1].value >= 1.0);
        assert!(profile[3].value < 1e-8);
    }

    #[test]
    fn range_and_guard() {
        assert!(dispersion_greedy(&square(), 1).is_err());
        assert!(dispersion_greedy(&square(), 5).is_err());
        let many: Vec<Vec<f64>> = (0..60).map(|i| vec![f64::from(i)]).collect();
        assert!(matches!(dispersion_exact(&many, 10), Err(Error::TooManySubsets(_))));
        assert_eq!(binomial(12, 6), 924);
    }

    #[test]
    fn csv_rows() {
        let p = dispersion_profile(&square(), &[2]).unwrap();
        let mut out = Vec::new();
        write_dispersion_csv(&p, &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("k,value,method\n2,1.414"));
    }

    fn point_sets() -> impl Strategy<Value = (Vec<Vec<f64>>, usize)> {
        (3usize..=12).prop_flat_map(|n| {
            (
                proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 2), n),
                2usize..=n.min(6),
            )
        })
    }

    proptest! {
        #[test]
        fn greedy_within_factor_two((pts, k) in point_sets()) {
            let g = dispersion_greedy(&pts, k).unwrap();
            let e = dispersion_exact(&pts, k).unwrap();
            prop_assert!(e.value >= g.value);
            prop_assert!(g.value >= 0.5 * e.value);
            prop_assert_eq!(g.value, min_pairwise(&pts, &g.witness));
            prop_assert_eq!(e.value, min_pairwise(&pts, &e.witness));
        }

        #[test]
        fn exact_matches_brute_force((pts, k) in point_sets()) {
            fn subsets(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                if cur.len() == k { out.push(cur.clone()); return; }
                for i in start..n { cur.push(i); subsets(n, k, i + 1, cur, out); cur.pop(); }
            }
            let mut all = Vec::new();
            subsets(pts.len(), k, 0, &mut Vec::new(), &mut all);
            let brute = all.iter().map(|s| min_pairwise(&pts, s)).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(dispersion_exact(&pts, k).unwrap().value, brute);
        }

        #[test]
        fn profile_nonincreasing((pts, _) in point_sets()) {
            let ks: Vec<usize> = (2..=pts.len()).collect();
            let p = dispersion_profile(&pts, &ks).unwrap();
            for w in p.windows(2) {
                prop_assert!(w[1].value <= w[0].value);
            }
            prop_assert_eq!(p[0].value, dispersion_exact(&pts, 2).unwrap().value);
        }
    }
}
