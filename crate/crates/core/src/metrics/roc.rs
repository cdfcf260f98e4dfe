use std::io::Write;

use serde::Serialize;

use crate::datalab::Membership;
use crate::error::{Error, Result};

/// ROC of the rule "member iff loss < threshold".
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RocReport {
    /// `(false positive rate, true positive rate)` in increasing threshold order.
    pub points: Vec<(f64, f64)>,
    /// Threshold of each point: `−∞`, every distinct loss, `+∞`.
    #[serde(skip)]
    pub thresholds: Vec<f64>,
    pub auc: f64,
    pub num_positive: usize,
    pub num_negative: usize,
}

/// Sweeps the threshold over `−∞`, each distinct loss and `+∞`; equal losses
/// move together, so the trapezoidal area gives tied pairs half credit.
pub fn roc_and_auc(losses: &[f64], labels: &[Membership]) -> Result<RocReport> {
    if losses.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: losses.len(),
            got: labels.len(),
        });
    }
    if let Some(l) = losses.iter().find(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument(format!("loss {l} is not finite")));
    }
    let pos = labels.iter().filter(|l| l.is_member()).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass {
            members: pos,
            nonmembers: neg,
        });
    }

    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::NEG_INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let v = losses[order[i]];
        // Nothing at or above v is predicted a member yet.
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        thresholds.push(v);
        while i < order.len() && losses[order[i]] == v {
            if labels[order[i]].is_member() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
    }
    points.push((1.0, 1.0));
    thresholds.push(f64::INFINITY);

    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * 0.5)
        .sum();
    Ok(RocReport {
        points,
        thresholds,
        auc,
        num_positive: pos,
        num_negative: neg,
    })
}

impl RocReport {
    /// `threshold,fpr,tpr` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "threshold,fpr,tpr")?;
        for (t, (fpr, tpr)) in self.thresholds.iter().zip(&self.points) {
            let t = if t.is_infinite() {
                if *t > 0.0 { "inf".to_string() } else { "-inf".to_string() }
            } else {
                format!("{t:e}")
            };
            writeln!(w, "{t},{fpr},{tpr}")?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "auc": self.auc,
            "num_positive": self.num_positive,
            "num_negative": self.num_negative,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Membership::{Member as M, Nonmember as N};

    /// Pairwise Mann-Whitney statistic with half credit for ties.
    pub(crate) fn mann_whitney(losses: &[f64], labels: &[Membership]) -> f64 {
        let (mut s, mut pairs) = (0.0, 0usize);
        for (lm, _) in losses.iter().zip(labels).filter(|(_, l)| l.is_member()) {
            for (ln, _) in losses.iter().zip(labels).filter(|(_, l)| !l.is_member()) {
                pairs += 1;
                if lm < ln {
                    s += 1.0;
                } else if lm == ln {
                    s += 0.5;
                }
            }
        }
        s / pairs as f64
    }

    #[test]
    fn perfect_separation() {
        let r = roc_and_auc(&[0.0, 0.0, 1.0, 1.0], &[M, M, N, N]).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.points, vec![(0.0, 0.0), (0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
    }

    #[test]
    fn identical_losses_give_half() {
        let r = roc_and_auc(&[0.3; 6], &[M, N, N, M, N, M]).unwrap();
        assert_eq!(r.auc, 0.5);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(matches!(
            roc_and_auc(&[0.1, 0.2], &[M, M]),
            Err(Error::SingleClass { members: 2, nonmembers: 0 })
        ));
        assert!(roc_and_auc(&[0.1, f64::NAN], &[M, N]).is_err());
    }

    #[test]
    fn csv_and_summary() {
        let r = roc_and_auc(&[0.5, 1.0], &[M, N]).unwrap();
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "threshold,fpr,tpr\n-inf,0,0\n5e-1,0,0\n1e0,0,1\ninf,1,1\n"
        );
        assert_eq!(r.summary_json()["auc"], 1.0);
    }

    fn cases() -> impl Strategy<Value = (Vec<f64>, Vec<Membership>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec((0u8..8).prop_map(|v| f64::from(v) * 0.125), n),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_filter_map("needs both classes", |(l, m)| {
                    let labels: Vec<Membership> = m.iter().map(|&b| if b { M } else { N }).collect();
                    (m.contains(&true) && m.contains(&false)).then_some((l, labels))
                })
        })
    }

    proptest! {
        #[test]
        fn trapezoid_equals_mann_whitney((losses, labels) in cases()) {
            let r = roc_and_auc(&losses, &labels).unwrap();
            prop_assert!((r.auc - mann_whitney(&losses, &labels)).abs() <= 1e-12);
        }

        #[test]
        fn curve_shape((losses, labels) in cases()) {
            let r = roc_and_auc(&losses, &labels).unwrap();
            prop_assert_eq!(r.points[0], (0.0, 0.0));
            prop_assert_eq!(*r.points.last().unwrap(), (1.0, 1.0));
            for w in r.points.windows(2) {
                prop_assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
            }
        }

        #[test]
        fn flipping_labels_complements((losses, labels) in cases()) {
            let flipped: Vec<Membership> = labels.iter().map(|l| l.flipped()).collect();
            let a = roc_and_auc(&losses, &labels).unwrap().auc;
            let b = roc_and_auc(&losses, &flipped).unwrap().auc;
            prop_assert!((a + b - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn positive_scaling_is_invisible((losses, labels) in cases(), c in 1e-3f64..1e3) {
            let scaled: Vec<f64> = losses.iter().map(|l| l * c).collect();
            let a = roc_and_auc(&losses, &labels).unwrap();
            let b = roc_and_auc(&scaled, &labels).unwrap();
            prop_assert_eq!(a.points, b.points);
            prop_assert_eq!(a.auc, b.auc);
        }
    }
}
