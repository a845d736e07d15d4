//! Adjusted mutual information with the exact hypergeometric expectation.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Counts between two labelings, rows indexed by the distinct values of the
/// first and columns by those of the second, both in sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<usize>>,
    pub row_sums: Vec<usize>,
    pub col_sums: Vec<usize>,
    pub n: usize,
}

impl ContingencyTable {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::shape("contingency labels", a.len(), b.len()));
        }
        if a.is_empty() {
            return Err(Error::Empty("ami"));
        }
        let index = |v: &[usize]| -> BTreeMap<usize, usize> {
            let keys: BTreeSet<usize> = v.iter().copied().collect();
            keys.into_iter().enumerate().map(|(i, k)| (k, i)).collect()
        };
        let (ia, ib) = (index(a), index(b));
        let mut counts = vec![vec![0; ib.len()]; ia.len()];
        for (x, y) in a.iter().zip(b) {
            counts[ia[x]][ib[y]] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..ib.len()).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            n: a.len(),
        })
    }

    pub fn mutual_information(&self) -> f64 {
        let n = self.n as f64;
        let mut mi = 0.0;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c > 0 {
                    let c = c as f64;
                    mi += c / n * (n * c / (self.row_sums[i] as f64 * self.col_sums[j] as f64)).ln();
                }
            }
        }
        mi.max(0.0)
    }

    /// Expected mutual information under random labelings with these
    /// marginals, summed exactly over the hypergeometric support.
    pub fn expected_mutual_information(&self) -> f64 {
        let n = self.n;
        let lf = log_factorials(n);
        let nf = n as f64;
        let mut emi = 0.0;
        for &a in &self.row_sums {
            for &b in &self.col_sums {
                let lo = (a + b).saturating_sub(n).max(1);
                let hi = a.min(b);
                let fixed = lf[a] + lf[b] + lf[n - a] + lf[n - b] - lf[n];
                for nij in lo..=hi {
                    let x = nij as f64;
                    let term = x / nf * (nf * x / (a as f64 * b as f64)).ln();
                    let logp = fixed - lf[nij] - lf[a - nij] - lf[b - nij] - lf[n + nij - a - b];
                    emi += term * logp.exp();
                }
            }
        }
        emi
    }
}

fn log_factorials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0; n + 1];
    for i in 1..=n {
        lf[i] = lf[i - 1] + (i as f64).ln();
    }
    lf
}

pub fn label_entropy(sums: &[usize], n: usize) -> f64 {
    let n = n as f64;
    -sums
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ami {
    pub value: f64,
    /// Set when either labeling is a single cluster and the score is
    /// defined as 0.
    pub degenerate: bool,
}

/// `(MI - E[MI]) / (max(H_a, H_b) - E[MI])`.
pub fn ami(a: &[usize], b: &[usize]) -> Result<Ami> {
    let t = ContingencyTable::new(a, b)?;
    let (ra, cb) = (t.row_sums.len(), t.col_sums.len());
    if ra == 1 || cb == 1 {
        return Ok(Ami {
            value: 0.0,
            degenerate: true,
        });
    }
    // identical partitions up to relabeling
    let one_per_row = t.counts.iter().all(|r| r.iter().filter(|&&c| c > 0).count() == 1);
    if ra == cb && one_per_row {
        return Ok(Ami {
            value: 1.0,
            degenerate: false,
        });
    }
    let mi = t.mutual_information();
    let emi = t.expected_mutual_information();
    let h = label_entropy(&t.row_sums, t.n).max(label_entropy(&t.col_sums, t.n));
    let denom = h - emi;
    if denom.abs() < 1e-15 {
        return Ok(Ami {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Ami {
        value: (mi - emi) / denom,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::{prop_assert, proptest};
    use rand::Rng;

    fn heap_permutations(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            out.push(v.clone());
            return;
        }
        for i in 0..k {
            heap_permutations(v, k - 1, out);
            let j = if k % 2 == 0 { i } else { 0 };
            v.swap(j, k - 1);
        }
    }

    /// Mean MI over every permutation of the second labeling.
    fn brute_force_emi(a: &[usize], b: &[usize]) -> f64 {
        let mut perms = Vec::new();
        heap_permutations(&mut b.to_vec(), b.len(), &mut perms);
        let total: f64 = perms
            .iter()
            .map(|p| ContingencyTable::new(a, p).unwrap().mutual_information())
            .sum();
        total / perms.len() as f64
    }

    #[test]
    fn identical_and_relabelled_partitions_score_one() {
        let a = [0, 0, 1, 1, 2, 3, 3];
        assert_eq!(ami(&a, &a).unwrap().value, 1.0);
        let b = [7, 7, 2, 2, 9, 0, 0];
        assert_eq!(ami(&a, &b).unwrap().value, 1.0);
    }

    #[test]
    fn four_point_example_matches_brute_force() {
        let t = [0, 0, 1, 1];
        let p = [0, 1, 0, 1];
        let table = ContingencyTable::new(&p, &t).unwrap();
        assert_eq!(table.mutual_information(), 0.0);
        let emi = table.expected_mutual_information();
        let brute = brute_force_emi(&p, &t);
        assert!((emi - brute).abs() < 1e-10, "{emi} vs {brute}");
        // closed form: a third of permutations reproduce the split, MI = ln 2
        assert!((brute - 2f64.ln() / 3.0).abs() < 1e-12);
        let score = ami(&p, &t).unwrap().value;
        let expected = -emi / (2f64.ln() - emi);
        assert!((score - expected).abs() < 1e-12 && score < 0.0);
    }

    #[test]
    fn expected_mi_matches_brute_force_on_small_tables() {
        let mut rng = stream(9, "t", &[]);
        for _ in 0..20 {
            let n = rng.random_range(3..8);
            let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let emi = ContingencyTable::new(&a, &b).unwrap().expected_mutual_information();
            assert!((emi - brute_force_emi(&a, &b)).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_cases() {
        let r = ami(&[1, 1, 1], &[0, 0, 0]).unwrap();
        assert!(r.degenerate && r.value == 0.0);
        let r = ami(&[0, 0, 0, 0], &[0, 1, 2, 3]).unwrap();
        assert!(r.value.abs() < 1e-12);
        assert!(ami(&[], &[]).is_err());
        assert!(ami(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn random_labelings_score_near_zero() {
        for seed in 0..20 {
            let mut rng = stream(seed, "t", &[]);
            let a: Vec<usize> = (0..480).map(|_| rng.random_range(0..4)).collect();
            let b: Vec<usize> = (0..480).map(|_| rng.random_range(0..4)).collect();
            assert!(ami(&a, &b).unwrap().value.abs() < 0.05);
        }
    }

    proptest! {
        #[test]
        fn symmetric_and_permutation_invariant(
            pairs in proptest::collection::vec((0usize..4, 0usize..4), 2..40),
            shift in 1usize..4,
        ) {
            let a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let ab = ami(&a, &b).unwrap().value;
            let ba = ami(&b, &a).unwrap().value;
            prop_assert!((ab - ba).abs() < 1e-12);
            let relabel: Vec<usize> = a.iter().map(|x| (x + shift) % 4).collect();
            prop_assert!((ami(&relabel, &b).unwrap().value - ab).abs() < 1e-12);
            prop_assert!(ab <= 1.0 + 1e-12);
        }
    }
}
