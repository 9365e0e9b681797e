//! Clustering criteria: NMI, ACC (Hungarian matching), adjusted Rand index and
//! pairwise precision / recall / F-score.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts of samples per (true class, predicted cluster) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub n: u64,
}

impl ContingencyTable {
    pub fn new(truth: &[usize], pred: &[usize]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::dims("label vectors", truth.len(), pred.len()));
        }
        let index = |labels: &[usize]| {
            let ids: BTreeMap<usize, usize> = labels
                .iter()
                .copied()
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .enumerate()
                .map(|(i, l)| (l, i))
                .collect();
            ids
        };
        let rows = index(truth);
        let cols = index(pred);
        let mut counts = vec![vec![0u64; cols.len()]; rows.len()];
        for (t, p) in truth.iter().zip(pred) {
            counts[rows[t]][cols[p]] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..cols.len())
            .map(|j| counts.iter().map(|r| r[j]).sum())
            .collect();
        Ok(ContingencyTable {
            counts,
            row_sums,
            col_sums,
            n: truth.len() as u64,
        })
    }
}

fn entropy(marginals: &[u64], n: f64) -> f64 {
    marginals
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// How mutual information is normalized in [`nmi_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmiNormalization {
    #[default]
    Sqrt,
    Max,
    Mean,
}

pub fn nmi(truth: &[usize], pred: &[usize]) -> Result<f64> {
    nmi_with(truth, pred, NmiNormalization::Sqrt)
}

/// Normalized mutual information (natural log). Two single-cluster partitions
/// score 1; a single-cluster partition against a non-trivial one scores 0.
pub fn nmi_with(truth: &[usize], pred: &[usize], norm: NmiNormalization) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::InvalidArgument("empty label vectors".into()));
    }
    let t = ContingencyTable::new(truth, pred)?;
    let n = t.n as f64;
    let hu = entropy(&t.row_sums, n);
    let hv = entropy(&t.col_sums, n);
    if hu == 0.0 && hv == 0.0 {
        return Ok(1.0);
    }
    if hu == 0.0 || hv == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in t.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (n * c / (t.row_sums[i] as f64 * t.col_sums[j] as f64)).ln();
            }
        }
    }
    let denom = match norm {
        NmiNormalization::Sqrt => (hu * hv).sqrt(),
        NmiNormalization::Max => hu.max(hv),
        NmiNormalization::Mean => 0.5 * (hu + hv),
    };
    Ok((mi / denom).clamp(0.0, 1.0))
}

/// Minimum-cost perfect assignment on a square cost matrix (Kuhn-Munkres with
/// potentials). Returns `assignment[row] = column`.
pub fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    assert!(
        cost.iter().all(|r| r.len() == n),
        "cost matrix must be square"
    );
    // 1-based arrays; column 0 is a sentinel
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Fraction of samples correctly labeled under the best one-to-one mapping
/// between predicted clusters and true classes.
pub fn acc(truth: &[usize], pred: &[usize]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::InvalidArgument("empty label vectors".into()));
    }
    let t = ContingencyTable::new(truth, pred)?;
    let size = t.counts.len().max(t.col_sums.len());
    let max = t.n as i64;
    let cost: Vec<Vec<i64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| {
                    let c = t.counts.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0);
                    max - c as i64
                })
                .collect()
        })
        .collect();
    let assignment = hungarian(&cost);
    let matched: i64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| max - cost[i][j])
        .sum();
    Ok(matched as f64 / t.n as f64)
}

fn choose2(x: u64) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

struct PairCounts {
    both: f64,
    truth_same: f64,
    pred_same: f64,
    total: f64,
}

fn pair_counts(truth: &[usize], pred: &[usize]) -> Result<(PairCounts, ContingencyTable)> {
    let t = ContingencyTable::new(truth, pred)?;
    if t.n < 2 {
        return Err(Error::InvalidArgument(
            "pair-counting metrics need at least two samples".into(),
        ));
    }
    let pc = PairCounts {
        both: t.counts.iter().flatten().map(|&c| choose2(c)).sum(),
        truth_same: t.row_sums.iter().map(|&c| choose2(c)).sum(),
        pred_same: t.col_sums.iter().map(|&c| choose2(c)).sum(),
        total: choose2(t.n),
    };
    Ok((pc, t))
}

/// Adjusted Rand index. When the expected and maximum indices coincide the
/// score is 1 for identical partitions and 0 otherwise.
pub fn adjusted_rand(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let (pc, table) = pair_counts(truth, pred)?;
    let expected = pc.truth_same * pc.pred_same / pc.total;
    let max_index = 0.5 * (pc.truth_same + pc.pred_same);
    let denom = max_index - expected;
    if denom == 0.0 {
        let identical = table.counts.len() == table.col_sums.len()
            && table
                .counts
                .iter()
                .all(|row| row.iter().filter(|&&c| c > 0).count() == 1);
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    Ok((pc.both - expected) / denom)
}

/// Pairwise `(precision, recall, fscore)` over all sample pairs.
pub fn pairwise_prf(truth: &[usize], pred: &[usize]) -> Result<(f64, f64, f64)> {
    let (pc, _) = pair_counts(truth, pred)?;
    let precision = if pc.pred_same > 0.0 {
        pc.both / pc.pred_same
    } else {
        1.0
    };
    let recall = if pc.truth_same > 0.0 {
        pc.both / pc.truth_same
    } else {
        1.0
    };
    let fscore = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok((precision, recall, fscore))
}

/// The six criteria for one labeling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub nmi: f64,
    pub acc: f64,
    pub ar: f64,
    pub fscore: f64,
    pub precision: f64,
    pub recall: f64,
}

impl MetricsReport {
    pub fn compute(truth: &[usize], pred: &[usize]) -> Result<Self> {
        let (precision, recall, fscore) = pairwise_prf(truth, pred)?;
        Ok(MetricsReport {
            nmi: nmi(truth, pred)?,
            acc: acc(truth, pred)?,
            ar: adjusted_rand(truth, pred)?,
            fscore,
            precision,
            recall,
        })
    }

    fn values(&self) -> [f64; 6] {
        [
            self.nmi,
            self.acc,
            self.ar,
            self.fscore,
            self.precision,
            self.recall,
        ]
    }

    fn from_values(v: [f64; 6]) -> Self {
        MetricsReport {
            nmi: v[0],
            acc: v[1],
            ar: v[2],
            fscore: v[3],
            precision: v[4],
            recall: v[5],
        }
    }
}

/// Mean and population standard deviation of each criterion across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub nmi: f64,
    pub acc: f64,
    pub ar: f64,
    pub fscore: f64,
    pub precision: f64,
    pub recall: f64,
    pub nmi_std: f64,
    pub acc_std: f64,
    pub ar_std: f64,
    pub fscore_std: f64,
    pub precision_std: f64,
    pub recall_std: f64,
}

impl MetricsSummary {
    pub fn mean(&self) -> MetricsReport {
        MetricsReport::from_values([
            self.nmi,
            self.acc,
            self.ar,
            self.fscore,
            self.precision,
            self.recall,
        ])
    }

    pub fn std(&self) -> MetricsReport {
        MetricsReport::from_values([
            self.nmi_std,
            self.acc_std,
            self.ar_std,
            self.fscore_std,
            self.precision_std,
            self.recall_std,
        ])
    }

    fn from_parts(mean: MetricsReport, std: MetricsReport) -> Self {
        MetricsSummary {
            nmi: mean.nmi,
            acc: mean.acc,
            ar: mean.ar,
            fscore: mean.fscore,
            precision: mean.precision,
            recall: mean.recall,
            nmi_std: std.nmi,
            acc_std: std.acc,
            ar_std: std.ar,
            fscore_std: std.fscore,
            precision_std: std.precision,
            recall_std: std.recall,
        }
    }
}

/// Summarizes per-run reports with Welford's running mean and variance.
pub fn summarize(reports: &[MetricsReport]) -> Result<MetricsSummary> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no runs to summarize".into()));
    }
    let mut mean = [0.0; 6];
    let mut m2 = [0.0; 6];
    for (k, r) in reports.iter().enumerate() {
        let count = (k + 1) as f64;
        for (i, x) in r.values().into_iter().enumerate() {
            let delta = x - mean[i];
            mean[i] += delta / count;
            m2[i] += delta * (x - mean[i]);
        }
    }
    let n = reports.len() as f64;
    let std = m2.map(|v| (v / n).max(0.0).sqrt());
    Ok(MetricsSummary::from_parts(
        MetricsReport::from_values(mean),
        MetricsReport::from_values(std),
    ))
}

pub fn evaluate_runs<L: AsRef<[usize]>>(runs: &[L], truth: &[usize]) -> Result<MetricsSummary> {
    let reports = runs
        .iter()
        .map(|r| MetricsReport::compute(truth, r.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    summarize(&reports)
}

impl AsRef<[usize]> for crate::spectral::ClusterAssignment {
    fn as_ref(&self) -> &[usize] {
        &self.labels
    }
}
