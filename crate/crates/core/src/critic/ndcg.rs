//! Ranking-quality metrics.

use crate::util::cmp_desc;

/// NDCG@k with linear gain and 1/log2(i+1) discount (i is 1-based).
/// `predicted_order` lists item indices best first. An all-zero ideal
/// ranking scores 1.0.
pub fn ndcg_at_k(predicted_order: &[usize], gains: &[f64], k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    let dcg = |order: &mut dyn Iterator<Item = f64>| -> f64 {
        order
            .take(k)
            .enumerate()
            .map(|(i, g)| g / ((i + 2) as f64).log2())
            .sum()
    };
    let actual = dcg(&mut predicted_order.iter().map(|&i| gains[i]));
    let mut ideal: Vec<f64> = gains.to_vec();
    ideal.sort_by(|a, b| cmp_desc(*a, *b));
    let best = dcg(&mut ideal.into_iter());
    if best == 0.0 {
        1.0
    } else {
        actual / best
    }
}

/// Indices sorted by descending score; ties keep the lower index first.
pub fn order_by_score(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| cmp_desc(scores[a], scores[b]).then(a.cmp(&b)));
    idx
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let order = order_by_score(xs);
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &o in &order[i..=j] {
            r[o] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (average ranks for ties); 0 when undefined.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va.sqrt() * vb.sqrt())
    }
}

/// Fraction of strictly ordered gain pairs whose scores agree in order.
pub fn pairwise_accuracy(scores: &[f64], gains: &[f64]) -> Option<f64> {
    let mut total = 0usize;
    let mut right = 0usize;
    for i in 0..gains.len() {
        for j in 0..gains.len() {
            if gains[i] > gains[j] {
                total += 1;
                if scores[i] > scores[j] {
                    right += 1;
                }
            }
        }
    }
    (total > 0).then(|| right as f64 / total as f64)
}
