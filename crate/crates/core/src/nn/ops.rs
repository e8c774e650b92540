use std::cmp::Ordering;

pub fn concat(parts: &[&[f64]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        out.extend_from_slice(p);
    }
    out
}

/// Splits a concatenated gradient back into pieces of the given lengths.
pub fn split(g: &[f64], lens: &[usize]) -> Vec<Vec<f64>> {
    let mut at = 0;
    lens.iter()
        .map(|&n| {
            let piece = g[at..at + n].to_vec();
            at += n;
            piece
        })
        .collect()
}

pub(crate) fn lex(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Sum of equal-length rows, accumulated in lexicographic row order so the
/// result is bit-identical under any permutation of `rows`. The gradient
/// of the sum with respect to every row is the upstream gradient itself.
pub fn sum_rows_canonical(rows: &[Vec<f64>], width: usize) -> Vec<f64> {
    let mut order: Vec<&Vec<f64>> = rows.iter().collect();
    order.sort_by(|a, b| lex(a, b));
    let mut out = vec![0.0; width];
    for r in order {
        debug_assert_eq!(r.len(), width);
        for (o, v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
    out
}
