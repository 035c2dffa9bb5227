//! Counting and ranking of k-subsets in lexicographic order.

/// `n choose k`, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Lexicographic rank of a strictly increasing `k`-tuple over `0..m`.
pub fn rank_combination(indices: &[usize], m: usize) -> usize {
    let k = indices.len();
    let mut rank = 0u64;
    let mut prev = 0usize;
    for (pos, &c) in indices.iter().enumerate() {
        for skipped in prev..c {
            rank += binomial(m - skipped - 1, k - pos - 1);
        }
        prev = c + 1;
    }
    rank as usize
}

/// Inverse of [`rank_combination`]: the `rank`-th `k`-tuple over `0..m`.
pub fn unrank_combination(mut rank: u64, m: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut c = 0;
    while out.len() < k {
        let left = k - out.len() - 1;
        let block = binomial(m - c - 1, left);
        if rank < block {
            out.push(c);
        } else {
            rank -= block;
        }
        c += 1;
    }
    out
}

/// Advances `comb` to its lexicographic successor; `false` after the last.
pub fn next_combination(comb: &mut [usize], m: usize) -> bool {
    let k = comb.len();
    let Some(i) = (0..k).rev().find(|&i| comb[i] < m - k + i) else {
        return false;
    };
    comb[i] += 1;
    for j in i + 1..k {
        comb[j] = comb[j - 1] + 1;
    }
    true
}

/// All strictly increasing `k`-tuples over `0..m`, lexicographically.
pub fn combinations(m: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    use itertools::Itertools;
    (0..m).combinations(k)
}

/// Sorts `seq` in place and returns the sign of the sorting permutation, or
/// `0` when an index repeats.
pub fn sort_with_parity(seq: &mut [usize]) -> i8 {
    let mut sign = 1i8;
    for i in 1..seq.len() {
        let mut j = i;
        while j > 0 && seq[j - 1] > seq[j] {
            seq.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if seq.windows(2).any(|w| w[0] == w[1]) {
        0
    } else {
        sign
    }
}
