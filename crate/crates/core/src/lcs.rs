//! Longest common substring over Unicode scalar values.

use alloc::vec;
use alloc::vec::Vec;

/// Length in characters of the longest common substring of `a` and `b`.
pub fn lcs_len(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    lcs_len_chars(&a, &b)
}

pub fn lcs_len_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    // prev[j] = length of the common suffix of a[..i] and b[..j]
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for &ca in a {
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// The longest common substring itself; the leftmost one in `a` on ties.
pub fn longest_common_substring(a: &str, b: &str) -> alloc::string::String {
    let ac: Vec<char> = a.chars().collect();
    let bc: Vec<char> = b.chars().collect();
    let mut prev = vec![0usize; bc.len() + 1];
    let mut cur = vec![0usize; bc.len() + 1];
    let (mut best, mut end) = (0, 0);
    for (i, &ca) in ac.iter().enumerate() {
        for (j, &cb) in bc.iter().enumerate() {
            cur[j + 1] = if ca == cb { prev[j] + 1 } else { 0 };
            if cur[j + 1] > best {
                best = cur[j + 1];
                end = i + 1;
            }
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    ac[end - best..end].iter().collect()
}
