//! Brute-force edit distances by breadth-first search over operator
//! applications. Every operator costs 1, so BFS depth is the distance.

use std::collections::{HashMap, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operators {
    /// add, delete, substitute
    Classic,
    /// add, delete, shift of one element to a neighbouring position
    Shift,
}

fn neighbours(s: &[u8], alphabet: &[u8], ops: Operators, max_len: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for i in 0..s.len() {
        let mut d = s.to_vec();
        d.remove(i);
        out.push(d);
    }
    if s.len() < max_len {
        for i in 0..=s.len() {
            for &a in alphabet {
                let mut d = s.to_vec();
                d.insert(i, a);
                out.push(d);
            }
        }
    }
    match ops {
        Operators::Classic => {
            for i in 0..s.len() {
                for &a in alphabet {
                    if a != s[i] {
                        let mut d = s.to_vec();
                        d[i] = a;
                        out.push(d);
                    }
                }
            }
        }
        Operators::Shift => {
            for i in 0..s.len().saturating_sub(1) {
                let mut d = s.to_vec();
                d.swap(i, i + 1);
                out.push(d);
            }
        }
    }
    out
}

/// Distance from `source` to every sequence reachable without ever
/// exceeding `max_len` elements.
pub fn distances_from(
    source: &[u8],
    alphabet: &[u8],
    ops: Operators,
    max_len: usize,
) -> HashMap<Vec<u8>, u32> {
    let mut dist = HashMap::new();
    dist.insert(source.to_vec(), 0);
    let mut queue = VecDeque::from([source.to_vec()]);
    while let Some(s) = queue.pop_front() {
        let d = dist[&s];
        for n in neighbours(&s, alphabet, ops, max_len) {
            if !dist.contains_key(&n) {
                dist.insert(n.clone(), d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Every sequence over `alphabet` with at most `max_len` elements.
pub fn all_sequences(alphabet: &[u8], max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &layer {
            for &a in alphabet {
                let mut t: Vec<u8> = s.clone();
                t.push(a);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}
