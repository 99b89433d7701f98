#![allow(dead_code)]

use journey_core::ingest::{validate, RawRecord};
use journey_core::{Dataset, Journey};
use proptest::prelude::*;

pub fn journey(id: &str, items: &str) -> Journey {
    validate(&RawRecord::new(id, items.chars().map(|c| c.to_string()))).expect("valid journey")
}

pub fn dataset(items: &[&str]) -> Dataset {
    let journeys = items
        .iter()
        .enumerate()
        .map(|(i, s)| journey(&format!("s{i}"), s))
        .collect();
    Dataset::new(journeys, "test").unwrap()
}

/// Valid journey strings: stage-1 start, up to 10 pre-purchase events, one outcome.
pub fn journey_string() -> impl Strategy<Value = String> {
    (
        prop::sample::select(vec!['a', 'b', 'c', 'd']),
        prop::collection::vec(prop::sample::select(vec!['a', 'b', 'c', 'd', 'e', 'f', 'g', 'h']), 0..10),
        prop::sample::select(vec!['i', 'j', 'k']),
    )
        .prop_map(|(first, rest, out)| {
            let mut s = String::new();
            s.push(first);
            s.extend(rest);
            s.push(out);
            s
        })
}

/// Stage of a raw item character, 1-based; 0 for anything else.
pub fn stage_of(c: char) -> usize {
    match c {
        'a'..='d' => 1,
        'e'..='h' => 2,
        'i' | 'j' | 'k' => 3,
        _ => 0,
    }
}

/// Stage projection of a journey string, with outcome items mapped to 1/0.
pub fn project(s: &str, stage: usize) -> Vec<char> {
    s.chars()
        .filter(|&c| stage_of(c) == stage)
        .map(|c| match c {
            'i' | 'j' => '1',
            'k' => '0',
            other => other,
        })
        .collect()
}

/// Memoised recursive Levenshtein distance.
pub fn naive_levenshtein<T: Eq>(a: &[T], b: &[T]) -> usize {
    fn go<T: Eq>(a: &[T], b: &[T], memo: &mut Vec<Vec<Option<usize>>>) -> usize {
        let (i, j) = (a.len(), b.len());
        if let Some(v) = memo[i][j] {
            return v;
        }
        let v = if i == 0 {
            j
        } else if j == 0 {
            i
        } else {
            let sub = go(&a[..i - 1], &b[..j - 1], memo) + usize::from(a[i - 1] != b[j - 1]);
            let del = go(&a[..i - 1], b, memo) + 1;
            let ins = go(a, &b[..j - 1], memo) + 1;
            sub.min(del).min(ins)
        };
        memo[i][j] = Some(v);
        v
    }
    let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
    go(a, b, &mut memo)
}
