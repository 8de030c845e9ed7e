//! Exact majority voting and distance-to-failure.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VoteError {
    #[error("voting needs an odd, non-empty set of votes; got {0}")]
    EvenOrEmpty(usize),
    #[error("dissent count {m} exceeds replica count {n}")]
    DissentTooLarge { n: usize, m: usize },
}

/// Outcome of one voting round over `n` replica outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteRound<T> {
    pub votes: Vec<T>,
    pub verdict: Option<T>,
    /// Votes that differ from the verdict. Zero when there is no verdict.
    pub m: usize,
    pub dtof: usize,
}

impl<T> VoteRound<T> {
    pub fn n(&self) -> usize {
        self.votes.len()
    }

    pub fn has_majority(&self) -> bool {
        self.verdict.is_some()
    }

    pub fn is_consensus(&self) -> bool {
        self.has_majority() && self.m == 0
    }
}

/// `ceil(n/2)`: the dtof of a unanimous round.
pub fn max_dtof(n: usize) -> usize {
    n.div_ceil(2)
}

/// `ceil(n/2) - m` if a majority exists, otherwise 0.
pub fn dtof(n: usize, m: usize, majority_exists: bool) -> Result<usize, VoteError> {
    if m > n {
        return Err(VoteError::DissentTooLarge { n, m });
    }
    if !majority_exists {
        return Ok(0);
    }
    Ok(max_dtof(n).saturating_sub(m))
}

/// Runs the restoring organ over `votes`.
///
/// The verdict is the value held by strictly more than `n/2` replicas; every
/// other vote counts as dissent, whether or not the dissenters agree among
/// themselves.
pub fn vote<T: PartialEq + Clone>(votes: Vec<T>) -> Result<VoteRound<T>, VoteError> {
    let n = votes.len();
    if n == 0 || n.is_multiple_of(2) {
        return Err(VoteError::EvenOrEmpty(n));
    }
    // n is at most a handful of replicas; a quadratic scan avoids Hash/Ord bounds.
    let winner = (0..n).find_map(|i| {
        let count = votes.iter().filter(|v| **v == votes[i]).count();
        (2 * count > n).then_some((i, count))
    });
    let round = match winner {
        Some((i, count)) => VoteRound {
            verdict: Some(votes[i].clone()),
            m: n - count,
            dtof: max_dtof(n) - (n - count),
            votes,
        },
        None => VoteRound {
            verdict: None,
            m: 0,
            dtof: 0,
            votes,
        },
    };
    Ok(round)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn consensus_of_seven() {
        let r = vote(vec!['A'; 7]).unwrap();
        assert_eq!(r.verdict, Some('A'));
        assert_eq!((r.m, r.dtof), (0, 4));
        assert!(r.is_consensus());
    }

    #[test]
    fn four_three_split() {
        let r = vote("AAAABBB".chars().collect()).unwrap();
        assert_eq!(r.verdict, Some('A'));
        assert_eq!((r.m, r.dtof), (3, 1));
    }

    #[test]
    fn three_two_two_has_no_majority() {
        let r = vote("AAABBCC".chars().collect()).unwrap();
        assert_eq!(r.verdict, None);
        assert_eq!(r.dtof, 0);
    }

    #[test]
    fn even_or_empty_rejected() {
        assert_eq!(vote::<u8>(vec![]), Err(VoteError::EvenOrEmpty(0)));
        assert_eq!(vote(vec![1, 1]), Err(VoteError::EvenOrEmpty(2)));
    }

    #[test]
    fn dtof_formula() {
        assert_eq!(dtof(7, 0, true), Ok(4));
        assert_eq!(dtof(3, 1, true), Ok(1));
        for m in 0..=9 {
            assert_eq!(dtof(9, m, false), Ok(0));
        }
        assert_eq!(dtof(3, 4, true), Err(VoteError::DissentTooLarge { n: 3, m: 4 }));
    }

    #[test]
    fn dtof_non_increasing_in_m() {
        for n in [3usize, 5, 7, 9] {
            let vals: Vec<usize> = (0..max_dtof(n)).map(|m| dtof(n, m, true).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[0] >= w[1]), "{vals:?}");
        }
    }

    proptest! {
        #[test]
        fn permutation_invariant(
            votes in prop::collection::vec(0u8..3, 1..=4).prop_map(|mut v| { if v.len() % 2 == 0 { v.push(0) } v }),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = votes.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = vote(votes).unwrap();
            let b = vote(shuffled).unwrap();
            prop_assert_eq!((a.verdict, a.m, a.dtof), (b.verdict, b.m, b.dtof));
        }
    }
}
