use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Argument;

/// Indices into the argument list shown to one deliberator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing {
    pub supporting: usize,
    pub opposing: Option<usize>,
}

/// Samples one argument from the deliberator's own stance and one from a
/// uniformly chosen other stance that has arguments. `None` when
/// `own_stance` has no arguments at all.
pub fn pair_arguments<R: Rng>(own_stance: usize, arguments: &[Argument], rng: &mut R) -> Option<Pairing> {
    let own: Vec<usize> = (0..arguments.len()).filter(|&i| arguments[i].stance_id == own_stance).collect();
    let supporting = *own.choose(rng)?;
    let mut others: Vec<usize> = arguments.iter().map(|a| a.stance_id).filter(|&s| s != own_stance).collect();
    others.sort_unstable();
    others.dedup();
    let opposing = others.choose(rng).map(|&stance| {
        let pool: Vec<usize> = (0..arguments.len()).filter(|&i| arguments[i].stance_id == stance).collect();
        *pool.choose(rng).expect("stance listed because it has arguments")
    });
    Some(Pairing { supporting, opposing })
}
