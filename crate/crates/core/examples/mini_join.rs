//! Mini-Join pairs sample positions one to one, so no input tuple feeds two
//! outputs and the output tuples stay independent.

use stratjoin::{mini_join, DrawSet, Key, RngHandle, StratumSamples};

fn draws(strata: &[(&str, &[usize])]) -> StratumSamples {
    strata
        .iter()
        .map(|(k, ids)| {
            (
                Key::from(*k),
                DrawSet {
                    tuple_ids: ids.to_vec(),
                    with_replacement: true,
                },
            )
        })
        .collect()
}

fn main() {
    // a: 2 x 3 positions, b: 5 x 3. Tuple 11 was drawn twice; the copies are
    // two positions.
    let s1 = draws(&[("a", &[0, 1]), ("b", &[10, 11, 11, 12, 13])]);
    let s2 = draws(&[("a", &[100, 101, 102]), ("b", &[110, 111, 112])]);

    for seed in 0..3 {
        let out = mini_join(&s1, &s2, &RngHandle::new(seed));
        println!("seed {seed}: counts {:?}", out.counts());
        for t in out.iter() {
            println!("  {} {} -> {}", t.key, t.left_id, t.right_id);
        }
    }
}
