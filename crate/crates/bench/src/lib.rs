//! Synthetic workloads for the grounding benchmarks.

use optground::{parse_program, Atom, FactSet, Program};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sensor-monitoring program evaluated over a sliding window of readings.
pub const STREAM_PROGRAM: &str = "
reading(S,T) :- obs(S,T), not faulty(S).
alarm(S) :- reading(S,T), high(S,T).
ok(S) | check(S) :- reading(S,T), not alarm(S).
faulty(S) :- broken(S).
stale(S,T) :- obs(S,T), not now(T).
";

pub fn stream_program() -> Program {
    parse_program(STREAM_PROGRAM).expect("valid program")
}

/// `shots` fact sets over `sensors` sensors. Time slots cycle through
/// `slots` names and every shot holds the last `window` of them, so the
/// vocabulary stops growing after `slots` shots.
pub fn sliding_window(
    shots: usize,
    sensors: usize,
    slots: usize,
    window: usize,
    seed: u64,
) -> Vec<FactSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..shots)
        .map(|k| {
            let mut atoms = Vec::new();
            let now = format!("t{}", k % slots);
            atoms.push(Atom::from_names("now", &[&now]));
            for back in 0..window.min(k + 1) {
                let t = format!("t{}", (k + slots - back) % slots);
                for s in 0..sensors {
                    let s = format!("s{s}");
                    if rng.gen_bool(0.7) {
                        atoms.push(Atom::from_names("obs", &[&s, &t]));
                        if rng.gen_bool(0.2) {
                            atoms.push(Atom::from_names("high", &[&s, &t]));
                        }
                    }
                }
            }
            for s in 0..sensors {
                if rng.gen_bool(0.1) {
                    atoms.push(Atom::from_names("broken", &[&format!("s{s}")]));
                }
            }
            FactSet::new(atoms).expect("ground facts")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_deterministic_and_saturates() {
        let a = sliding_window(30, 3, 10, 4, 7);
        assert_eq!(a, sliding_window(30, 3, 10, 4, 7));
        let consts = |fs: &[FactSet]| {
            fs.iter()
                .flat_map(FactSet::constants)
                .collect::<std::collections::BTreeSet<_>>()
        };
        assert_eq!(consts(&a[..10]), consts(&a));
    }
}
