//! Monte Carlo checks of the sampling guarantees on the built-in fixtures,
//! plus the samplers that are supposed to fail them.

use stratjoin::verify::{
    check_multinomial, check_strs1, check_strs2, check_strs3, fixtures, run_trials, DEFAULT_ALPHA,
    NEGATIVE_CONTROLS,
};
use stratjoin::profile;

const TRIALS: u64 = 10_000;

fn main() -> stratjoin::Result<()> {
    let fx = fixtures().into_iter().find(|f| f.name == "skewed").unwrap();
    let p = profile(&fx.left, &fx.right);

    for alg in fx.stratified() {
        let stats = run_trials(alg, &fx.left, &fx.right, fx.f, TRIALS, 1)?;
        let targets = alg.output_targets(&p, fx.f).unwrap();
        let r1 = check_strs1(&stats, &targets);
        let r2 = check_strs2(&stats, DEFAULT_ALPHA)?;
        let r3 = check_strs3(&stats, DEFAULT_ALPHA)?;
        println!(
            "{:<18} StRS_1 {}  StRS_2 p={:.3}  StRS_3 p={:.3}",
            alg.name(),
            r1.pass,
            r2.p_value,
            r3.p_value
        );
    }
    for alg in fx.srs() {
        let stats = run_trials(alg, &fx.left, &fx.right, fx.f, TRIALS, 1)?;
        let r = check_multinomial(&stats, &p, DEFAULT_ALPHA)?;
        println!("{:<18} multinomial p={:.3}", alg.name(), r.p_value);
    }

    println!();
    for c in NEGATIVE_CONTROLS {
        let r = c.run(TRIALS, 1, DEFAULT_ALPHA)?;
        println!("{:<26} rejected: {}  ({})", c.name(), !r.pass, r.note);
    }
    Ok(())
}
