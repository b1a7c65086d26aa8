//! Splitting a fixed sample budget across relations and strata so that as
//! many distinct samples as possible remain reachable.

use stratjoin::{
    allocate_multi_strata, allocate_single_stratum, allocation_error, brute_force_optimal,
    count_possible_samples, uniformity_confidence, AllocationPlan, StrataMatrix,
};

fn main() -> stratjoin::Result<()> {
    let single = StrataMatrix::new(vec![vec![10], vec![20]])?;
    for k in [6, 12, 18] {
        let split = allocate_single_stratum(&[10, 20], k)?;
        let c = count_possible_samples(&single, &AllocationPlan::single(split.clone()))?;
        println!("k={k:>2}: split {split:?}, {} possible samples", c.exact.unwrap());
    }

    let m = StrataMatrix::new(vec![vec![10, 5], vec![20, 15]])?;
    let plan = allocate_multi_strata(&m, 20)?;
    let (best, best_count) = brute_force_optimal(&m, 20)?;
    println!("\nheuristic k_j {:?} cells {:?}, UC {:.2}%", plan.k_j, plan.mm, uniformity_confidence(&m, &plan)?);
    println!("optimum   k_j {:?} cells {:?}, {} samples", best.k_j, best.mm, best_count.exact.unwrap());

    // A case where rounding makes the heuristic miss.
    let m = StrataMatrix::new(vec![vec![7, 4, 3], vec![5, 4, 4], vec![5, 4, 4]])?;
    let plan = allocate_multi_strata(&m, 27)?;
    let (best, _) = brute_force_optimal(&m, 27)?;
    let err = allocation_error(&plan, &best)?;
    println!("\nsmall strata: heuristic k_j {:?}, optimum {:?}, max cell diff {}", plan.k_j, best.k_j, err.max_diff);
    Ok(())
}
