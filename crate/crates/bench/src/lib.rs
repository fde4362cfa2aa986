//! Fixture builders shared by the criterion benches.

use lacewalk::StepDistribution;

pub fn uniform(dim: usize, range: i32) -> StepDistribution {
    StepDistribution::uniform_box(dim, range).expect("valid box")
}
