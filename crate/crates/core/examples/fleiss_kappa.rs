//! Majority aggregation of three votes and Fleiss' kappa over a rating
//! matrix.

use vidsafe::annotation::{aggregate, fleiss_kappa, RatingMatrix};
use vidsafe::Label::*;

fn main() -> vidsafe::Result<()> {
    for votes in [[Suitable, Suitable, Disturbing], [Suitable, Disturbing, Restricted], [Irrelevant; 3]] {
        println!("{votes:?} -> {}", aggregate(&votes)?.as_str());
    }
    // Rows are videos, columns the four classes, cells vote counts.
    let m = RatingMatrix::new(vec![vec![3, 0, 0, 0], vec![0, 2, 1, 0], vec![1, 1, 1, 0], vec![0, 0, 0, 3], vec![2, 0, 0, 1]])?;
    println!("kappa = {:.4}", fleiss_kappa(&m)?);
    Ok(())
}
