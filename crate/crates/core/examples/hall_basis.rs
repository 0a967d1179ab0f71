//! The B* basis through degree 5, Witt counts through degree 8, and a Lyndon basis for comparison.

use splitctl::hall::{bstar_basis, generate_hall, validate_hall, witt_number, OrderPolicy};

fn main() -> splitctl::Result<()> {
    let b5 = bstar_basis(5)?;
    println!("B* through degree 5 ({} elements):", b5.len());
    for (i, b) in b5.elements().iter().enumerate() {
        println!("  {:>2}  {:<32} {}", i + 1, b.to_string(), b.label());
    }

    let b8 = bstar_basis(8)?;
    println!("\ndegree  witt  count  cumulative");
    let mut total = 0;
    for d in 1..=8 {
        total += b8.count_in_degree(d);
        println!("  {d:>4}  {:>4}  {:>5}  {total:>10}", witt_number(2, d), b8.count_in_degree(d));
    }
    println!("Hall axioms hold for B* through 8: {}", validate_hall(&b8).is_empty());

    let lyndon = generate_hall(2, 5, OrderPolicy::Lyndon)?;
    println!("\nLyndon basis through degree 5:");
    for b in lyndon.elements() {
        println!("  {b}");
    }
    println!("Hall axioms hold for Lyndon: {}", validate_hall(&lyndon).is_empty());
    Ok(())
}
