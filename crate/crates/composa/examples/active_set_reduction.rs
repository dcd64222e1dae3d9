//! Active-set coordinate freezing: entries already satisfying optimality on
//! active penalty rows are pinned, and the second-order system shrinks to
//! the free coordinates.

use composa::cli::bench;

fn main() {
    let grid_n = 32;
    println!("timing the direction solve with and without the reduction");
    println!("problem: anisotropic flow, {grid_n}x{grid_n} grid, beta in {{0.5, 0.7, 0.9}}");
    let b = bench::active_set(grid_n, &[0.5, 0.7, 0.9], 0.3, 5, 60);
    println!(
        "{} iterations had at least 30% of coordinates frozen",
        b.samples.len()
    );
    println!("{:>12} {:>14} {:>14}", "frozen", "reduced (s)", "full (s)");
    for (red, full, frozen) in b.samples.iter().take(12) {
        println!("{frozen:>12} {red:>14.3e} {full:>14.3e}");
    }
    println!(
        "\nmedians: reduced {:.3e} s vs full {:.3e} s (ratio {:.3})",
        b.reduced_median,
        b.full_median,
        b.reduced_median / b.full_median
    );
}
