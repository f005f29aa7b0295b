//! Volume of the hypersphere inscribed in the unit hypercube, relative to
//! the cube, as the dimension grows.
//!
//! `cargo run --example hypersphere -- [max_n]`

use satpipe::analysis::hypersphere_relative_volume;

fn main() -> satpipe::Result<()> {
    let max_n: usize = std::env::args().nth(1).map_or(30, |s| s.parse().expect("max dimension"));
    for n in 1..=max_n {
        let v = hypersphere_relative_volume(n)?;
        println!("{n:>4} {v:>14.6e} {}", "#".repeat((v * 60.0).round() as usize));
    }
    Ok(())
}
