//! Run the built-in oracle suites, then again with the NMS kernel
//! deliberately corrupted to show the suite catching it.

use lungdet::selftest::{format_table, run_selftest, Perturb};

fn main() {
    print!("{}", format_table(&run_selftest(None)));
    println!();
    println!("with a corrupted NMS:");
    print!("{}", format_table(&run_selftest(Some(Perturb::Nms))));
}
