//! Command-line front end: fit, hierarchical fit, predict, sweep, and the
//! built-in self-checking benchmarks.

fn main() {
    std::process::exit(mfkrig::cli::run());
}
