use clap::Parser;
use pdcalc::cli::{main_with, Args};

fn main() {
    if let Some(n) = std::env::var("PDCALC_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    std::process::exit(main_with(Args::parse()));
}
