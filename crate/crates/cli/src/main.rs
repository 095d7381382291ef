fn main() {
    if let Some(n) = std::env::var("THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    std::process::exit(chaining_cli::run_from_args(std::env::args_os()));
}
