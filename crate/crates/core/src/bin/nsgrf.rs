fn main() {
    std::process::exit(nsgrf::cli::run_from(std::env::args_os()));
}
