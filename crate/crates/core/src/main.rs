fn main() {
    std::process::exit(ngvi::harness::cli::cli(std::env::args_os()));
}
