fn main() {
    std::process::exit(beating_core::cli::cli(std::env::args_os()));
}
