fn main() {
    std::process::exit(reinsure::cli::main_with_args(std::env::args_os()));
}
