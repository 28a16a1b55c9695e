fn main() {
    std::process::exit(pmdep::cli::main_with_args(std::env::args_os().collect()));
}
