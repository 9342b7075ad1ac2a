fn main() {
    std::process::exit(ambival::cli::main_with_args(std::env::args_os()));
}
