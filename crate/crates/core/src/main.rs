fn main() {
    std::process::exit(rulls::cli::main_with_args(std::env::args_os()));
}
