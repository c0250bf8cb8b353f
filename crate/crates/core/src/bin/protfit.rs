fn main() {
    std::process::exit(protfit::cli::main_with_args(std::env::args_os()));
}
