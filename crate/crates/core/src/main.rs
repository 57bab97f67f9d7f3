fn main() {
    std::process::exit(dampdet::cli::main_with_args(std::env::args_os()));
}
