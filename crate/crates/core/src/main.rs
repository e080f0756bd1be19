fn main() {
    std::process::exit(ufest::cli::main_with_args(std::env::args_os()));
}
