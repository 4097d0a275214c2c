fn main() {
    std::process::exit(pronk_cli::main_with_args(std::env::args_os()));
}
