fn main() {
    std::process::exit(brl::cli::main_with_args(std::env::args_os()));
}
