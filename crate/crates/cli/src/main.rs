fn main() {
    std::process::exit(polarprop_cli::main_with_args(std::env::args_os()));
}
