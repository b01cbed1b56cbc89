fn main() {
    std::process::exit(percolate_cli::main_with_args(std::env::args_os()));
}
