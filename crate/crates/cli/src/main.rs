fn main() {
    std::process::exit(collshift::cli::main_with_args(std::env::args_os()));
}
