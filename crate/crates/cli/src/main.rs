fn main() {
    std::process::exit(hazgen_cli::main_with_args(std::env::args_os()));
}
