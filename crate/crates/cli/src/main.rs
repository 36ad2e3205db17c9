fn main() {
    std::process::exit(varlab_cli::cli::main_with_args(std::env::args_os()));
}
