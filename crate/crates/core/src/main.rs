fn main() {
    std::process::exit(etrate::cli::main_with_args(std::env::args_os()));
}
