fn main() {
    std::process::exit(loopforge::cli::main_with_args(std::env::args_os()));
}
