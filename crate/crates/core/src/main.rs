fn main() {
    std::process::exit(phasefuse::cli::main_with_args(std::env::args_os()));
}
