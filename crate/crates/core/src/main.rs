fn main() {
    std::process::exit(bgga::cli::main_with_args(std::env::args_os()));
}
