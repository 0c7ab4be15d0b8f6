fn main() {
    std::process::exit(hedonica::cli::main_with_args(std::env::args_os()));
}
