fn main() {
    std::process::exit(fso_pointing::cli::main_with_args(std::env::args_os()));
}
