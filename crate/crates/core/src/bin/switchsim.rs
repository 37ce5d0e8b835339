fn main() {
    std::process::exit(switchsim::cli::main_with_args(std::env::args_os()));
}
