fn main() {
    std::process::exit(mixtalk_cli::main_with_args(std::env::args_os()));
}
