fn main() {
    std::process::exit(gpsfilt_cli::main_with_args(std::env::args_os()));
}
