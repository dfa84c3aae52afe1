fn main() -> std::process::ExitCode {
    cvqkd_cli::main_with_args(std::env::args_os())
}
