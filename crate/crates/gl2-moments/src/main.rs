fn main() -> std::process::ExitCode {
    gl2_moments::cli::main_with_args(std::env::args_os())
}
