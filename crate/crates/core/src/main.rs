fn main() -> std::process::ExitCode {
    lesion_count::cli::main_with_args(std::env::args_os())
}
