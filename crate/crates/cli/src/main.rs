fn main() -> std::process::ExitCode {
    opacity::cli::main()
}
