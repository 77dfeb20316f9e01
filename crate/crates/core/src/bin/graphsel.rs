fn main() -> std::process::ExitCode {
    graphsel::cli::main()
}
