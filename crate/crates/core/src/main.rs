fn main() -> std::process::ExitCode {
    formation_vi::cli::main()
}
