fn main() -> std::process::ExitCode {
    staticgeo::cli::main()
}
