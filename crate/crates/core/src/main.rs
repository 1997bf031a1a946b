fn main() -> std::process::ExitCode {
    chaincap::cli::main()
}
