fn main() -> std::process::ExitCode {
    uwb_mapper::cli::main()
}
